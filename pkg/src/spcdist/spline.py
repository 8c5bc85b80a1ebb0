"""Natural cubic smoothing splines with REML-selected smoothing level.

``fit_given_lambda`` solves the penalized least-squares problem

    (1/K) * sum_k (y_k - f(t_k))^2  +  lambda * integral of f''(t)^2

whose minimizer is a natural cubic spline with knots at the observation
times; the banded formulation keeps the solve O(K).  ``select_lambda_reml``
picks lambda by restricted maximum likelihood in the equivalent
variance-components model, where K*lambda plays the role of an inverse
signal-to-noise ratio.
"""

import math
from dataclasses import dataclass

import numpy as np

from spcdist import _backend
from spcdist.dataset import MIN_POINTS
from spcdist.errors import NumericError, ValidationError

#: REML search range and resolution, in log10(lambda).
LOG10_LAMBDA_MIN = -8.0
LOG10_LAMBDA_MAX = 8.0
GRID_POINTS = 33
LOG10_LAMBDA_TOL = 1e-3

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def kernel_entry(s, t, t_lower, t_upper):
    """Covariance-kernel entry for the variance-components form.

    Returns (t_upper - t_lower)^-2 times the integral over the domain of
    (s - tau)_+ (t - tau)_+ d tau; with a = s - t_lower, b = t - t_lower and
    m = min(a, b) the closed form is m^2 (3 max(a, b) - m) / 6 divided by
    the squared domain length.
    """
    if not t_lower < t_upper:
        raise ValidationError(
            f"domain: t_lower={t_lower!r} must be below t_upper={t_upper!r}"
        )
    if not (t_lower <= s <= t_upper and t_lower <= t <= t_upper):
        raise ValidationError(
            f"kernel arguments ({s!r}, {t!r}) outside the domain "
            f"[{t_lower!r}, {t_upper!r}]"
        )
    span = t_upper - t_lower
    a = s - t_lower
    b = t - t_lower
    m, big = (a, b) if a <= b else (b, a)
    return m * m * (3.0 * big - m) / 6.0 / (span * span)


@dataclass(frozen=True)
class MixedModelParts:
    """Fixed-effect design and random-effect kernel for one subject.

    ``design_fixed`` is the K x 2 matrix (ones, times); ``kernel_R`` the
    K x K positive semidefinite kernel evaluated at the subject's times on
    the dataset domain, which the two extra fields record.
    """

    design_fixed: np.ndarray
    kernel_R: np.ndarray
    t_lower: float
    t_upper: float


def build_mixed_model_parts(subject, t_lower, t_upper):
    """Assemble :class:`MixedModelParts` for a subject on a domain."""
    _check_subject(subject)
    if not t_lower < t_upper:
        raise ValidationError(
            f"domain: t_lower={t_lower!r} must be below t_upper={t_upper!r}"
        )
    t = subject.times
    if t[0] < t_lower or t[-1] > t_upper:
        raise ValidationError(
            f"subject {subject.id!r}: observations outside the domain"
        )
    span = t_upper - t_lower
    a = t - t_lower
    small = np.minimum.outer(a, a)
    big = np.maximum.outer(a, a)
    R = small * small * (3.0 * big - small) / 6.0 / (span * span)
    X = np.column_stack([np.ones(len(t)), t])
    return MixedModelParts(X, R, float(t_lower), float(t_upper))


@dataclass(frozen=True)
class SplineFit:
    """A fitted natural cubic spline.

    ``coefficients`` holds one row per knot interval with the local Taylor
    coefficients (value, slope, half second derivative, sixth of the third
    derivative) at the interval's left knot.  Outside the knot range the
    curve continues linearly (natural boundary: zero curvature), so the fit
    is defined on all of [t_lower, t_upper].
    """

    subject_id: str
    knots: np.ndarray
    values: np.ndarray
    coefficients: np.ndarray
    lam: float
    t_lower: float
    t_upper: float

    def __call__(self, t):
        return evaluate(self, t)


def _check_subject(subject):
    t = subject.times
    if len(t) != len(subject.values):
        raise ValidationError(
            f"subject {subject.id!r}: times and values differ in length"
        )
    if len(t) < MIN_POINTS:
        raise ValidationError(
            f"subject {subject.id!r}: need at least {MIN_POINTS} observations"
        )
    if not np.all(np.diff(t) > 0):
        raise ValidationError(
            f"subject {subject.id!r}: times not strictly increasing"
        )
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(subject.values))):
        raise ValidationError(f"subject {subject.id!r}: non-finite data")


def local_coefficients(times, fitted, gamma):
    """Per-interval cubic coefficients from knot values and interior second
    derivatives; ``fitted`` (m, K), ``gamma`` (m, K-2) -> (m, K-1, 4)."""
    m, K = fitted.shape
    h = np.diff(times)
    g = np.zeros((m, K))
    g[:, 1:-1] = gamma
    a = fitted[:, :-1]
    b = (fitted[:, 1:] - fitted[:, :-1]) / h - h * (
        2.0 * g[:, :-1] + g[:, 1:]
    ) / 6.0
    c = g[:, :-1] / 2.0
    d = (g[:, 1:] - g[:, :-1]) / (6.0 * h)
    return np.ascontiguousarray(np.stack([a, b, c, d], axis=2))


def _fit_values(times, values_2d, mu, who="subject"):
    """Banded solve for one or more series sharing the same knots."""
    try:
        # near-duplicate knots overflow the band entries; the factorization
        # failure below is the designed detection path, so keep it quiet
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            fitted, gamma = _backend.fit_natural(times, values_2d, mu)
    except (np.linalg.LinAlgError, ValueError):
        gaps = np.diff(times)
        k = int(np.argmin(gaps))
        raise NumericError(
            f"{who}: singular band system; smallest knot gap "
            f"{gaps[k]!r} between knots {k} and {k + 1} "
            f"(times {times[k]!r}, {times[k + 1]!r})"
        ) from None
    if not (np.all(np.isfinite(fitted)) and np.all(np.isfinite(gamma))):
        raise NumericError(f"{who}: band solve produced non-finite values")
    return fitted, gamma


def fit_given_lambda(subject, lam, domain=None):
    """Fit the smoothing spline for a fixed smoothing parameter.

    The effective roughness penalty on the banded normal equations is
    K * lam because the least-squares term of the objective carries 1/K.
    ``domain`` widens the interval the fit is considered defined on
    (evaluation is linear outside the knots); it defaults to the knot range.
    """
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam!r}")
    _check_subject(subject)
    t = subject.times
    if domain is None:
        lo, hi = float(t[0]), float(t[-1])
    else:
        lo, hi = float(domain[0]), float(domain[1])
        if t[0] < lo or t[-1] > hi:
            raise ValidationError(
                f"subject {subject.id!r}: observations outside the domain"
            )
    K = len(t)
    fitted, gamma = _fit_values(
        t, subject.values[None, :], K * lam, who=f"subject {subject.id!r}"
    )
    coef = local_coefficients(t, fitted, gamma)[0]
    return SplineFit(
        subject_id=subject.id,
        knots=t,
        values=fitted[0],
        coefficients=coef,
        lam=float(lam),
        t_lower=lo,
        t_upper=hi,
    )


def evaluate(fit, t):
    """Evaluate a fit at time(s) t inside [t_lower, t_upper]."""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < fit.t_lower) or np.any(arr > fit.t_upper):
        raise ValidationError(
            f"evaluation point outside the domain "
            f"[{fit.t_lower!r}, {fit.t_upper!r}]"
        )
    out = _backend.eval_piecewise(fit.knots, fit.coefficients, np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out


@dataclass(frozen=True)
class RemlSelection:
    """REML-selected smoothing level and profiled variance components.

    By construction sigma_u2_hat * K * lambda_hat == sigma2_hat.
    """

    lambda_hat: float
    sigma2_hat: float
    sigma_u2_hat: float
    reml_value: float


def restricted_loglik(times, values, t_lower, t_upper, lam):
    """Restricted log-likelihood of the variance-components model at lam.

    Matches the dense evaluation of the model with marginal covariance
    sigma^2 (I + R / (K lam)), sigma^2 profiled out, including constants.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    obj = _backend.RemlObjective(times, values, t_upper - t_lower)
    return obj.evaluate(lam)[0]


def _degenerate(times, values):
    X = np.column_stack([np.ones(len(times)), times])
    resid = values - X @ np.linalg.lstsq(X, values, rcond=None)[0]
    scale = max(1.0, float(np.max(np.abs(values))))
    return float(resid @ resid) <= (1e-10 * scale) ** 2 * len(times)


def _select_lambda(times, values, t_lower, t_upper, who="subject"):
    if _degenerate(times, values):
        raise NumericError(
            f"{who} is degenerate: values have no residual variation about "
            "a straight line, so no smoothing level is identifiable"
        )
    try:
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            obj = _backend.RemlObjective(times, values, t_upper - t_lower)
    except (np.linalg.LinAlgError, ValueError):
        gaps = np.diff(times)
        k = int(np.argmin(gaps))
        raise NumericError(
            f"{who}: singular band system; smallest knot gap {gaps[k]!r} "
            f"between knots {k} and {k + 1}"
        ) from None

    def ell(x):
        return obj.evaluate(10.0**x)[0]

    grid = np.linspace(LOG10_LAMBDA_MIN, LOG10_LAMBDA_MAX, GRID_POINTS)
    vals = [ell(x) for x in grid]
    best = int(np.argmax(vals))
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, GRID_POINTS - 1)]
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = ell(c), ell(d)
    while b - a > LOG10_LAMBDA_TOL:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = ell(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = ell(d)
    lam = 10.0 ** ((a + b) / 2.0)
    value, sigma2 = obj.evaluate(lam)
    if not np.isfinite(value):
        raise NumericError(f"{who}: restricted likelihood not finite at optimum")
    K = len(times)
    return RemlSelection(
        lambda_hat=lam,
        sigma2_hat=sigma2,
        sigma_u2_hat=sigma2 / (K * lam),
        reml_value=value,
    )


def select_lambda_reml(subject, parts):
    """Select the smoothing parameter for a subject by REML.

    ``parts`` must have been built from this subject's times and the
    dataset domain (see :func:`build_mixed_model_parts`); the banded path
    used here reproduces the dense evaluation based on ``parts.kernel_R``
    to high accuracy.

    Raises
    ------
    NumericError
        If the subject's values have no residual variation about a straight
        line (an all-constant series is the canonical case).
    """
    _check_subject(subject)
    X = np.asarray(parts.design_fixed)
    if X.shape != (len(subject.times), 2) or not np.array_equal(
        X[:, 1], subject.times
    ):
        raise ValidationError(
            f"subject {subject.id!r}: mixed-model parts were built from "
            "different time points"
        )
    return _select_lambda(
        subject.times,
        subject.values,
        parts.t_lower,
        parts.t_upper,
        who=f"subject {subject.id!r}",
    )
