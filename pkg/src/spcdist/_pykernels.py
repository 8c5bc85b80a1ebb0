"""Pure NumPy/SciPy implementations of the numerical kernels.

These are the fallback for the compiled extension (see ``_backend``).  Both
backends expose the same four entry points:

``fit_natural(times, values, mu)``
    Natural cubic smoothing-spline fit via the banded second-difference
    formulation, penalty ``mu`` on the integrated squared second derivative.
``RemlObjective(times, values, span)``
    Profiled restricted log-likelihood of the variance-components form of
    the same fit, evaluated per smoothing parameter in O(K).
``eval_piecewise(knots, coef, x)``
    Piecewise-cubic evaluation with linear extrapolation beyond the end
    knots (zero curvature at the boundary).
``pair_l2sq(knots_a, coef_a, knots_b, coef_b, lo, hi)``
    Exact integral of the squared difference of two piecewise cubics, by
    4-node Gauss-Legendre on the union of their breakpoints.

Inputs are assumed validated (strictly increasing knots, matching lengths);
callers own the error reporting.
"""

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

BACKEND_NAME = "python"

# 4-node Gauss-Legendre rule on [-1, 1]; exact through degree 7.
GL_NODES = np.array(
    [
        -0.8611363115940526,
        -0.3399810435848563,
        0.3399810435848563,
        0.8611363115940526,
    ]
)
GL_WEIGHTS = np.array(
    [
        0.3478548451374538,
        0.6521451548625461,
        0.6521451548625461,
        0.3478548451374538,
    ]
)


def _second_difference_bands(times):
    """Per-interior-knot columns of the second-difference operator and the
    tridiagonal Gram matrix of hat functions, plus the pentadiagonal Gram
    of the operator itself.  Returns (qa, qb, qc, Td, Te, g0, g1, g2)."""
    h = np.diff(times)
    qa = 1.0 / h[:-1]
    qc = 1.0 / h[1:]
    qb = -(qa + qc)
    Td = (h[:-1] + h[1:]) / 3.0
    Te = h[1:-1] / 6.0
    g0 = qa * qa + qb * qb + qc * qc
    g1 = qb[:-1] * qa[1:] + qc[:-1] * qb[1:]
    g2 = qc[:-2] * qa[2:]
    return h, qa, qb, qc, Td, Te, g0, g1, g2


def _penta_upper(Td, Te, g0, g1, g2, nu):
    """Assemble Td + nu*g as scipy upper-banded storage (3, n)."""
    n = len(Td)
    ab = np.zeros((3, n))
    ab[2] = Td + nu * g0
    ab[1, 1:] = Te + nu * g1
    ab[0, 2:] = nu * g2
    return ab


def fit_natural(times, values, mu):
    """Fit natural cubic smoothing splines with roughness penalty ``mu``.

    Parameters
    ----------
    times : (K,) float array, strictly increasing
    values : (m, K) float array, one series per row
    mu : float > 0

    Returns
    -------
    fitted : (m, K) fitted values at the knots
    gamma : (m, K-2) second derivatives of the fit at the interior knots
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    h, qa, qb, qc, Td, Te, g0, g1, g2 = _second_difference_bands(times)
    ab = _penta_upper(Td, Te, g0, g1, g2, mu)
    cb = cholesky_banded(ab, lower=False)
    y = values.T  # (K, m)
    z = (y[:-2] - y[1:-1]) / h[:-1, None] + (y[2:] - y[1:-1]) / h[1:, None]
    gamma = cho_solve_banded((cb, False), z)  # (K-2, m)
    qg = np.zeros_like(y)
    qg[:-2] += qa[:, None] * gamma
    qg[1:-1] += qb[:, None] * gamma
    qg[2:] += qc[:, None] * gamma
    return (y - mu * qg).T, gamma.T


class RemlObjective:
    """Profiled restricted log-likelihood of the smoothing fit in lambda.

    The variance-components model behind the fit has marginal covariance
    sigma^2 (I + R / (K lambda)) with the integrated-ramp kernel R scaled by
    the squared reciprocal domain length; in the banded formulation that
    likelihood reduces to determinants and one quadratic form of the
    pentadiagonal system with nu = K * lambda * span^2.
    """

    def __init__(self, times, values, span):
        times = np.asarray(times, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        K = len(times)
        h, qa, qb, qc, Td, Te, g0, g1, g2 = _second_difference_bands(times)
        self._K = K
        self._span2 = float(span) * float(span)
        self._Td, self._Te = Td, Te
        self._g0, self._g1, self._g2 = g0, g1, g2
        self._z = (values[:-2] - values[1:-1]) / h[:-1] + (
            values[2:] - values[1:-1]
        ) / h[1:]
        qtq = np.zeros((3, K - 2))
        qtq[2] = g0
        qtq[1, 1:] = g1
        qtq[0, 2:] = g2
        cb = cholesky_banded(qtq, lower=False)
        self._logdet_qtq = 2.0 * np.sum(np.log(cb[2]))
        xtx = np.array(
            [[K, times.sum()], [times.sum(), (times * times).sum()]]
        )
        self._logdet_xtx = np.linalg.slogdet(xtx)[1]

    def evaluate(self, lam):
        """Return (restricted log-likelihood, profiled sigma^2) at lam."""
        K = self._K
        nu = K * lam * self._span2
        ab = _penta_upper(self._Td, self._Te, self._g0, self._g1, self._g2, nu)
        cb = cholesky_banded(ab, lower=False)
        logdet_m = 2.0 * np.sum(np.log(cb[2]))
        gamma = cho_solve_banded((cb, False), self._z)
        ypy = nu * float(self._z @ gamma)
        if not ypy > 0.0:
            return -np.inf, 0.0
        sigma2 = ypy / (K - 2)
        logdet = logdet_m - (K - 2) * np.log(nu) - self._logdet_qtq + self._logdet_xtx
        ell = -0.5 * ((K - 2) * (np.log(2.0 * np.pi * sigma2) + 1.0) + logdet)
        return ell, sigma2


def eval_piecewise(knots, coef, x):
    """Evaluate a piecewise cubic at x, linear beyond the end knots.

    ``coef`` has one row (a, b, c, d) per interval, Taylor coefficients at
    the interval's left knot.
    """
    knots = np.asarray(knots, dtype=np.float64)
    coef = np.asarray(coef, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    K = len(knots)
    idx = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, K - 2)
    dt = x - knots[idx]
    out = coef[idx, 0] + dt * (coef[idx, 1] + dt * (coef[idx, 2] + dt * coef[idx, 3]))
    left = x < knots[0]
    if np.any(left):
        out = np.where(left, coef[0, 0] + coef[0, 1] * (x - knots[0]), out)
    right = x > knots[-1]
    if np.any(right):
        h = knots[-1] - knots[-2]
        b, c, d = coef[-1, 1], coef[-1, 2], coef[-1, 3]
        v_end = coef[-1, 0] + h * (b + h * (c + h * d))
        s_end = b + h * (2.0 * c + 3.0 * d * h)
        out = np.where(right, v_end + s_end * (x - knots[-1]), out)
    return out


def pair_l2sq(knots_a, coef_a, knots_b, coef_b, lo, hi):
    """Integral over [lo, hi] of the squared difference of two piecewise
    cubics, exact for the degree-6 integrand."""
    knots_a = np.asarray(knots_a, dtype=np.float64)
    knots_b = np.asarray(knots_b, dtype=np.float64)
    cuts = np.concatenate(
        (
            [lo, hi],
            knots_a[(knots_a > lo) & (knots_a < hi)],
            knots_b[(knots_b > lo) & (knots_b < hi)],
        )
    )
    cuts = np.unique(cuts)
    mid = (cuts[:-1] + cuts[1:]) / 2.0
    half = (cuts[1:] - cuts[:-1]) / 2.0
    nodes = (mid[:, None] + half[:, None] * GL_NODES[None, :]).ravel()
    wts = (half[:, None] * GL_WEIGHTS[None, :]).ravel()
    diff = eval_piecewise(knots_a, coef_a, nodes) - eval_piecewise(
        knots_b, coef_b, nodes
    )
    return float(np.dot(wts, diff * diff))
