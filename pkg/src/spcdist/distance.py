"""Curve dissimilarities and full dissimilarity matrices.

Three measures over a shared domain [t_lower, t_upper]:

``spc``   smoothing-parameter commutation: both subjects are refitted under
          each subject's selected lambda in turn, and the two L2 distances
          between the commuted fits are averaged.
``ss``    L2 distance between the two independently fitted curves, each at
          its own lambda, treated as fixed.
``eucl``  pointwise Euclidean distance on a common sampling grid.

The L2 integrals are exact: the squared difference of two piecewise cubics
is piecewise degree six, integrated with 4-node Gauss-Legendre per
subinterval of the union breakpoints.
"""

from dataclasses import dataclass

import numpy as np

from spcdist import _backend
from spcdist import dataset as ds
from spcdist import spline
from spcdist._pykernels import GL_NODES, GL_WEIGHTS
from spcdist.errors import ValidationError

METHODS = ("spc", "ss", "eucl")

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric nonnegative dissimilarities with a zero diagonal."""

    ids: tuple
    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        arr = np.asarray(self.entries, dtype=np.float64)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self):
        return len(self.ids)

    def check(self):
        """Raise ValidationError if any matrix invariant is violated."""
        n = len(self.ids)
        if self.entries.shape != (n, n):
            raise ValidationError(
                f"matrix shape {self.entries.shape} does not match "
                f"{n} ids"
            )
        if len(set(self.ids)) != n:
            raise ValidationError("duplicate ids in dissimilarity matrix")
        scale = max(1.0, float(np.max(np.abs(self.entries))) if n else 1.0)
        if np.max(np.abs(self.entries - self.entries.T), initial=0.0) > (
            SYMMETRY_TOL * scale
        ):
            raise ValidationError("matrix not symmetric")
        if np.max(np.abs(np.diag(self.entries)), initial=0.0) > SYMMETRY_TOL:
            raise ValidationError("matrix diagonal not zero")
        if np.min(self.entries, initial=0.0) < -SYMMETRY_TOL:
            raise ValidationError("matrix has negative entries")
        return self

    def submatrix(self, keep_ids):
        keep = set(keep_ids)
        idx = [i for i, sid in enumerate(self.ids) if sid in keep]
        missing = keep - {self.ids[i] for i in idx}
        if missing:
            raise ValidationError(f"unknown ids: {', '.join(sorted(missing))}")
        sel = np.asarray(idx)
        return DissimilarityMatrix(
            tuple(self.ids[i] for i in idx),
            self.entries[np.ix_(sel, sel)],
        )


def write_matrix_csv(matrix, target, header_comments=()):
    """Write a matrix as CSV: id header row, then one row per subject, all
    values at 17 significant digits (exact float round trip)."""
    own = isinstance(target, (str, bytes))
    stream = open(target, "w", newline="") if own else target
    try:
        for line in header_comments:
            stream.write(f"# {line}\n")
        stream.write("id," + ",".join(matrix.ids) + "\n")
        for sid, row in zip(matrix.ids, matrix.entries):
            stream.write(sid + "," + ",".join(f"{v:.17g}" for v in row) + "\n")
    finally:
        if own:
            stream.close()


def read_matrix_csv(source):
    """Read a matrix written by :func:`write_matrix_csv` (comments allowed)."""
    own = isinstance(source, (str, bytes))
    stream = open(source, "r", newline="") if own else source
    try:
        lines = [ln for ln in stream if ln.strip() and not ln.startswith("#")]
    finally:
        if own:
            stream.close()
    if not lines:
        raise ValidationError("empty matrix file")
    header = lines[0].rstrip("\n").split(",")
    if header[0] != "id":
        raise ValidationError("matrix file must start with an 'id' header row")
    ids = tuple(header[1:])
    rows = []
    row_ids = []
    for ln in lines[1:]:
        parts = ln.rstrip("\n").split(",")
        row_ids.append(parts[0])
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise ValidationError(f"non-numeric matrix entry in row {parts[0]!r}")
    if tuple(row_ids) != ids:
        raise ValidationError("matrix row ids do not match the header ids")
    entries = np.asarray(rows, dtype=np.float64)
    if entries.shape != (len(ids), len(ids)):
        raise ValidationError("matrix is not square")
    return DissimilarityMatrix(ids, entries).check()


class FitCache:
    """Fits keyed by (data subject, lambda-source subject).

    Holds the cross-fits the commutation distance needs so that a full
    matrix costs n REML solves plus at most n self-fits and n(n-1)
    cross-fits, each an O(K) band solve.  Populate single-threaded or
    insert-once; reads are idempotent.
    """

    def __init__(self, domain):
        self.domain = (float(domain[0]), float(domain[1]))
        self._fits = {}

    def fit_for(self, subject, lam, source_id):
        key = (subject.id, source_id)
        fit = self._fits.get(key)
        if fit is None:
            fit = spline.fit_given_lambda(subject, lam, domain=self.domain)
            self._fits[key] = fit
        return fit

    def __len__(self):
        return len(self._fits)

    def n_self(self):
        return sum(1 for sid, src in self._fits if sid == src)

    def n_cross(self):
        return sum(1 for sid, src in self._fits if sid != src)


def l2_between_fits(a, b, t_lower, t_upper):
    """sqrt of the exact integral of (a - b)^2 over [t_lower, t_upper]."""
    if not t_lower < t_upper:
        raise ValidationError(
            f"domain: t_lower={t_lower!r} must be below t_upper={t_upper!r}"
        )
    for fit in (a, b):
        if fit.t_lower > t_lower or fit.t_upper < t_upper:
            raise ValidationError(
                f"fit for {fit.subject_id!r} is defined on "
                f"[{fit.t_lower!r}, {fit.t_upper!r}], not the requested "
                f"[{t_lower!r}, {t_upper!r}]"
            )
    total = _backend.pair_l2sq(
        a.knots, a.coefficients, b.knots, b.coefficients, t_lower, t_upper
    )
    return float(np.sqrt(max(total, 0.0)))


def spc_distance(subject_i, subject_j, lambda_i, lambda_j, domain, cache=None):
    """Smoothing-parameter-commutation distance between two subjects.

    Half the sum of the L2 distances between the fits of both subjects
    under lambda_i and under lambda_j.  A shared :class:`FitCache` avoids
    refitting across pair evaluations.
    """
    if not (lambda_i > 0 and lambda_j > 0):
        raise ValidationError("lambdas must be positive")
    if cache is None:
        cache = FitCache(domain)
    lo, hi = float(domain[0]), float(domain[1])
    f_ii = cache.fit_for(subject_i, lambda_i, subject_i.id)
    f_ji = cache.fit_for(subject_j, lambda_i, subject_i.id)
    f_ij = cache.fit_for(subject_i, lambda_j, subject_j.id)
    f_jj = cache.fit_for(subject_j, lambda_j, subject_j.id)
    return 0.5 * (
        l2_between_fits(f_ii, f_ji, lo, hi) + l2_between_fits(f_ij, f_jj, lo, hi)
    )


def ss_distance(subject_i, subject_j, lambda_i, lambda_j, domain, cache=None):
    """L2 distance between the two fixed fits, each at its own lambda."""
    if not (lambda_i > 0 and lambda_j > 0):
        raise ValidationError("lambdas must be positive")
    if cache is None:
        cache = FitCache(domain)
    lo, hi = float(domain[0]), float(domain[1])
    f_i = cache.fit_for(subject_i, lambda_i, subject_i.id)
    f_j = cache.fit_for(subject_j, lambda_j, subject_j.id)
    return l2_between_fits(f_i, f_j, lo, hi)


def eucl_distance(subject_i, subject_j):
    """Pointwise Euclidean distance; requires identical sampling grids."""
    if not np.array_equal(subject_i.times, subject_j.times):
        raise ValidationError(
            f"subjects {subject_i.id!r} and {subject_j.id!r} are sampled on "
            "different grids; the pointwise Euclidean distance needs a "
            "common grid (spc and ss handle irregular sampling)"
        )
    diff = subject_i.values - subject_j.values
    return float(np.sqrt(diff @ diff))


def _common_times(dataset):
    first = dataset.subjects[0].times
    for s in dataset.subjects[1:]:
        if not np.array_equal(s.times, first):
            return None
    return first


def _quadrature_nodes(times, lo, hi):
    cuts = np.concatenate(([lo, hi], times[(times > lo) & (times < hi)]))
    cuts = np.unique(cuts)
    mid = (cuts[:-1] + cuts[1:]) / 2.0
    half = (cuts[1:] - cuts[:-1]) / 2.0
    nodes = (mid[:, None] + half[:, None] * GL_NODES).ravel()
    wts = (half[:, None] * GL_WEIGHTS).ravel()
    return nodes, wts


def _values_at_nodes(times, coef, nodes):
    """Vectorized piecewise-cubic evaluation; coef (m, K-1, 4) -> (m, #nodes).
    Linear continuation outside the knot range."""
    K = len(times)
    idx = np.clip(np.searchsorted(times, nodes, side="right") - 1, 0, K - 2)
    dt = nodes - times[idx]
    a = coef[:, idx, 0]
    b = coef[:, idx, 1]
    c = coef[:, idx, 2]
    d = coef[:, idx, 3]
    out = a + dt * (b + dt * (c + dt * d))
    left = nodes < times[0]
    if np.any(left):
        out[:, left] = coef[:, 0, 0, None] + coef[:, 0, 1, None] * (
            nodes[left] - times[0]
        )
    right = nodes > times[-1]
    if np.any(right):
        h = times[-1] - times[-2]
        b_e, c_e, d_e = coef[:, -1, 1], coef[:, -1, 2], coef[:, -1, 3]
        v_end = coef[:, -1, 0] + h * (b_e + h * (c_e + h * d_e))
        s_end = b_e + h * (2.0 * c_e + 3.0 * d_e * h)
        out[:, right] = v_end[:, None] + s_end[:, None] * (
            nodes[right] - times[-1]
        )
    return out


def _matrix_shared_grid(times, Y, lams, lo, hi, method):
    """spc or ss matrix when every subject shares the same grid.

    Cross-fits for one lambda source share a band factorization, and all
    curve values live on one fixed quadrature rule, so the fill is a few
    dense vector operations per lambda.
    """
    n, K = Y.shape
    nodes, wts = _quadrature_nodes(times, lo, hi)
    D = np.zeros((n, n))
    if method == "ss":
        vals = np.empty((n, len(nodes)))
        for i in range(n):
            fitted, gamma = spline._fit_values(times, Y[i : i + 1], K * lams[i])
            coef = spline.local_coefficients(times, fitted, gamma)
            vals[i] = _values_at_nodes(times, coef, nodes)[0]
        for i in range(n - 1):
            diff = vals[i + 1 :] - vals[i]
            D[i, i + 1 :] = np.sqrt(np.maximum((diff * diff) @ wts, 0.0))
        return D + D.T
    for i in range(n):
        fitted, gamma = spline._fit_values(times, Y, K * lams[i])
        coef = spline.local_coefficients(times, fitted, gamma)
        vals = _values_at_nodes(times, coef, nodes)
        diff = vals - vals[i]
        D[i] += np.sqrt(np.maximum((diff * diff) @ wts, 0.0))
    return (D + D.T) / 2.0


def _select_all_lambdas(dataset):
    lams = np.empty(dataset.n)
    for i, s in enumerate(dataset.subjects):
        sel = spline._select_lambda(
            s.times,
            s.values,
            dataset.t_lower,
            dataset.t_upper,
            who=f"subject {s.id!r}",
        )
        lams[i] = sel.lambda_hat
    return lams


def distance_matrix(dataset, method, cache=None):
    """Full dissimilarity matrix for one method over a dataset.

    For ``spc`` and ``ss`` the smoothing parameter of every subject is
    selected by REML once (n solves); the commuted cross-fits are then
    computed once per ordered pair and reused across the two terms.
    ``eucl`` requires all subjects on one grid.
    """
    if method not in METHODS:
        raise ValidationError(
            f"unknown method {method!r}; choose one of {', '.join(METHODS)}"
        )
    problems = ds.validate(dataset)
    if problems:
        raise ValidationError("; ".join(problems))
    if dataset.n == 0:
        raise ValidationError("dataset has no subjects")
    n = dataset.n
    common = _common_times(dataset)

    if method == "eucl":
        if common is None:
            raise ValidationError(
                "eucl needs a common sampling grid across subjects; "
                "use spc or ss for irregular sampling"
            )
        Y = np.vstack([s.values for s in dataset.subjects])
        D = np.zeros((n, n))
        for i in range(n - 1):
            diff = Y[i + 1 :] - Y[i]
            D[i, i + 1 :] = np.sqrt(np.maximum((diff * diff).sum(axis=1), 0.0))
        return DissimilarityMatrix(dataset.ids, D + D.T).check()

    lams = _select_all_lambdas(dataset)
    if common is not None and cache is None:
        Y = np.vstack([s.values for s in dataset.subjects])
        D = _matrix_shared_grid(
            common, Y, lams, dataset.t_lower, dataset.t_upper, method
        )
        return DissimilarityMatrix(dataset.ids, D).check()

    if cache is None:
        cache = FitCache(dataset.domain)
    D = np.zeros((n, n))
    subs = dataset.subjects
    for i in range(n - 1):
        for j in range(i + 1, n):
            if method == "spc":
                d = spc_distance(
                    subs[i], subs[j], lams[i], lams[j], dataset.domain, cache
                )
            else:
                d = ss_distance(
                    subs[i], subs[j], lams[i], lams[j], dataset.domain, cache
                )
            D[i, j] = D[j, i] = d
    return DissimilarityMatrix(dataset.ids, D).check()
