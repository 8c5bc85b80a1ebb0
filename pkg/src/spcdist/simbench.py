"""Synthetic benchmark of the distance measures.

Four random curve families on [0, 1] (constant, periodic, linear,
nonlinear), each observed on a 200-point grid under four noise mechanisms
(white noise, AR, seasonal ARMA, bilinear).  Every (family, noise) cell
draws ``series_per_cell`` curves per replicate; each distance method is
scored against the noise-free true distances by two criteria:

Q   affine-calibrated weighted squared loss: the minimized mean of
    (a + b*dhat - d)^2 / d over subject pairs, each distinct pair entering
    the weighted least-squares residual once and the mean taken over
    ordered pairs.
R   sum over ordered pairs of squared rank differences between estimated
    and true distances, ranks taken among the distinct pair values
    (midranks on ties).

Replicates use independent RNG streams keyed by (seed, replicate, cell), so
any subset of cells reproduces exactly the series it would see in a full
run, and results are independent of evaluation order or worker count.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from spcdist import distance, spline
from spcdist.errors import ValidationError

FAMILIES = ("constant", "periodic", "linear", "nonlinear")
NOISES = ("WN", "AR", "SARMA", "BILR")
ALL_GROUP = "ALL"

#: Samples discarded before a recursive noise mechanism starts emitting;
#: far beyond the mixing time of the lag-0.8 recursions used here.
NOISE_BURN_IN = 500


def gen_curve(family, eta, grid):
    """True curve values of one family at the given amplitude draw."""
    grid = np.asarray(grid, dtype=np.float64)
    if family == "constant":
        return np.full_like(grid, eta)
    if family == "periodic":
        return np.sin(2 * np.pi * grid) - grid + 2 * eta * np.cos(4 * np.pi * grid)
    if family == "linear":
        return 3 * grid + 2 * eta * grid
    if family == "nonlinear":
        return 5 * eta * ((grid - 0.5) ** 2 - 2 * grid * (1 - grid))
    raise ValidationError(
        f"unknown curve family {family!r}; choose one of {', '.join(FAMILIES)}"
    )


def _noise_paths(mechanism, n_series, length, rng):
    """(n_series, length) noise paths; recursive mechanisms start from zero
    initial conditions and discard a burn-in segment."""
    if mechanism == "WN":
        return rng.standard_normal((n_series, length))
    if mechanism not in NOISES:
        raise ValidationError(
            f"unknown noise mechanism {mechanism!r}; "
            f"choose one of {', '.join(NOISES)}"
        )
    total = NOISE_BURN_IN + length
    xi = rng.standard_normal((n_series, total))
    eps = np.zeros((n_series, total))
    if mechanism == "AR":
        for k in range(total):
            prev = eps[:, k - 1] if k >= 1 else 0.0
            eps[:, k] = 0.8 * prev + xi[:, k]
    elif mechanism == "SARMA":
        for k in range(total):
            if k >= 10:
                eps[:, k] = 0.8 * eps[:, k - 10] + 0.8 * xi[:, k - 10] + xi[:, k]
            else:
                eps[:, k] = xi[:, k]
    else:  # BILR
        for k in range(total):
            if k >= 1:
                eps[:, k] = (
                    0.8 * eps[:, k - 1]
                    + 0.2 * xi[:, k - 1]
                    - 0.2 * eps[:, k - 1] * xi[:, k - 1]
                    + xi[:, k]
                )
            else:
                eps[:, k] = xi[:, k]
    return eps[:, NOISE_BURN_IN:]


def gen_noise(mechanism, length, rng):
    """One noise path of the given mechanism (see :func:`_noise_paths`)."""
    if length < 1:
        raise ValidationError("length must be at least 1")
    return _noise_paths(mechanism, 1, length, rng)[0]


@dataclass(frozen=True)
class SimConfig:
    """Benchmark design; defaults reproduce the full 16-cell layout.

    ``families`` and ``noises`` may be restricted to run single cells; the
    RNG streams are keyed by the global cell index, so a restricted run
    generates exactly the same series the full run would.
    """

    families: tuple = FAMILIES
    noises: tuple = NOISES
    series_per_cell: int = 10
    grid_size: int = 200
    replicates: int = 200
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "noises", tuple(self.noises))
        for f in self.families:
            if f not in FAMILIES:
                raise ValidationError(f"unknown curve family {f!r}")
        for nm in self.noises:
            if nm not in NOISES:
                raise ValidationError(f"unknown noise mechanism {nm!r}")
        if self.series_per_cell < 2:
            raise ValidationError("series_per_cell must be at least 2")
        if self.grid_size < 4:
            raise ValidationError("grid_size must be at least 4")
        if self.replicates < 1:
            raise ValidationError("replicates must be at least 1")

    @property
    def grid(self):
        g = self.grid_size
        return np.arange(g) / (g - 1)

    @property
    def cells(self):
        return tuple((f, nm) for f in self.families for nm in self.noises)


@dataclass(frozen=True)
class TruthTable:
    """Noise-free curve values and the pairwise true distances."""

    ids: tuple
    curve_values: np.ndarray
    distances: np.ndarray


def _true_distances(F):
    n = F.shape[0]
    D = np.zeros((n, n))
    for i in range(n - 1):
        diff = F[i + 1 :] - F[i]
        D[i, i + 1 :] = np.sqrt((diff * diff).sum(axis=1))
    return D + D.T


def make_truth(ids, curve_values):
    return TruthTable(tuple(ids), np.asarray(curve_values, dtype=np.float64),
                      _true_distances(np.asarray(curve_values, dtype=np.float64)))


def _q_value(dhat, dtrue):
    n = dhat.shape[0]
    iu = np.triu_indices(n, 1)
    x = dhat[iu]
    y = dtrue[iu]
    if np.any(y <= 0.0):
        raise ValidationError(
            "true distances must be positive off the diagonal for Q"
        )
    w = 1.0 / y
    s0, s1, s2 = w.sum(), (w * x).sum(), (w * x * x).sum()
    r0, r1 = (w * y).sum(), (w * x * y).sum()
    det = s0 * s2 - s1 * s1
    if det > 1e-14 * max(s0 * s2, 1e-300):
        a = (s2 * r0 - s1 * r1) / det
        b = (s0 * r1 - s1 * r0) / det
    else:  # degenerate design (all dhat equal): least-norm fit
        sw = np.sqrt(w)
        A = np.column_stack([sw, sw * x])
        a, b = np.linalg.lstsq(A, sw * y, rcond=None)[0]
    resid = a + b * x - y
    return float((w * resid * resid).sum()) / (n * (n - 1))


def _midrank(v):
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    sv = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _r_value(dhat, dtrue):
    n = dhat.shape[0]
    iu = np.triu_indices(n, 1)
    rh = _midrank(dhat[iu])
    rt = _midrank(dtrue[iu])
    diff = rh - rt
    return 2.0 * float(diff @ diff)


def q_criterion(estimated, truth):
    """Affine-calibration loss of an estimated matrix against the truth.

    Closed-form weighted least squares of the true distances on
    (1, estimated), weights reciprocal true distance; returns the mean
    weighted squared residual per ordered pair, each distinct pair's
    residual entering once.  Requires positive off-diagonal true distances.
    """
    if tuple(estimated.ids) != tuple(truth.ids):
        raise ValidationError("estimated and truth ids do not match")
    return _q_value(estimated.entries, truth.distances)


def r_criterion(estimated, truth):
    """Sum over ordered pairs of squared rank differences.

    Ranks are computed among the distinct pair values with midranks on
    ties; the sum doubles each distinct pair, matching summation over
    ordered pairs.  Any strictly increasing transform of the estimated
    distances leaves the value unchanged.
    """
    if tuple(estimated.ids) != tuple(truth.ids):
        raise ValidationError("estimated and truth ids do not match")
    return _r_value(estimated.entries, truth.distances)


def _cell_index(family, noise_name):
    return FAMILIES.index(family) * len(NOISES) + NOISES.index(noise_name)


def _cell_rng(seed, replicate, family, noise_name):
    ss = np.random.SeedSequence(
        entropy=seed, spawn_key=(replicate, _cell_index(family, noise_name))
    )
    return np.random.Generator(np.random.PCG64(ss))


def _replicate_scores(config, methods, replicate):
    """One replicate: simulate every cell, build each method's matrix over
    all series at once, then score per cell and over the pooled group."""
    grid = config.grid
    K = config.grid_size
    m = config.series_per_cell
    blocks = []
    truths = []
    for family, noise_name in config.cells:
        rng = _cell_rng(config.seed, replicate, family, noise_name)
        eta = rng.normal(1.0, 0.3, m)
        F = np.vstack([gen_curve(family, e, grid) for e in eta])
        E = _noise_paths(noise_name, m, K, rng)
        blocks.append(F + E)
        truths.append(F)
    Y = np.vstack(blocks)
    F = np.vstack(truths)
    n = Y.shape[0]
    Dtrue = _true_distances(F)

    lams = None
    if "spc" in methods or "ss" in methods:
        lams = np.empty(n)
        for i in range(n):
            lams[i] = spline._select_lambda(
                grid, Y[i], 0.0, 1.0, who=f"series {i}"
            ).lambda_hat

    scores = {}
    for method in methods:
        if method == "eucl":
            D = _true_distances(Y)
        else:
            D = distance._matrix_shared_grid(grid, Y, lams, 0.0, 1.0, method)
        per_cell = {}
        for c, (family, noise_name) in enumerate(config.cells):
            sl = slice(c * m, (c + 1) * m)
            per_cell[(family, noise_name)] = (
                _q_value(D[sl, sl], Dtrue[sl, sl]),
                _r_value(D[sl, sl], Dtrue[sl, sl]),
            )
        if len(config.cells) > 1:
            per_cell[(ALL_GROUP, ALL_GROUP)] = (
                _q_value(D, Dtrue),
                _r_value(D, Dtrue),
            )
        scores[method] = per_cell
    return scores


def _worker(args):
    config, methods, replicate = args
    return _replicate_scores(config, methods, replicate)


def default_workers():
    """Worker count for replicate-level parallelism.

    ``SPCDIST_THREADS`` caps it; results are identical for any count
    because every replicate is computed independently from its own stream.
    """
    env = os.environ.get("SPCDIST_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ValidationError(f"SPCDIST_THREADS must be an integer, got {env!r}")
        return max(1, cap)
    return max(1, min(4, os.cpu_count() or 1))


@dataclass(frozen=True)
class BenchmarkReport:
    """Replicate-averaged Q and R per (family, noise, method).

    ``rows`` holds (family, noise, method, q_mean, r_mean) tuples including
    the pooled ALL group; ``raw`` optionally keeps every replicate's values
    as (replicate, family, noise, method, q, r).
    """

    config: SimConfig
    methods: tuple
    rows: tuple
    raw: tuple = field(default=())

    def value(self, family, noise_name, method):
        for f, nm, me, q, r in self.rows:
            if (f, nm, me) == (family, noise_name, method):
                return q, r
        raise KeyError((family, noise_name, method))


def run_benchmark(config, methods=("eucl", "ss", "spc"), workers=None,
                  keep_raw=False):
    """Run the benchmark and average the criteria over replicates.

    Per replicate and cell the configured number of series is drawn, every
    method's full dissimilarity matrix over all series is computed once,
    and Q and R are evaluated within each cell and over the pooled group.
    Identical seeds give bit-identical reports regardless of ``workers``.
    """
    methods = tuple(methods)
    for mth in methods:
        if mth not in distance.METHODS:
            raise ValidationError(f"unknown method {mth!r}")
    if not methods:
        raise ValidationError("no methods requested")
    if workers is None:
        workers = default_workers()
    reps = range(config.replicates)
    if workers > 1 and config.replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, [(config, methods, r) for r in reps]))
    else:
        results = [_replicate_scores(config, methods, r) for r in reps]

    groups = list(config.cells)
    if len(config.cells) > 1:
        groups.append((ALL_GROUP, ALL_GROUP))
    rows = []
    raw = []
    for family, noise_name in groups:
        for method in methods:
            qs = np.array([res[method][(family, noise_name)][0] for res in results])
            rs = np.array([res[method][(family, noise_name)][1] for res in results])
            rows.append((family, noise_name, method, float(qs.mean()), float(rs.mean())))
    if keep_raw:
        for rep, res in enumerate(results):
            for family, noise_name in groups:
                for method in methods:
                    q, r = res[method][(family, noise_name)]
                    raw.append((rep, family, noise_name, method, q, r))
    return BenchmarkReport(config, methods, tuple(rows), tuple(raw))


def write_report_csv(report, target, header_comments=()):
    """Per-cell CSV ``family,noise,method,Q_mean,R_mean`` plus ALL rows."""
    own = isinstance(target, (str, bytes))
    stream = open(target, "w", newline="") if own else target
    try:
        for line in header_comments:
            stream.write(f"# {line}\n")
        stream.write("family,noise,method,Q_mean,R_mean\n")
        for family, noise_name, method, q, r in report.rows:
            stream.write(f"{family},{noise_name},{method},{q:.17g},{r:.17g}\n")
    finally:
        if own:
            stream.close()


def write_raw_csv(report, target, header_comments=()):
    """Per-replicate CSV for variance inspection."""
    own = isinstance(target, (str, bytes))
    stream = open(target, "w", newline="") if own else target
    try:
        for line in header_comments:
            stream.write(f"# {line}\n")
        stream.write("replicate,family,noise,method,Q,R\n")
        for rep, family, noise_name, method, q, r in report.raw:
            stream.write(
                f"{rep},{family},{noise_name},{method},{q:.17g},{r:.17g}\n"
            )
    finally:
        if own:
            stream.close()
