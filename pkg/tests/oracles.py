"""Independent reference implementations used by the test suite.

Everything here is deliberately naive or dense: direct O(K^3) linear
algebra, brute-force enumeration, fine-grid integration.  None of it
shares code with the fast paths it checks.
"""

import itertools

import numpy as np

from spcdist import spline


def jittered_grid(rng, n_points, lo, hi):
    """Strictly increasing grid with gap ratios bounded by 4."""
    gaps = rng.uniform(0.5, 2.0, n_points - 1)
    t = np.concatenate([[0.0], np.cumsum(gaps)])
    return lo + (hi - lo) * t / t[-1]


def second_difference_dense(t):
    """Dense Q (K x K-2) and T (K-2 x K-2) of the roughness construction."""
    K = len(t)
    h = np.diff(t)
    Q = np.zeros((K, K - 2))
    T = np.zeros((K - 2, K - 2))
    for c in range(K - 2):
        Q[c, c] = 1.0 / h[c]
        Q[c + 1, c] = -1.0 / h[c] - 1.0 / h[c + 1]
        Q[c + 2, c] = 1.0 / h[c + 1]
        T[c, c] = (h[c] + h[c + 1]) / 3.0
        if c + 1 < K - 2:
            T[c, c + 1] = T[c + 1, c] = h[c + 1] / 6.0
    return Q, T


def dense_penalty_matrix(t):
    Q, T = second_difference_dense(t)
    return Q @ np.linalg.solve(T, Q.T)


def dense_fit(t, y, mu):
    """Solve (I + mu * Omega) f = y with dense linear algebra."""
    K = len(t)
    return np.linalg.solve(np.eye(K) + mu * dense_penalty_matrix(t), y)


def kernel_matrix(t, lo, hi):
    """Closed-form integrated-ramp kernel, written out independently."""
    span = hi - lo
    a = np.asarray(t, dtype=float) - lo
    small = np.minimum.outer(a, a)
    big = np.maximum.outer(a, a)
    return small**2 * (3.0 * big - small) / 6.0 / span**2


def dense_reml(t, y, lo, hi, lam):
    """Restricted log-likelihood via eigendecomposition of the kernel.

    Evaluates the variance-components model with marginal covariance
    sigma^2 (I + R/(K lam)) directly: eigenbasis of R, generalized least
    squares for the two fixed effects, profiled sigma^2, full constants.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    K = len(t)
    R = kernel_matrix(t, lo, hi)
    w, W = np.linalg.eigh(R)
    w = np.clip(w, 0.0, None)
    c = 1.0 / (K * lam)
    d = 1.0 + c * w
    logdet_v = float(np.sum(np.log1p(c * w)))
    X = np.column_stack([np.ones(K), t])
    WX = W.T @ X
    Wy = W.T @ y
    xtvix = WX.T @ (WX / d[:, None])
    beta = np.linalg.solve(xtvix, WX.T @ (Wy / d))
    resid = Wy - WX @ beta
    ypy = float(resid @ (resid / d))
    sign, logdet_x = np.linalg.slogdet(xtvix)
    assert sign > 0
    sigma2 = ypy / (K - 2)
    ell = -0.5 * (
        (K - 2) * (np.log(2.0 * np.pi * sigma2) + 1.0) + logdet_v + logdet_x
    )
    return ell, sigma2


def riemann_l2(fit_a, fit_b, lo, hi, n_points):
    """Midpoint-rule approximation of sqrt(int (a-b)^2)."""
    x = lo + (hi - lo) * (np.arange(n_points) + 0.5) / n_points
    diff = spline.evaluate(fit_a, x) - spline.evaluate(fit_b, x)
    return float(np.sqrt(np.mean(diff * diff) * (hi - lo)))


def q_grid_search(dhat, dtrue, span=10.0, rounds=12, grid=41):
    """Minimize the weighted calibration loss by iterative grid refinement.

    Returns the same normalized value as q_criterion: the minimized sum of
    (a + b*x - y)^2 / y over distinct pairs, divided by n(n-1).
    """
    n = dhat.shape[0]
    iu = np.triu_indices(n, 1)
    x = dhat[iu]
    y = dtrue[iu]
    w = 1.0 / y

    def loss(a, b):
        r = a + b * x - y
        return float((w * r * r).sum())

    ca, cb = 0.0, 1.0
    half_a = half_b = span
    best = (loss(ca, cb), ca, cb)
    for _ in range(rounds):
        for a in np.linspace(ca - half_a, ca + half_a, grid):
            for b in np.linspace(cb - half_b, cb + half_b, grid):
                v = loss(a, b)
                if v < best[0]:
                    best = (v, a, b)
        _, ca, cb = best
        half_a *= 2.2 / (grid - 1)
        half_b *= 2.2 / (grid - 1)
    return best[0] / (n * (n - 1))


def naive_rank_sum(dhat, dtrue):
    """Rank criterion by O(m^2) counting: midranks among distinct pair
    values, squared differences summed over ordered pairs."""

    def midranks(v):
        out = np.empty(len(v))
        for i, a in enumerate(v):
            below = np.sum(v < a)
            ties = np.sum(v == a)
            out[i] = below + (ties + 1) / 2.0
        return out

    n = dhat.shape[0]
    iu = np.triu_indices(n, 1)
    rh = midranks(dhat[iu])
    rt = midranks(dtrue[iu])
    return 2.0 * float(np.sum((rh - rt) ** 2))


def naive_knn_scores(D, k):
    scores = []
    for i in range(D.shape[0]):
        row = sorted(np.delete(D[i], i))
        scores.append(sum(row[:k]) / k)
    return np.array(scores)


def pam_cost(D, medoids):
    return float(D[list(medoids)].min(axis=0).sum())


def exhaustive_pam(D, k):
    """Globally optimal k-medoid cost by enumeration."""
    best = np.inf
    for combo in itertools.combinations(range(D.shape[0]), k):
        best = min(best, pam_cost(D, combo))
    return best
