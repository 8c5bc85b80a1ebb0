"""Distance-based outlier scoring and k-medoids clustering.

Both operate on a :class:`~spcdist.distance.DissimilarityMatrix` only; no
coordinates are assumed, and the triangle inequality is not required.
"""

from dataclasses import dataclass

import numpy as np

from spcdist.errors import ValidationError

#: A gap in the sorted outlier scores is only trusted when the upper score
#: exceeds the lower by at least this ratio.
GAP_RATIO = 2.0


@dataclass(frozen=True)
class OutlierReport:
    """Per-subject isolation scores and the subset flagged as outliers.

    ``threshold_used`` is the numeric cutoff in threshold mode and the
    string ``"gap"`` in gap mode.  Every flagged score is strictly greater
    than every unflagged score.
    """

    ids: tuple
    scores: np.ndarray
    flagged: tuple
    threshold_used: object


@dataclass(frozen=True)
class Clustering:
    """k-medoids result: chosen medoids, assignment, and total cost."""

    medoid_ids: tuple
    assignment: dict
    total_cost: float


def knn_outlier_scores(matrix, k_neighbors=3):
    """Average dissimilarity of each subject to its k nearest neighbors.

    Large scores mark isolated subjects.  Requires more subjects than
    neighbors.
    """
    if k_neighbors < 1:
        raise ValidationError("k_neighbors must be positive")
    n = matrix.n
    if n <= k_neighbors:
        raise ValidationError(
            f"need more than k_neighbors={k_neighbors} subjects, have {n}"
        )
    D = matrix.entries
    scores = np.empty(n)
    for i in range(n):
        row = np.delete(D[i], i)
        scores[i] = np.mean(np.partition(row, k_neighbors - 1)[:k_neighbors])
    return scores


def flag_outliers(scores, mode="gap", threshold=None, ids=None):
    """Flag outliers by an explicit threshold or by the largest score gap.

    Threshold mode flags every score strictly above ``threshold``.  Gap
    mode sorts the scores, looks at consecutive ratios within the top
    quartile of positions, and flags everything above the largest gap,
    but only when that ratio reaches :data:`GAP_RATIO`; otherwise nothing
    is flagged.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    if ids is None:
        ids = tuple(str(i) for i in range(n))
    ids = tuple(ids)
    if len(ids) != n:
        raise ValidationError("ids and scores differ in length")

    if mode == "threshold":
        if threshold is None or not threshold > 0:
            raise ValidationError(
                f"threshold mode needs a positive threshold, got {threshold!r}"
            )
        mask = scores > threshold
        return OutlierReport(
            ids, scores, tuple(i for i, m in zip(ids, mask) if m), float(threshold)
        )
    if mode != "gap":
        raise ValidationError(f"unknown mode {mode!r}; use 'gap' or 'threshold'")
    if n < 3:
        raise ValidationError("gap mode needs at least 3 subjects")

    order = np.argsort(scores, kind="stable")
    s = scores[order]
    first = max(int(np.ceil(0.75 * n)) - 1, 0)  # top quartile of positions
    best_ratio = 0.0
    cut = None
    for m in range(first, n - 1):
        lo, hi = s[m], s[m + 1]
        if lo == 0.0 and hi == 0.0:
            continue
        ratio = np.inf if lo == 0.0 else hi / lo
        if ratio > best_ratio:
            best_ratio = ratio
            cut = m
    if cut is None or best_ratio < GAP_RATIO:
        return OutlierReport(ids, scores, (), "gap")
    flagged_idx = set(order[cut + 1 :].tolist())
    return OutlierReport(
        ids,
        scores,
        tuple(sid for i, sid in enumerate(ids) if i in flagged_idx),
        "gap",
    )


def _greedy_build(D, seed, k):
    """Greedy seeding: from a first medoid, repeatedly add the point that
    most reduces the total nearest-medoid cost (ties to the lowest index)."""
    n = D.shape[0]
    medoids = [seed]
    nearest = D[seed].copy()
    while len(medoids) < k:
        chosen = set(medoids)
        best_c, best_cost = None, None
        for c in range(n):
            if c in chosen:
                continue
            cost = float(np.minimum(nearest, D[c]).sum())
            if best_cost is None or cost < best_cost:
                best_c, best_cost = c, cost
        medoids.append(best_c)
        nearest = np.minimum(nearest, D[best_c])
    return medoids


def _swap_descent(D, medoids):
    """Steepest-descent single swaps until no exchange lowers the cost.

    Returns (medoids, cost, trace); the trace starts at the seeded cost and
    strictly decreases with every accepted swap.
    """
    n = D.shape[0]
    idx = np.arange(n)
    medoids = sorted(medoids)
    current = float(np.min(D[medoids], axis=0).sum())
    trace = [current]
    while True:
        rows = D[medoids]
        order = np.argsort(rows, axis=0, kind="stable")
        nearest = rows[order[0], idx]
        second = rows[order[1], idx] if len(medoids) > 1 else np.full(n, np.inf)
        nearest_pos = order[0]
        in_set = np.zeros(n, dtype=bool)
        in_set[medoids] = True
        candidates = np.flatnonzero(~in_set)
        if candidates.size == 0:
            break
        best = None  # (cost, medoid position, candidate)
        for pos in range(len(medoids)):
            without = np.where(nearest_pos == pos, second, nearest)
            costs = np.minimum(without[None, :], D[candidates]).sum(axis=1)
            j = int(np.argmin(costs))
            cost = float(costs[j])
            if cost < current and (best is None or cost < best[0]):
                best = (cost, pos, int(candidates[j]))
        if best is None:
            break
        current, pos, c = best
        medoids[pos] = c
        medoids = sorted(medoids)
        trace.append(current)
    return medoids, current, trace


def pam(matrix, k, cost_trace=None):
    """Partitioning around medoids on arbitrary symmetric dissimilarities.

    Greedy seeding plus steepest-descent single swaps, restarted
    deterministically from every subject as the first medoid (single-swap
    descent alone gets trapped a few percent above the optimum too often);
    the lowest final cost wins, ties going to the earliest start.  Pass a
    list as ``cost_trace`` to receive the winning start's swap trace, which
    is strictly decreasing after the seed entry.
    """
    n = matrix.n
    if not 1 <= k <= n:
        raise ValidationError(f"k must be between 1 and {n}, got {k}")
    D = matrix.entries

    seeds = [int(np.argmin(D.sum(axis=1)))] + list(range(n))
    best = None  # (cost, medoids, trace)
    for seed in seeds:
        medoids, cost, trace = _swap_descent(D, _greedy_build(D, seed, k))
        if best is None or cost < best[0]:
            best = (cost, medoids, trace)
    _, medoids, trace = best
    if cost_trace is not None:
        cost_trace.extend(trace)

    rows = D[medoids]
    assign_pos = np.argmin(rows, axis=0)
    total = float(rows[assign_pos, np.arange(n)].sum())
    ids = matrix.ids
    medoid_ids = tuple(ids[m] for m in medoids)
    assignment = {}
    for i in range(n):
        if i in medoids:
            assignment[ids[i]] = ids[i]
        else:
            assignment[ids[i]] = medoid_ids[assign_pos[i]]
    return Clustering(medoid_ids, assignment, total)


def write_outliers_csv(report, target):
    """CSV rows ``subject,score,flagged`` with scores at full precision."""
    own = isinstance(target, (str, bytes))
    stream = open(target, "w", newline="") if own else target
    try:
        stream.write("subject,score,flagged\n")
        flagged = set(report.flagged)
        for sid, score in zip(report.ids, report.scores):
            mark = "1" if sid in flagged else "0"
            stream.write(f"{sid},{score:.17g},{mark}\n")
    finally:
        if own:
            stream.close()


def write_clusters_csv(clustering, target):
    """CSV rows ``subject,cluster,medoid``; cluster numbers follow the
    medoid order of the clustering."""
    own = isinstance(target, (str, bytes))
    stream = open(target, "w", newline="") if own else target
    try:
        stream.write("subject,cluster,medoid\n")
        number = {m: c + 1 for c, m in enumerate(clustering.medoid_ids)}
        for sid in clustering.assignment:
            medoid = clustering.assignment[sid]
            stream.write(f"{sid},{number[medoid]},{medoid}\n")
    finally:
        if own:
            stream.close()
