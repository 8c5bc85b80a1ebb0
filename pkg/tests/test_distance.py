import io

import numpy as np
import pytest
import sympy

from oracles import jittered_grid, riemann_l2
from spcdist.dataset import Dataset, Subject
from spcdist.distance import (
    DissimilarityMatrix,
    FitCache,
    distance_matrix,
    eucl_distance,
    l2_between_fits,
    read_matrix_csv,
    spc_distance,
    ss_distance,
    write_matrix_csv,
)
from spcdist.errors import ValidationError
from spcdist.spline import SplineFit, fit_given_lambda


def cubic_fit(name, coef_rows, knots, lo, hi):
    """Hand-built piecewise cubic wrapped as a fit object."""
    knots = np.asarray(knots, dtype=float)
    coef = np.asarray(coef_rows, dtype=float).reshape(len(knots) - 1, 4)
    values = np.array(
        [coef[0, 0]]
        + [
            coef[k, 0]
            + (knots[k + 1] - knots[k])
            * (
                coef[k, 1]
                + (knots[k + 1] - knots[k])
                * (coef[k, 2] + (knots[k + 1] - knots[k]) * coef[k, 3])
            )
            for k in range(len(knots) - 1)
        ]
    )
    return SplineFit(name, knots, values, coef, 1.0, float(lo), float(hi))


def random_dataset(rng, n=5, n_points=15, shared_grid=False, lo=0.0, hi=1.0):
    subjects = []
    base = jittered_grid(rng, n_points, lo, hi)
    for i in range(n):
        t = base if shared_grid else jittered_grid(rng, n_points, lo, hi)
        y = np.sin(2 * np.pi * (t - lo) / (hi - lo)) * rng.uniform(
            0.5, 1.5
        ) + rng.normal(0, 0.2, n_points)
        subjects.append(Subject(f"s{i}", t, y))
    return Dataset(tuple(subjects), lo, hi)


# --- l2_between_fits ---------------------------------------------------------

def test_l2_identical_fit_is_zero():
    rng = np.random.default_rng(0)
    t = jittered_grid(rng, 10, 0.0, 1.0)
    fit = fit_given_lambda(Subject("a", t, rng.normal(0, 1, 10)), 0.01)
    assert l2_between_fits(fit, fit, 0.0, 1.0) == 0.0


def test_l2_constant_fits():
    t = np.linspace(0.0, 1.0, 8)
    one = fit_given_lambda(Subject("one", t, np.ones(8)), 1.0)
    zero = fit_given_lambda(Subject("zero", t, np.zeros(8)), 1.0)
    assert l2_between_fits(one, zero, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_l2_matches_symbolic_integration():
    a = cubic_fit("a", [0.3, -1.2, 2.0, 0.7], [0.0, 1.0], 0.0, 1.0)
    b = cubic_fit("b", [-0.5, 0.4, -1.1, 1.3], [0.0, 1.0], 0.0, 1.0)
    x = sympy.Symbol("x")
    pa = sympy.Rational(3, 10) - sympy.Rational(12, 10) * x + 2 * x**2 + sympy.Rational(7, 10) * x**3
    pb = -sympy.Rational(5, 10) + sympy.Rational(4, 10) * x - sympy.Rational(11, 10) * x**2 + sympy.Rational(13, 10) * x**3
    exact = float(sympy.sqrt(sympy.integrate((pa - pb) ** 2, (x, 0, 1))))
    assert l2_between_fits(a, b, 0.0, 1.0) == pytest.approx(exact, abs=1e-12)


def test_l2_matches_riemann_on_random_fits():
    rng = np.random.default_rng(1)
    for _ in range(5):
        ta = jittered_grid(rng, 12, 0.0, 1.0)
        tb = jittered_grid(rng, 9, 0.0, 1.0)
        fa = fit_given_lambda(Subject("a", ta, rng.normal(0, 1, 12)), 0.005, domain=(0, 1))
        fb = fit_given_lambda(Subject("b", tb, rng.normal(0, 1, 9)), 0.05, domain=(0, 1))
        ref = riemann_l2(fa, fb, 0.0, 1.0, 100_000)
        assert l2_between_fits(fa, fb, 0.0, 1.0) == pytest.approx(ref, abs=1e-6)


def test_l2_domain_mismatch():
    rng = np.random.default_rng(2)
    t = jittered_grid(rng, 8, 0.2, 0.8)
    fit = fit_given_lambda(Subject("a", t, rng.normal(0, 1, 8)), 0.01)
    with pytest.raises(ValidationError, match="defined on"):
        l2_between_fits(fit, fit, 0.0, 1.0)


# --- pair distances ----------------------------------------------------------

def test_same_subject_distances_are_zero():
    rng = np.random.default_rng(3)
    t = jittered_grid(rng, 20, 0.0, 1.0)
    s = Subject("a", t, rng.normal(0, 1, 20))
    assert spc_distance(s, s, 0.3, 0.3, (0.0, 1.0)) == 0.0
    assert ss_distance(s, s, 0.7, 0.7, (0.0, 1.0)) == 0.0
    assert eucl_distance(s, s) == 0.0


def test_spc_equals_ss_under_shared_lambda():
    rng = np.random.default_rng(4)
    for _ in range(5):
        t1 = jittered_grid(rng, 14, 0.0, 1.0)
        t2 = jittered_grid(rng, 17, 0.0, 1.0)
        s1 = Subject("a", t1, rng.normal(0, 1, 14))
        s2 = Subject("b", t2, rng.normal(0, 1, 17))
        lam = float(10.0 ** rng.uniform(-4, 1))
        d_spc = spc_distance(s1, s2, lam, lam, (0.0, 1.0))
        d_ss = ss_distance(s1, s2, lam, lam, (0.0, 1.0))
        assert d_spc == pytest.approx(d_ss, abs=1e-12)


def test_spc_noise_free_recovers_true_l2():
    t = np.arange(500) / 499.0
    s1 = Subject("a", t, t.copy())
    s2 = Subject("b", t, 2.0 * t)
    d = spc_distance(s1, s2, 1e-12, 1e-12, (0.0, 1.0))
    assert d == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-3)


def test_ss_matches_fine_riemann():
    rng = np.random.default_rng(5)
    t1 = jittered_grid(rng, 30, 0.0, 1.0)
    t2 = jittered_grid(rng, 25, 0.0, 1.0)
    s1 = Subject("a", t1, np.sin(3 * t1) + rng.normal(0, 0.1, 30))
    s2 = Subject("b", t2, np.cos(2 * t2) + rng.normal(0, 0.1, 25))
    cache = FitCache((0.0, 1.0))
    d = ss_distance(s1, s2, 0.01, 0.05, (0.0, 1.0), cache)
    f1 = cache.fit_for(s1, 0.01, "a")
    f2 = cache.fit_for(s2, 0.05, "b")
    assert d == pytest.approx(riemann_l2(f1, f2, 0.0, 1.0, 100_000), abs=1e-6)


def test_eucl_distance():
    t = np.linspace(0, 1, 4)
    assert eucl_distance(Subject("a", t, [1, 1, 1, 1]), Subject("b", t, [1, 1, 1, 1])) == 0.0
    a = Subject("a", [0.0, 0.5, 0.6, 1.0], [1.0, 1.0, 0.0, 0.0])
    b = Subject("b", [0.0, 0.5, 0.6, 1.0], [0.0, 0.0, 0.0, 0.0])
    assert eucl_distance(a, b) == pytest.approx(np.sqrt(2.0), abs=1e-15)
    rng = np.random.default_rng(6)
    y1, y2 = rng.normal(0, 1, (2, 200))
    tt = np.linspace(0, 1, 200)
    ref = np.sqrt(sum((u - v) ** 2 for u, v in zip(y1, y2)))
    assert eucl_distance(Subject("a", tt, y1), Subject("b", tt, y2)) == pytest.approx(ref, rel=1e-15)


def test_eucl_requires_common_grid():
    a = Subject("a", [0.0, 0.4, 0.6, 1.0], np.ones(4))
    b = Subject("b", [0.0, 0.5, 0.6, 1.0], np.ones(4))
    with pytest.raises(ValidationError, match="common grid"):
        eucl_distance(a, b)


# --- distance_matrix ---------------------------------------------------------

def test_matrix_single_subject():
    rng = np.random.default_rng(7)
    dsn = random_dataset(rng, n=1)
    for method in ("spc", "ss", "eucl"):
        m = distance_matrix(dsn, method)
        assert m.entries.shape == (1, 1) and m.entries[0, 0] == 0.0


def test_matrix_identical_subjects_all_zero():
    rng = np.random.default_rng(8)
    t = jittered_grid(rng, 20, 0.0, 1.0)
    y = np.sin(2 * np.pi * t) + rng.normal(0, 0.2, 20)
    dsn = Dataset(tuple(Subject(f"s{i}", t, y) for i in range(3)), 0.0, 1.0)
    for method in ("spc", "ss", "eucl"):
        assert np.max(np.abs(distance_matrix(dsn, method).entries)) < 1e-12


@pytest.mark.parametrize("shared", [True, False])
def test_matrix_entry_matches_pairwise_call(shared):
    rng = np.random.default_rng(9)
    dsn = random_dataset(rng, n=10, n_points=12, shared_grid=shared)
    m = distance_matrix(dsn, "spc")
    from spcdist.spline import _select_lambda

    lam2 = _select_lambda(dsn.subjects[2].times, dsn.subjects[2].values, 0.0, 1.0).lambda_hat
    lam7 = _select_lambda(dsn.subjects[7].times, dsn.subjects[7].values, 0.0, 1.0).lambda_hat
    direct = spc_distance(dsn.subjects[2], dsn.subjects[7], lam2, lam7, dsn.domain)
    assert m.entries[2, 7] == pytest.approx(direct, abs=1e-12)


def test_matrix_invariants_random():
    rng = np.random.default_rng(10)
    for trial in range(10):
        dsn = random_dataset(rng, n=4, n_points=10, shared_grid=bool(trial % 2))
        for method in ("spc", "ss"):
            m = distance_matrix(dsn, method)
            assert np.array_equal(m.entries, m.entries.T)
            assert np.all(np.diag(m.entries) == 0.0)
            assert np.min(m.entries) >= 0.0


def test_matrix_unknown_method_and_eucl_grid():
    rng = np.random.default_rng(11)
    dsn = random_dataset(rng, n=3, shared_grid=False)
    with pytest.raises(ValidationError, match="unknown method"):
        distance_matrix(dsn, "dtw")
    with pytest.raises(ValidationError, match="common"):
        distance_matrix(dsn, "eucl")


def test_fit_cache_bounds():
    rng = np.random.default_rng(12)
    n = 6
    dsn = random_dataset(rng, n=n, n_points=10, shared_grid=False)
    cache = FitCache(dsn.domain)
    distance_matrix(dsn, "spc", cache=cache)
    assert cache.n_self() == n
    assert cache.n_cross() <= n * (n - 1)
    assert len(cache) <= n * n


def test_matrix_csv_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    dsn = random_dataset(rng, n=5, shared_grid=True)
    m = distance_matrix(dsn, "ss")
    path = tmp_path / "m.csv"
    write_matrix_csv(m, str(path), header_comments=["method=ss"])
    again = read_matrix_csv(str(path))
    assert again.ids == m.ids
    assert np.array_equal(again.entries, m.entries)


def test_matrix_check_catches_violations():
    bad = DissimilarityMatrix(("a", "b"), np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValidationError, match="symmetric"):
        bad.check()
    neg = DissimilarityMatrix(("a", "b"), np.array([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(ValidationError, match="negative"):
        neg.check()


def test_read_matrix_rejects_garbage():
    with pytest.raises(ValidationError):
        read_matrix_csv(io.StringIO("id,a\nb,0.0\n"))
    with pytest.raises(ValidationError):
        read_matrix_csv(io.StringIO("a,b\n0,1\n"))
