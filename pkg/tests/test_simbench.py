import numpy as np
import pytest

from oracles import naive_rank_sum, q_grid_search
from spcdist.distance import DissimilarityMatrix
from spcdist.errors import ValidationError
from spcdist.simbench import (
    SimConfig,
    gen_curve,
    gen_noise,
    make_truth,
    q_criterion,
    r_criterion,
    run_benchmark,
    _q_value,
    _r_value,
    _true_distances,
)


# --- curve families -----------------------------------------------------

def test_curve_formulas():
    grid = np.linspace(0, 1, 11)
    assert np.allclose(gen_curve("constant", 1.2, grid), 1.2)
    assert gen_curve("linear", 1.0, np.array([0.4]))[0] == pytest.approx(2.0)
    assert gen_curve("nonlinear", 1.0, np.array([0.5]))[0] == pytest.approx(-2.5)
    periodic = gen_curve("periodic", 0.7, grid)
    expected = np.sin(2 * np.pi * grid) - grid + 1.4 * np.cos(4 * np.pi * grid)
    assert np.allclose(periodic, expected)
    with pytest.raises(ValidationError):
        gen_curve("quadratic", 1.0, grid)


# --- noise mechanisms -----------------------------------------------------

def test_white_noise_moments():
    rng = np.random.default_rng(0)
    x = gen_noise("WN", 1_000_000, rng)
    assert abs(x.mean()) < 0.01
    assert abs(x.var() - 1.0) < 0.01


def test_ar_long_run_variance():
    rng = np.random.default_rng(1)
    x = gen_noise("AR", 1_000_000, rng)
    assert x.var() == pytest.approx(1.0 / (1.0 - 0.64), rel=0.05)


def test_sarma_seasonal_autocorrelation():
    rng = np.random.default_rng(2)
    x = gen_noise("SARMA", 1_000_000, rng)
    x = x - x.mean()
    var = float(x @ x) / len(x)
    acf = np.array(
        [float(x[:-k] @ x[k:]) / (len(x) * var) for k in range(1, 21)]
    )
    assert acf[9] > 0
    assert np.argmax(acf) == 9  # lag 10 dominates lags 1..20


def test_bilr_runs_and_burn_in_independence():
    rng = np.random.default_rng(3)
    x = gen_noise("BILR", 500, rng)
    assert np.all(np.isfinite(x)) and len(x) == 500
    with pytest.raises(ValidationError):
        gen_noise("ARMA", 10, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        gen_noise("WN", 0, np.random.default_rng(0))


# --- Q criterion -----------------------------------------------------------

def random_instance(rng, n=8):
    pts = rng.uniform(0, 1, (n, 4))
    dtrue = np.sqrt(((pts[:, None] - pts[None, :]) ** 2).sum(-1))
    noise = rng.uniform(0.8, 1.2, (n, n))
    noise = (noise + noise.T) / 2
    dhat = dtrue * noise + rng.uniform(0.1, 0.3)
    np.fill_diagonal(dhat, 0.0)
    return dhat, dtrue


def test_q_zero_for_exact_and_affine():
    rng = np.random.default_rng(4)
    _, dtrue = random_instance(rng)
    assert _q_value(dtrue, dtrue) == pytest.approx(0.0, abs=1e-18)
    assert _q_value(3.0 + 2.0 * dtrue, dtrue) == pytest.approx(0.0, abs=1e-14)


def test_q_matches_grid_search_oracle():
    rng = np.random.default_rng(5)
    for _ in range(5):
        dhat, dtrue = random_instance(rng)
        assert _q_value(dhat, dtrue) == pytest.approx(
            q_grid_search(dhat, dtrue), abs=1e-6
        )


def test_q_affine_invariance():
    rng = np.random.default_rng(6)
    dhat, dtrue = random_instance(rng)
    base = _q_value(dhat, dtrue)
    scaled = 0.7 + 1.9 * dhat
    np.fill_diagonal(scaled, 0.0)
    assert _q_value(scaled, dtrue) == pytest.approx(base, abs=1e-9 * (1 + base))


def test_q_rejects_zero_true_distance():
    dtrue = np.zeros((3, 3))
    with pytest.raises(ValidationError):
        _q_value(dtrue + 1.0 - np.eye(3), dtrue)


def test_q_criterion_wrapper_checks_ids():
    rng = np.random.default_rng(7)
    dhat, dtrue = random_instance(rng, 5)
    ids = tuple("abcde")
    est = DissimilarityMatrix(ids, dhat)
    truth = make_truth(("a", "b", "c", "d", "x"), rng.uniform(0, 1, (5, 6)))
    with pytest.raises(ValidationError):
        q_criterion(est, truth)


# --- R criterion -----------------------------------------------------------

def test_r_identical_rankings():
    rng = np.random.default_rng(8)
    _, dtrue = random_instance(rng)
    assert _r_value(dtrue, dtrue) == 0.0
    assert _r_value(np.exp(dtrue) - 1.0, dtrue) == 0.0  # monotone transform


def test_r_reversed_three_values():
    # three distinct pair values fully reversed: per-pair rank reversal of
    # m=3 ranks gives m(m^2-1)/3 = 8, doubled over ordered pairs -> 16
    dtrue = np.array(
        [[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]]
    )
    dhat = np.array(
        [[0.0, 3.0, 2.0], [3.0, 0.0, 1.0], [2.0, 1.0, 0.0]]
    )
    assert _r_value(dhat, dtrue) == 16.0


def test_r_matches_naive_oracle():
    rng = np.random.default_rng(9)
    for _ in range(5):
        dhat, dtrue = random_instance(rng, 7)
        assert _r_value(dhat, dtrue) == pytest.approx(
            naive_rank_sum(dhat, dtrue), abs=1e-9
        )


def test_r_criterion_wrapper():
    rng = np.random.default_rng(10)
    curves = rng.uniform(0, 1, (4, 9))
    truth = make_truth(("a", "b", "c", "d"), curves)
    est = DissimilarityMatrix(("a", "b", "c", "d"), truth.distances.copy())
    assert r_criterion(est, truth) == 0.0


# --- benchmark -------------------------------------------------------------

def small_config(**kw):
    defaults = dict(
        families=("constant",),
        noises=("WN",),
        replicates=2,
        seed=42,
    )
    defaults.update(kw)
    return SimConfig(**defaults)


def test_benchmark_deterministic():
    cfg = small_config()
    r1 = run_benchmark(cfg, methods=("eucl", "spc"), workers=1)
    r2 = run_benchmark(cfg, methods=("eucl", "spc"), workers=1)
    assert r1.rows == r2.rows


def test_benchmark_worker_count_invariance():
    cfg = small_config(replicates=3)
    r1 = run_benchmark(cfg, methods=("eucl",), workers=1)
    r2 = run_benchmark(cfg, methods=("eucl",), workers=3)
    assert r1.rows == r2.rows


def test_benchmark_cell_independence():
    single = run_benchmark(small_config(), methods=("eucl",), workers=1)
    double = run_benchmark(
        small_config(noises=("WN", "AR")), methods=("eucl",), workers=1
    )
    assert single.value("constant", "WN", "eucl") == double.value(
        "constant", "WN", "eucl"
    )


def test_benchmark_noise_free_euclidean_is_exact():
    # with the noise amplitude forced to zero the pointwise distance equals
    # the true distance, so Q vanishes in every cell
    grid = np.arange(200) / 199.0
    rng = np.random.default_rng(11)
    for family in ("constant", "periodic", "linear", "nonlinear"):
        eta = rng.normal(1.0, 0.3, 10)
        F = np.vstack([gen_curve(family, e, grid) for e in eta])
        dtrue = _true_distances(F)
        assert _q_value(_true_distances(F), dtrue) == pytest.approx(0.0, abs=1e-18)
        assert _r_value(_true_distances(F), dtrue) == 0.0


def test_benchmark_spc_beats_eucl_on_constant_cell():
    report = run_benchmark(
        small_config(replicates=3), methods=("eucl", "ss", "spc"), workers=1
    )
    q_spc, _ = report.value("constant", "WN", "spc")
    q_eucl, _ = report.value("constant", "WN", "eucl")
    assert q_spc < q_eucl


def test_benchmark_raw_rows():
    report = run_benchmark(
        small_config(), methods=("eucl",), workers=1, keep_raw=True
    )
    assert len(report.raw) == 2  # 2 replicates x 1 cell x 1 method
    assert {row[0] for row in report.raw} == {0, 1}


def test_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(families=("quadratic",))
    with pytest.raises(ValidationError):
        SimConfig(series_per_cell=1)
    with pytest.raises(ValidationError):
        SimConfig(replicates=0)
    with pytest.raises(ValidationError):
        run_benchmark(small_config(), methods=("dtw",))


def test_config_grid():
    grid = SimConfig(grid_size=200).grid
    assert len(grid) == 200
    assert grid[0] == 0.0 and grid[-1] == 1.0
    assert grid[1] == pytest.approx(1.0 / 199.0, rel=1e-15)


def test_thread_cap_env_validation(monkeypatch):
    from spcdist.simbench import default_workers

    monkeypatch.setenv("SPCDIST_THREADS", "2")
    assert default_workers() == 2
    monkeypatch.setenv("SPCDIST_THREADS", "many")
    with pytest.raises(ValidationError):
        default_workers()
