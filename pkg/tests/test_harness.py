"""Monte Carlo harness: helpers, constants resolution, experiments, determinism."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from skewloc.analytic import ProcessParams
from skewloc.errors import ConfigError, ExperimentError
from skewloc.harness import (
    ExperimentConfig,
    clt_statistics,
    fit_rate,
    joint_bin_probabilities,
    ks_distance,
    resolve_constants,
    run_clt_experiment,
    run_consistency_experiment,
    run_rate_experiment,
    run_sampler_checks,
)

OBM12 = ProcessParams.oscillating(1.0, 2.0)


# -- helpers -----------------------------------------------------------------------


class TestKSDistance:
    def test_single_point(self):
        assert ks_distance([0.5], lambda x: np.clip(x, 0, 1)) == pytest.approx(0.5)

    def test_quantile_sample_is_minimal(self):
        m = 1000
        x = stats.norm.ppf((np.arange(m) + 0.5) / m)
        assert ks_distance(x) == pytest.approx(0.5 / m, rel=1e-9)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=200))
    def test_matches_scipy(self, xs):
        assert ks_distance(xs) == pytest.approx(stats.kstest(xs, "norm").statistic, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            ks_distance([])


class TestFitRate:
    def test_power_law(self):
        ns = 2.0 ** np.arange(8, 17)
        slope, se = fit_rate(ns, 3.0 * ns**-0.25)
        assert slope == pytest.approx(-0.25, abs=1e-12)
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_flat(self):
        slope, _ = fit_rate([10, 100, 1000], [1.0, 1.0, 1.0])
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_noisy_slope_se(self):
        rng = np.random.default_rng(0)
        ns = 2.0 ** np.arange(8, 17)
        slope, se = fit_rate(ns, ns**-0.25 * np.exp(0.05 * rng.standard_normal(ns.size)))
        assert abs(slope + 0.25) < 4 * se

    def test_errors(self):
        with pytest.raises(ExperimentError):
            fit_rate([1, 1, 2], [1, 2, 3])
        with pytest.raises(ExperimentError):
            fit_rate([1, 2, 3], [1, 0, 3])


def test_clt_statistics_by_hand():
    eps = np.array([1.2, 0.5, 0.0])
    lt = np.array([1.0, 0.25, 0.0])
    z, excluded = clt_statistics(eps, lt, 16, 1.0, 4.0, 1e-3)
    np.testing.assert_allclose(z, [2 * 0.2 / 2.0, 2 * 0.25 / 1.0])
    assert excluded == 1
    with pytest.raises(ExperimentError):
        clt_statistics(eps, np.zeros(3), 16, 1.0, 4.0, 1e-3)


def test_joint_bin_probabilities_uniform():
    probs = joint_bin_probabilities(lambda y, l: np.ones_like(y * l), [0, 0.5, 1], [0, 0.25, 1])
    np.testing.assert_allclose(probs, [[0.125, 0.375], [0.125, 0.375]])


# -- configuration ---------------------------------------------------------------


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig(OBM12)
        assert cfg.kernel_name == "h1x2" and cfg.n_list == (4096,)
        assert cfg.start == 0.0 and cfg.eval_time == 1.0
        assert ExperimentConfig(OBM12, estimator="crossing").kernel_name == "h0"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 1},
            {"n_paths": 1},
            {"T": 0.0},
            {"t_eval": 2.0},
            {"constants": "guess"},
            {"constants": "supplied", "c": 1.0},
            {"chunk_paths": 0},
            {"localtime_floor": -1.0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(OBM12, **kwargs)

    def test_unknown_estimator(self):
        with pytest.raises(ValueError):
            ExperimentConfig(OBM12, estimator="magic")

    def test_non_integer_steps(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(OBM12, n=3, T=0.5).steps_for(3)

    def test_resolve_constants(self):
        assert resolve_constants(ExperimentConfig(OBM12, constants="supplied", c=2.0, K=3.0)) == (2.0, 3.0, "supplied")
        c, K, src = resolve_constants(ExperimentConfig(OBM12))
        assert (c, src) == (1.0, "closed_form") and K == pytest.approx(3.546154, abs=1e-5)
        c, K, src = resolve_constants(ExperimentConfig(OBM12, estimator="crossing"))
        assert src == "numeric" and c == pytest.approx(2 / 3 * math.sqrt(2 / math.pi))
        c, K, src = resolve_constants(ExperimentConfig(OBM12, estimator="crossing"), need_K=False)
        assert src == "unavailable" and K is None


# -- experiments -----------------------------------------------------------------


def small_clt(params=OBM12, **kw):
    kw.setdefault("n", 1024)
    kw.setdefault("n_paths", 400)
    kw.setdefault("seed", 5)
    return ExperimentConfig(params, **kw)


def test_clt_worker_and_chunk_independence():
    cfg = small_clt(chunk_paths=37)
    a = run_clt_experiment(cfg, workers=1)
    b = run_clt_experiment(cfg, workers=2)
    c = run_clt_experiment(small_clt(chunk_paths=400), workers=1)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.z, c.z)


def test_seed_changes_result():
    a = run_clt_experiment(small_clt(seed=1))
    b = run_clt_experiment(small_clt(seed=2))
    assert not np.array_equal(a.z, b.z)


def test_closed_form_and_numeric_constants_agree():
    a = run_clt_experiment(small_clt(constants="closed_form"))
    b = run_clt_experiment(small_clt(constants="numeric"))
    assert a.constants_source == "closed_form" and b.constants_source == "numeric"
    assert abs(a.ks - b.ks) < 0.01


def test_inflated_variance_constant_shrinks_z():
    c, K, _ = resolve_constants(small_clt())
    good = run_clt_experiment(small_clt(n_paths=1000, constants="supplied", c=c, K=K))
    bad = run_clt_experiment(small_clt(n_paths=1000, constants="supplied", c=c, K=4 * K))
    np.testing.assert_allclose(bad.z, good.z / 2, rtol=1e-12)
    assert bad.variance == pytest.approx(0.25 * good.variance, rel=1e-12)
    assert 0.85 <= good.variance <= 1.15


def test_far_start_excludes_every_path():
    with pytest.raises(ExperimentError):
        run_clt_experiment(small_clt(x0=12.0, n_paths=20))


@pytest.mark.parametrize(
    "params",
    [ProcessParams.skew(0.5), OBM12],
    ids=["sbm0.5", "obm12"],
)
def test_crossing_variance_constant_by_monte_carlo(params):
    # The series-assembled crossing K has no closed form; the normalised
    # statistic must have unit variance when it is used.
    res = run_clt_experiment(
        ExperimentConfig(params, estimator="crossing", n=4096, n_paths=2000, seed=3, constants="numeric")
    )
    assert 0.85 <= res.variance <= 1.15
    assert res.ks <= 0.06


def test_miscalibrated_limit_constant_is_inconsistent():
    cfg = ExperimentConfig(ProcessParams.skew(0.5), estimator="crossing", n=(256, 1024, 4096), n_paths=200, seed=2)
    good = run_consistency_experiment(cfg)
    bad = run_consistency_experiment(cfg, c=0.0)
    assert good.strictly_decreasing()
    assert min(bad.medians) > 2 * max(good.medians)


def test_rate_table_structure():
    cfg = ExperimentConfig(OBM12, n=(64, 256, 1024), n_paths=200, seed=4)
    table = run_rate_experiment(cfg)
    assert [r[0] for r in table.rows] == [64, 256, 1024]
    assert table.slope < 0
    with pytest.raises(ExperimentError):
        run_rate_experiment(ExperimentConfig(OBM12, n=(64, 256), n_paths=20))


def test_sampler_checks_small():
    out = run_sampler_checks(seed=3, draws=20_000, joint_draws=100_000)
    assert len(out["steps"]) == 6
    assert all(s["ks"] < 1.63 / math.sqrt(20_000) for s in out["steps"])
    assert all(j["p_value"] > 0.001 for j in out["joint"])
