import numpy as np
import pytest
from scipy.stats import norm

from maxagree import (
    Dataset,
    IntervalMethod,
    PARAMETER_SETS,
    ResamplePlan,
    bootstrap_replicates,
    ci,
    coverage_probe,
    fit,
    pi,
    table_set_dataset,
)
from maxagree.errors import BCaDegenerate, DegenerateAgreement
from maxagree.intervals import CI_METHODS, _bca_interval, _order_statistic, _percentile_interval

from conftest import random_dataset

X0 = [6.05]


@pytest.fixture(scope="module")
def data200():
    return table_set_dataset(1, 200, seed=404)


class TestSymmetryAndMonotonicity:
    @pytest.mark.parametrize("method", ["asymptotic", "jackknife", "bootstrap-se"])
    def test_symmetric_about_estimate(self, data200, method):
        plan = ResamplePlan(seed=3, b_outer=400)
        est = ci(data200, X0, 0.95, method, plan)
        model = fit(data200, "malp")
        assert (est.lower + est.upper) / 2 == pytest.approx(model.predict(X0), abs=1e-10)
        assert est.center == pytest.approx(model.predict(X0), abs=1e-12)

    @pytest.mark.parametrize("method", [m.value for m in CI_METHODS])
    def test_monotone_in_level(self, data200, method):
        plan = ResamplePlan(seed=12, b_outer=1200)
        lo, mid, hi = (
            ci(data200, X0, level, method, plan) for level in (0.90, 0.95, 0.99)
        )
        assert hi.lower <= mid.lower <= lo.lower
        assert lo.upper <= mid.upper <= hi.upper


class TestQuantileMachinery:
    def test_order_statistic_convention(self):
        vals = np.sort(np.arange(1.0, 11.0))
        assert _order_statistic(vals, 0.25) == 3.0  # ceil(2.5)
        assert _order_statistic(vals, 0.0) == 1.0  # clamps to first
        assert _order_statistic(vals, 1.0) == 10.0

    def test_percentile_endpoints_are_order_statistics(self, data200):
        plan = ResamplePlan(seed=21, b_outer=1000)
        est = ci(data200, X0, 0.95, "percentile", plan)
        reps = bootstrap_replicates(data200, X0, plan)
        lo, hi = _percentile_interval(reps.values, 0.95)
        assert est.lower == lo and est.upper == hi
        assert est.lower >= reps.values.min() and est.upper <= reps.values.max()

    def test_bca_within_replicate_range(self, data200):
        plan = ResamplePlan(seed=22, b_outer=1000)
        est = ci(data200, X0, 0.95, "bca", plan)
        reps = bootstrap_replicates(data200, X0, plan)
        assert reps.values.min() <= est.lower <= est.upper <= reps.values.max()
        assert est.diagnostics.z0 is not None and est.diagnostics.a_hat is not None

    def test_bca_reduces_to_percentile_when_symmetric(self):
        rng = np.random.default_rng(5)
        half = rng.uniform(0.5, 2.0, size=500)
        center = 10.0
        values = np.concatenate([center - half, center + half])
        # Integer-symmetric jackknife values: the cubed deviations cancel
        # exactly in floating point, so a_hat is exactly zero.
        jack = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) + center
        lo, hi, z0, a_hat, clamped = _bca_interval(values, jack, center, 0.95)
        assert z0 == 0.0 and a_hat == 0.0 and not clamped
        plo, phi = _percentile_interval(values, 0.95)
        assert lo == plo and hi == phi

    def test_bca_boundary_clamps_with_flag(self):
        values = np.linspace(5.0, 6.0, 200)
        jack = np.array([0.0, 0.5, 1.0, 1.5])
        lo, hi, z0, a_hat, clamped = _bca_interval(values, jack, 4.0, 0.95)
        assert clamped and np.isfinite(z0)

    def test_bca_degenerate_cases(self):
        with pytest.raises(BCaDegenerate):
            _bca_interval(np.full(100, 3.0), np.array([0.0, 1.0]), 3.0, 0.95)
        with pytest.raises(BCaDegenerate):
            _bca_interval(np.linspace(0, 1, 100), np.full(10, 2.0), 0.5, 0.95)

    def test_small_b_warns_for_quantile_methods(self, data200):
        plan = ResamplePlan(seed=2, b_outer=200)
        with pytest.warns(UserWarning):
            ci(data200, X0, 0.95, "percentile", plan)


class TestBootstrapT:
    def test_basic_properties(self, data200):
        plan = ResamplePlan(seed=77, b_outer=1000, b_inner=30)
        est = ci(data200, X0, 0.95, "bootstrap-t", plan)
        model = fit(data200, "malp")
        point = model.predict(X0)
        assert est.lower < point < est.upper
        assert est.se is not None and est.se > 0
        again = ci(data200, X0, 0.95, "bootstrap-t", plan)
        assert (est.lower, est.upper) == (again.lower, again.upper)

    def test_requires_plan(self, data200):
        with pytest.raises(ValueError):
            ci(data200, X0, 0.95, "bootstrap-t", None)


class TestPredictionIntervals:
    def test_centers_coincide_across_bases(self, rng):
        for _ in range(25):
            data = random_dataset(rng, 60, 2)
            x0 = rng.standard_normal(2)
            a = pi(data, x0, 0.95, "malp")
            b = pi(data, x0, 0.95, "lslp")
            assert a.center == pytest.approx(b.center, abs=1e-10)
            model = fit(data, "lslp")
            assert a.center == pytest.approx(model.predict(x0), abs=1e-10)

    def test_agreement_basis_is_wider(self, rng):
        for _ in range(1000):
            p = int(rng.integers(1, 3))
            data = random_dataset(rng, 40, p)
            x0 = rng.standard_normal(p) * 2
            wide = pi(data, x0, 0.95, "malp").width
            narrow = pi(data, x0, 0.95, "lslp").width
            assert wide >= narrow - 1e-10

    def test_width_shrinks_as_gamma_to_one(self, rng):
        x = np.linspace(0, 4, 100)
        tight = Dataset(x, 2 + 3 * x + 1e-4 * rng.standard_normal(100))
        loose = Dataset(x, 2 + 3 * x + 2.0 * rng.standard_normal(100))
        assert pi(tight, [2.0], 0.95, "malp").width < 1e-2
        assert pi(tight, [2.0], 0.95, "malp").width < pi(loose, [2.0], 0.95, "malp").width

    def test_exactly_linear_data_degenerate(self):
        x = np.linspace(0, 4, 30)
        with pytest.raises(DegenerateAgreement):
            pi(Dataset(x, 1 + 2 * x), [2.0], 0.95, "malp")

    def test_level_validation(self, data200):
        with pytest.raises(ValueError):
            pi(data200, X0, 1.2, "malp")


class TestCiValidation:
    def test_unknown_method(self, data200):
        with pytest.raises(ValueError):
            ci(data200, X0, 0.95, "magic")

    def test_pi_methods_rejected(self, data200):
        with pytest.raises(ValueError):
            ci(data200, X0, 0.95, IntervalMethod.PI_MALP)

    def test_level_out_of_range(self, data200):
        with pytest.raises(ValueError):
            ci(data200, X0, 0.0, "asymptotic")


class TestCoverageProbe:
    def test_half_level_sanity(self):
        truth = PARAMETER_SETS[1].summary(rho=0.7)
        plan = ResamplePlan(seed=55, b_outer=2)
        res = coverage_probe(truth, X0, "asymptotic", 0.5, n=400, reps=400, plan=plan)
        assert res.coverage == pytest.approx(0.5, abs=3 * np.sqrt(0.25 / 400))

    def test_deterministic_and_parallel_invariant(self):
        truth = PARAMETER_SETS[1].summary(rho=0.8)
        plan = ResamplePlan(seed=66, b_outer=2)
        kwargs = dict(
            truth=truth, x0=X0, method="jackknife", level=0.9, n=60, reps=120, plan=plan
        )
        a = coverage_probe(**kwargs)
        b = coverage_probe(**kwargs)
        c = coverage_probe(**kwargs, n_jobs=2)
        assert (a.coverage, a.mean_std_length) == (b.coverage, b.mean_std_length)
        assert (a.coverage, a.mean_std_length) == (c.coverage, c.mean_std_length)

    def test_reps_floor(self):
        truth = PARAMETER_SETS[1].summary()
        with pytest.raises(ValueError):
            coverage_probe(truth, X0, "asymptotic", 0.95, 50, 10, ResamplePlan(seed=1))

    def test_length_se_positive(self):
        truth = PARAMETER_SETS[2].summary()
        res = coverage_probe(
            truth, [8.5], "asymptotic", 0.95, n=100, reps=150, plan=ResamplePlan(seed=9)
        )
        assert res.length_se > 0 and 0.8 < res.coverage <= 1.0


class TestSharedComputation:
    def test_bundle_matches_individual_calls(self, data200):
        from maxagree.intervals import _ci_bundle

        plan = ResamplePlan(seed=17, b_outer=1200)
        bundle = _ci_bundle(data200, X0, 0.95, plan, list(CI_METHODS))
        for method in CI_METHODS:
            single = ci(data200, X0, 0.95, method, plan)
            both = bundle[method]
            assert (single.lower, single.upper) == (both.lower, both.upper), method

    def test_coverage_table_matches_probes(self):
        from maxagree.intervals import coverage_table

        truth = PARAMETER_SETS[1].summary(rho=0.8)
        plan = ResamplePlan(seed=91, b_outer=400)
        methods = ["asymptotic", "jackknife", "percentile"]
        table = coverage_table(truth, X0, methods, 0.9, n=60, reps=150, plan=plan)
        for method, row in zip(methods, table):
            probe = coverage_probe(truth, X0, method, 0.9, n=60, reps=150, plan=plan)
            assert (row.coverage, row.mean_std_length) == (
                probe.coverage,
                probe.mean_std_length,
            )


def test_interval_estimate_validation():
    from maxagree.intervals import IntervalEstimate

    with pytest.raises(ValueError):
        IntervalEstimate(1.0, 0.0, 0.95, IntervalMethod.ASYMP_NORMAL, 0.5)
    with pytest.raises(ValueError):
        IntervalEstimate(0.0, 1.0, 1.5, IntervalMethod.ASYMP_NORMAL, 0.5)


def test_z_quantile_is_normal_not_student():
    data = table_set_dataset(1, 30, seed=2)
    est = ci(data, X0, 0.95, "asymptotic")
    half = (est.upper - est.lower) / 2
    assert half / est.se == pytest.approx(norm.ppf(0.975), rel=1e-12)
