import numpy as np
import pytest

import maxagree.resample as resample_mod
from maxagree import (
    Dataset,
    PARAMETER_SETS,
    ResamplePlan,
    avar_normal,
    bootstrap_replicates,
    bootstrap_se,
    jackknife_replicates,
    jackknife_se,
    mvn_sample,
    table_set_dataset,
)
from maxagree.errors import ExcessiveResampleFailure, TooFewRows
from maxagree.resample import _bootstrap_raw


def linear_dataset(n=25):
    x = np.linspace(-2, 3, n)
    return Dataset(x, 1.5 + 0.8 * x)


class TestResamplePlan:
    def test_validation(self):
        with pytest.raises(ValueError):
            ResamplePlan(seed=1, b_outer=1)
        with pytest.raises(ValueError):
            ResamplePlan(seed=1, b_inner=1)

    def test_defaults(self):
        plan = ResamplePlan(seed=7)
        assert plan.b_outer == 2000 and plan.b_inner == 30


class TestJackknife:
    def test_exactly_linear_data_gives_zero(self):
        se, reps = jackknife_se(linear_dataset(), [1.0])
        assert se == pytest.approx(0.0, abs=1e-10)
        assert np.ptp(reps) < 1e-10

    def test_row_permutation_invariance(self, set1_data):
        se1, _ = jackknife_se(set1_data, [6.05])
        perm = np.random.default_rng(3).permutation(set1_data.n)
        shuffled = Dataset(set1_data.x[perm], set1_data.y[perm])
        se2, _ = jackknife_se(shuffled, [6.05])
        assert se1 == pytest.approx(se2, abs=1e-12)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            jackknife_se(Dataset(np.array([1.0, 2.0, 3.0, 4.0][:3]), [1.0, 2.2, 2.9]), [1.0])

    def test_matches_asymptotic_theory_on_average(self):
        truth = PARAMETER_SETS[1].summary(rho=0.9)
        x0 = [6.05]
        target = np.sqrt(avar_normal(truth, x0, "malp") / 200)
        ses = []
        for rep in range(200):
            data = mvn_sample(truth.joint_mean(), truth.joint_cov(), 200, seed=1000 + rep)
            ses.append(jackknife_se(data, x0)[0])
        assert np.mean(ses) == pytest.approx(target, rel=0.15)

    def test_replicates_match_direct_refits(self, set1_data):
        from maxagree import fit, predict

        reps = jackknife_replicates(set1_data, [7.0])
        for j in (0, 57, 199):
            keep = np.ones(set1_data.n, dtype=bool)
            keep[j] = False
            model = fit(Dataset(set1_data.x[keep], set1_data.y[keep]), "malp")
            assert reps[j] == pytest.approx(predict(model, [7.0]), abs=1e-10)


class TestBootstrap:
    def test_same_seed_bitwise_identical(self, set1_data):
        plan = ResamplePlan(seed=99, b_outer=100)
        a = bootstrap_replicates(set1_data, [6.0], plan)
        b = bootstrap_replicates(set1_data, [6.0], plan)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.n_failed == b.n_failed

    def test_different_seed_differs(self, set1_data):
        a = bootstrap_replicates(set1_data, [6.0], ResamplePlan(seed=1, b_outer=50))
        b = bootstrap_replicates(set1_data, [6.0], ResamplePlan(seed=2, b_outer=50))
        assert not np.array_equal(a.values, b.values)

    def test_linear_data_replicates_constant(self):
        data = linear_dataset()
        plan = ResamplePlan(seed=5, b_outer=200)
        res = bootstrap_replicates(data, [1.0], plan)
        point = 1.5 + 0.8 * 1.0
        np.testing.assert_allclose(res.values, point, atol=1e-8)
        assert bootstrap_se(data, [1.0], plan) == pytest.approx(0.0, abs=1e-8)

    def test_close_to_jackknife_same_data(self):
        data = table_set_dataset(1, 200, seed=17)
        x0 = [6.05]
        bs = bootstrap_se(data, x0, ResamplePlan(seed=31, b_outer=200))
        jk, _ = jackknife_se(data, x0)
        assert bs == pytest.approx(jk, rel=0.20)

    def test_matches_asymptotic_theory_on_average(self):
        truth = PARAMETER_SETS[1].summary(rho=0.5)
        x0 = [6.05]
        target = np.sqrt(avar_normal(truth, x0, "malp") / 100)
        ses = []
        for rep in range(200):
            data = mvn_sample(truth.joint_mean(), truth.joint_cov(), 100, seed=4000 + rep)
            ses.append(bootstrap_se(data, x0, ResamplePlan(seed=rep, b_outer=200)))
        assert np.mean(ses) == pytest.approx(target, rel=0.20)

    def test_doubling_b_is_stable(self):
        data = table_set_dataset(1, 100, seed=23)
        x0 = [5.5]
        se1 = bootstrap_se(data, x0, ResamplePlan(seed=11, b_outer=200))
        se2 = bootstrap_se(data, x0, ResamplePlan(seed=11, b_outer=400))
        assert abs(se2 - se1) / se1 < 0.10

    def test_nonnegative(self, set1_data):
        assert bootstrap_se(set1_data, [4.0], ResamplePlan(seed=2, b_outer=100)) >= 0.0
        assert jackknife_se(set1_data, [4.0])[0] >= 0.0


class TestFailurePolicy:
    def test_pervasive_failures_error(self):
        # Five identical predictor values plus one distinct: resamples
        # missing the distinct row have a singular predictor covariance.
        x = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 2.0])
        y = np.array([0.1, 1.9, 1.2, 0.4, 1.1, 3.0])
        data = Dataset(x, y)
        with pytest.raises(ExcessiveResampleFailure):
            bootstrap_replicates(data, [1.5], ResamplePlan(seed=8, b_outer=200))

    def test_failures_are_detected_and_excluded(self, monkeypatch):
        x = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 2.0])
        y = np.array([0.1, 1.9, 1.2, 0.4, 1.1, 3.0])
        data = Dataset(x, y)
        plan = ResamplePlan(seed=8, b_outer=200)
        values, ok, _ = _bootstrap_raw(data, [1.5], plan)
        assert 0 < (~ok).sum() < plan.b_outer
        monkeypatch.setattr(resample_mod, "MAX_FAILURE_FRACTION", 1.0)
        res = bootstrap_replicates(data, [1.5], plan)
        assert res.n_failed == int((~ok).sum())
        assert res.values.size == plan.b_outer - res.n_failed
        np.testing.assert_array_equal(res.values, values[ok])

    def test_consistency_trend_with_n(self):
        truth = PARAMETER_SETS[1].summary(rho=0.7)
        x0 = [6.05]
        jk_medians, bs_medians = [], []
        for n in (100, 400, 1600):
            target = np.sqrt(avar_normal(truth, x0, "malp") / n)
            jk_errs, bs_errs = [], []
            for rep in range(30):
                data = mvn_sample(truth.joint_mean(), truth.joint_cov(), n, seed=700 + 13 * rep)
                se, _ = jackknife_se(data, x0)
                jk_errs.append(abs(se - target) / target)
                bs = bootstrap_se(data, x0, ResamplePlan(seed=rep, b_outer=200))
                bs_errs.append(abs(bs - target) / target)
            jk_medians.append(np.median(jk_errs))
            bs_medians.append(np.median(bs_errs))
        assert jk_medians[2] < jk_medians[0]
        assert bs_medians[2] < bs_medians[0]
