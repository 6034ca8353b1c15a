"""Confidence intervals for the true agreement prediction, and prediction
intervals for a new response.

Six confidence-interval constructions are provided for the population
agreement prediction at a point x0:

* asymptotic-normal — plug-in closed-form standard error;
* jackknife — normal quantile times the leave-one-out standard error;
* bootstrap-se — normal quantile times the bootstrap standard error;
* bootstrap-t — studentized bootstrap, each replicate's pivot scaled by
  its own inner-bootstrap standard error;
* percentile — empirical quantiles of the replicate values;
* bca — percentile endpoints shifted by a bias correction z0 and an
  acceleration a_hat estimated from jackknife skewness.

Empirical quantiles use the k-th order statistic with k = ceil(q B),
clamped to [1, B], so quantile-based endpoints always lie inside the
replicate range.  Normal (z) quantiles are used throughout, never
Student-t.  Prediction intervals for a new observation Y(x0) are centered
on the least-squares prediction for both bases; the agreement basis pays
for its extra variability with a wider band.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.stats import norm

from . import rng as _rng
from .avar import avar_normal
from .errors import (
    BCaDegenerate,
    DegenerateAgreement,
    ExcessiveResampleFailure,
    MaxagreeError,
)
from .moments import Dataset, MomentSummary, mahalanobis_sq
from .predictor import PredictorKind, fit, population_malp
from .resample import (
    MAX_FAILURE_FRACTION,
    ResamplePlan,
    _bootstrap_raw,
    jackknife_se,
)

__all__ = [
    "IntervalMethod",
    "IntervalEstimate",
    "IntervalDiagnostics",
    "CoverageResult",
    "ci",
    "coverage_table",
    "pi",
    "coverage_probe",
    "CI_METHODS",
]


class IntervalMethod(str, Enum):
    ASYMP_NORMAL = "asymptotic"
    JACKKNIFE = "jackknife"
    BOOTSTRAP_SE = "bootstrap-se"
    BOOTSTRAP_T = "bootstrap-t"
    PERCENTILE = "percentile"
    BCA = "bca"
    PI_MALP = "pi-malp"
    PI_LSLP = "pi-lslp"

    @classmethod
    def parse(cls, value: Union[str, "IntervalMethod"]) -> "IntervalMethod":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        aliases = {
            "asymp-normal": cls.ASYMP_NORMAL,
            "asymptotic-normal": cls.ASYMP_NORMAL,
            "boot": cls.BOOTSTRAP_SE,
            "boot-t": cls.BOOTSTRAP_T,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown interval method {value!r}") from None


# The six confidence-interval constructions, in canonical report order.
CI_METHODS = (
    IntervalMethod.ASYMP_NORMAL,
    IntervalMethod.JACKKNIFE,
    IntervalMethod.BOOTSTRAP_SE,
    IntervalMethod.BOOTSTRAP_T,
    IntervalMethod.PERCENTILE,
    IntervalMethod.BCA,
)

_BOOTSTRAP_METHODS = frozenset(
    {
        IntervalMethod.BOOTSTRAP_SE,
        IntervalMethod.BOOTSTRAP_T,
        IntervalMethod.PERCENTILE,
        IntervalMethod.BCA,
    }
)

_QUANTILE_METHODS = frozenset(
    {IntervalMethod.BOOTSTRAP_T, IntervalMethod.PERCENTILE, IntervalMethod.BCA}
)


@dataclass(frozen=True)
class IntervalDiagnostics:
    z0: Optional[float] = None
    a_hat: Optional[float] = None
    n_failed: int = 0
    z0_clamped: bool = False


@dataclass(eq=False)
class IntervalEstimate:
    lower: float
    upper: float
    level: float
    method: IntervalMethod
    center: float
    se: Optional[float] = None
    diagnostics: Optional[IntervalDiagnostics] = None

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level}")
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _z_half_alpha(level: float) -> float:
    return float(norm.ppf(1.0 - (1.0 - level) / 2.0))


def _order_statistic(sorted_values: np.ndarray, q: float) -> float:
    """k-th order statistic with k = ceil(q B), clamped to [1, B]."""
    b = sorted_values.size
    k = min(max(int(math.ceil(q * b)), 1), b)
    return float(sorted_values[k - 1])


def _percentile_interval(values: np.ndarray, level: float):
    alpha = 1.0 - level
    sorted_values = np.sort(values)
    return (
        _order_statistic(sorted_values, alpha / 2.0),
        _order_statistic(sorted_values, 1.0 - alpha / 2.0),
    )


def _bca_interval(values: np.ndarray, jackknife_values: np.ndarray, estimate: float, level: float):
    """BCa endpoints plus (z0, a_hat, clamped flag)."""
    b = values.size
    if np.ptp(values) == 0.0:
        raise BCaDegenerate("all bootstrap replicates are identical")
    frac = float(np.count_nonzero(values < estimate)) / b
    clamped = False
    if frac <= 0.0 or frac >= 1.0:
        frac = 1.0 / (b + 1) if frac <= 0.0 else b / (b + 1.0)
        clamped = True
    z0 = float(norm.ppf(frac))
    dev = jackknife_values - jackknife_values.mean()
    denom = float(np.sum(dev**2))
    if denom == 0.0:
        raise BCaDegenerate("jackknife replicates are constant; acceleration undefined")
    a_hat = float(np.sum(dev**3) / (6.0 * denom**1.5))
    z = _z_half_alpha(level)
    sorted_values = np.sort(values)
    alpha = 1.0 - level

    def adjusted(offset: float, plain: float) -> float:
        if z0 == 0.0 and a_hat == 0.0:
            # Degenerates to the plain percentile quantile exactly, without
            # the one-ulp noise of a cdf(ppf(.)) round trip.
            return plain
        u = z0 + offset
        return float(norm.cdf(z0 + u / (1.0 - a_hat * u)))

    lo = _order_statistic(sorted_values, adjusted(-z, alpha / 2.0))
    hi = _order_statistic(sorted_values, adjusted(+z, 1.0 - alpha / 2.0))
    return lo, hi, z0, a_hat, clamped


def _ci_bundle(data, x0, level, plan, methods):
    """Build several CI constructions from shared components.

    One fit, at most one jackknife pass, and at most one bootstrap run
    serve every requested method; per-method failures are captured as the
    typed error instance so siblings still come out.  Returns a dict
    mapping each method to an IntervalEstimate or a MaxagreeError.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    x0 = np.asarray(x0, dtype=float).ravel()
    model = fit(data, PredictorKind.MALP)
    estimate = model.predict(x0)
    z = _z_half_alpha(level)
    out = {}

    need_jack = IntervalMethod.JACKKNIFE in methods or IntervalMethod.BCA in methods
    jack_se_value = jack_reps = None
    if need_jack:
        jack_se_value, jack_reps = jackknife_se(data, x0, PredictorKind.MALP)

    if IntervalMethod.ASYMP_NORMAL in methods:
        try:
            se = math.sqrt(avar_normal(model.summary, x0, PredictorKind.MALP) / data.n)
            out[IntervalMethod.ASYMP_NORMAL] = IntervalEstimate(
                estimate - z * se, estimate + z * se, level,
                IntervalMethod.ASYMP_NORMAL, estimate, se,
            )
        except MaxagreeError as exc:
            out[IntervalMethod.ASYMP_NORMAL] = exc

    if IntervalMethod.JACKKNIFE in methods:
        out[IntervalMethod.JACKKNIFE] = IntervalEstimate(
            estimate - z * jack_se_value, estimate + z * jack_se_value, level,
            IntervalMethod.JACKKNIFE, estimate, jack_se_value,
        )

    boot_methods = [m for m in methods if m in _BOOTSTRAP_METHODS]
    if not boot_methods:
        return out
    if plan is None:
        raise ValueError(
            f"method {boot_methods[0].value} requires a ResamplePlan"
        )
    for m in boot_methods:
        if m in _QUANTILE_METHODS and plan.b_outer < 1000:
            warnings.warn(
                f"{m.value}: b_outer = {plan.b_outer} < 1000 gives unstable quantiles",
                stacklevel=3,
            )
    with_inner = IntervalMethod.BOOTSTRAP_T in methods
    values, ok, inner_se = _bootstrap_raw(
        data, x0, plan, PredictorKind.MALP, with_inner=with_inner
    )
    n_failed = int((~ok).sum())
    good = values[ok]

    def outer_guard():
        _raise_if_excessive(n_failed, plan.b_outer)
        if good.size < 2:
            raise ExcessiveResampleFailure("fewer than two successful replicates")

    if IntervalMethod.BOOTSTRAP_T in methods:
        try:
            usable = ok & np.isfinite(inner_se) & (inner_se > 0)
            t_failed = int((~usable).sum())
            _raise_if_excessive(t_failed, plan.b_outer)
            sigma_bs = float(good.std(ddof=1))
            t_sorted = np.sort((values[usable] - estimate) / inner_se[usable])
            alpha = 1.0 - level
            lo = estimate - _order_statistic(t_sorted, 1.0 - alpha / 2.0) * sigma_bs
            hi = estimate - _order_statistic(t_sorted, alpha / 2.0) * sigma_bs
            out[IntervalMethod.BOOTSTRAP_T] = IntervalEstimate(
                lo, hi, level, IntervalMethod.BOOTSTRAP_T, estimate, sigma_bs,
                IntervalDiagnostics(n_failed=t_failed),
            )
        except MaxagreeError as exc:
            out[IntervalMethod.BOOTSTRAP_T] = exc

    if IntervalMethod.BOOTSTRAP_SE in methods:
        try:
            outer_guard()
            se = float(good.std(ddof=1))
            out[IntervalMethod.BOOTSTRAP_SE] = IntervalEstimate(
                estimate - z * se, estimate + z * se, level,
                IntervalMethod.BOOTSTRAP_SE, estimate, se,
                IntervalDiagnostics(n_failed=n_failed),
            )
        except MaxagreeError as exc:
            out[IntervalMethod.BOOTSTRAP_SE] = exc

    if IntervalMethod.PERCENTILE in methods:
        try:
            outer_guard()
            lo, hi = _percentile_interval(good, level)
            out[IntervalMethod.PERCENTILE] = IntervalEstimate(
                lo, hi, level, IntervalMethod.PERCENTILE, estimate, None,
                IntervalDiagnostics(n_failed=n_failed),
            )
        except MaxagreeError as exc:
            out[IntervalMethod.PERCENTILE] = exc

    if IntervalMethod.BCA in methods:
        try:
            outer_guard()
            lo, hi, z0, a_hat, clamped = _bca_interval(good, jack_reps, estimate, level)
            out[IntervalMethod.BCA] = IntervalEstimate(
                lo, hi, level, IntervalMethod.BCA, estimate, None,
                IntervalDiagnostics(z0=z0, a_hat=a_hat, n_failed=n_failed, z0_clamped=clamped),
            )
        except MaxagreeError as exc:
            out[IntervalMethod.BCA] = exc

    return out


def ci(
    data: Dataset,
    x0,
    level: float = 0.95,
    method: Union[str, IntervalMethod] = IntervalMethod.ASYMP_NORMAL,
    plan: Optional[ResamplePlan] = None,
) -> IntervalEstimate:
    """Confidence interval for the population agreement prediction at x0.

    ``plan`` is required for the bootstrap-backed methods.  Quantile-based
    methods (bootstrap-t, percentile, bca) warn when the plan has fewer
    than 1000 replicates.
    """
    method = IntervalMethod.parse(method)
    if method in {IntervalMethod.PI_MALP, IntervalMethod.PI_LSLP}:
        raise ValueError("use pi() for prediction intervals")
    result = _ci_bundle(data, x0, level, plan, [method])[method]
    if isinstance(result, MaxagreeError):
        raise result
    return result


def _raise_if_excessive(n_failed: int, total: int) -> None:
    if n_failed > MAX_FAILURE_FRACTION * total:
        raise ExcessiveResampleFailure(
            f"{n_failed} of {total} replicates unusable (> {MAX_FAILURE_FRACTION:.0%})"
        )


def pi(
    data: Dataset,
    x0,
    level: float = 0.95,
    basis: Union[str, PredictorKind] = PredictorKind.MALP,
) -> IntervalEstimate:
    """Prediction interval for a new observation Y(x0).

    Both bases are centered on the least-squares prediction (the
    agreement prediction plus its bias correction lands there exactly);
    the agreement basis is at least as wide.
    """
    basis = PredictorKind.parse(basis)
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    x0 = np.asarray(x0, dtype=float).ravel()
    model = fit(data, PredictorKind.MALP)
    summary = model.summary
    gamma = model.gamma
    if gamma >= 1.0:
        raise DegenerateAgreement("multiple correlation is 1; residual variance vanishes")
    n = summary.n
    z = _z_half_alpha(level)
    sd_resid = math.sqrt(summary.var_y * (1.0 - gamma**2))

    if basis is PredictorKind.MALP:
        estimate = model.predict(x0)
        beta_ls = model.companion.coefficients
        bias = (1.0 - 1.0 / gamma) * float((x0 - summary.mean_x) @ beta_ls)
        center = estimate + bias
        d_ma_sq = avar_normal(summary, x0, PredictorKind.MALP) / (
            summary.var_y * (1.0 - gamma**2)
        )
        half = z * sd_resid * math.sqrt(1.0 + d_ma_sq / n)
        method = IntervalMethod.PI_MALP
    else:
        center = model.companion.predict(x0)
        maha = mahalanobis_sq(x0, summary)
        half = z * sd_resid * math.sqrt(1.0 + (1.0 + maha) / n)
        method = IntervalMethod.PI_LSLP

    return IntervalEstimate(center - half, center + half, level, method, center, half / z)


@dataclass(eq=False)
class CoverageResult:
    """Monte Carlo coverage and standardized length of one CI method."""

    method: IntervalMethod
    level: float
    n: int
    reps: int
    coverage: float
    coverage_se: float
    mean_std_length: float
    length_se: float
    n_failed: int
    true_value: float

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "level": self.level,
            "n": self.n,
            "reps": self.reps,
            "coverage": self.coverage,
            "coverage_se": self.coverage_se,
            "mean_std_length": self.mean_std_length,
            "length_se": self.length_se,
            "n_failed": self.n_failed,
            "true_value": self.true_value,
        }


def _coverage_rep(args):
    truth, x0, methods, level, n, plan, rep = args
    data_rng = _rng.stream(plan.seed, rep, 0)
    rows = _rng.mvn_rows(truth.joint_mean(), truth.joint_cov(), n, data_rng)
    data = Dataset(rows[:, :-1], rows[:, -1])
    rep_seed = int(np.random.SeedSequence([plan.seed, rep, 1]).generate_state(1)[0])
    rep_plan = ResamplePlan(seed=rep_seed, b_outer=plan.b_outer, b_inner=plan.b_inner)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            bundle = _ci_bundle(data, x0, level, rep_plan, methods)
    except MaxagreeError:
        return [None] * len(methods)
    out = []
    for m in methods:
        est = bundle[m]
        out.append(None if isinstance(est, MaxagreeError) else (est.lower, est.upper))
    return out


def coverage_table(
    truth: MomentSummary,
    x0,
    methods,
    level: float,
    n: int,
    reps: int,
    plan: ResamplePlan,
    n_jobs: Optional[int] = None,
) -> "list[CoverageResult]":
    """Coverage and standardized length for several CI methods at once.

    Replication r draws its data from stream (seed, r, 0) and derives its
    resampling seed from (seed, r, 1), exactly as the single-method probe
    does, so per-method results are identical to separate probes while
    sharing the bootstrap work.
    """
    methods = [IntervalMethod.parse(m) for m in methods]
    if reps < 100:
        raise ValueError(f"reps must be >= 100, got {reps}")
    true_value = population_malp(truth).predict(np.asarray(x0, dtype=float).ravel())
    tasks = [(truth, x0, methods, level, n, plan, rep) for rep in range(reps)]
    if n_jobs and n_jobs != 1:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=n_jobs, batch_size=16)(
            delayed(_coverage_rep)(t) for t in tasks
        )
    else:
        rows = [_coverage_rep(t) for t in tasks]

    results = []
    sqrt_n = math.sqrt(n)
    for j, method in enumerate(methods):
        bounds = np.array([row[j] for row in rows if row[j] is not None])
        n_failed = reps - bounds.shape[0]
        if n_failed > MAX_FAILURE_FRACTION * reps:
            raise ExcessiveResampleFailure(
                f"{n_failed} of {reps} coverage replications failed for {method.value}"
            )
        hits = (bounds[:, 0] <= true_value) & (true_value <= bounds[:, 1])
        lengths = (bounds[:, 1] - bounds[:, 0]) * sqrt_n
        m = hits.size
        coverage = float(hits.mean())
        results.append(
            CoverageResult(
                method=method,
                level=level,
                n=n,
                reps=reps,
                coverage=coverage,
                coverage_se=float(math.sqrt(coverage * (1.0 - coverage) / m)),
                mean_std_length=float(lengths.mean()),
                length_se=float(lengths.std(ddof=1) / math.sqrt(m)),
                n_failed=n_failed,
                true_value=float(true_value),
            )
        )
    return results


def coverage_probe(
    truth: MomentSummary,
    x0,
    method: Union[str, IntervalMethod],
    level: float,
    n: int,
    reps: int,
    plan: ResamplePlan,
    n_jobs: Optional[int] = None,
) -> CoverageResult:
    """Empirical coverage and mean sqrt(n)-standardized length of one CI method.

    Draws ``reps`` samples of size n from the population ``truth``, builds
    the CI for the agreement prediction at x0 in each, and reports the
    fraction containing the true value together with Monte Carlo standard
    errors.
    """
    return coverage_table(truth, x0, [method], level, n, reps, plan, n_jobs)[0]
