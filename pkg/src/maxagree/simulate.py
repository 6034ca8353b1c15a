"""Multivariate normal sampling and Monte Carlo experiment drivers.

Four studies are wired up:

* ``sampling``: sampling distribution of the estimated predictors across
  a (correlation, sample size) grid, against their asymptotic mean and
  variance approximations, with histogram data at a designated point;
* ``predictive``: train/test comparison of the agreement and
  least-squares predictors under the three canonical bivariate parameter
  sets;
* ``coverage``: empirical coverage and standardized length of the six
  confidence-interval constructions at a fixed p = 2 configuration;
* ``fixed-locations``: sampling distributions at points a fixed number of
  predictor standard deviations from the mean, with theoretical normal
  quantiles for boxplot-style comparison.

Every driver consumes a :class:`SimulationConfig` and emits a
:class:`SimulationReport` whose cells are plain dictionaries ready for
JSON serialization.  Reports are bit-reproducible from (config, seed):
each grid cell draws from its own counter-based stream and chunked
generation uses per-chunk substreams, so neither parallelism nor chunk
size can change the numbers.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from . import rng as _rng
from ._batch import batch_avar_ma, batch_fits, batch_moments, batch_predict
from .avar import avar_normal
from .errors import DimensionMismatch, ExcessiveResampleFailure
from .intervals import CI_METHODS, IntervalMethod, ResamplePlan, coverage_table
from .moments import Dataset, MomentSummary, multiple_correlation
from .predictor import PredictorKind, population_lslp, population_malp
from .resample import MAX_FAILURE_FRACTION

__all__ = [
    "BivariateParams",
    "PARAMETER_SETS",
    "PredictionPoints",
    "SimulationConfig",
    "SimulationReport",
    "mvn_sample",
    "table_set_dataset",
    "decile_points",
    "contour_points",
    "separation_statistic",
    "histogram_fd",
    "coverage_study_truth",
    "trivariate_truth",
    "COVERAGE_POINT",
    "experiment_sampling_distribution",
    "experiment_predictive_comparison",
    "experiment_coverage",
    "experiment_fixed_locations",
    "run_experiment",
]


@dataclass(frozen=True)
class BivariateParams:
    """The five parameters of a bivariate normal population."""

    mean_x: float
    mean_y: float
    sd_x: float
    sd_y: float
    rho: float

    def summary(self, rho: Optional[float] = None) -> MomentSummary:
        return MomentSummary.bivariate(
            self.mean_x, self.mean_y, self.sd_x, self.sd_y,
            self.rho if rho is None else rho,
        )


# Canonical bivariate parameter sets used throughout the studies.
PARAMETER_SETS: Dict[int, BivariateParams] = {
    1: BivariateParams(5.0, 5.0, 2.0, 4.0, 0.816),
    2: BivariateParams(8.0, 4.0, 3.0, 3.0, 0.5),
    3: BivariateParams(9.0, 1.0, 4.0, 2.0, 0.3),
}


def mvn_sample(mean, cov, n: int, seed: int) -> Dataset:
    """Seeded multivariate normal sample; the last column is the response."""
    rows = _rng.mvn_rows(np.asarray(mean, float), np.asarray(cov, float), n, _rng.stream(seed))
    return Dataset(rows[:, :-1], rows[:, -1])


def table_set_dataset(set_id: int, n: int, seed: int) -> Dataset:
    """Synthetic fixture: n rows from one of the canonical parameter sets."""
    truth = PARAMETER_SETS[int(set_id)].summary()
    return mvn_sample(truth.joint_mean(), truth.joint_cov(), n, seed)


def decile_points(mu: float, sigma: float) -> np.ndarray:
    """Deciles of N(mu, sigma^2): mu + sigma * Phi^{-1}(k/10), k = 1..9."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return mu + sigma * norm.ppf(np.arange(1, 10) / 10.0)


def contour_points(
    mean,
    cov,
    distances: Sequence[float],
    slope_seed: int = 0,
    slope: Optional[float] = None,
) -> np.ndarray:
    """p = 2 points on given squared-Mahalanobis contours along one ray.

    The ray leaves the mean with positive slope u1/u2 where (u1, u2) are
    seeded uniforms unless an explicit slope is supplied; each point is
    mean + t u with t the positive root of t^2 u' cov^{-1} u = d.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    cov = np.asarray(cov, dtype=float)
    if mean.size != 2 or cov.shape != (2, 2):
        raise DimensionMismatch("contour_points requires p = 2")
    if slope is None:
        u1, u2 = _rng.stream(slope_seed).uniform(size=2)
        slope = u1 / u2
    direction = np.array([1.0, slope])
    direction /= np.linalg.norm(direction)
    quad = float(direction @ np.linalg.solve(cov, direction))
    pts = []
    for d in distances:
        if d < 0:
            raise ValueError(f"squared distance must be nonnegative, got {d}")
        t = math.sqrt(d / quad)
        pts.append(mean + t * direction)
    return np.asarray(pts)


# Two-cluster split separation of a single standard normal: halves have
# means +/- sqrt(2/pi) and variance 1 - 2/pi, giving
# 2 sqrt(2/pi) / sqrt(1 - 2/pi).
_NORMAL_SPLIT_SEPARATION = 2.0 * math.sqrt(2.0 / math.pi) / math.sqrt(1.0 - 2.0 / math.pi)


def separation_statistic(values: np.ndarray, min_weight: float = 0.05) -> float:
    """Two-component separation of a 1-D sample, normalized to 1 for a normal.

    Splits the sorted sample at the two-cluster point minimizing within
    sums of squares, computes |m1 - m2| / sqrt((s1^2 + s2^2)/2) over the
    halves, and divides by the value a single normal distribution would
    produce under the same split.  Values near 1 mean unimodal-looking;
    values above 1.2 indicate a clear second mode.  Returns 0 when either
    component carries less than ``min_weight`` of the data, since a
    vanishing component is not a visible mode.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    n = v.size
    if n < 4:
        return 0.0
    csum = np.concatenate([[0.0], np.cumsum(v)])
    csq = np.concatenate([[0.0], np.cumsum(v * v)])

    def within_ss(k):  # first k points vs rest
        left = csq[k] - csum[k] ** 2 / k
        right = (csq[n] - csq[k]) - (csum[n] - csum[k]) ** 2 / (n - k)
        return left + right

    ks = np.arange(1, n)
    totals = np.array([within_ss(k) for k in ks])
    k = int(ks[np.argmin(totals)])
    w = min(k, n - k) / n
    if w < min_weight:
        return 0.0
    left, right = v[:k], v[k:]
    m1, m2 = left.mean(), right.mean()
    s1 = left.var(ddof=1) if k > 1 else 0.0
    s2 = right.var(ddof=1) if n - k > 1 else 0.0
    pooled = math.sqrt((s1 + s2) / 2.0)
    if pooled == 0.0:
        return 0.0 if m1 == m2 else float("inf")
    return abs(m2 - m1) / pooled / _NORMAL_SPLIT_SEPARATION


def histogram_fd(values: np.ndarray, min_bins: int = 20):
    """Freedman-Diaconis histogram with a floor on the bin count."""
    v = np.asarray(values, dtype=float).ravel()
    iqr = float(np.subtract(*np.percentile(v, [75, 25])))
    span = float(v.max() - v.min())
    if iqr > 0 and span > 0:
        width = 2.0 * iqr / v.size ** (1.0 / 3.0)
        bins = max(min_bins, int(math.ceil(span / width)))
    else:
        bins = min_bins
    counts, edges = np.histogram(v, bins=bins)
    return edges, counts


# ---------------------------------------------------------------------------
# The p = 2 study configuration.
#
# The trivariate population behind the coverage study has predictor means
# (2, 3), response mean 1, and multiple correlation 0.5; its prediction
# point (3.177, 6.457) sits at squared Mahalanobis distance 5.071 from
# the predictor mean.  Those anchors do not pin down the full covariance,
# so the remaining freedom is fixed by construction: the predictor
# covariance keeps a 1:4 variance ratio with 0.5 cross-correlation shape,
# scaled to put the prediction point exactly on the 5.071 contour, and
# the cross covariance is split between the direction of the prediction
# point and its covariance-orthogonal complement.  The response scale and
# the split angle below were calibrated by Monte Carlo against the
# standardized interval lengths this configuration is expected to
# produce at n = 50..200.
# ---------------------------------------------------------------------------

COVERAGE_POINT = np.array([3.177, 6.457])
COVERAGE_DISTANCE_SQ = 5.071
_P2_MEAN_X = np.array([2.0, 3.0])
_P2_MEAN_Y = 1.0
_P2_SHAPE = np.array([[1.0, 0.5], [0.5, 4.0]])
_P2_SIGMA_Y = 1.34444
_P2_COS_PHI = 0.75


def _p2_cov_xx() -> np.ndarray:
    d = COVERAGE_POINT - _P2_MEAN_X
    m0 = float(d @ np.linalg.solve(_P2_SHAPE, d))
    return (m0 / COVERAGE_DISTANCE_SQ) * _P2_SHAPE


def trivariate_truth(
    gamma: float,
    sigma_y: float = _P2_SIGMA_Y,
    cos_phi: float = _P2_COS_PHI,
) -> MomentSummary:
    """p = 2 population with the requested multiple correlation."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if not -1.0 <= cos_phi <= 1.0:
        raise ValueError(f"cos_phi must be in [-1, 1], got {cos_phi}")
    cov_xx = _p2_cov_xx()
    d = COVERAGE_POINT - _P2_MEAN_X
    v1 = np.linalg.solve(cov_xx, d) / math.sqrt(COVERAGE_DISTANCE_SQ)
    e = np.array([1.0, 0.0])
    v2 = e - float(v1 @ cov_xx @ e) * v1
    v2 /= math.sqrt(float(v2 @ cov_xx @ v2))
    u = gamma * sigma_y * (cos_phi * v1 + math.sqrt(1.0 - cos_phi**2) * v2)
    cov_xy = cov_xx @ u
    return MomentSummary(_P2_MEAN_X, _P2_MEAN_Y, cov_xx, cov_xy, sigma_y**2)


def coverage_study_truth() -> MomentSummary:
    """The gamma = 0.5 trivariate population of the coverage study."""
    return trivariate_truth(0.5)


# ---------------------------------------------------------------------------
# Configuration and report containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictionPoints:
    """Where the experiments evaluate the predictors.

    mode 'deciles' (p = 1): the nine deciles of the predictor marginal;
    mode 'contour' (p = 2): squared-Mahalanobis contours along a seeded ray;
    mode 'explicit': user-supplied points.
    """

    mode: str = "deciles"
    distances: Tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0)
    slope_seed: int = 0
    points: Optional[Tuple[Tuple[float, ...], ...]] = None

    def resolve(self, truth: MomentSummary) -> np.ndarray:
        if self.mode == "deciles":
            if truth.p != 1:
                raise DimensionMismatch("decile points require p = 1")
            return decile_points(float(truth.mean_x[0]), math.sqrt(truth.cov_xx[0, 0]))[:, None]
        if self.mode == "contour":
            return contour_points(truth.mean_x, truth.cov_xx, self.distances, self.slope_seed)
        if self.mode == "explicit":
            pts = np.asarray(self.points, dtype=float)
            return np.atleast_2d(pts) if pts.ndim == 1 and truth.p > 1 else pts.reshape(-1, truth.p)
        raise ValueError(f"unknown prediction point mode {self.mode!r}")


@dataclass
class SimulationConfig:
    """Knobs of one simulation study; unset fields take per-study defaults."""

    experiment: str
    seed: int
    mreps: int = 2000
    truth: Optional[MomentSummary] = None
    n_grid: Tuple[int, ...] = ()
    correlation_grid: Tuple[float, ...] = ()
    sets: Tuple[int, ...] = (1, 2, 3)
    test_n: int = 100
    prediction_points: Optional[PredictionPoints] = None
    methods: Tuple[str, ...] = tuple(m.value for m in CI_METHODS)
    level: float = 0.95
    b_outer: int = 2000
    b_inner: int = 30
    n_jobs: Optional[int] = None

    def __post_init__(self):
        if self.mreps < 100:
            raise ValueError(f"mreps must be >= 100, got {self.mreps}")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level}")

    def digest(self) -> str:
        payload = {
            "experiment": self.experiment,
            "seed": self.seed,
            "mreps": self.mreps,
            "n_grid": list(self.n_grid),
            "correlation_grid": list(self.correlation_grid),
            "sets": list(self.sets),
            "test_n": self.test_n,
            "methods": list(self.methods),
            "level": self.level,
            "b_outer": self.b_outer,
            "b_inner": self.b_inner,
            "truth": None
            if self.truth is None
            else {
                "mean": self.truth.joint_mean().tolist(),
                "cov": self.truth.joint_cov().tolist(),
            },
            "points": None
            if self.prediction_points is None
            else {
                "mode": self.prediction_points.mode,
                "distances": list(self.prediction_points.distances),
                "slope_seed": self.prediction_points.slope_seed,
                "points": self.prediction_points.points,
            },
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(eq=False)
class SimulationReport:
    experiment: str
    seed: int
    config_digest: str
    cells: List[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "metadata": self.metadata,
            "cells": self.cells,
        }


# ---------------------------------------------------------------------------
# Batched replication engine
# ---------------------------------------------------------------------------


def _replicate_predictions(
    truth: MomentSummary,
    n: int,
    mreps: int,
    points: np.ndarray,
    seed_keys: Tuple[int, ...],
    want_sigma_ma: bool = False,
):
    """Fit both predictors on mreps fresh samples; predictions at ``points``.

    Returns (pred_malp, pred_lslp, gamma, ok, sigma_ma) with shapes
    (mreps, m), (mreps, m), (mreps,), (mreps,), (mreps, m)|None.  Data
    generation is chunked; chunk c draws from stream (*seed_keys, c).
    """
    mean = truth.joint_mean()
    cov = truth.joint_cov()
    p = truth.p
    m = points.shape[0]
    chunk = max(1, int(4_000_000 // max(n * (p + 1), 1)))
    preds_m = np.empty((mreps, m))
    preds_l = np.empty((mreps, m))
    gammas = np.empty(mreps)
    ok = np.empty(mreps, dtype=bool)
    sigma_ma = np.empty((mreps, m)) if want_sigma_ma else None
    for start in range(0, mreps, chunk):
        stop = min(start + chunk, mreps)
        gen = _rng.stream(*seed_keys, start)
        rows = _rng.mvn_rows(mean, cov, (stop - start) * n, gen).reshape(stop - start, n, p + 1)
        fits = batch_fits(batch_moments(rows[:, :, :p], rows[:, :, p]))
        preds_m[start:stop] = batch_predict(fits, points, malp=True)
        preds_l[start:stop] = batch_predict(fits, points, malp=False)
        gammas[start:stop] = fits.gamma
        ok[start:stop] = fits.ok_malp
        if want_sigma_ma:
            for j in range(m):
                sigma_ma[start:stop, j] = batch_avar_ma(fits, points[j])
    return preds_m, preds_l, gammas, ok, sigma_ma


def _check_cell_failures(ok: np.ndarray, what: str) -> int:
    n_failed = int((~ok).sum())
    if n_failed > MAX_FAILURE_FRACTION * ok.size:
        raise ExcessiveResampleFailure(f"{n_failed} of {ok.size} {what} replications failed")
    return n_failed


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------


def _sampling_truth(config: SimulationConfig, corr: float) -> MomentSummary:
    template = config.truth
    if template is None:
        base = PARAMETER_SETS[1]
        return base.summary(rho=corr)
    if template.p == 1:
        sd_x = math.sqrt(template.cov_xx[0, 0])
        sd_y = math.sqrt(template.var_y)
        return MomentSummary.bivariate(
            float(template.mean_x[0]), template.mean_y, sd_x, sd_y, corr
        )
    # p >= 2: rescale the cross covariance to hit the requested multiple
    # correlation; direction is preserved.
    base_gamma = multiple_correlation(template)
    if base_gamma <= 0:
        raise ValueError("template truth has zero multiple correlation")
    return MomentSummary(
        template.mean_x,
        template.mean_y,
        template.cov_xx,
        template.cov_xy * (corr / base_gamma),
        template.var_y,
    )


def experiment_sampling_distribution(config: SimulationConfig) -> SimulationReport:
    """Empirical vs asymptotic mean/variance of the estimated predictors."""
    corr_grid = config.correlation_grid or (0.05, 0.5, 0.9)
    n_grid = config.n_grid or (30, 50, 200)
    report = SimulationReport("sampling", config.seed, config.digest())
    points_spec = config.prediction_points or PredictionPoints(mode="deciles")
    for ci_, corr in enumerate(corr_grid):
        truth = _sampling_truth(config, corr)
        points = points_spec.resolve(truth)
        malp_true = population_malp(truth)
        lslp_true = population_lslp(truth)
        # Histogram point: the 70th percentile for deciles, else the
        # outermost contour point.
        hist_j = 6 if points_spec.mode == "deciles" else points.shape[0] - 1
        for ni, n in enumerate(n_grid):
            preds_m, preds_l, _, ok, _ = _replicate_predictions(
                truth, n, config.mreps, points, (config.seed, ci_, ni)
            )
            n_failed = _check_cell_failures(ok, "sampling")
            pm = preds_m[ok]
            pl = preds_l[ok]
            edges, counts = histogram_fd(pm[:, hist_j])
            cell = {
                "correlation": float(corr),
                "n": int(n),
                "points": points.tolist(),
                "n_failed": n_failed,
                "malp": {
                    "empirical_mean": pm.mean(axis=0).tolist(),
                    "empirical_var": pm.var(axis=0, ddof=1).tolist(),
                    "asymptotic_mean": [malp_true.predict(x) for x in points],
                    "asymptotic_var": [
                        avar_normal(truth, x, PredictorKind.MALP) / n for x in points
                    ],
                },
                "lslp": {
                    "empirical_mean": pl.mean(axis=0).tolist(),
                    "empirical_var": pl.var(axis=0, ddof=1).tolist(),
                    "asymptotic_mean": [lslp_true.predict(x) for x in points],
                    "asymptotic_var": [
                        avar_normal(truth, x, PredictorKind.LSLP) / n for x in points
                    ],
                },
                "histogram": {
                    "point": points[hist_j].tolist(),
                    "edges": edges.tolist(),
                    "counts": counts.tolist(),
                },
                "separation_statistic": separation_statistic(pm[:, hist_j]),
            }
            report.cells.append(cell)
    report.metadata = {"mreps": config.mreps, "mode": points_spec.mode}
    return report


def experiment_predictive_comparison(config: SimulationConfig) -> SimulationReport:
    """Fresh-sample predictive performance of both predictors per parameter set."""
    n_train = config.n_grid[0] if config.n_grid else 100
    n_test = config.test_n
    report = SimulationReport("predictive", config.seed, config.digest())
    for si, set_id in enumerate(config.sets):
        params = PARAMETER_SETS[int(set_id)]
        truth = params.summary()
        mean = truth.joint_mean()
        cov = truth.joint_cov()
        total = n_train + n_test
        chunk = max(1, int(4_000_000 // (total * 2)))
        trip_m = np.empty((config.mreps, 3))
        trip_l = np.empty((config.mreps, 3))
        ok = np.empty(config.mreps, dtype=bool)
        for start in range(0, config.mreps, chunk):
            stop = min(start + chunk, config.mreps)
            gen = _rng.stream(config.seed, si, start)
            rows = _rng.mvn_rows(mean, cov, (stop - start) * total, gen).reshape(
                stop - start, total, 2
            )
            train_x = rows[:, :n_train, :1]
            train_y = rows[:, :n_train, 1]
            test_x = rows[:, n_train:, 0]
            test_y = rows[:, n_train:, 1]
            fits = batch_fits(batch_moments(train_x, train_y))
            ok[start:stop] = fits.ok_malp
            for malp, out in ((True, trip_m), (False, trip_l)):
                slope = fits.beta_ls[:, 0]
                if malp:
                    with np.errstate(divide="ignore", invalid="ignore"):
                        slope = slope / np.where(fits.gamma > 0, fits.gamma, np.nan)
                pred = fits.moments.ybar[:, None] + (
                    test_x - fits.moments.xbar[:, 0][:, None]
                ) * slope[:, None]
                out[start:stop] = _batch_triples(test_y, pred)
        n_failed = _check_cell_failures(ok, "predictive")
        tm, tl = trip_m[ok], trip_l[ok]
        cell = {
            "set": int(set_id),
            "rho": params.rho,
            "n_train": int(n_train),
            "n_test": int(n_test),
            "n_failed": n_failed,
            "max_abs_pcc_diff": float(np.nanmax(np.abs(tm[:, 0] - tl[:, 0]))),
        }
        for name, arr in (("malp", tm), ("lslp", tl)):
            q = np.nanquantile(arr, [0.25, 0.5, 0.75], axis=0)
            cell[name] = {
                "mean": dict(zip(("pcc", "ccc", "mse"), np.nanmean(arr, axis=0).tolist())),
                "median": dict(zip(("pcc", "ccc", "mse"), q[1].tolist())),
                "q25": dict(zip(("pcc", "ccc", "mse"), q[0].tolist())),
                "q75": dict(zip(("pcc", "ccc", "mse"), q[2].tolist())),
            }
        report.cells.append(cell)
    report.metadata = {"mreps": config.mreps}
    return report


def _batch_triples(y: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """Row-wise (pcc, ccc, mse) for stacked evaluation sets."""
    m = y.shape[1]
    ybar = y.mean(axis=1)
    pbar = pred.mean(axis=1)
    yc = y - ybar[:, None]
    pc = pred - pbar[:, None]
    syy = np.einsum("bi,bi->b", yc, yc) / (m - 1)
    spp = np.einsum("bi,bi->b", pc, pc) / (m - 1)
    syp = np.einsum("bi,bi->b", yc, pc) / (m - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = syp / np.sqrt(syy * spp)
        c = 2.0 * syp / (syy + spp + (ybar - pbar) ** 2)
    mse = np.mean((y - pred) ** 2, axis=1)
    return np.column_stack([r, c, mse])


def experiment_coverage(config: SimulationConfig) -> SimulationReport:
    """Coverage and standardized length of the CI constructions (p = 2 study)."""
    truth = config.truth or coverage_study_truth()
    if config.prediction_points is not None:
        x0 = config.prediction_points.resolve(truth)[0]
    else:
        x0 = COVERAGE_POINT
    n_grid = config.n_grid or (50, 100, 200)
    methods = [IntervalMethod.parse(m) for m in config.methods]
    report = SimulationReport("coverage", config.seed, config.digest())
    plan = ResamplePlan(seed=config.seed, b_outer=config.b_outer, b_inner=config.b_inner)
    for n in n_grid:
        results = coverage_table(
            truth, x0, methods, config.level, int(n), config.mreps, plan,
            n_jobs=config.n_jobs,
        )
        report.cells.extend(res.to_dict() for res in results)
    report.metadata = {
        "x0": np.asarray(x0, float).tolist(),
        "level": config.level,
        "mreps": config.mreps,
        "b_outer": config.b_outer,
        "b_inner": config.b_inner,
    }
    return report


def experiment_fixed_locations(config: SimulationConfig) -> SimulationReport:
    """Sampling distributions at mean +/- k sd locations, vs normal theory."""
    n = config.n_grid[0] if config.n_grid else 100
    quantiles = (0.005, 0.25, 0.5, 0.75, 0.995)
    offsets = np.array([-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0])
    report = SimulationReport("fixed-locations", config.seed, config.digest())
    for si, set_id in enumerate(config.sets):
        params = PARAMETER_SETS[int(set_id)]
        truth = params.summary()
        points = (params.mean_x + offsets * params.sd_x)[:, None]
        preds_m, preds_l, _, ok, _ = _replicate_predictions(
            truth, n, config.mreps, points, (config.seed, si)
        )
        n_failed = _check_cell_failures(ok, "fixed-locations")
        malp_true = population_malp(truth)
        lslp_true = population_lslp(truth)
        cell = {
            "set": int(set_id),
            "rho": params.rho,
            "n": int(n),
            "n_failed": n_failed,
            "locations": points.ravel().tolist(),
            "quantiles": list(quantiles),
        }
        for name, preds, pop in (
            ("malp", preds_m[ok], malp_true),
            ("lslp", preds_l[ok], lslp_true),
        ):
            kind = PredictorKind.MALP if name == "malp" else PredictorKind.LSLP
            theo = []
            for x in points:
                mu = pop.predict(x)
                sd = math.sqrt(avar_normal(truth, x, kind) / n)
                theo.append((mu + sd * norm.ppf(quantiles)).tolist())
            cell[name] = {
                "empirical_quantiles": np.quantile(preds, quantiles, axis=0).T.tolist(),
                "theoretical_quantiles": theo,
                "empirical_mean": preds.mean(axis=0).tolist(),
            }
        report.cells.append(cell)
    report.metadata = {"mreps": config.mreps, "n": int(n)}
    return report


_EXPERIMENTS = {
    "sampling": experiment_sampling_distribution,
    "predictive": experiment_predictive_comparison,
    "coverage": experiment_coverage,
    "fixed-locations": experiment_fixed_locations,
}


def run_experiment(config: SimulationConfig) -> SimulationReport:
    try:
        driver = _EXPERIMENTS[config.experiment]
    except KeyError:
        raise ValueError(
            f"unknown experiment {config.experiment!r}; choose from {sorted(_EXPERIMENTS)}"
        ) from None
    return driver(config)
