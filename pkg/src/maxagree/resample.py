"""Jackknife and bootstrap machinery for prediction standard errors.

Reproducibility contract: bootstrap replicate ``b`` owns the b-th fixed
counter window of the run's keyed index stream (one window stream for the
outer resamples, one for the studentizing sub-resamples), so its draws do
not depend on chunk sizes, scheduling, or how many replicates run.
Results are identical across runs and degrees of parallelism.

Degenerate resamples (singular predictor covariance, or multiple
correlation below tolerance when fitting the agreement predictor) are
excluded and counted; a run errors only when more than 1% of replicates
fail, since pervasive failure signals a degenerate configuration rather
than resampling bad luck.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import rng as _rng
from ._batch import (
    batch_fits,
    batch_predict,
    counts_matrix,
    loo_moments,
    moments_from_sums,
    resample_features,
    resample_moments,
)
from .errors import DegenerateAgreement, ExcessiveResampleFailure, TooFewRows
from .moments import Dataset
from .predictor import PredictorKind

__all__ = [
    "ResamplePlan",
    "BootstrapResult",
    "jackknife_replicates",
    "jackknife_se",
    "bootstrap_replicates",
    "bootstrap_se",
    "MAX_FAILURE_FRACTION",
]

MAX_FAILURE_FRACTION = 0.01

# Number of bootstrap replicates that is ample for a standard error but
# too small for quantile-based intervals, which want >= 1000.
SE_ONLY_B = 200


@dataclass(frozen=True)
class ResamplePlan:
    """Bootstrap sizes and the master seed.

    b_outer: bootstrap replicates (B).  The default 2000 suits interval
    construction; standard errors alone are stable from about 200.
    b_inner: sub-resamples per replicate (B') for studentized intervals.
    """

    seed: int
    b_outer: int = 2000
    b_inner: int = 30

    def __post_init__(self):
        if self.b_outer < 2:
            raise ValueError(f"b_outer must be >= 2, got {self.b_outer}")
        if self.b_inner < 2:
            raise ValueError(f"b_inner must be >= 2, got {self.b_inner}")


@dataclass(eq=False)
class BootstrapResult:
    """Successful replicate values plus bookkeeping.

    values: predictions from the successful resamples, in replicate order.
    n_failed: excluded replicates (degenerate resamples).
    inner_se: per-replicate inner-bootstrap standard errors aligned with
    ``values`` (only when requested; nan marks inner loops that were
    themselves degenerate).
    """

    values: np.ndarray
    n_failed: int
    n_total: int
    inner_se: Optional[np.ndarray] = None


def jackknife_replicates(
    data: Dataset, x0, kind: Union[str, PredictorKind] = PredictorKind.MALP
) -> np.ndarray:
    """Leave-one-out predictions at x0, one per observation."""
    kind = PredictorKind.parse(kind)
    n, p = data.n, data.p
    if n < p + 3:
        raise TooFewRows(f"need n >= p + 3 = {p + 3}, got n = {n}")
    fits = batch_fits(loo_moments(data.x, data.y))
    ok = fits.ok_malp if kind is PredictorKind.MALP else fits.ok_pd
    if not ok.all():
        raise DegenerateAgreement(
            f"{int((~ok).sum())} leave-one-out fits are degenerate"
        )
    return batch_predict(fits, np.asarray(x0, dtype=float).ravel(), malp=kind is PredictorKind.MALP)


def jackknife_se(
    data: Dataset, x0, kind: Union[str, PredictorKind] = PredictorKind.MALP
) -> Tuple[float, np.ndarray]:
    """Jackknife standard error of the prediction at x0.

    sqrt((n-1)/n * sum_j (rep_j - mean)^2) over the leave-one-out
    replicates, which are returned alongside.
    """
    reps = jackknife_replicates(data, x0, kind)
    n = reps.size
    dev = reps - reps.mean()
    return float(np.sqrt((n - 1) / n * float(dev @ dev))), reps


# Window-stream tags distinguishing the outer resamples from the
# studentizing sub-resamples under one plan seed.
_OUTER_TAG = 1
_INNER_TAG = 2


def _outer_indices(n: int, plan: ResamplePlan) -> np.ndarray:
    return _rng.index_blocks(plan.seed, _OUTER_TAG, plan.b_outer, n, n)


def _check_failures(n_failed: int, n_total: int) -> None:
    if n_failed > MAX_FAILURE_FRACTION * n_total:
        raise ExcessiveResampleFailure(
            f"{n_failed} of {n_total} replicates failed (> {MAX_FAILURE_FRACTION:.0%})"
        )


def _bootstrap_raw(
    data: Dataset,
    x0,
    plan: ResamplePlan,
    kind: Union[str, PredictorKind] = PredictorKind.MALP,
    with_inner: bool = False,
):
    """All B replicate values plus validity masks, unfiltered.

    Returns (values, ok, inner_se) with shapes (B,), (B,), (B,)|None;
    ``ok`` flags resamples whose fit succeeded, independent of the inner
    loop's fate.
    """
    kind = PredictorKind.parse(kind)
    malp = kind is PredictorKind.MALP
    x0 = np.asarray(x0, dtype=float).ravel()
    n = data.n
    feats, xbar, ybar = resample_features(data.x, data.y)
    idx = _outer_indices(n, plan)
    fits = batch_fits(resample_moments(feats, xbar, ybar, idx))
    ok = fits.ok_malp if malp else fits.ok_pd
    values = batch_predict(fits, x0, malp=malp)
    inner_se = (
        _inner_standard_errors(feats, xbar, ybar, x0, plan, idx, malp)
        if with_inner
        else None
    )
    return values, ok, inner_se


def bootstrap_replicates(
    data: Dataset,
    x0,
    plan: ResamplePlan,
    kind: Union[str, PredictorKind] = PredictorKind.MALP,
    with_inner: bool = False,
) -> BootstrapResult:
    """With-replacement resample predictions at x0.

    When ``with_inner`` is set, each replicate also gets the standard
    deviation of B' sub-resample predictions drawn from that replicate's
    sample, as needed by studentized intervals; replicates whose inner
    loop is degenerate count as failed.
    """
    values, ok, inner_se_all = _bootstrap_raw(data, x0, plan, kind, with_inner)
    if with_inner:
        ok = ok & np.isfinite(inner_se_all) & (inner_se_all > 0)
    n_failed = int((~ok).sum())
    _check_failures(n_failed, plan.b_outer)
    return BootstrapResult(
        values=values[ok],
        n_failed=n_failed,
        n_total=plan.b_outer,
        inner_se=inner_se_all[ok] if with_inner else None,
    )


def _inner_standard_errors(
    feats: np.ndarray,
    xbar: np.ndarray,
    ybar: float,
    x0: np.ndarray,
    plan: ResamplePlan,
    idx: np.ndarray,
    malp: bool,
) -> np.ndarray:
    """SD over B' sub-resamples of each outer replicate, chunked for memory."""
    n = feats.shape[0]
    b_outer, b_inner = plan.b_outer, plan.b_inner
    out = np.full(b_outer, np.nan)
    chunk = max(1, int(2_000_000 // max(b_inner * n, 1)))
    for start in range(0, b_outer, chunk):
        stop = min(start + chunk, b_outer)
        m = stop - start
        sub = _rng.index_blocks(
            plan.seed, _INNER_TAG, m, b_inner * n, n, start_block=start
        ).reshape(m * b_inner, n)
        # Sub-resamples draw positions of the outer resample; counting in
        # that position space and multiplying by the gathered per-replicate
        # feature rows avoids composing the index maps.
        c = counts_matrix(sub, n).reshape(m, b_inner, n)
        feats_rep = feats[idx[start:stop]]  # (m, n, F)
        sums = np.matmul(c, feats_rep).reshape(m * b_inner, feats.shape[1])
        fits = batch_fits(moments_from_sums(sums, n, xbar, ybar))
        ok = (fits.ok_malp if malp else fits.ok_pd).reshape(m, b_inner)
        preds = np.where(ok, np.nan_to_num(batch_predict(fits, x0, malp=malp).reshape(m, b_inner)), 0.0)
        cnt = ok.sum(axis=1)
        safe = np.maximum(cnt, 1)
        mean = preds.sum(axis=1) / safe
        ss = np.where(ok, (preds - mean[:, None]) ** 2, 0.0).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            se = np.sqrt(ss / np.maximum(cnt - 1, 1))
        out[start:stop] = np.where(cnt >= 2, se, np.nan)
    return out


def bootstrap_se(
    data: Dataset,
    x0,
    plan: ResamplePlan,
    kind: Union[str, PredictorKind] = PredictorKind.MALP,
) -> float:
    """Bootstrap standard error: SD (divisor B-1) of the replicate values."""
    result = bootstrap_replicates(data, x0, plan, kind)
    if result.values.size < 2:
        raise ExcessiveResampleFailure("fewer than two successful replicates")
    return float(result.values.std(ddof=1))
