"""Predictive performance measures and model-exploration utilities.

Performance of a predictor on an evaluation set is summarized by three
numbers: Pearson correlation (linear association from any vantage line),
concordance correlation (agreement with the 45-degree line), and mean
squared error.  The least-squares and agreement predictors always share
the same Pearson correlation with the response, so the interesting
comparisons are concordance (agreement fit wins) versus MSE
(least-squares wins).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from . import rng as _rng
from .errors import (
    ExcessiveResampleFailure,
    MaxagreeError,
    TooManyPredictors,
    ZeroVariance,
)
from .moments import Dataset, ccc, pcc
from .predictor import PredictorKind, fit
from .resample import MAX_FAILURE_FRACTION

__all__ = [
    "PerformanceTriple",
    "SplitEvaluation",
    "evaluate",
    "split_evaluate",
    "best_subsets",
    "SUBSET_SEARCH_MAX_P",
]

SUBSET_SEARCH_MAX_P = 20


@dataclass(frozen=True)
class PerformanceTriple:
    """Pearson correlation, concordance correlation, and MSE.

    ``pcc`` is None when either vector is constant (undefined Pearson
    correlation); concordance and MSE are still reported.
    """

    pcc: Optional[float]
    ccc: float
    mse: float

    def to_dict(self) -> dict:
        return {"pcc": self.pcc, "ccc": self.ccc, "mse": self.mse}


def evaluate(observed: np.ndarray, predicted: np.ndarray) -> PerformanceTriple:
    """Score predictions against observations."""
    observed = np.asarray(observed, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    try:
        r = pcc(observed, predicted)
    except ZeroVariance:
        r = None
    agreement = ccc(observed, predicted)
    mse = float(np.mean((observed - predicted) ** 2))
    return PerformanceTriple(r, agreement, mse)


@dataclass(eq=False)
class SplitEvaluation:
    """Train/test split performance distributions for both predictor kinds.

    ``triples`` maps each kind to an (reps_ok, 3) array of columns
    (pcc, ccc, mse), one row per successful split, in replication order.
    """

    triples: Dict[PredictorKind, np.ndarray]
    n_failed: int
    reps: int
    train_n: int
    test_n: int

    def mean(self, kind: Union[str, PredictorKind]) -> PerformanceTriple:
        arr = self.triples[PredictorKind.parse(kind)]
        m = arr.mean(axis=0)
        return PerformanceTriple(float(m[0]), float(m[1]), float(m[2]))

    def quantiles(self, kind: Union[str, PredictorKind], qs=(0.25, 0.5, 0.75)) -> np.ndarray:
        arr = self.triples[PredictorKind.parse(kind)]
        return np.quantile(arr, qs, axis=0)

    def to_dict(self) -> dict:
        out = {
            "reps": self.reps,
            "n_failed": self.n_failed,
            "train_n": self.train_n,
            "test_n": self.test_n,
        }
        for kind, arr in self.triples.items():
            q = np.quantile(arr, [0.25, 0.5, 0.75], axis=0)
            out[kind.value] = {
                "mean": dict(zip(("pcc", "ccc", "mse"), arr.mean(axis=0).tolist())),
                "median": dict(zip(("pcc", "ccc", "mse"), q[1].tolist())),
                "q25": dict(zip(("pcc", "ccc", "mse"), q[0].tolist())),
                "q75": dict(zip(("pcc", "ccc", "mse"), q[2].tolist())),
            }
        return out


def split_evaluate(
    data: Dataset,
    reps: int,
    seed: int,
    train_fraction: float = 0.5,
) -> SplitEvaluation:
    """Repeated random train/test split evaluation of both predictor kinds.

    Each replication permutes the rows (stream (seed, rep)), fits both
    predictors on the training block and scores them on the held-out
    block.  Odd row counts put the extra row in the training set, which
    benefits more from it.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = data.n
    train_n = int(math.ceil(n * train_fraction))
    test_n = n - train_n
    if test_n < 2:
        raise ValueError("test split has fewer than two rows")

    rows: Dict[PredictorKind, list] = {PredictorKind.MALP: [], PredictorKind.LSLP: []}
    n_failed = 0
    for rep in range(reps):
        perm = _rng.stream(seed, rep).permutation(n)
        train = Dataset(data.x[perm[:train_n]], data.y[perm[:train_n]])
        x_test = data.x[perm[train_n:]]
        y_test = data.y[perm[train_n:]]
        try:
            model = fit(train, PredictorKind.MALP)
            scores = {
                PredictorKind.MALP: evaluate(y_test, model.predict(x_test)),
                PredictorKind.LSLP: evaluate(y_test, model.companion.predict(x_test)),
            }
        except MaxagreeError:
            n_failed += 1
            continue
        for kind, triple in scores.items():
            r = np.nan if triple.pcc is None else triple.pcc
            rows[kind].append([r, triple.ccc, triple.mse])

    if n_failed > MAX_FAILURE_FRACTION * reps:
        raise ExcessiveResampleFailure(f"{n_failed} of {reps} splits failed")
    triples = {kind: np.asarray(vals, dtype=float) for kind, vals in rows.items()}
    return SplitEvaluation(triples, n_failed, reps, train_n, test_n)


def best_subsets(
    data: Dataset, sizes: Sequence[int]
) -> Dict[int, Tuple[Tuple[int, ...], float]]:
    """Exhaustive best-subset search maximizing the squared multiple correlation.

    Returns, per requested size, the predictor-index tuple with the
    largest coefficient of determination and that value.  Ties break
    toward the lexicographically smallest index tuple.  Works off a
    single full-data moment pass with submatrix extraction, which gives
    results identical to refitting every subset.
    """
    p = data.p
    if p > SUBSET_SEARCH_MAX_P:
        raise TooManyPredictors(
            f"exhaustive search refused for p = {p} > {SUBSET_SEARCH_MAX_P}"
        )
    sizes = [int(s) for s in sizes]
    for s in sizes:
        if not 1 <= s <= p:
            raise ValueError(f"subset size {s} outside [1, {p}]")
    # Raw moments: the full candidate pool may be collinear even though
    # the subsets of interest are not, so skip the PD validation here.
    xc = data.x - data.x.mean(axis=0)
    yc = data.y - data.y.mean()
    cov_xx = xc.T @ xc / (data.n - 1)
    cov_xy = xc.T @ yc / (data.n - 1)
    var_y = float(yc @ yc / (data.n - 1))
    if var_y <= 0:
        raise ZeroVariance("response vector is constant")

    out: Dict[int, Tuple[Tuple[int, ...], float]] = {}
    for size in sizes:
        best_idx: Optional[Tuple[int, ...]] = None
        best_r2 = -np.inf
        for idx in combinations(range(p), size):
            sel = list(idx)
            sub_xx = cov_xx[np.ix_(sel, sel)]
            sub_xy = cov_xy[sel]
            try:
                beta = np.linalg.solve(sub_xx, sub_xy)
            except np.linalg.LinAlgError:
                continue
            r2 = float(sub_xy @ beta) / var_y
            if r2 > best_r2:
                best_r2 = r2
                best_idx = idx
        if best_idx is None:
            raise ZeroVariance(f"no non-singular subset of size {size}")
        out[size] = (best_idx, best_r2)
    return out
