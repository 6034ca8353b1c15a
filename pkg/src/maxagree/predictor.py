"""Agreement-maximizing and least-squares linear predictors.

Both predictors are affine maps ``x -> intercept + x @ coefficients``.
The least-squares linear predictor (LSLP) minimizes mean squared
prediction error; the maximum agreement linear predictor (MALP) maximizes
the concordance correlation with the response, which forces the predictor
to match the response's mean and variance.  The two are linked by an
affine calibration: MALP = (1 - 1/gamma) * mean_y + (1/gamma) * LSLP,
where gamma is the multiple correlation.  We exploit that link so that a
single covariance factorization produces both fits.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from .errors import DegenerateAgreement, DimensionMismatch
from .moments import Dataset, MomentSummary, multiple_correlation, sample_moments

__all__ = [
    "PredictorKind",
    "LinearPredictor",
    "FittedModel",
    "population_malp",
    "population_lslp",
    "fit",
    "predict",
    "calibrate_from_lslp",
    "GAMMA_TOL",
]

# Below this multiple correlation the 1/gamma rescaling is meaningless.
GAMMA_TOL = 1e-12

# MALP coefficients must reproduce the response variance to this
# relative tolerance (the variance-matching constraint).
_VARIANCE_MATCH_RTOL = 1e-8


class PredictorKind(str, Enum):
    MALP = "malp"
    LSLP = "lslp"

    @classmethod
    def parse(cls, value: Union[str, "PredictorKind"]) -> "PredictorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown predictor kind {value!r}; use 'malp' or 'lslp'") from None


@dataclass(eq=False)
class LinearPredictor:
    """Intercept and coefficient vector, tagged with the construction kind."""

    intercept: float
    coefficients: np.ndarray
    kind: PredictorKind

    def __post_init__(self):
        self.intercept = float(self.intercept)
        self.coefficients = np.asarray(self.coefficients, dtype=float).ravel()
        self.kind = PredictorKind.parse(self.kind)
        if not np.isfinite(self.coefficients).all() or not np.isfinite(self.intercept):
            raise ValueError("predictor coefficients must be finite")

    @property
    def p(self) -> int:
        return self.coefficients.size

    def predict(self, x0) -> Union[float, np.ndarray]:
        """Evaluate at a single point (length-p) or a stack of points (m, p)."""
        x0 = np.asarray(x0, dtype=float)
        if x0.ndim == 0:
            x0 = x0.reshape(1)
        if x0.ndim == 1:
            if x0.size != self.p:
                raise DimensionMismatch(f"x0 has length {x0.size}, expected {self.p}")
            return float(self.intercept + x0 @ self.coefficients)
        if x0.ndim == 2:
            if x0.shape[1] != self.p:
                raise DimensionMismatch(f"x0 has {x0.shape[1]} columns, expected {self.p}")
            return self.intercept + x0 @ self.coefficients
        raise DimensionMismatch("x0 must be a point or a 2-D stack of points")

    __call__ = predict


@dataclass(eq=False)
class FittedModel:
    """A fitted predictor together with the moments it came from.

    ``companion`` holds the predictor of the other kind computed from the
    same moments (None when it is undefined, e.g. the agreement predictor
    on data with zero multiple correlation).
    """

    predictor: LinearPredictor
    summary: MomentSummary
    gamma: float
    companion: Optional[LinearPredictor] = None

    @property
    def kind(self) -> PredictorKind:
        return self.predictor.kind

    def predict(self, x0):
        return self.predictor.predict(x0)


def _lslp_coefficients(summary: MomentSummary) -> np.ndarray:
    return summary.solve_xx(summary.cov_xy)


def _build(summary: MomentSummary, beta: np.ndarray, kind: PredictorKind) -> LinearPredictor:
    alpha = summary.mean_y - float(summary.mean_x @ beta)
    return LinearPredictor(alpha, beta, kind)


def population_lslp(summary: MomentSummary) -> LinearPredictor:
    """Least-squares linear predictor: beta = cov_xx^{-1} cov_xy."""
    return _build(summary, _lslp_coefficients(summary), PredictorKind.LSLP)


def population_malp(summary: MomentSummary, tol: float = GAMMA_TOL) -> LinearPredictor:
    """Maximum agreement linear predictor.

    beta = (sd_y / sqrt(cov_yx cov_xx^{-1} cov_xy)) * cov_xx^{-1} cov_xy,
    equivalently the least-squares coefficients rescaled by 1/gamma.
    Raises DegenerateAgreement when gamma falls below ``tol``: the
    rescaling is unbounded there and a zero-slope fit would violate the
    variance-matching constraint.
    """
    beta_ls = _lslp_coefficients(summary)
    gamma = multiple_correlation(summary)
    if gamma < tol:
        raise DegenerateAgreement(
            f"multiple correlation {gamma:.3e} below tolerance {tol:.1e}"
        )
    beta = beta_ls / gamma
    pred = _build(summary, beta, PredictorKind.MALP)
    explained = float(beta @ (summary.cov_xx @ beta))
    if abs(explained - summary.var_y) > _VARIANCE_MATCH_RTOL * summary.var_y:
        raise DegenerateAgreement(
            f"variance-matching constraint violated: {explained:.6g} vs {summary.var_y:.6g}"
        )
    return pred


def fit(data_or_summary, kind=PredictorKind.MALP, tol: float = GAMMA_TOL) -> FittedModel:
    """Fit the requested predictor kind to a dataset (or prepared summary).

    The other kind is attached as ``companion``; both come from a single
    covariance factorization via the calibration identity.
    """
    kind = PredictorKind.parse(kind)
    if isinstance(data_or_summary, Dataset):
        summary = sample_moments(data_or_summary)
    elif isinstance(data_or_summary, MomentSummary):
        summary = data_or_summary
    else:
        raise TypeError("fit expects a Dataset or a MomentSummary")
    gamma = multiple_correlation(summary)
    lslp = population_lslp(summary)
    malp = None
    if gamma >= tol:
        malp = population_malp(summary, tol=tol)
    if kind is PredictorKind.MALP:
        if malp is None:
            raise DegenerateAgreement(
                f"multiple correlation {gamma:.3e} below tolerance {tol:.1e}"
            )
        return FittedModel(malp, summary, gamma, companion=lslp)
    return FittedModel(lslp, summary, gamma, companion=malp)


def predict(model: FittedModel, x0):
    """Evaluate a fitted model at x0 (point or stack of points)."""
    return model.predictor.predict(x0)


def calibrate_from_lslp(lslp_value: float, mean_y: float, gamma: float) -> float:
    """Map a least-squares prediction to the agreement-maximizing one.

    The exact affine map (1 - 1/gamma) * mean_y + (1/gamma) * lslp_value;
    its inverse shrinks the agreement prediction back toward mean_y.
    """
    if gamma <= 0:
        raise DegenerateAgreement(f"gamma must be positive, got {gamma}")
    w = 1.0 / gamma
    return float((1.0 - w) * mean_y + w * lslp_value)
