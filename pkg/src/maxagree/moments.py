"""First and second moments, correlation measures, and Mahalanobis distance.

Conventions used throughout the package:

* second moments always use the n-1 divisor;
* population and sample summaries share :class:`MomentSummary`, with ``n``
  absent for population parameters;
* positive definiteness is established by a successful Cholesky
  factorization, never silently replaced by a pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import (
    DegenerateInput,
    DimensionMismatch,
    SingularCovariance,
    TooFewRows,
    ZeroVariance,
)

__all__ = [
    "Dataset",
    "MomentSummary",
    "sample_moments",
    "pcc",
    "ccc",
    "population_ccc",
    "multiple_correlation",
    "mahalanobis_sq",
]

_SYMMETRY_RTOL = 1e-12


@dataclass(eq=False)
class Dataset:
    """An n-by-p predictor matrix paired with a length-n response vector."""

    x: np.ndarray
    y: np.ndarray
    column_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if self.x.shape[0] == 1 and self.x.shape[1] > 1 and np.ndim(self.y) == 1 and len(self.y) == self.x.shape[1]:
            # A 1-D x of length n is a single predictor column, not a row.
            self.x = self.x.T
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.x.shape[0] != self.y.shape[0]:
            raise DimensionMismatch(
                f"x has {self.x.shape[0]} rows but y has {self.y.shape[0]}"
            )
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ValueError("dataset contains non-finite entries")
        if self.column_names is not None:
            self.column_names = list(self.column_names)
            if len(self.column_names) != self.x.shape[1] + 1:
                raise DimensionMismatch(
                    f"expected {self.x.shape[1] + 1} column names, got {len(self.column_names)}"
                )

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(eq=False)
class MomentSummary:
    """Mean vector, predictor covariance, cross covariance and response variance.

    ``n`` is present for summaries computed from a sample and absent for
    population parameters.
    """

    mean_x: np.ndarray
    mean_y: float
    cov_xx: np.ndarray
    cov_xy: np.ndarray
    var_y: float
    n: Optional[int] = None
    _chol: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.mean_x = np.asarray(self.mean_x, dtype=float).ravel()
        self.cov_xx = np.atleast_2d(np.asarray(self.cov_xx, dtype=float))
        self.cov_xy = np.asarray(self.cov_xy, dtype=float).ravel()
        self.mean_y = float(self.mean_y)
        self.var_y = float(self.var_y)
        p = self.mean_x.size
        if self.cov_xx.shape != (p, p) or self.cov_xy.size != p:
            raise DimensionMismatch(
                f"inconsistent shapes: mean_x {p}, cov_xx {self.cov_xx.shape}, cov_xy {self.cov_xy.size}"
            )
        scale = max(np.abs(self.cov_xx).max(), 1.0)
        if np.abs(self.cov_xx - self.cov_xx.T).max() > _SYMMETRY_RTOL * scale:
            raise ValueError("cov_xx is not symmetric")
        if not self.var_y > 0:
            raise ValueError(f"var_y must be positive, got {self.var_y}")
        if self.n is not None:
            self.n = int(self.n)
            if self.n < p + 2:
                raise TooFewRows(f"need n >= p + 2 = {p + 2}, got n = {self.n}")
        try:
            self._chol = np.linalg.cholesky(self.cov_xx)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance(
                f"cov_xx is not positive definite: {exc}"
            ) from exc

    @property
    def p(self) -> int:
        return self.mean_x.size

    def solve_xx(self, rhs: np.ndarray) -> np.ndarray:
        """Solve cov_xx @ z = rhs using the cached Cholesky factor."""
        return cho_solve((self._chol, True), rhs)

    def whiten(self, vec: np.ndarray) -> np.ndarray:
        """Return L^{-1} vec for the lower factor L of cov_xx."""
        return solve_triangular(self._chol, vec, lower=True)

    @classmethod
    def bivariate(
        cls,
        mean_x: float,
        mean_y: float,
        sd_x: float,
        sd_y: float,
        rho: float,
        n: Optional[int] = None,
    ) -> "MomentSummary":
        """Build a p = 1 summary from the usual five bivariate parameters."""
        return cls(
            mean_x=np.array([mean_x]),
            mean_y=mean_y,
            cov_xx=np.array([[sd_x**2]]),
            cov_xy=np.array([rho * sd_x * sd_y]),
            var_y=sd_y**2,
            n=n,
        )

    def joint_mean(self) -> np.ndarray:
        return np.append(self.mean_x, self.mean_y)

    def joint_cov(self) -> np.ndarray:
        top = np.hstack([self.cov_xx, self.cov_xy[:, None]])
        bottom = np.append(self.cov_xy, self.var_y)
        return np.vstack([top, bottom])


def sample_moments(data: Dataset) -> MomentSummary:
    """Sample means and n-1 divisor covariances of a dataset.

    Raises TooFewRows when n < p + 2 and SingularCovariance when the
    predictor columns are collinear.
    """
    n, p = data.n, data.p
    if n < p + 2:
        raise TooFewRows(f"need n >= p + 2 = {p + 2}, got n = {n}")
    mean_x = data.x.mean(axis=0)
    mean_y = data.y.mean()
    xc = data.x - mean_x
    yc = data.y - mean_y
    cov_xx = xc.T @ xc / (n - 1)
    cov_xy = xc.T @ yc / (n - 1)
    var_y = float(yc @ yc / (n - 1))
    if not var_y > 0:
        raise ZeroVariance("response vector is constant")
    return MomentSummary(mean_x, mean_y, cov_xx, cov_xy, var_y, n=n)


def _pair_stats(y: np.ndarray, z: np.ndarray):
    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if y.size != z.size:
        raise DimensionMismatch(f"length mismatch: {y.size} vs {z.size}")
    if y.size < 2:
        raise TooFewRows("need at least two observations")
    ybar, zbar = y.mean(), z.mean()
    yc, zc = y - ybar, z - zbar
    m = y.size - 1
    return ybar, zbar, float(yc @ yc / m), float(zc @ zc / m), float(yc @ zc / m)


def pcc(y: np.ndarray, z: np.ndarray) -> float:
    """Pearson correlation coefficient between two vectors."""
    _, _, s_yy, s_zz, s_yz = _pair_stats(y, z)
    if s_yy <= 0 or s_zz <= 0:
        raise ZeroVariance("pcc is undefined for a constant vector")
    # sqrt before multiplying: the variance product can underflow for
    # tiny-scale vectors even though each factor is positive.
    r = s_yz / np.sqrt(s_yy) / np.sqrt(s_zz)
    return float(np.clip(r, -1.0, 1.0))


def ccc(y: np.ndarray, z: np.ndarray) -> float:
    """Concordance correlation coefficient between two vectors.

    Agreement with respect to the 45-degree line through the origin:
    2 s_yz / (s_y^2 + s_z^2 + (ybar - zbar)^2).
    """
    ybar, zbar, s_yy, s_zz, s_yz = _pair_stats(y, z)
    denom = s_yy + s_zz + (ybar - zbar) ** 2
    if denom <= 0:
        raise DegenerateInput("ccc is undefined when both vectors are constant")
    return float(2.0 * s_yz / denom)


def population_ccc(summary: MomentSummary) -> float:
    """Closed-form concordance correlation for a p = 1 summary.

    Equals 2 rho sd_x sd_y / (sd_x^2 + sd_y^2 + (mean_x - mean_y)^2) with
    rho read off the summary's cross covariance.
    """
    if summary.p != 1:
        raise DimensionMismatch(f"population_ccc requires p = 1, got p = {summary.p}")
    s_xy = float(summary.cov_xy[0])
    denom = float(summary.cov_xx[0, 0]) + summary.var_y + (float(summary.mean_x[0]) - summary.mean_y) ** 2
    return float(2.0 * s_xy / denom)


def multiple_correlation(summary: MomentSummary) -> float:
    """Multiple correlation between the response and the predictors.

    sqrt(cov_yx cov_xx^{-1} cov_xy) / sd_y.  For p = 1 this is |pcc|.
    A tiny floating overshoot above 1 is clipped; a valid joint covariance
    cannot exceed 1.
    """
    w = summary.whiten(summary.cov_xy)
    g2 = float(w @ w) / summary.var_y
    return float(min(np.sqrt(max(g2, 0.0)), 1.0))


def mahalanobis_sq(x0: np.ndarray, summary: MomentSummary) -> float:
    """Squared Mahalanobis distance of x0 from the predictor mean."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != summary.p:
        raise DimensionMismatch(f"x0 has length {x0.size}, expected {summary.p}")
    w = summary.whiten(x0 - summary.mean_x)
    return float(w @ w)
