"""Asymptotic variances of the estimated predictors.

Two routes are provided:

* closed forms valid when the data are multivariate normal
  (:func:`avar_normal`);
* a distribution-free plug-in built from the order-2 U-statistic
  representation of the moment estimators and the multivariate delta
  method (:func:`delta_method_avar`).

Moment vector layout
--------------------
The moment estimators are stacked into a single vector ``theta`` with the
fixed layout (``p`` predictors)::

    [mean_x_1 .. mean_x_p,
     mean_y,
     cov_xx upper triangle row-wise: (1,1) (1,2) .. (1,p) (2,2) .. (p,p),
     cov_xy_1 .. cov_xy_p,
     var_y]

of total length ``(p + 4) (p + 1) / 2`` (5 for p = 1, 9 for p = 2).
:func:`vech_indices` spells out the covariance block's index pairs; this
layout is part of the public contract of the module.

All variances returned here are the n-free factors sigma^2(x0); callers
divide by the sample size.
"""

from __future__ import annotations

from typing import Tuple, Union

import numpy as np

from .errors import (
    DegenerateAgreement,
    DimensionMismatch,
    NumericalGradientFailure,
    TooFewRows,
)
from .moments import Dataset, MomentSummary, multiple_correlation, sample_moments
from .predictor import PredictorKind

__all__ = [
    "kernel_length",
    "vech_indices",
    "theta_from_summary",
    "summary_from_theta",
    "kernel_h",
    "kernel_h_tilde",
    "avar_normal",
    "ustat_sigma_h",
    "delta_method_avar",
    "prediction_from_theta",
    "analytic_gradient_p1",
    "finite_difference_gradient",
]

# Sign of the p = 1 correlation is ill-defined near zero; the gradient of
# the agreement map does not exist there.
_SIGN_TOL = 1e-6


def kernel_length(p: int) -> int:
    return (p + 4) * (p + 1) // 2


def vech_indices(p: int) -> list[tuple[int, int]]:
    """(j, l) pairs, 0-based, of the upper-triangular covariance block."""
    return [(j, l) for j in range(p) for l in range(j, p)]


def _vech(mat: np.ndarray) -> np.ndarray:
    p = mat.shape[0]
    return np.array([mat[j, l] for j, l in vech_indices(p)])


def _unvech(vec: np.ndarray, p: int) -> np.ndarray:
    out = np.empty((p, p))
    for value, (j, l) in zip(vec, vech_indices(p)):
        out[j, l] = value
        out[l, j] = value
    return out


def theta_from_summary(summary: MomentSummary) -> np.ndarray:
    """Stack a moment summary into the documented vector layout."""
    return np.concatenate(
        [
            summary.mean_x,
            [summary.mean_y],
            _vech(summary.cov_xx),
            summary.cov_xy,
            [summary.var_y],
        ]
    )


def _split_theta(theta: np.ndarray, p: int):
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != kernel_length(p):
        raise DimensionMismatch(
            f"theta has length {theta.size}, expected {kernel_length(p)} for p = {p}"
        )
    q = p * (p + 1) // 2
    mean_x = theta[:p]
    mean_y = theta[p]
    cov_xx = _unvech(theta[p + 1 : p + 1 + q], p)
    cov_xy = theta[p + 1 + q : 2 * p + 1 + q]
    var_y = theta[-1]
    return mean_x, mean_y, cov_xx, cov_xy, var_y


def summary_from_theta(theta: np.ndarray, p: int, n=None) -> MomentSummary:
    """Inverse of :func:`theta_from_summary` (validates the moments)."""
    mean_x, mean_y, cov_xx, cov_xy, var_y = _split_theta(theta, p)
    return MomentSummary(mean_x, mean_y, cov_xx, cov_xy, var_y, n=n)


def _as_obs(obs) -> Tuple[np.ndarray, float]:
    x, y = obs
    return np.asarray(x, dtype=float).ravel(), float(y)


def kernel_h(obs1, obs2) -> np.ndarray:
    """Order-2 symmetric kernel whose pair average reproduces the moments.

    Components, in the module's vector layout:
    (x1j + x2j)/2, (y1 + y2)/2, (x1j - x2j)(x1l - x2l)/2,
    (x1j - x2j)(y1 - y2)/2, (y1 - y2)^2 / 2.
    """
    x1, y1 = _as_obs(obs1)
    x2, y2 = _as_obs(obs2)
    if x1.size != x2.size:
        raise DimensionMismatch(f"observations have p = {x1.size} and {x2.size}")
    dx = x1 - x2
    dy = y1 - y2
    outer = np.outer(dx, dx)
    return np.concatenate(
        [
            (x1 + x2) / 2.0,
            [(y1 + y2) / 2.0],
            _vech(outer) / 2.0,
            dx * dy / 2.0,
            [dy * dy / 2.0],
        ]
    )


def kernel_h_tilde(obs, theta: np.ndarray) -> np.ndarray:
    """Conditional kernel: expectation of kernel_h over its second argument.

    Evaluated at the moment vector ``theta`` (same layout as returned by
    :func:`theta_from_summary`).
    """
    x, y = _as_obs(obs)
    p = x.size
    mean_x, mean_y, cov_xx, cov_xy, var_y = _split_theta(theta, p)
    dx = x - mean_x
    dy = y - mean_y
    outer = np.outer(dx, dx) + cov_xx
    return np.concatenate(
        [
            (x + mean_x) / 2.0,
            [(y + mean_y) / 2.0],
            _vech(outer) / 2.0,
            (dx * dy + cov_xy) / 2.0,
            [(dy * dy + var_y) / 2.0],
        ]
    )


def _gamma_checked(summary: MomentSummary, tol: float) -> float:
    gamma = multiple_correlation(summary)
    if gamma <= tol:
        raise DegenerateAgreement(f"multiple correlation {gamma:.3e} at or below {tol:.1e}")
    if gamma >= 1.0:
        raise DegenerateAgreement("multiple correlation is 1; asymptotic variance degenerates")
    return gamma


def avar_normal(
    summary: MomentSummary,
    x0,
    kind: Union[str, PredictorKind] = PredictorKind.MALP,
    tol: float = 1e-12,
) -> float:
    """Closed-form asymptotic variance factor under multivariate normality.

    For the agreement predictor:
        sd_y^2 (1 - g^2) [2/(1+g) + (1/g^2) d' C^{-1} d
                          - ((1-g^2)/(sd_y^2 g^4)) (c' C^{-1} d)^2]
    and for the least-squares predictor:
        sd_y^2 (1 - g^2) [1 + d' C^{-1} d],
    with g the multiple correlation, C = cov_xx, c = cov_xy and
    d = x0 - mean_x.  Returns the n-free factor.
    """
    kind = PredictorKind.parse(kind)
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != summary.p:
        raise DimensionMismatch(f"x0 has length {x0.size}, expected {summary.p}")
    gamma = _gamma_checked(summary, tol)
    d = x0 - summary.mean_x
    maha = float(summary.whiten(d) @ summary.whiten(d))
    var_y = summary.var_y
    one_minus_g2 = 1.0 - gamma**2
    if kind is PredictorKind.LSLP:
        return float(var_y * one_minus_g2 * (1.0 + maha))
    proj = float(summary.cov_xy @ summary.solve_xx(d))
    bracket = (
        2.0 / (1.0 + gamma)
        + maha / gamma**2
        - (one_minus_g2 / (var_y * gamma**4)) * proj**2
    )
    return float(var_y * one_minus_g2 * bracket)


def ustat_sigma_h(data: Dataset) -> np.ndarray:
    """Plug-in estimate of the kernel covariance on the asymptotic scale.

    Evaluates the conditional kernel at every observation with the sample
    moments plugged in, and returns 4x the 1/n-divisor covariance of those
    vectors centered at the stacked sample moments — the matrix whose
    1/n multiple is the asymptotic covariance of the moment estimators.
    """
    n, p = data.n, data.p
    if n < p + 3:
        raise TooFewRows(f"need n >= p + 3 = {p + 3}, got n = {n}")
    # Raw moments without validity checks: the plug-in construction is
    # well defined even for degenerate data (constant input gives zeros).
    mean_x = data.x.mean(axis=0)
    mean_y = data.y.mean()
    dx = data.x - mean_x
    dy = data.y - mean_y
    cov_xx = dx.T @ dx / (n - 1)
    cov_xy = dx.T @ dy / (n - 1)
    var_y = float(dy @ dy / (n - 1))
    theta_hat = np.concatenate(
        [mean_x, [mean_y], _vech(cov_xx), cov_xy, [var_y]]
    )

    # Vectorized kernel_h_tilde over all observations (rows).
    cols = [(data.x + mean_x) / 2.0, ((data.y + mean_y) / 2.0)[:, None]]
    vech_cols = np.stack(
        [(dx[:, j] * dx[:, l] + cov_xx[j, l]) / 2.0 for j, l in vech_indices(p)],
        axis=1,
    )
    cols.append(vech_cols)
    cols.append((dx * dy[:, None] + cov_xy) / 2.0)
    cols.append(((dy * dy + var_y) / 2.0)[:, None])
    h_tilde = np.hstack([np.atleast_2d(c) if c.ndim == 2 else c[:, None] for c in cols])

    centered = h_tilde - theta_hat
    sigma = centered.T @ centered / n
    return 4.0 * (sigma + sigma.T) / 2.0


def prediction_from_theta(theta: np.ndarray, x0, kind, p: int) -> float:
    """Evaluate the estimated predictor as a smooth map of the moment vector."""
    kind = PredictorKind.parse(kind)
    x0 = np.asarray(x0, dtype=float).ravel()
    mean_x, mean_y, cov_xx, cov_xy, var_y = _split_theta(theta, p)
    beta_ls = np.linalg.solve(cov_xx, cov_xy)
    d = x0 - mean_x
    if kind is PredictorKind.LSLP:
        return float(mean_y + d @ beta_ls)
    explained = float(cov_xy @ beta_ls)
    if explained <= 0 or var_y <= 0:
        raise DegenerateAgreement("explained variance is not positive")
    gamma = np.sqrt(explained / var_y)
    return float(mean_y + d @ beta_ls / gamma)


def analytic_gradient_p1(theta: np.ndarray, x0: float, kind) -> np.ndarray:
    """Exact gradient of the p = 1 prediction map at the moment vector.

    theta = (mean_x, mean_y, var_x, cov_xy, var_y).  The agreement map is
    t2 + sgn(t4) sqrt(t5/t3) (x0 - t1); the least-squares map is
    t2 + (t4/t3)(x0 - t1).
    """
    kind = PredictorKind.parse(kind)
    t1, _, t3, t4, t5 = np.asarray(theta, dtype=float).ravel()
    x0 = float(np.asarray(x0).ravel()[0])
    d = x0 - t1
    if kind is PredictorKind.LSLP:
        return np.array([-t4 / t3, 1.0, -d * t4 / t3**2, d / t3, 0.0])
    sgn = np.sign(t4)
    if sgn == 0:
        raise DegenerateAgreement("gradient undefined at zero cross covariance")
    sx = np.sqrt(t3)
    sy = np.sqrt(t5)
    return np.array(
        [
            -sgn * sy / sx,
            1.0,
            -d * sgn * sy / (2.0 * sx**3),
            0.0,
            d * sgn / (2.0 * sx * sy),
        ]
    )


def finite_difference_gradient(theta: np.ndarray, x0, kind, p: int) -> np.ndarray:
    """Central finite differences of the prediction map.

    Step per coordinate: max(1e-6 |theta_i|, 1e-8), chosen because the
    moment coordinates span very different scales.
    """
    theta = np.asarray(theta, dtype=float).ravel()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        step = max(1e-6 * abs(theta[i]), 1e-8)
        hi = theta.copy()
        lo = theta.copy()
        hi[i] += step
        lo[i] -= step
        try:
            f_hi = prediction_from_theta(hi, x0, kind, p)
            f_lo = prediction_from_theta(lo, x0, kind, p)
        except (np.linalg.LinAlgError, DegenerateAgreement) as exc:
            raise NumericalGradientFailure(
                f"perturbed moment vector not evaluable at coordinate {i}: {exc}"
            ) from exc
        grad[i] = (f_hi - f_lo) / (2.0 * step)
    if not np.isfinite(grad).all():
        raise NumericalGradientFailure("finite differences produced non-finite entries")
    return grad


def delta_method_avar(
    data: Dataset,
    x0,
    kind: Union[str, PredictorKind] = PredictorKind.MALP,
) -> float:
    """Distribution-free asymptotic variance factor via the delta method.

    Propagates the U-statistic covariance of the moment estimators through
    the prediction map: gradient' (4 Sigma_h) gradient, with analytic
    gradients for p = 1 and central finite differences otherwise.
    Refuses near-zero correlation, where the p = 1 map is not
    differentiable and the sampling distribution is a sign mixture.
    """
    kind = PredictorKind.parse(kind)
    summary = sample_moments(data)
    theta_hat = theta_from_summary(summary)
    p = data.p
    if kind is PredictorKind.MALP:
        gamma = multiple_correlation(summary)
        if p == 1:
            r = summary.cov_xy[0] / np.sqrt(summary.cov_xx[0, 0] * summary.var_y)
            if abs(r) < _SIGN_TOL:
                raise DegenerateAgreement(
                    f"|correlation| = {abs(r):.2e} below {_SIGN_TOL:.0e}; gradient undefined"
                )
        elif gamma < _SIGN_TOL:
            raise DegenerateAgreement(
                f"multiple correlation {gamma:.2e} below {_SIGN_TOL:.0e}"
            )
    sigma4 = ustat_sigma_h(data)
    if p == 1:
        grad = analytic_gradient_p1(theta_hat, x0, kind)
    else:
        grad = finite_difference_gradient(theta_hat, x0, kind, p)
    return float(grad @ sigma4 @ grad)
