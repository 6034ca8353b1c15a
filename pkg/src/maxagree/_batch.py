"""Vectorized fitting of many small datasets at once.

Monte Carlo studies, the bootstrap, and the jackknife all refit the same
closed-form estimators on thousands of small samples.  These helpers do
that with stacked arrays: ``xb`` has shape (B, n, p) and ``yb`` (B, n),
one fit per leading index.  Results mirror the scalar code paths in
:mod:`maxagree.predictor` exactly (same formulas, n-1 divisors); members
whose predictor covariance is not positive definite, or whose multiple
correlation falls below tolerance, are flagged rather than raising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .predictor import GAMMA_TOL

__all__ = [
    "BatchMoments",
    "BatchFits",
    "batch_moments",
    "resample_features",
    "resample_moments",
    "counts_matrix",
    "moments_from_sums",
    "loo_moments",
    "batch_fits",
    "batch_predict",
    "batch_avar_ma",
]


@dataclass(eq=False)
class BatchMoments:
    xbar: np.ndarray  # (B, p)
    ybar: np.ndarray  # (B,)
    sxx: np.ndarray  # (B, p, p)
    sxy: np.ndarray  # (B, p)
    sy2: np.ndarray  # (B,)

    @property
    def b(self) -> int:
        return self.ybar.size

    @property
    def p(self) -> int:
        return self.xbar.shape[1]


@dataclass(eq=False)
class BatchFits:
    beta_ls: np.ndarray  # (B, p); junk where ~ok_pd
    gamma: np.ndarray  # (B,)
    ok_pd: np.ndarray  # (B,) bool: sxx positive definite, sy2 > 0
    ok_malp: np.ndarray  # (B,) bool: ok_pd and gamma >= tolerance
    moments: BatchMoments


def batch_moments(xb: np.ndarray, yb: np.ndarray) -> BatchMoments:
    xb = np.asarray(xb, dtype=float)
    yb = np.asarray(yb, dtype=float)
    n = xb.shape[1]
    xbar = xb.mean(axis=1)
    ybar = yb.mean(axis=1)
    xc = xb - xbar[:, None, :]
    yc = yb - ybar[:, None]
    sxx = np.einsum("bij,bik->bjk", xc, xc) / (n - 1)
    sxy = np.einsum("bij,bi->bj", xc, yc) / (n - 1)
    sy2 = np.einsum("bi,bi->b", yc, yc) / (n - 1)
    return BatchMoments(xbar, ybar, sxx, sxy, sy2)


def resample_features(x: np.ndarray, y: np.ndarray):
    """Per-row sufficient statistics for with-replacement resampling.

    Returns (features, xbar, ybar): the rows are [xc, yc, vech(xc xc'),
    xc*yc, yc^2] of the globally centered data, so a resample's moments
    are one count-vector product away.  Global centering keeps the
    sum-minus-mean conversion free of cancellation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    xbar = x.mean(axis=0)
    ybar = y.mean()
    xc = x - xbar
    yc = y - ybar
    cols = [xc, yc[:, None]]
    cols.append(np.stack([xc[:, j] * xc[:, l] for j in range(p) for l in range(j, p)], axis=1))
    cols.append(xc * yc[:, None])
    cols.append((yc * yc)[:, None])
    return np.hstack(cols), xbar, ybar


def counts_matrix(idx: np.ndarray, n_rows: int) -> np.ndarray:
    """Row-count matrix (B, n_rows) of index draws, via one bincount."""
    b, draws = idx.shape
    dtype = idx.dtype if b * n_rows < np.iinfo(idx.dtype).max else np.intp
    offsets = (np.arange(b, dtype=dtype) * n_rows)[:, None]
    counts = np.bincount((idx.astype(dtype, copy=False) + offsets).ravel(), minlength=b * n_rows)
    return counts.reshape(b, n_rows).astype(np.float64)


def moments_from_sums(
    sums: np.ndarray, n: int, xbar: np.ndarray, ybar: float
) -> BatchMoments:
    """Convert summed centered features over n draws into moments.

    Inverse of the classic sum-to-central conversion; exact algebra with
    the n-1 divisor, so results match a direct two-pass computation.
    """
    p = xbar.size
    b = sums.shape[0]
    dev_x = sums[:, :p] / n
    dev_y = sums[:, p] / n
    sxx = np.empty((b, p, p))
    col = p + 1
    for j in range(p):
        for l in range(j, p):
            v = (sums[:, col] - n * dev_x[:, j] * dev_x[:, l]) / (n - 1)
            sxx[:, j, l] = v
            sxx[:, l, j] = v
            col += 1
    sxy = (sums[:, col : col + p] - n * dev_x * dev_y[:, None]) / (n - 1)
    col += p
    sy2 = (sums[:, col] - n * dev_y * dev_y) / (n - 1)
    return BatchMoments(xbar + dev_x, ybar + dev_y, sxx, sxy, sy2)


def resample_moments(
    feats: np.ndarray, xbar: np.ndarray, ybar: float, idx: np.ndarray
) -> BatchMoments:
    """Moments of with-replacement resamples given by index rows.

    ``idx`` has shape (B, n) with values in [0, n); row counts turn into
    moment sums with a single matrix product against the features.
    """
    n = feats.shape[0]
    sums = counts_matrix(idx, n) @ feats
    return moments_from_sums(sums, n, xbar, ybar)


def loo_moments(x: np.ndarray, y: np.ndarray) -> BatchMoments:
    """Moments of the n leave-one-out subsamples via exact downdating."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = x.shape
    xbar = x.mean(axis=0)
    ybar = y.mean()
    xc = x - xbar
    yc = y - ybar
    axx = xc.T @ xc
    axy = xc.T @ yc
    ayy = yc @ yc
    w = n / (n - 1.0)
    xbar_loo = (n * xbar - x) / (n - 1)
    ybar_loo = (n * ybar - y) / (n - 1)
    sxx_loo = (axx - w * np.einsum("ij,ik->ijk", xc, xc)) / (n - 2)
    sxy_loo = (axy - w * xc * yc[:, None]) / (n - 2)
    sy2_loo = (ayy - w * yc * yc) / (n - 2)
    return BatchMoments(xbar_loo, ybar_loo, sxx_loo, sxy_loo, sy2_loo)


def _pd_mask(sxx: np.ndarray) -> np.ndarray:
    """Cholesky-success mask per batch member."""
    b, p, _ = sxx.shape
    if p == 1:
        return sxx[:, 0, 0] > 0.0
    if p == 2:
        # Sylvester criterion, equivalent to Cholesky success.
        a = sxx[:, 0, 0]
        det = a * sxx[:, 1, 1] - sxx[:, 0, 1] * sxx[:, 1, 0]
        return (a > 0.0) & (det > 0.0)
    try:
        np.linalg.cholesky(sxx)
        return np.ones(b, dtype=bool)
    except np.linalg.LinAlgError:
        ok = np.empty(b, dtype=bool)
        for i in range(b):
            try:
                np.linalg.cholesky(sxx[i])
                ok[i] = True
            except np.linalg.LinAlgError:
                ok[i] = False
        return ok


def _solve_beta(mom: BatchMoments, ok_pd: np.ndarray) -> np.ndarray:
    p = mom.p
    if p == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(ok_pd, mom.sxy[:, 0] / mom.sxx[:, 0, 0], 0.0)[:, None]
    if p == 2:
        # Closed-form 2x2 solve: far cheaper than batched LAPACK here.
        a = mom.sxx[:, 0, 0]
        bb = mom.sxx[:, 0, 1]
        d = mom.sxx[:, 1, 1]
        det = a * d - bb * bb
        s1 = mom.sxy[:, 0]
        s2 = mom.sxy[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(ok_pd, det, 1.0)
            beta = np.stack([(d * s1 - bb * s2) / safe, (a * s2 - bb * s1) / safe], axis=1)
        return np.where(ok_pd[:, None], beta, 0.0)
    sxx_safe = np.where(ok_pd[:, None, None], mom.sxx, np.eye(p))
    return np.linalg.solve(sxx_safe, mom.sxy[..., None])[..., 0]


def batch_fits(mom: BatchMoments, tol: float = GAMMA_TOL) -> BatchFits:
    ok_pd = _pd_mask(mom.sxx) & (mom.sy2 > 0.0)
    beta_ls = _solve_beta(mom, ok_pd)
    explained = np.einsum("bj,bj->b", mom.sxy, beta_ls)
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma2 = np.where(mom.sy2 > 0, explained / mom.sy2, 0.0)
    gamma = np.sqrt(np.clip(gamma2, 0.0, 1.0))
    ok_pd &= np.isfinite(beta_ls).all(axis=1)
    ok_malp = ok_pd & (gamma >= tol)
    return BatchFits(beta_ls, gamma, ok_pd, ok_malp, mom)


def batch_predict(fits: BatchFits, x0: np.ndarray, malp: bool) -> np.ndarray:
    """Predictions at x0 for every batch member.

    x0 of shape (p,) gives (B,); shape (m, p) gives (B, m).  Entries for
    failed members are arbitrary; consult the fit masks.
    """
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    pts = np.atleast_2d(x0)  # (m, p)
    d = pts[None, :, :] - fits.moments.xbar[:, None, :]  # (B, m, p)
    slope = fits.beta_ls
    if malp:
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(
                fits.ok_malp[:, None], fits.beta_ls / np.where(fits.gamma > 0, fits.gamma, 1.0)[:, None], np.nan
            )
    pred = fits.moments.ybar[:, None] + np.einsum("bmj,bj->bm", d, slope)
    return pred[:, 0] if single else pred


def batch_avar_ma(fits: BatchFits, x0: np.ndarray) -> np.ndarray:
    """Plug-in asymptotic variance factor of the agreement predictor, per member.

    Same closed form as :func:`maxagree.avar.avar_normal` with hatted
    moments; nan where the member failed or gamma is 0 or 1.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    mom = fits.moments
    d = x0[None, :] - mom.xbar  # (B, p)
    sxx_safe = np.where(fits.ok_pd[:, None, None], mom.sxx, np.eye(mom.p))
    sol = np.linalg.solve(sxx_safe, d[..., None])[..., 0]
    maha = np.einsum("bj,bj->b", d, sol)
    proj = np.einsum("bj,bj->b", mom.sxy, sol)
    g = fits.gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        bracket = (
            2.0 / (1.0 + g)
            + maha / g**2
            - ((1.0 - g**2) / (mom.sy2 * g**4)) * proj**2
        )
        out = mom.sy2 * (1.0 - g**2) * bracket
    out = np.where(fits.ok_malp & (g > 0) & (g < 1), out, np.nan)
    return out
