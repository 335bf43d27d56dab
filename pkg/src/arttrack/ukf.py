"""Scaled unscented Kalman filter for one model-conditioned state."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .motion import MEAS_INDEX, ModelId, NoiseConfig, process_noise, transition

JITTER_ATTEMPTS = 3
JITTER_FACTOR = 1e-9


class NumericalDegeneracyError(RuntimeError):
    """A covariance could not be factorised even after diagonal jitter."""

    def __init__(self, message: str, track_id: int | None = None, model: ModelId | None = None):
        super().__init__(message)
        self.track_id = track_id
        self.model = model

    def __str__(self) -> str:
        tags = []
        if self.track_id is not None:
            tags.append(f"track {self.track_id}")
        if self.model is not None:
            tags.append(f"model {ModelId(self.model).name}")
        base = super().__str__()
        return f"{base} ({', '.join(tags)})" if tags else base


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class UtParams:
    alpha: float = 0.5
    beta: float = 2.0
    kappa: float = 0.0

    def weights(self, n: int) -> tuple[np.ndarray, np.ndarray, float]:
        """Mean weights, covariance weights and the sigma spread factor ``n + lambda``."""
        return _ut_weights(self.alpha, self.beta, self.kappa, n)


@lru_cache(maxsize=64)
def _ut_weights(alpha: float, beta: float, kappa: float, n: int):
    lam = alpha**2 * (n + kappa) - n
    c = n + lam
    wm = np.full(2 * n + 1, 0.5 / c)
    wc = wm.copy()
    wm[0] = lam / c
    wc[0] = lam / c + (1.0 - alpha**2 + beta)
    wm.flags.writeable = False
    wc.flags.writeable = False
    return wm, wc, c


def symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + np.swapaxes(p, -1, -2))


def robust_cholesky(p: np.ndarray, track_id: int | None = None) -> np.ndarray:
    """Lower Cholesky factor(s), retrying with growing diagonal jitter.

    Accepts a single matrix or a stack; an all-zero matrix factors to zero.
    """
    try:
        return np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        pass
    if p.ndim == 3:
        return np.stack([robust_cholesky(m, track_id) for m in p])
    n = p.shape[0]
    if not np.any(p):
        return np.zeros_like(p)
    jitter = JITTER_FACTOR * max(np.trace(p), 0.0) / n
    if jitter <= 0.0:
        jitter = JITTER_FACTOR
    eye = np.eye(n)
    for attempt in range(JITTER_ATTEMPTS):
        try:
            return np.linalg.cholesky(p + jitter * (10.0**attempt) * eye)
        except np.linalg.LinAlgError:
            continue
    raise NumericalDegeneracyError("covariance is not positive definite", track_id=track_id)


def _sigma_stack(means: np.ndarray, covs: np.ndarray, p: UtParams, track_id: int | None):
    """Sigma points for a stack of Gaussians: (k, 2n+1, n)."""
    k, n = means.shape
    wm, wc, c = p.weights(n)
    root = robust_cholesky(c * covs, track_id)
    cols = np.swapaxes(root, -1, -2)
    pts = np.empty((k, 2 * n + 1, n))
    pts[:, 0] = means
    pts[:, 1 : n + 1] = means[:, None, :] + cols
    pts[:, n + 1 :] = means[:, None, :] - cols
    return pts, wm, wc


def sigma_points(g: Gaussian, p: UtParams = UtParams(), track_id: int | None = None):
    """Return ``(points, wm, wc)`` with the 2n+1 points stacked as rows."""
    pts, wm, wc = _sigma_stack(g.mean[None, :], g.cov[None], p, track_id)
    return pts[0], wm, wc


def _moments(pts: np.ndarray, wm: np.ndarray, wc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = np.einsum("s,...si->...i", wm, pts)
    d = pts - mean[..., None, :]
    cov = np.einsum("s,...si,...sj->...ij", wc, d, d)
    return mean, symmetrize(cov)


def unscented_transform(pts: np.ndarray, wm: np.ndarray, wc: np.ndarray) -> Gaussian:
    mean, cov = _moments(pts, wm, wc)
    return Gaussian(mean, cov)


def predict_many(
    means: np.ndarray,
    covs: np.ndarray,
    models: Sequence[ModelId],
    dt: float,
    p: UtParams,
    qs: np.ndarray,
    track_id: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Time-update a (k, n) / (k, n, n) stack, row j under ``models[j]`` and ``qs[j]``."""
    try:
        pts, wm, wc = _sigma_stack(means, covs, p, track_id)
    except NumericalDegeneracyError as exc:
        if len(models) == 1:
            exc.model = models[0]
        raise
    prop = np.empty_like(pts)
    for j, model in enumerate(models):
        prop[j] = transition(model, pts[j], dt)
    mean, cov = _moments(prop, wm, wc)
    return mean, symmetrize(cov + qs)


def predict(
    g: Gaussian,
    model: ModelId,
    dt: float = 1.0,
    p: UtParams = UtParams(),
    noise: NoiseConfig | np.ndarray = NoiseConfig(),
    track_id: int | None = None,
) -> Gaussian:
    """Unscented time update. ``noise`` is a NoiseConfig or a precomputed Q."""
    q = noise if isinstance(noise, np.ndarray) else process_noise(model, dt, noise)
    mean, cov = predict_many(g.mean[None, :], g.cov[None], [model], dt, p, q[None], track_id)
    return Gaussian(mean[0], cov[0])


def _innovation_stack(means, covs, r, p, track_id):
    pts, wm, wc = _sigma_stack(means, covs, p, track_id)
    zs = pts[..., MEAS_INDEX]
    z_mean = np.einsum("s,ksi->ki", wm, zs)
    dz = zs - z_mean[:, None, :]
    dx = pts - means[:, None, :]
    s = symmetrize(np.einsum("s,ksi,ksj->kij", wc, dz, dz) + r)
    pxz = np.einsum("s,ksi,ksj->kij", wc, dx, dz)
    return z_mean, s, pxz


def innovation_moments(g: Gaussian, r: np.ndarray, p: UtParams = UtParams(), track_id: int | None = None):
    """Predicted measurement, innovation covariance S and state/measurement cross-covariance."""
    z_mean, s, pxz = _innovation_stack(g.mean[None, :], g.cov[None], r, p, track_id)
    return z_mean[0], s[0], pxz[0]


def gaussian_density(nu: np.ndarray, s: np.ndarray) -> float:
    """Density of ``nu`` under N(0, S)."""
    return float(_densities(nu[None, :], np.linalg.inv(np.linalg.cholesky(s))[None])[0])


def _densities(nu: np.ndarray, chol_inv: np.ndarray) -> np.ndarray:
    white = np.einsum("kij,kj->ki", chol_inv, nu)
    # log det S = -2 * sum(log diag(L^-1))
    log_det = -2.0 * np.sum(np.log(np.diagonal(chol_inv, axis1=-2, axis2=-1)), axis=-1)
    k = nu.shape[-1]
    return np.exp(-0.5 * np.sum(white * white, axis=-1) - 0.5 * (k * np.log(2.0 * np.pi) + log_det))


def update_many(
    means: np.ndarray, covs: np.ndarray, z, r: np.ndarray, p: UtParams = UtParams(), track_id: int | None = None
):
    """Update a stack of Gaussians with the same measurement.

    Returns ``(means, covs, likelihoods, innovations, S)``, all stacked.
    """
    z = np.asarray(z, dtype=float)
    z_pred, s, pxz = _innovation_stack(means, covs, r, p, track_id)
    chol = robust_cholesky(s, track_id)
    if not np.all(np.any(chol, axis=(-1, -2))):
        raise NumericalDegeneracyError("innovation covariance is singular", track_id=track_id)
    chol_inv = np.linalg.inv(chol)
    s_inv = np.swapaxes(chol_inv, -1, -2) @ chol_inv
    nu = z[None, :] - z_pred
    gain = pxz @ s_inv
    post_mean = means + np.einsum("kij,kj->ki", gain, nu)
    post_cov = symmetrize(covs - gain @ np.swapaxes(pxz, -1, -2))
    lik = _densities(nu, chol_inv)
    return post_mean, post_cov, lik, nu, s


def update(
    g: Gaussian,
    z,
    r: np.ndarray,
    p: UtParams = UtParams(),
    track_id: int | None = None,
):
    """Unscented measurement update.

    Returns ``(posterior, likelihood, innovation, S)``; the likelihood is the
    density of the innovation under N(0, S).
    """
    mean, cov, lik, nu, s = update_many(g.mean[None, :], g.cov[None], z, r, p, track_id)
    return Gaussian(mean[0], cov[0]), float(lik[0]), nu[0], s[0]
