"""Interacting multiple model bank of unscented filters."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import ukf
from .motion import ALL_MODELS, CX, CY, H, W, ModelId, NoiseConfig, process_noise
from .ukf import Gaussian, NumericalDegeneracyError, UtParams

LIKELIHOOD_FLOOR = 1e-300
MIX_FLOOR = 1e-300

# adaptive sharpening: dominance ratio, run length, boosted self-transition
SHARPEN_RATIO = 10.0
SHARPEN_RUN = 3
SHARPEN_SELF = 0.98


def default_tpm(n: int = 3, self_prob: float = 0.95) -> np.ndarray:
    if n == 1:
        return np.ones((1, 1))
    off = (1.0 - self_prob) / (n - 1)
    tpm = np.full((n, n), off)
    np.fill_diagonal(tpm, self_prob)
    return tpm


@dataclass(frozen=True)
class ImmConfig:
    tpm: np.ndarray = field(default_factory=default_tpm)
    mu_init: np.ndarray = field(default_factory=lambda: np.full(3, 1.0 / 3.0))
    adaptive: bool = False
    theta_stable: float = 0.55
    window: int = 3

    def __post_init__(self):
        tpm = np.asarray(self.tpm, dtype=float)
        mu = np.asarray(self.mu_init, dtype=float)
        if tpm.ndim != 2 or tpm.shape[0] != tpm.shape[1]:
            raise ValueError("tpm must be square")
        if np.any(tpm < 0) or np.any(np.abs(tpm.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("tpm rows must be non-negative and sum to 1")
        if mu.shape != (tpm.shape[0],) or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-9:
            raise ValueError("mu_init must be a probability vector matching tpm")
        if not 0.0 < self.theta_stable < 1.0:
            raise ValueError("theta_stable must lie in (0, 1)")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        object.__setattr__(self, "tpm", tpm)
        object.__setattr__(self, "mu_init", mu)

    def single_model(self) -> ImmConfig:
        """The same configuration collapsed to one (CV) filter."""
        return replace(self, tpm=np.ones((1, 1)), mu_init=np.ones(1))


@dataclass(frozen=True)
class ImmState:
    """Filter bank of one track. Row j of ``means``/``covs`` belongs to ``models[j]``."""

    models: tuple[ModelId, ...]
    means: np.ndarray
    covs: np.ndarray
    mu: np.ndarray
    tpm: np.ndarray
    combined: Gaussian
    uncertainty: float
    # predicted model probabilities from the most recent mixing step
    cbar: np.ndarray | None = None
    dominant: int = -1
    dominant_run: int = 0

    @property
    def n_models(self) -> int:
        return len(self.models)

    @property
    def filters(self) -> dict[ModelId, Gaussian]:
        return {m: Gaussian(self.means[j], self.covs[j]) for j, m in enumerate(self.models)}

    def mu_of(self, model: ModelId) -> float:
        return float(self.mu[self.models.index(model)]) if model in self.models else 0.0


def _moment_match(weights: np.ndarray, means: np.ndarray, covs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column j of ``weights`` (k x J) gives the mixture for output j."""
    out_means = weights.T @ means
    d = means[None, :, :] - out_means[:, None, :]
    out_covs = np.einsum("kj,kab->jab", weights, covs) + np.einsum("kj,jka,jkb->jab", weights, d, d)
    return out_means, ukf.symmetrize(out_covs)


def combined_estimate(filters, mu) -> Gaussian:
    """Moment-matched Gaussian of the weighted mixture.

    ``filters`` is an :class:`ImmState`, a mapping of model to Gaussian or a
    sequence of Gaussians.
    """
    if isinstance(filters, ImmState):
        means, covs = filters.means, filters.covs
    else:
        gs = list(filters.values()) if isinstance(filters, dict) else list(filters)
        means = np.stack([g.mean for g in gs])
        covs = np.stack([g.cov for g in gs])
    mu = np.asarray(mu, dtype=float)
    if means.shape[0] == 1:
        return Gaussian(means[0].copy(), covs[0].copy())
    m, p = _moment_match(mu[:, None], means, covs)
    return Gaussian(m[0], p[0])


def predictive_uncertainty(g: Gaussian) -> float:
    """Position standard deviation normalised by the box diagonal."""
    spread = np.sqrt(max(g.cov[CX, CX] + g.cov[CY, CY], 0.0))
    diag = np.hypot(g.mean[W], g.mean[H])
    return float(spread / max(diag, 1e-9))


def _with_bank(s: ImmState, means, covs, mu, **kw) -> ImmState:
    combined = combined_estimate(ImmState(s.models, means, covs, mu, s.tpm, s.combined, 0.0), mu)
    return replace(
        s, means=means, covs=covs, mu=mu, combined=combined, uncertainty=predictive_uncertainty(combined), **kw
    )


def init_state(mean: np.ndarray, cov: np.ndarray, cfg: ImmConfig, models: Sequence[ModelId] = ALL_MODELS) -> ImmState:
    models = tuple(models)
    if len(models) == 1 and cfg.tpm.shape[0] != 1:
        cfg = cfg.single_model()
    if len(models) != cfg.tpm.shape[0]:
        raise ValueError("number of models does not match the transition matrix")
    mean = np.asarray(mean, dtype=float)
    cov = ukf.symmetrize(np.asarray(cov, dtype=float))
    k = len(models)
    g = Gaussian(mean.copy(), cov.copy())
    return ImmState(
        models=models,
        means=np.repeat(mean[None, :], k, axis=0),
        covs=np.repeat(cov[None], k, axis=0),
        mu=cfg.mu_init.copy(),
        tpm=cfg.tpm.copy(),
        combined=g,
        uncertainty=predictive_uncertainty(g),
    )


def mix(s: ImmState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """IMM interaction. Returns mixed means, mixed covariances and c_j."""
    cbar = s.tpm.T @ s.mu
    if s.n_models == 1:
        return s.means.copy(), s.covs.copy(), cbar
    starved = cbar < MIX_FLOOR
    safe = np.where(starved, 1.0, cbar)
    weights = s.tpm * s.mu[:, None] / safe[None, :]
    means, covs = _moment_match(weights, s.means, s.covs)
    if np.any(starved):
        means[starved] = s.combined.mean
        covs[starved] = s.combined.cov
    return means, covs, cbar


def predict(
    s: ImmState,
    dt: float = 1.0,
    ut: UtParams = UtParams(),
    noise: NoiseConfig = NoiseConfig(),
    q_cache: dict | None = None,
    track_id: int | None = None,
) -> ImmState:
    """Mix and time-update every model. Model probabilities are left untouched."""
    means, covs, cbar = mix(s)
    key = (s.models, dt)
    qs = None if q_cache is None else q_cache.get(key)
    if qs is None:
        qs = np.stack([process_noise(m, dt, noise) for m in s.models])
        if q_cache is not None:
            q_cache[key] = qs
    try:
        means, covs = ukf.predict_many(means, covs, s.models, dt, ut, qs, track_id)
    except NumericalDegeneracyError as exc:
        exc.track_id = track_id
        raise
    return _with_bank(s, means, covs, s.mu, cbar=cbar)


def update(
    s: ImmState,
    z,
    r: np.ndarray,
    ut: UtParams = UtParams(),
    cfg: ImmConfig | None = None,
    track_id: int | None = None,
) -> ImmState:
    """Measurement-update every model and re-weight model probabilities."""
    cbar = s.cbar if s.cbar is not None else s.tpm.T @ s.mu
    try:
        means, covs, lik, _, _ = ukf.update_many(s.means, s.covs, z, r, ut, track_id)
    except NumericalDegeneracyError as exc:
        exc.track_id = track_id
        raise
    lik = np.maximum(lik, LIKELIHOOD_FLOOR)
    mu = lik * cbar
    mu = mu / mu.sum()
    s = _with_bank(s, means, covs, mu, cbar=None)
    if cfg is not None and cfg.adaptive and s.n_models > 1:
        s = _sharpen(s, lik, cfg)
    return s


def _sharpen(s: ImmState, lik: np.ndarray, cfg: ImmConfig) -> ImmState:
    order = np.argsort(lik)[::-1]
    best = int(order[0])
    dominant = lik[best] >= SHARPEN_RATIO * lik[order[1]]
    run = s.dominant_run + 1 if dominant and best == s.dominant else (1 if dominant else 0)
    tpm = cfg.tpm.copy()
    if run >= SHARPEN_RUN:
        row = tpm[best].copy()
        others = 1.0 - row[best]
        row *= (1.0 - SHARPEN_SELF) / others if others > 0 else 0.0
        row[best] = SHARPEN_SELF
        tpm[best] = row
    return replace(s, tpm=tpm, dominant=best if dominant else -1, dominant_run=run)


def step(
    s: ImmState,
    z,
    dt: float = 1.0,
    cfg: ImmConfig | None = None,
    ut: UtParams = UtParams(),
    noise: NoiseConfig = NoiseConfig(),
    track_id: int | None = None,
) -> ImmState:
    """One full cycle; ``z=None`` coasts (predict only, probabilities frozen)."""
    s = predict(s, dt, ut, noise, track_id=track_id)
    if z is None:
        return s
    return update(s, z, noise.measurement_noise(), ut, cfg, track_id)


def maneuver_score(history, theta_stable: float = 0.55) -> tuple[float, bool]:
    """Score in [0, 1] from recent CV probabilities; higher means more maneuvering.

    ``history`` holds CV probabilities or full probability vectors with CV first.
    """
    cv = [float(np.atleast_1d(h)[0]) for h in history]
    if not cv:
        return 0.0, True
    mean_cv = sum(cv) / len(cv)
    return 1.0 - mean_cv, mean_cv >= theta_stable
