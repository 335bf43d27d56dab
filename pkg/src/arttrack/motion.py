"""Motion models over the shared 9-dimensional state.

State layout: ``[cx, cy, vx, vy, ax, ay, omega, w, h]`` with positions and
sizes in pixels, velocities in px/frame, accelerations in px/frame^2 and the
turn rate in rad/frame. All three models act on the same vector so that IMM
mixing needs no projection between state spaces.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

STATE_DIM = 9
MEAS_DIM = 4
CX, CY, VX, VY, AX, AY, OMEGA, W, H = range(STATE_DIM)
MEAS_INDEX = np.array([CX, CY, W, H])

OMEGA_EPS = 1e-6
# floor for w/h leaving a transition; boxes are clamped to 1 px downstream
MIN_EXTENT = 1e-3


class ModelId(enum.IntEnum):
    CV = 0
    CA = 1
    CT = 2


ALL_MODELS = (ModelId.CV, ModelId.CA, ModelId.CT)


@dataclass(frozen=True)
class NoiseConfig:
    """Process and measurement noise scales (standard deviations per frame)."""

    sigma_cv_vel: float = 1.0
    sigma_ca_acc: float = 0.5
    sigma_ct_omega: float = 0.05
    sigma_ct_vel: float = 1.0
    sigma_wh: float = 0.5
    r_center: float = 1.0
    r_size: float = 4.0

    def measurement_noise(self) -> np.ndarray:
        return np.diag([self.r_center, self.r_center, self.r_size, self.r_size]).astype(float)


def transition(model: ModelId, s: np.ndarray, dt: float = 1.0) -> np.ndarray:
    """Propagate one state, or a stack of states along the last axis, by ``dt``."""
    s = np.asarray(s, dtype=float)
    out = s.copy()
    cx, cy, vx, vy = s[..., CX], s[..., CY], s[..., VX], s[..., VY]
    if model == ModelId.CV:
        out[..., CX] = cx + vx * dt
        out[..., CY] = cy + vy * dt
    elif model == ModelId.CA:
        ax, ay = s[..., AX], s[..., AY]
        out[..., CX] = cx + vx * dt + 0.5 * ax * dt * dt
        out[..., CY] = cy + vy * dt + 0.5 * ay * dt * dt
        out[..., VX] = vx + ax * dt
        out[..., VY] = vy + ay * dt
    elif model == ModelId.CT:
        omega = s[..., OMEGA]
        small = np.abs(omega) < OMEGA_EPS
        safe = np.where(small, 1.0, omega)
        wt = safe * dt
        sin_wt, cos_wt = np.sin(wt), np.cos(wt)
        dx = np.where(small, vx * dt, (vx * sin_wt - vy * (1.0 - cos_wt)) / safe)
        dy = np.where(small, vy * dt, (vx * (1.0 - cos_wt) + vy * sin_wt) / safe)
        out[..., CX] = cx + dx
        out[..., CY] = cy + dy
        out[..., VX] = np.where(small, vx, vx * cos_wt - vy * sin_wt)
        out[..., VY] = np.where(small, vy, vx * sin_wt + vy * cos_wt)
    else:
        raise ValueError(f"unknown motion model {model!r}")
    out[..., W] = np.maximum(out[..., W], MIN_EXTENT)
    out[..., H] = np.maximum(out[..., H], MIN_EXTENT)
    return out


def measurement_fn(s: np.ndarray) -> np.ndarray:
    """Project state(s) to ``[cx, cy, w, h]``."""
    return np.asarray(s, dtype=float)[..., MEAS_INDEX]


def state_from_measurement(z) -> np.ndarray:
    s = np.zeros(STATE_DIM)
    s[MEAS_INDEX] = np.asarray(z, dtype=float)
    return s


def _dwna_block(sigma: float, dt: float) -> np.ndarray:
    # velocity kicked by sigma*dt per step, position picks up half of it
    g = np.array([0.5 * dt, 1.0]) * (sigma * dt)
    return np.outer(g, g)


def process_noise(model: ModelId, dt: float = 1.0, scale: NoiseConfig = NoiseConfig()) -> np.ndarray:
    """9x9 process noise covariance for ``model``.

    CV perturbs velocity, CA perturbs acceleration (leaking into velocity and
    position), CT perturbs turn rate and velocity. Every model lets the box
    extent random-walk with ``sigma_wh``.
    """
    q = np.zeros((STATE_DIM, STATE_DIM))
    if model == ModelId.CV:
        block = _dwna_block(scale.sigma_cv_vel, dt)
        for p, v in ((CX, VX), (CY, VY)):
            q[np.ix_([p, v], [p, v])] += block
    elif model == ModelId.CA:
        g = np.array([0.5 * dt * dt, dt, 1.0]) * (scale.sigma_ca_acc * dt)
        block = np.outer(g, g)
        for p, v, a in ((CX, VX, AX), (CY, VY, AY)):
            q[np.ix_([p, v, a], [p, v, a])] += block
    elif model == ModelId.CT:
        block = _dwna_block(scale.sigma_ct_vel, dt)
        for p, v in ((CX, VX), (CY, VY)):
            q[np.ix_([p, v], [p, v])] += block
        q[OMEGA, OMEGA] += (scale.sigma_ct_omega * dt) ** 2
    else:
        raise ValueError(f"unknown motion model {model!r}")
    q[W, W] += scale.sigma_wh**2 * dt
    q[H, H] += scale.sigma_wh**2 * dt
    return q
