"""Deterministic synthetic sequences with regime-switching motion.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014) so that fixtures
can be reproduced bit-for-bit in other languages:

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z ^ (z >> 31)

Uniforms are ``(output >> 11) * 2^-53``. Normals use one Box-Muller draw per
pair of uniforms, ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``, discarding the sine
branch. Ground truth is drawn from the stream seeded with ``seed``;
detection degradation uses ``seed ^ DEGRADE_SALT``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TextIO

import numpy as np

from .config import parse_bool, parse_floats, parse_int
from .geometry import BoundingBox, Detection, iou
from .motion import AX, AY, CX, CY, H, OMEGA, VX, VY, W, ModelId, transition
from .mot_io import SequenceData

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
DEGRADE_SALT = 0xD1B54A32D192ED03
MAX_PLACEMENT_ATTEMPTS = 1000


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform_range(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def sign(self) -> float:
        return 1.0 if self.uniform() < 0.5 else -1.0

    def choice(self, weights) -> int:
        total = float(sum(weights))
        u = self.uniform() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return len(weights) - 1


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_targets: int = 10
    n_frames: int = 500
    width: float = 1280.0
    height: float = 720.0
    dwell_mean: float = 40.0
    regime_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    speed_range: tuple[float, float] = (1.5, 4.0)
    accel_range: tuple[float, float] = (0.05, 0.15)
    turn_rate_range: tuple[float, float] = (0.05, 0.2)
    box_w_range: tuple[float, float] = (24.0, 48.0)
    box_h_range: tuple[float, float] = (16.0, 36.0)
    motion_noise: float = 0.05
    seed: int = 0
    jitter_sigma: float = 0.05
    dropout_prob: float = 0.0
    occlusion_merge: bool = False
    merge_iou: float = 0.4
    conf_mean: float = 0.9
    conf_spread: float = 0.05

    def __post_init__(self):
        if self.n_targets < 0 or self.n_frames < 0:
            raise SimulationError("n_targets and n_frames must be non-negative")
        if self.width <= 0 or self.height <= 0:
            raise SimulationError("arena width and height must be positive")
        if self.dwell_mean < 1:
            raise SimulationError("dwell_mean must be >= 1")
        if len(self.regime_weights) != 3 or min(self.regime_weights) < 0 or sum(self.regime_weights) <= 0:
            raise SimulationError("regime_weights needs three non-negative weights with positive sum")
        for name in ("speed_range", "accel_range", "turn_rate_range", "box_w_range", "box_h_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise SimulationError(f"{name} must satisfy 0 <= low <= high")
        if self.box_w_range[0] <= 0 or self.box_h_range[0] <= 0:
            raise SimulationError("box sizes must be positive")
        if self.box_w_range[1] >= self.width or self.box_h_range[1] >= self.height:
            raise SimulationError("boxes must fit inside the arena")
        for name in ("dropout_prob", "merge_iou", "conf_mean", "conf_spread"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SimulationError(f"{name} must lie in [0, 1]")
        if self.jitter_sigma < 0 or self.motion_noise < 0:
            raise SimulationError("jitter_sigma and motion_noise must be non-negative")

    def oracle(self) -> SimConfig:
        """Same sequence with detections equal to ground truth."""
        return replace(self, jitter_sigma=0.0, dropout_prob=0.0, occlusion_merge=False)


@dataclass
class SimOutput:
    gt: SequenceData
    det: SequenceData
    regimes: dict[int, list[ModelId]] = field(default_factory=dict)

    def regime_rows(self) -> list[tuple[int, int, str]]:
        rows = []
        n = max((len(v) for v in self.regimes.values()), default=0)
        for f in range(n):
            for tid in sorted(self.regimes):
                rows.append((f + 1, tid, self.regimes[tid][f].name))
        return rows


def _enter_regime(s: np.ndarray, regime: ModelId, cfg: SimConfig, rng: SplitMix64) -> None:
    s[AX] = s[AY] = 0.0
    s[OMEGA] = 0.0
    if regime == ModelId.CA:
        speed = math.hypot(s[VX], s[VY])
        mag = rng.uniform_range(*cfg.accel_range) * rng.sign()
        ux, uy = (s[VX] / speed, s[VY] / speed) if speed > 0 else (1.0, 0.0)
        s[AX], s[AY] = mag * ux, mag * uy
    elif regime == ModelId.CT:
        s[OMEGA] = rng.uniform_range(*cfg.turn_rate_range) * rng.sign()


def _limit_speed(s: np.ndarray, cfg: SimConfig) -> None:
    lo, hi = cfg.speed_range
    speed = math.hypot(s[VX], s[VY])
    if speed <= 0:
        return
    if speed > hi or speed < lo:
        target = hi if speed > hi else lo
        s[VX] *= target / speed
        s[VY] *= target / speed
        # stop accelerating past the limit
        s[AX] = s[AY] = 0.0


def _reflect(s: np.ndarray, cfg: SimConfig) -> None:
    for c, v, a, half, size in ((CX, VX, AX, s[W] / 2, cfg.width), (CY, VY, AY, s[H] / 2, cfg.height)):
        lo, hi = half, size - half
        mirrored = False
        if s[c] < lo:
            s[c] = 2 * lo - s[c]
            s[v] = abs(s[v])
            s[a] = abs(s[a])
            mirrored = True
        elif s[c] > hi:
            s[c] = 2 * hi - s[c]
            s[v] = -abs(s[v])
            s[a] = -abs(s[a])
            mirrored = True
        s[c] = min(max(s[c], lo), hi)
        if mirrored:
            s[OMEGA] = -s[OMEGA]


def _box(s: np.ndarray) -> BoundingBox:
    return BoundingBox(s[CX] - s[W] / 2, s[CY] - s[H] / 2, s[W], s[H])


def _place(cfg: SimConfig, rng: SplitMix64) -> list[np.ndarray]:
    states: list[np.ndarray] = []
    for _ in range(cfg.n_targets):
        for _attempt in range(MAX_PLACEMENT_ATTEMPTS):
            s = np.zeros(9)
            s[W] = rng.uniform_range(*cfg.box_w_range)
            s[H] = rng.uniform_range(*cfg.box_h_range)
            s[CX] = rng.uniform_range(s[W] / 2, cfg.width - s[W] / 2)
            s[CY] = rng.uniform_range(s[H] / 2, cfg.height - s[H] / 2)
            speed = rng.uniform_range(*cfg.speed_range)
            heading = rng.uniform_range(0.0, 2.0 * math.pi)
            s[VX], s[VY] = speed * math.cos(heading), speed * math.sin(heading)
            if all(iou(_box(s), _box(o)) == 0.0 for o in states):
                states.append(s)
                break
        else:
            raise SimulationError(
                f"could not place {cfg.n_targets} targets without overlap after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )
    return states


def generate_ground_truth(cfg: SimConfig) -> tuple[SequenceData, dict[int, list[ModelId]]]:
    rng = SplitMix64(cfg.seed)
    gt = SequenceData(name=f"synth-{cfg.seed}", n_frames=cfg.n_frames, width=int(cfg.width), height=int(cfg.height))
    regimes: dict[int, list[ModelId]] = {}
    if cfg.n_frames == 0 or cfg.n_targets == 0:
        return gt, regimes
    states = _place(cfg, rng)
    active = []
    for s in states:
        r = ModelId(rng.choice(cfg.regime_weights))
        _enter_regime(s, r, cfg, rng)
        active.append(r)
    for tid in range(1, cfg.n_targets + 1):
        regimes[tid] = []
    switch_prob = 1.0 / cfg.dwell_mean
    for frame in range(1, cfg.n_frames + 1):
        for k, s in enumerate(states):
            tid = k + 1
            if frame > 1:
                if rng.uniform() < switch_prob:
                    active[k] = ModelId(rng.choice(cfg.regime_weights))
                    _enter_regime(s, active[k], cfg, rng)
                nx, ny = rng.normal(), rng.normal()
                s[:] = transition(active[k], s)
                s[VX] += cfg.motion_noise * nx
                s[VY] += cfg.motion_noise * ny
                _limit_speed(s, cfg)
                _reflect(s, cfg)
            regimes[tid].append(active[k])
            gt.add(Detection(frame, _box(s), 1.0, tid))
    return gt, regimes


def degrade_detections(gt: SequenceData, cfg: SimConfig) -> SequenceData:
    """Jitter, drop and merge ground-truth boxes, then strip identities.

    Every ground-truth box consumes exactly ten uniforms (dropout, four
    jitter normals at two uniforms each, confidence) in (frame, id) order, so
    the stream stays aligned whatever the outcome.
    """
    rng = SplitMix64(cfg.seed ^ DEGRADE_SALT)
    det = SequenceData(name=gt.name, n_frames=gt.n_frames, width=gt.width, height=gt.height)
    for frame in sorted(gt.frames):
        rows = sorted(gt.frames[frame], key=lambda d: d.track_id)
        merged: set[int] = set()
        if cfg.occlusion_merge:
            for j, b in enumerate(rows):
                for i in range(j):
                    if i not in merged and iou(rows[i].box, b.box) > cfg.merge_iou:
                        merged.add(j)
                        break
        for j, d in enumerate(rows):
            u_drop = rng.uniform()
            n_cx, n_cy = rng.normal(), rng.normal()
            n_w, n_h = rng.normal(), rng.normal()
            u_conf = rng.uniform()
            if u_drop < cfg.dropout_prob or j in merged:
                continue
            box = d.box
            if cfg.jitter_sigma > 0:
                cx, cy = box.center()
                sig = cfg.jitter_sigma
                w = max(box.w * (1.0 + sig * n_w), 1.0)
                h = max(box.h * (1.0 + sig * n_h), 1.0)
                cx += sig * box.w * n_cx
                cy += sig * box.h * n_cy
                box = BoundingBox(cx - w / 2, cy - h / 2, w, h)
            conf = min(max(cfg.conf_mean + cfg.conf_spread * (2.0 * u_conf - 1.0), 0.0), 1.0)
            det.add(Detection(frame, box, conf, -1))
    return det


def generate_sequence(cfg: SimConfig = SimConfig()) -> SimOutput:
    gt, regimes = generate_ground_truth(cfg)
    return SimOutput(gt=gt, det=degrade_detections(gt, cfg), regimes=regimes)


def write_regime_log(out: SimOutput, stream: TextIO) -> None:
    stream.write("frame,target,regime\n")
    for frame, tid, name in out.regime_rows():
        stream.write(f"{frame},{tid},{name}\n")


_SIM_KEYS = {
    "n_targets": int,
    "n_frames": int,
    "width": float,
    "height": float,
    "dwell_mean": float,
    "regime_weights": "triple",
    "speed_range": "pair",
    "accel_range": "pair",
    "turn_rate_range": "pair",
    "box_w_range": "pair",
    "box_h_range": "pair",
    "motion_noise": float,
    "seed": int,
    "jitter_sigma": float,
    "dropout_prob": float,
    "occlusion_merge": bool,
    "merge_iou": float,
    "conf_mean": float,
    "conf_spread": float,
}

SIM_CONFIG_KEYS = tuple(_SIM_KEYS)


def sim_config_from_mapping(values: dict[str, str], base: SimConfig = SimConfig()) -> SimConfig:
    kwargs = {}
    for key, raw in values.items():
        kind = _SIM_KEYS.get(key)
        if kind is None:
            raise SimulationError(f"unknown simulation key {key!r}")
        try:
            if kind is int:
                kwargs[key] = parse_int(raw)
            elif kind is float:
                kwargs[key] = float(raw)
            elif kind is bool:
                kwargs[key] = parse_bool(raw)
            else:
                vals = parse_floats(raw)
                if len(vals) != (3 if kind == "triple" else 2):
                    raise ValueError(raw)
                kwargs[key] = vals
        except ValueError:
            raise SimulationError(f"{key}: cannot parse {raw!r}") from None
    try:
        return replace(base, **kwargs)
    except SimulationError as exc:
        raise SimulationError(f"{exc} (keys: {', '.join(sorted(kwargs)) or 'defaults'})") from None
