"""Tracker configuration and the flat ``key = value`` loader."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, TextIO

import numpy as np

from .association import AufConfig, StageId, StageThresholds
from .imm import ImmConfig, default_tpm
from .motion import NoiseConfig
from .ukf import UtParams


class ConfigError(ValueError):
    """Bad configuration value. ``key`` and ``line`` locate it when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line

    def __str__(self) -> str:
        base = super().__str__()
        return f"line {self.line}: {base}" if self.line is not None else base


@dataclass(frozen=True)
class TrackerConfig:
    n_init: int = 3
    max_age_lost: int = 30
    det_conf_min: float = 0.1
    det_conf_high: float = 0.5
    low_conf_stage: bool = True
    max_cost: float = 1.0
    dt: float = 1.0
    # birth covariance: position/size std = 2 * init_pos_weight * box side
    init_pos_weight: float = 0.05
    init_vel_std: float = 3.0
    init_acc_std: float = 0.5
    init_omega_std: float = 0.1
    stages: StageThresholds = field(default_factory=StageThresholds)

    def __post_init__(self):
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        if self.max_age_lost < 1:
            raise ValueError("max_age_lost must be >= 1")
        if not 0.0 <= self.det_conf_min <= self.det_conf_high <= 1.0:
            raise ValueError("need 0 <= det_conf_min <= det_conf_high <= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class Config:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    auf: AufConfig = field(default_factory=AufConfig)
    imm: ImmConfig = field(default_factory=ImmConfig)
    ut: UtParams = field(default_factory=UtParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def read_key_values(stream: TextIO | Iterable[str]) -> dict[str, tuple[str, int]]:
    """Parse ``key = value`` lines; ``#`` starts a comment. Values keep their line number."""
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(stream, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (p.strip() for p in text.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in out:
            raise ConfigError(f"key {key!r} given twice", key=key, line=lineno)
        out[key] = (value, lineno)
    return out


# key -> (section, field, parser)
_KEYS: dict[str, tuple[str, str, Callable]] = {
    "n_init": ("tracker", "n_init", parse_int),
    "max_age_lost": ("tracker", "max_age_lost", parse_int),
    "det_conf_min": ("tracker", "det_conf_min", float),
    "det_conf_high": ("tracker", "det_conf_high", float),
    "low_conf_stage": ("tracker", "low_conf_stage", parse_bool),
    "max_cost": ("tracker", "max_cost", float),
    "dt": ("tracker", "dt", float),
    "init_pos_weight": ("tracker", "init_pos_weight", float),
    "init_vel_std": ("tracker", "init_vel_std", float),
    "init_acc_std": ("tracker", "init_acc_std", float),
    "init_omega_std": ("tracker", "init_omega_std", float),
    "stage1_iou_min": ("stage_iou", StageId.STABLE, float),
    "stage2_iou_min": ("stage_iou", StageId.MANEUVER, float),
    "stage3_iou_min": ("stage_iou", StageId.LOST, float),
    "low_conf_iou_min": ("stage_iou", StageId.LOW_CONF, float),
    "stage3_gate_scale": ("stage_gate", StageId.LOST, float),
    "alpha_min": ("auf", "alpha_min", float),
    "alpha_max": ("auf", "alpha_max", float),
    "u_ref": ("auf", "u_ref", float),
    "lambda_stable": ("auf", "lambda_stable", float),
    "lambda_maneuver": ("auf", "lambda_maneuver", float),
    "gate_chi2": ("auf", "gate_chi2", float),
    "tpm_self": ("imm", "tpm_self", float),
    "mu_init": ("imm", "mu_init", parse_floats),
    "adaptive": ("imm", "adaptive", parse_bool),
    "theta_stable": ("imm", "theta_stable", float),
    "stability_window": ("imm", "window", parse_int),
    "ut_alpha": ("ut", "alpha", float),
    "ut_beta": ("ut", "beta", float),
    "ut_kappa": ("ut", "kappa", float),
    "sigma_cv_vel": ("noise", "sigma_cv_vel", float),
    "sigma_ca_acc": ("noise", "sigma_ca_acc", float),
    "sigma_ct_omega": ("noise", "sigma_ct_omega", float),
    "sigma_ct_vel": ("noise", "sigma_ct_vel", float),
    "sigma_wh": ("noise", "sigma_wh", float),
    "r_center": ("noise", "r_center", float),
    "r_size": ("noise", "r_size", float),
}

CONFIG_KEYS = tuple(_KEYS)

_POSITIVE = {
    "u_ref", "lambda_stable", "lambda_maneuver", "gate_chi2", "dt", "stage3_gate_scale",
    "sigma_cv_vel", "sigma_ca_acc", "sigma_ct_omega", "sigma_ct_vel", "sigma_wh",
    "r_center", "r_size", "init_pos_weight", "init_vel_std", "init_acc_std", "init_omega_std",
}
_UNIT = {"det_conf_min", "det_conf_high", "alpha_min", "alpha_max", "stage1_iou_min",
         "stage2_iou_min", "stage3_iou_min", "low_conf_iou_min"}


def _check(key: str, value) -> None:
    problem = None
    if key in _POSITIVE and not value > 0:
        problem = "must be positive"
    elif key in _UNIT and not 0.0 <= value <= 1.0:
        problem = "must lie in [0, 1]"
    elif key in ("n_init", "max_age_lost", "stability_window") and value < 1:
        problem = "must be >= 1"
    elif key == "tpm_self" and not 0.0 <= value <= 1.0:
        problem = "must lie in [0, 1]"
    elif key == "theta_stable" and not 0.0 < value < 1.0:
        problem = "must lie in (0, 1)"
    elif key == "ut_alpha" and not 0.0 < value <= 1.0:
        problem = "must lie in (0, 1]"
    if problem:
        raise ConfigError(f"{key} {problem}, got {value}", key=key)


def config_from_mapping(values: dict[str, str], base: Config = Config()) -> Config:
    """Build a :class:`Config` from raw string values keyed by config key."""
    sections: dict[str, dict] = {"tracker": {}, "auf": {}, "imm": {}, "ut": {}, "noise": {}}
    stage_iou = dict(base.tracker.stages.iou_min)
    stage_gate = dict(base.tracker.stages.gate_scale)
    for key, raw in values.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}", key=key)
        section, name, parser = _KEYS[key]
        try:
            value = parser(raw)
        except (ValueError, OverflowError):
            raise ConfigError(f"{key}: cannot parse {raw!r}", key=key) from None
        _check(key, value)
        if section == "stage_iou":
            stage_iou[name] = value
        elif section == "stage_gate":
            stage_gate[name] = value
        else:
            sections[section][name] = value

    auf_vals = {**base.auf.__dict__, **sections["auf"]}
    if auf_vals["alpha_min"] > auf_vals["alpha_max"]:
        raise ConfigError(
            f"alpha_min ({auf_vals['alpha_min']}) must not exceed alpha_max ({auf_vals['alpha_max']})",
            key="alpha_min" if "alpha_min" in values else "alpha_max",
        )
    trk_vals = {**base.tracker.__dict__, **sections["tracker"]}
    if trk_vals["det_conf_min"] > trk_vals["det_conf_high"]:
        raise ConfigError(
            f"det_conf_min ({trk_vals['det_conf_min']}) must not exceed det_conf_high ({trk_vals['det_conf_high']})",
            key="det_conf_min" if "det_conf_min" in values else "det_conf_high",
        )

    imm_vals = dict(sections["imm"])
    tpm_self = imm_vals.pop("tpm_self", None)
    if tpm_self is not None:
        imm_vals["tpm"] = default_tpm(3, tpm_self)
    if "mu_init" in imm_vals:
        mu = np.asarray(imm_vals["mu_init"], dtype=float)
        if mu.shape != (3,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-9:
            raise ConfigError("mu_init must be three non-negative numbers summing to 1", key="mu_init")
        imm_vals["mu_init"] = mu

    try:
        return Config(
            tracker=replace(base.tracker, stages=StageThresholds(stage_iou, stage_gate), **sections["tracker"]),
            auf=replace(base.auf, **sections["auf"]),
            imm=replace(base.imm, **imm_vals),
            ut=replace(base.ut, **sections["ut"]),
            noise=replace(base.noise, **sections["noise"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(stream: TextIO | Iterable[str]) -> Config:
    """Read a flat ``key = value`` config. Unknown keys are an error; missing keys keep defaults."""
    pairs = read_key_values(stream)
    try:
        return config_from_mapping({k: v for k, (v, _) in pairs.items()})
    except ConfigError as exc:
        if exc.line is None and exc.key in pairs:
            exc.line = pairs[exc.key][1]
        raise


def default_config_text() -> str:
    """All keys with their shipped defaults, as a loadable config file."""
    c = Config()
    s = c.tracker.stages
    lines = [
        f"n_init = {c.tracker.n_init}",
        f"max_age_lost = {c.tracker.max_age_lost}",
        f"det_conf_min = {c.tracker.det_conf_min}",
        f"det_conf_high = {c.tracker.det_conf_high}",
        f"low_conf_stage = {str(c.tracker.low_conf_stage).lower()}",
        f"max_cost = {c.tracker.max_cost}",
        f"dt = {c.tracker.dt}",
        f"init_pos_weight = {c.tracker.init_pos_weight}",
        f"init_vel_std = {c.tracker.init_vel_std}",
        f"init_acc_std = {c.tracker.init_acc_std}",
        f"init_omega_std = {c.tracker.init_omega_std}",
        f"stage1_iou_min = {s.iou_min[StageId.STABLE]}",
        f"stage2_iou_min = {s.iou_min[StageId.MANEUVER]}",
        f"stage3_iou_min = {s.iou_min[StageId.LOST]}",
        f"low_conf_iou_min = {s.iou_min[StageId.LOW_CONF]}",
        f"stage3_gate_scale = {s.gate_scale[StageId.LOST]}",
        f"alpha_min = {c.auf.alpha_min}",
        f"alpha_max = {c.auf.alpha_max}",
        f"u_ref = {c.auf.u_ref}",
        f"lambda_stable = {c.auf.lambda_stable}",
        f"lambda_maneuver = {c.auf.lambda_maneuver}",
        f"gate_chi2 = {c.auf.gate_chi2}",
        f"tpm_self = {c.imm.tpm[0, 0]}",
        "mu_init = " + ", ".join(repr(float(v)) for v in c.imm.mu_init),
        f"adaptive = {str(c.imm.adaptive).lower()}",
        f"theta_stable = {c.imm.theta_stable}",
        f"stability_window = {c.imm.window}",
        f"ut_alpha = {c.ut.alpha}",
        f"ut_beta = {c.ut.beta}",
        f"ut_kappa = {c.ut.kappa}",
    ] + [f"{k} = {getattr(c.noise, k)}" for k in
         ("sigma_cv_vel", "sigma_ca_acc", "sigma_ct_omega", "sigma_ct_vel", "sigma_wh", "r_center", "r_size")]
    return "\n".join(lines) + "\n"
