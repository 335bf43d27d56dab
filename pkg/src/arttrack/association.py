"""Association costs, gating and linear assignment."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Detection, box_to_measurement
from .motion import MEAS_INDEX
from .ukf import Gaussian

log = logging.getLogger(__name__)

CHI2_4DOF_99 = 13.277


class StageId(enum.IntEnum):
    STABLE = 1
    MANEUVER = 2
    LOST = 3
    LOW_CONF = 4


@dataclass(frozen=True)
class AufConfig:
    alpha_min: float = 0.3
    alpha_max: float = 0.8
    u_ref: float = 1.0
    lambda_stable: float = 1.0
    lambda_maneuver: float = 0.5
    gate_chi2: float = CHI2_4DOF_99

    def __post_init__(self):
        if not 0.0 <= self.alpha_min <= 1.0:
            raise ValueError("alpha_min must lie in [0, 1]")
        if not 0.0 <= self.alpha_max <= 1.0:
            raise ValueError("alpha_max must lie in [0, 1]")
        if self.alpha_min > self.alpha_max:
            raise ValueError("alpha_min must not exceed alpha_max")
        if self.u_ref <= 0:
            raise ValueError("u_ref must be positive")
        if self.lambda_stable <= 0 or self.lambda_maneuver <= 0:
            raise ValueError("lambda_stable and lambda_maneuver must be positive")
        if self.gate_chi2 <= 0:
            raise ValueError("gate_chi2 must be positive")


@dataclass(frozen=True)
class StageThresholds:
    """Per-stage minimum IoU and motion-gate multiplier."""

    iou_min: dict = field(
        default_factory=lambda: {
            StageId.STABLE: 0.2,
            StageId.MANEUVER: 0.05,
            StageId.LOST: 0.0,
            StageId.LOW_CONF: 0.05,
        }
    )
    gate_scale: dict = field(
        default_factory=lambda: {
            StageId.STABLE: 1.0,
            StageId.MANEUVER: 1.0,
            StageId.LOST: 2.0,
            StageId.LOW_CONF: 1.0,
        }
    )


@dataclass
class Assignment:
    matches: list[tuple[int, int]]
    unmatched_rows: list[int]
    unmatched_cols: list[int]
    total_cost: float = 0.0


def motion_cost(predicted: Gaussian, det: Detection, s: np.ndarray, cfg: AufConfig = AufConfig()) -> tuple[float, float]:
    """Normalised Mahalanobis cost and the raw squared distance."""
    nu = box_to_measurement(det.box) - predicted.mean[MEAS_INDEX]
    try:
        d2 = float(nu @ np.linalg.solve(s, nu))
    except np.linalg.LinAlgError:
        log.warning("singular innovation covariance; pair gated out")
        return 1.0, float("inf")
    if not np.isfinite(d2) or d2 < 0:
        return 1.0, float("inf")
    return min(d2 / cfg.gate_chi2, 1.0), d2


def mahalanobis_batch(z_pred: np.ndarray, s: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Squared Mahalanobis distances from one prediction to an (M, 4) stack."""
    if z.shape[0] == 0:
        return np.zeros(0)
    nu = z - z_pred
    try:
        sol = np.linalg.solve(s, nu.T)
    except np.linalg.LinAlgError:
        return np.full(z.shape[0], np.inf)
    return np.einsum("ij,ji->i", nu, sol)


def adaptive_alpha(u_k, cfg: AufConfig = AufConfig()):
    """Spatial weight; grows from alpha_min at u=0 toward alpha_max as u grows."""
    u = np.asarray(u_k, dtype=float)
    with np.errstate(invalid="ignore"):
        frac = np.where(np.isinf(u), 1.0, u / (u + cfg.u_ref))
    alpha = cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * frac
    alpha = np.clip(alpha, cfg.alpha_min, cfg.alpha_max)
    return float(alpha) if alpha.ndim == 0 else alpha


def fuse(c_iou_raw, c_mot, u_k, is_stable, cfg: AufConfig = AufConfig()):
    """Fused cost alpha*(1 - IoU) + (1 - alpha)*C_mot*lambda_state."""
    alpha = adaptive_alpha(u_k, cfg)
    lam = np.where(is_stable, cfg.lambda_stable, cfg.lambda_maneuver)
    out = alpha * (1.0 - np.asarray(c_iou_raw, dtype=float)) + (1.0 - alpha) * np.asarray(c_mot, dtype=float) * lam
    return float(out) if np.ndim(out) == 0 else out


def fixed_fuse(c_iou_raw, c_mot, alpha: float = 0.5):
    """Fixed-weight fusion used when the adaptive weighting is ablated."""
    out = alpha * (1.0 - np.asarray(c_iou_raw, dtype=float)) + (1.0 - alpha) * np.asarray(c_mot, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def gate(
    d2,
    iou_raw,
    stage: StageId,
    cfg: AufConfig = AufConfig(),
    thresholds: StageThresholds = StageThresholds(),
):
    """Admissibility of a track/detection pair for ``stage``."""
    limit = cfg.gate_chi2 * thresholds.gate_scale[stage]
    ok = (np.asarray(d2) <= limit) & (np.asarray(iou_raw) >= thresholds.iou_min[stage])
    return bool(ok) if np.ndim(ok) == 0 else ok


def _optimum(c: np.ndarray, finite: np.ndarray) -> tuple[int, float, list[tuple[int, int]]]:
    """Maximum-cardinality, then minimum-cost, matching over finite entries."""
    rows = np.flatnonzero(finite.any(axis=1))
    cols = np.flatnonzero(finite.any(axis=0))
    if rows.size == 0:
        return 0, 0.0, []
    sub = c[np.ix_(rows, cols)]
    sub_finite = finite[np.ix_(rows, cols)]
    # penalty larger than any achievable difference in finite cost
    big = float(np.abs(sub[sub_finite]).sum()) + 1.0
    r_idx, c_idx = linear_sum_assignment(np.where(sub_finite, sub, big))
    pairs = sorted((int(rows[r]), int(cols[k])) for r, k in zip(r_idx, c_idx) if sub_finite[r, k])
    return len(pairs), float(sum(c[r, k] for r, k in pairs)), pairs


def _same_value(a: tuple[int, float], b: tuple[int, float]) -> bool:
    return a[0] == b[0] and abs(a[1] - b[1]) <= 1e-12 * (1.0 + abs(b[1]))


def _lexicographic(c: np.ndarray, finite: np.ndarray, target: tuple[int, float]) -> list[tuple[int, int]]:
    """Among optimal matchings pick the one giving each row, in order, its smallest column."""
    finite = finite.copy()
    fixed: list[tuple[int, int]] = []
    fixed_cost = 0.0
    for r in range(c.shape[0]):
        if not finite[r].any():
            continue
        chosen = None
        for k in np.flatnonzero(finite[r]):
            trial = finite.copy()
            trial[r, :] = False
            trial[:, k] = False
            n, cost, _ = _optimum(c, trial)
            if _same_value((len(fixed) + 1 + n, fixed_cost + c[r, k] + cost), target):
                chosen = int(k)
                break
        if chosen is None:
            finite[r, :] = False
            continue
        fixed.append((r, chosen))
        fixed_cost += c[r, chosen]
        finite[r, :] = False
        finite[:, chosen] = False
    return fixed


def solve_assignment(costs, max_cost: float = np.inf) -> Assignment:
    """Minimum-cost rectangular assignment over finite entries.

    Infinite entries are inadmissible. The solver first maximises the number
    of admissible pairs and then minimises their total cost; equal-cost optima
    are broken by (row, col) order. Pairs costing more than ``max_cost`` are
    dropped afterwards.
    """
    c = np.asarray(costs, dtype=float)
    if c.ndim != 2:
        c = c.reshape(0, 0) if c.size == 0 else c.reshape(1, -1)
    n_rows, n_cols = c.shape
    finite = np.isfinite(c)
    if n_rows == 0 or n_cols == 0 or not finite.any():
        return Assignment([], list(range(n_rows)), list(range(n_cols)))

    n, cost, pairs = _optimum(c, finite)
    lex = _lexicographic(c, finite, (n, cost))
    if len(lex) == n:
        pairs = lex
    matches = [(r, k) for r, k in pairs if c[r, k] <= max_cost]
    matched_r = {r for r, _ in matches}
    matched_c = {k for _, k in matches}
    total = float(sum(c[r, k] for r, k in matches))
    return Assignment(
        matches,
        [r for r in range(n_rows) if r not in matched_r],
        [k for k in range(n_cols) if k not in matched_c],
        total,
    )
