"""Motion-state-driven cascaded tracker.

Each frame every live track is predicted by its IMM bank, then high-confidence
detections are offered to stable tracks first, maneuvering tracks second and
lost tracks last with progressively looser gates. Leftover live tracks get a
final pass over low-confidence detections.
"""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import imm
from .association import StageId, adaptive_alpha, fixed_fuse, mahalanobis_batch, solve_assignment
from .config import Config
from .geometry import BoundingBox, Detection, box_to_measurement, boxes_array, iou_matrix, measurement_to_box
from .motion import ALL_MODELS, CX, CY, H, MEAS_INDEX, OMEGA, VX, VY, AX, AY, W, ModelId, state_from_measurement
from .mot_io import SequenceData

log = logging.getLogger(__name__)


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"
    REMOVED = "removed"


class FrameOrderError(ValueError):
    pass


@dataclass(frozen=True)
class Ablation:
    """Component switches mirroring the ablation rows."""

    no_imm: bool = False
    no_msdc: bool = False
    no_auf: bool = False

    @property
    def label(self) -> str:
        parts = [n for n, off in (("IMM", self.no_imm), ("MSDC", self.no_msdc), ("AUF", self.no_auf)) if not off]
        return "+".join(parts) if parts else "baseline"


@dataclass
class Track:
    id: int
    status: TrackStatus
    imm: imm.ImmState
    hits: int = 1
    misses: int = 0
    age: int = 0
    mu_history: deque = field(default_factory=lambda: deque(maxlen=3))
    last_box: BoundingBox | None = None
    history: list[tuple[int, BoundingBox]] = field(default_factory=list)

    @property
    def is_live(self) -> bool:
        return self.status is not TrackStatus.REMOVED

    def predicted_box(self) -> BoundingBox:
        return measurement_to_box(self.imm.combined.mean[MEAS_INDEX]).clamped()


def classify_tracks(tracks: Iterable[Track], theta_stable: float = 0.55):
    """Split tracks into (stable, maneuvering, lost) buckets."""
    stable, maneuvering, lost = [], [], []
    for t in tracks:
        if t.status is TrackStatus.LOST:
            lost.append(t)
            continue
        history = list(t.mu_history) or [np.array([t.imm.mu_of(ModelId.CV)])]
        cv = [float(h[0]) for h in history]
        _, is_stable = imm.maneuver_score(cv, theta_stable)
        (stable if is_stable else maneuvering).append(t)
    return stable, maneuvering, lost


class CascadeTracker:
    """One tracker per sequence; feed frames in strictly increasing order."""

    def __init__(self, config: Config = Config(), ablation: Ablation = Ablation()):
        self.config = config
        self.ablation = ablation
        self.models = (ModelId.CV,) if ablation.no_imm else ALL_MODELS
        self.imm_cfg = config.imm.single_model() if ablation.no_imm else config.imm
        self.r = config.noise.measurement_noise()
        self.tracks: list[Track] = []
        self.next_id = 1
        self.last_frame = 0
        self.removed = 0
        self.counters = {"frames": 0, "first_stage_pairs": 0, "candidate_pairs": 0, "matches": 0}
        self._q_cache: dict = {}

    # -- lifecycle -----------------------------------------------------

    def _birth(self, det: Detection, frame: int) -> Track:
        tc = self.config.tracker
        z = box_to_measurement(det.box)
        mean = state_from_measurement(z)
        pw = 2.0 * tc.init_pos_weight
        var = np.zeros(mean.shape[0])
        var[[CX, W]] = (pw * z[2]) ** 2
        var[[CY, H]] = (pw * z[3]) ** 2
        var[[VX, VY]] = tc.init_vel_std**2
        var[[AX, AY]] = tc.init_acc_std**2
        var[OMEGA] = tc.init_omega_std**2
        state = imm.init_state(mean, np.diag(var), self.imm_cfg, self.models)
        status = TrackStatus.CONFIRMED if tc.n_init <= 1 else TrackStatus.TENTATIVE
        track = Track(self.next_id, status, state, mu_history=deque(maxlen=self.imm_cfg.window))
        track.mu_history.append(state.mu.copy())
        track.last_box = det.box
        track.history.append((frame, det.box))
        self.next_id += 1
        return track

    # -- association ---------------------------------------------------

    def _cost_matrix(self, tracks: list[Track], dets: list[Detection], stage: StageId, stable_flags) -> np.ndarray:
        cfg = self.config
        n, m = len(tracks), len(dets)
        costs = np.full((n, m), np.inf)
        if n == 0 or m == 0:
            return costs
        det_boxes = boxes_array([d.box for d in dets])
        z = np.array([box_to_measurement(d.box) for d in dets])
        pred_boxes = boxes_array([t.predicted_box() for t in tracks])
        ious = iou_matrix(pred_boxes, det_boxes)
        gate_limit = cfg.auf.gate_chi2 * cfg.tracker.stages.gate_scale[stage]
        iou_min = cfg.tracker.stages.iou_min[stage]
        for i, t in enumerate(tracks):
            g = t.imm.combined
            # linear measurement: S is the projected covariance plus R
            s = g.cov[np.ix_(MEAS_INDEX, MEAS_INDEX)] + self.r
            d2 = mahalanobis_batch(g.mean[MEAS_INDEX], s, z)
            c_mot = np.minimum(d2 / cfg.auf.gate_chi2, 1.0)
            ok = (d2 <= gate_limit) & (ious[i] >= iou_min)
            if self.ablation.no_auf:
                fused = fixed_fuse(ious[i], c_mot, 0.5)
            else:
                alpha = adaptive_alpha(t.imm.uncertainty, cfg.auf)
                lam = cfg.auf.lambda_stable if stable_flags[i] else cfg.auf.lambda_maneuver
                fused = alpha * (1.0 - ious[i]) + (1.0 - alpha) * c_mot * lam
            costs[i, ok] = fused[ok]
        return costs

    def _associate(self, tracks, dets, det_idx, stage, stable_flags, matched):
        """Run one stage; records matches and returns the still-unmatched detection indices."""
        if not tracks or not det_idx:
            return det_idx
        sub = [dets[k] for k in det_idx]
        costs = self._cost_matrix(tracks, sub, stage, stable_flags)
        self.counters["candidate_pairs"] += costs.size
        result = solve_assignment(costs, self.config.tracker.max_cost)
        for r, c in result.matches:
            matched[tracks[r].id] = (tracks[r], dets[det_idx[c]])
        taken = {det_idx[c] for _, c in result.matches}
        return [k for k in det_idx if k not in taken]

    # -- main loop -----------------------------------------------------

    def process_frame(self, detections: list[Detection], frame: int) -> list[tuple[int, BoundingBox]]:
        if frame <= self.last_frame:
            raise FrameOrderError(f"frame {frame} does not follow frame {self.last_frame}")
        cfg = self.config
        tc = cfg.tracker
        self.last_frame = frame
        self.counters["frames"] += 1

        for t in self.tracks:
            t.imm = imm.predict(t.imm, tc.dt, cfg.ut, cfg.noise, self._q_cache, track_id=t.id)
            t.age += 1

        high = [i for i, d in enumerate(detections) if d.confidence >= tc.det_conf_high]
        low = [i for i, d in enumerate(detections) if tc.det_conf_min <= d.confidence < tc.det_conf_high]

        stable, maneuvering, lost = classify_tracks(self.tracks, self.imm_cfg.theta_stable)
        stable_ids = {t.id for t in stable}
        matched: dict[int, tuple[Track, Detection]] = {}

        if self.ablation.no_msdc:
            everyone = stable + maneuvering + lost
            self.counters["first_stage_pairs"] += len(everyone) * len(high)
            flags = [t.id in stable_ids for t in everyone]
            high = self._associate(everyone, detections, high, StageId.MANEUVER, flags, matched)
        else:
            self.counters["first_stage_pairs"] += len(stable) * len(high)
            high = self._associate(stable, detections, high, StageId.STABLE, [True] * len(stable), matched)
            high = self._associate(maneuvering, detections, high, StageId.MANEUVER, [False] * len(maneuvering), matched)
            lost_flags = [t.id in stable_ids for t in lost]
            high = self._associate(lost, detections, high, StageId.LOST, lost_flags, matched)

        if tc.low_conf_stage and low:
            rest = [t for t in self.tracks if t.id not in matched]
            flags = [t.id in stable_ids for t in rest]
            self._associate(rest, detections, low, StageId.LOW_CONF, flags, matched)

        outputs: list[tuple[int, BoundingBox]] = []
        survivors: list[Track] = []
        for t in self.tracks:
            hit = matched.get(t.id)
            if hit is not None:
                det = hit[1]
                t.imm = imm.update(t.imm, box_to_measurement(det.box), self.r, cfg.ut, self.imm_cfg, track_id=t.id)
                t.mu_history.append(t.imm.mu.copy())
                t.hits += 1
                t.misses = 0
                if t.status is TrackStatus.LOST or (t.status is TrackStatus.TENTATIVE and t.hits >= tc.n_init):
                    t.status = TrackStatus.CONFIRMED
                box = measurement_to_box(t.imm.combined.mean[MEAS_INDEX]).clamped()
                t.last_box = box
                t.history.append((frame, box))
                if t.status is TrackStatus.CONFIRMED:
                    outputs.append((t.id, box))
                survivors.append(t)
                continue
            t.hits = 0
            t.misses += 1
            if t.status is TrackStatus.TENTATIVE:
                t.status = TrackStatus.REMOVED
            elif t.status is TrackStatus.CONFIRMED:
                t.status = TrackStatus.LOST
            elif t.status is TrackStatus.LOST and t.misses > tc.max_age_lost:
                t.status = TrackStatus.REMOVED
            if t.is_live:
                survivors.append(t)
            else:
                self.removed += 1
        self.counters["matches"] += len(matched)

        for k in high:
            t = self._birth(detections[k], frame)
            survivors.append(t)
            if t.status is TrackStatus.CONFIRMED:
                outputs.append((t.id, detections[k].box))
        self.tracks = survivors
        outputs.sort(key=lambda o: o[0])
        return outputs

    @property
    def live_tracks(self) -> list[Track]:
        return [t for t in self.tracks if t.is_live]

    def summary(self) -> dict:
        return {
            "frames": self.counters["frames"],
            "live_tracks": len(self.live_tracks),
            "confirmed_tracks": sum(t.status is TrackStatus.CONFIRMED for t in self.tracks),
            "lost_tracks": sum(t.status is TrackStatus.LOST for t in self.tracks),
            "removed_tracks": self.removed,
            "ids_created": self.next_id - 1,
        }


def track_sequence(
    detections: SequenceData | Mapping[int, list[Detection]],
    config: Config = Config(),
    ablation: Ablation = Ablation(),
    tracker: CascadeTracker | None = None,
) -> SequenceData:
    """Track a whole sequence and return the result table.

    Frames missing from ``detections`` are processed as empty frames so that
    tracks coast through them.
    """
    if isinstance(detections, SequenceData):
        frames = detections.frames
        last = detections.last_frame
        name = detections.name
    else:
        frames = dict(detections)
        last = max(frames, default=0)
        name = ""
    tracker = tracker or CascadeTracker(config, ablation)
    out = SequenceData(name=name, n_frames=last)
    for f in range(1, last + 1):
        try:
            rows = tracker.process_frame(frames.get(f, []), f)
        except Exception as exc:
            exc.frame = f
            if hasattr(exc, "add_note"):
                exc.add_note(f"while processing frame {f}")
            raise
        for tid, box in rows:
            out.add(Detection(f, box, 1.0, tid))
    return out
