"""CLEAR-MOT, IDF1 and HOTA evaluation plus ground-truth statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import boxes_array, iou_matrix
from .mot_io import SequenceData

EPS = np.finfo(float).eps
HOTA_ALPHAS = np.arange(1, 20) * 0.05


@dataclass
class ClearMot:
    mota: float | None
    fp: int
    fn: int
    ids: int
    tp: int
    gt_count: int


@dataclass
class Identity:
    idf1: float | None
    idtp: int
    idfp: int
    idfn: int


@dataclass
class Hota:
    hota: float
    assa: float
    deta: float
    alphas: np.ndarray = field(repr=False)
    hota_alpha: np.ndarray = field(repr=False)
    assa_alpha: np.ndarray = field(repr=False)
    deta_alpha: np.ndarray = field(repr=False)


@dataclass
class SequenceMetrics:
    hota: float
    assa: float
    deta: float
    idf1: float | None
    mota: float | None
    ids: int
    fp: int
    fn: int
    gt_count: int

    def as_dict(self) -> dict:
        return {
            "HOTA": self.hota,
            "AssA": self.assa,
            "DetA": self.deta,
            "IDF1": self.idf1,
            "MOTA": self.mota,
            "FP": self.fp,
            "FN": self.fn,
            "IDs": self.ids,
            "GT": self.gt_count,
        }


@dataclass
class _Frame:
    gt_ids: np.ndarray
    tr_ids: np.ndarray
    sim: np.ndarray


def _frames(gt: SequenceData, res: SequenceData):
    """Per-frame dense ids and IoU matrices, plus the id counts."""
    gt_map = {tid: k for k, tid in enumerate(gt.ids())}
    tr_map = {tid: k for k, tid in enumerate(res.ids())}
    out = []
    for f in sorted(set(gt.frames) | set(res.frames)):
        g = sorted(gt.get(f), key=lambda d: d.track_id)
        r = sorted(res.get(f), key=lambda d: d.track_id)
        sim = iou_matrix(boxes_array([d.box for d in g]), boxes_array([d.box for d in r]))
        out.append(
            _Frame(
                np.array([gt_map[d.track_id] for d in g], dtype=int),
                np.array([tr_map[d.track_id] for d in r], dtype=int),
                sim,
            )
        )
    return out, len(gt_map), len(tr_map)


def clear_mot(gt: SequenceData, res: SequenceData, iou_min: float = 0.5) -> ClearMot:
    """CLEAR-MOT counts with correspondences carried over from the previous frame."""
    frames, n_gt, _ = _frames(gt, res)
    prev_any = np.full(n_gt, -1)
    prev_step = np.full(n_gt, -1)
    tp = fp = fn = ids = 0
    gt_count = 0
    for fr in frames:
        ng, nt = len(fr.gt_ids), len(fr.tr_ids)
        gt_count += ng
        if ng == 0 or nt == 0:
            fp += nt
            fn += ng
            prev_step[:] = -1
            continue
        carried = fr.tr_ids[None, :] == prev_step[fr.gt_ids][:, None]
        score = 1000.0 * carried + fr.sim
        score[fr.sim < iou_min - EPS] = 0.0
        rows, cols = linear_sum_assignment(-score)
        keep = score[rows, cols] > EPS
        rows, cols = rows[keep], cols[keep]
        mg, mt = fr.gt_ids[rows], fr.tr_ids[cols]
        before = prev_any[mg]
        ids += int(np.sum((before >= 0) & (before != mt)))
        prev_any[mg] = mt
        prev_step[:] = -1
        prev_step[mg] = mt
        tp += len(rows)
        fn += ng - len(rows)
        fp += nt - len(rows)
    mota = None if gt_count == 0 else 1.0 - (fn + fp + ids) / gt_count
    return ClearMot(mota, fp, fn, ids, tp, gt_count)


def identity_scores(gt: SequenceData, res: SequenceData, iou_min: float = 0.5) -> Identity:
    frames, n_gt, n_tr = _frames(gt, res)
    total_gt = sum(len(f.gt_ids) for f in frames)
    total_tr = sum(len(f.tr_ids) for f in frames)
    if total_gt == 0:
        return Identity(None, 0, total_tr, 0)
    pair_hits = np.zeros((n_gt, n_tr))
    for fr in frames:
        if fr.sim.size == 0:
            continue
        rr, cc = np.nonzero(fr.sim >= iou_min - EPS)
        np.add.at(pair_hits, (fr.gt_ids[rr], fr.tr_ids[cc]), 1)
    idtp = 0
    if n_tr:
        rows, cols = linear_sum_assignment(-pair_hits)
        idtp = int(pair_hits[rows, cols].sum())
    idfp = total_tr - idtp
    idfn = total_gt - idtp
    return Identity(2 * idtp / (2 * idtp + idfp + idfn), idtp, idfp, idfn)


def idf1(gt: SequenceData, res: SequenceData, iou_min: float = 0.5) -> float | None:
    return identity_scores(gt, res, iou_min).idf1


def hota(gt: SequenceData, res: SequenceData, alphas=HOTA_ALPHAS) -> Hota:
    """HOTA, AssA and DetA averaged over localisation thresholds."""
    frames, n_gt, n_tr = _frames(gt, res)
    alphas = np.asarray(alphas, dtype=float)
    na = len(alphas)
    gt_count = np.zeros(n_gt)
    tr_count = np.zeros(n_tr)
    potential = np.zeros((n_gt, n_tr))
    for fr in frames:
        gt_count[fr.gt_ids] += 1
        tr_count[fr.tr_ids] += 1
        if fr.sim.size == 0:
            continue
        denom = fr.sim.sum(0)[None, :] + fr.sim.sum(1)[:, None] - fr.sim
        sim_iou = np.zeros_like(fr.sim)
        mask = denom > EPS
        sim_iou[mask] = fr.sim[mask] / denom[mask]
        potential[np.ix_(fr.gt_ids, fr.tr_ids)] += sim_iou
    align_denom = gt_count[:, None] + tr_count[None, :] - potential
    global_align = np.zeros_like(potential)
    np.divide(potential, align_denom, out=global_align, where=align_denom > 0)

    tp = np.zeros(na)
    fn = np.zeros(na)
    fp = np.zeros(na)
    matches = np.zeros((na, n_gt, n_tr))
    for fr in frames:
        ng, nt = len(fr.gt_ids), len(fr.tr_ids)
        if ng == 0 or nt == 0:
            fn += ng
            fp += nt
            continue
        score = global_align[np.ix_(fr.gt_ids, fr.tr_ids)] * fr.sim
        # every score is at most 1, so this bonus makes the match count dominate
        bonus = min(ng, nt) + 1.0
        for a, alpha in enumerate(alphas):
            adm = fr.sim >= alpha - EPS
            k = 0
            if adm.any():
                rows, cols = linear_sum_assignment(-(score + bonus * adm))
                ok = adm[rows, cols]
                k = int(ok.sum())
                matches[a, fr.gt_ids[rows[ok]], fr.tr_ids[cols[ok]]] += 1
            tp[a] += k
            fn[a] += ng - k
            fp[a] += nt - k

    assa = np.zeros(na)
    for a in range(na):
        m = matches[a]
        ass = m / np.maximum(1.0, gt_count[:, None] + tr_count[None, :] - m)
        assa[a] = float(np.sum(m * ass)) / max(1.0, tp[a])
    deta = tp / np.maximum(1.0, tp + fn + fp)
    hota_a = np.sqrt(deta * assa)
    return Hota(float(hota_a.mean()), float(assa.mean()), float(deta.mean()), alphas, hota_a, assa, deta)


def evaluate(gt: SequenceData, res: SequenceData, iou_min: float = 0.5) -> SequenceMetrics:
    c = clear_mot(gt, res, iou_min)
    i = identity_scores(gt, res, iou_min)
    h = hota(gt, res)
    return SequenceMetrics(h.hota, h.assa, h.deta, i.idf1, c.mota, c.ids, c.fp, c.fn, c.gt_count)


def format_report(m: SequenceMetrics, name: str = "") -> str:
    """Human table followed by ``key=value`` lines."""

    def fmt(v):
        if v is None:
            return "n/a"
        return f"{100 * v:.3f}" if isinstance(v, float) else str(v)

    keys = ["HOTA", "AssA", "DetA", "IDF1", "MOTA", "FP", "FN", "IDs", "GT"]
    d = m.as_dict()
    head = " ".join(f"{k:>8}" for k in keys)
    row = " ".join(f"{fmt(d[k]):>8}" for k in keys)
    lines = [f"sequence: {name}" if name else "sequence: -", head, row, ""]
    for k in keys:
        v = d[k]
        lines.append(f"{k}={'nan' if v is None else (repr(float(v)) if isinstance(v, float) else v)}")
    return "\n".join(lines) + "\n"


@dataclass
class DatasetStats:
    gpr: float
    mmso_like: float
    mmsao_like: float
    presence: dict[int, float]


def dataset_stats(gt: SequenceData) -> DatasetStats:
    """Presence ratio and relative speed / speed-change surrogates.

    Relative speed between consecutive frames is the centre displacement over
    the box diagonal at the earlier frame.
    """
    length = gt.last_frame
    tracks: dict[int, dict[int, object]] = {}
    for f, dets in gt.frames.items():
        for d in dets:
            tracks.setdefault(d.track_id, {})[f] = d.box
    if not tracks:
        raise ValueError("ground truth contains no identities")
    presence = {tid: len(fr) / length for tid, fr in sorted(tracks.items())}
    max_speed, max_accel = [], []
    for tid, fr in sorted(tracks.items()):
        speeds: list[float | None] = []
        frames = sorted(fr)
        for a, b in zip(frames, frames[1:]):
            if b != a + 1:
                speeds.append(None)
                continue
            ca, cb = fr[a].center(), fr[b].center()
            speeds.append(math.hypot(cb[0] - ca[0], cb[1] - ca[1]) / fr[a].diagonal)
        valid = [s for s in speeds if s is not None]
        if valid:
            max_speed.append(max(valid))
        changes = [abs(s2 - s1) for s1, s2 in zip(speeds, speeds[1:]) if s1 is not None and s2 is not None]
        if changes:
            max_accel.append(max(changes))
    return DatasetStats(
        gpr=float(np.mean(list(presence.values()))),
        mmso_like=float(np.mean(max_speed)) if max_speed else 0.0,
        mmsao_like=float(np.mean(max_accel)) if max_accel else 0.0,
        presence=presence,
    )
