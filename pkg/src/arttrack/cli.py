"""Command-line entry point: ``arttrack {track,eval,stats,simulate}``.

Exit codes: 0 success, 1 usage error, 2 input or parse error, 3 numerical
degeneracy.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .config import ConfigError, load_config, read_key_values
from .metrics import dataset_stats, evaluate, format_report
from .mot_io import GROUND_TRUTH, MotFormatError, SequenceData, read_mot, write_detections, write_ground_truth, write_results
from .synth import SimulationError, generate_sequence, sim_config_from_mapping, write_regime_log
from .tracker import Ablation, CascadeTracker, track_sequence
from .ukf import NumericalDegeneracyError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _load_tracker_config(path: str | None):
    if path is None:
        return load_config([])
    with open(path, encoding="utf-8") as fh:
        try:
            return load_config(fh)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def cmd_track(args) -> int:
    config = _load_tracker_config(args.config)
    det = read_mot(args.det)
    ablation = Ablation(no_imm=args.no_imm, no_msdc=args.no_msdc, no_auf=args.no_auf)
    tracker = CascadeTracker(config, ablation)
    res = track_sequence(det, config, ablation, tracker)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        write_results(res, fh)
    s = tracker.summary()
    print(f"configuration={ablation.label}")
    for key in ("frames", "live_tracks", "confirmed_tracks", "lost_tracks", "removed_tracks", "ids_created"):
        print(f"{key}={s[key]}")
    print(f"result_rows={len(res)}")
    return EXIT_OK


def _restrict(seq: SequenceData, lo: int, hi: int) -> SequenceData:
    out = SequenceData(name=seq.name)
    for f, dets in seq.frames.items():
        if lo <= f <= hi:
            out.frames[f] = list(dets)
    return out


def cmd_eval(args) -> int:
    gt = read_mot(args.gt, GROUND_TRUTH)
    res = read_mot(args.res, GROUND_TRUTH)
    if gt.frames and res.frames:
        g_lo, g_hi = min(gt.frames), max(gt.frames)
        r_lo, r_hi = min(res.frames), max(res.frames)
        if r_lo < g_lo or r_hi > g_hi:
            lo, hi = max(g_lo, r_lo), min(g_hi, r_hi)
            print(
                f"warning: result frames {r_lo}-{r_hi} extend beyond ground-truth frames {g_lo}-{g_hi}; "
                f"evaluating frames {lo}-{hi}",
                file=sys.stderr,
            )
            gt, res = _restrict(gt, lo, hi), _restrict(res, lo, hi)
    m = evaluate(gt, res, args.iou_min)
    sys.stdout.write(format_report(m, args.res))
    return EXIT_OK


def cmd_stats(args) -> int:
    gt = read_mot(args.gt, GROUND_TRUTH)
    if not gt.ids():
        raise MotFormatError("ground truth contains no identities", source=args.gt)
    s = dataset_stats(gt)
    print(f"ids={len(s.presence)}")
    print(f"frames={gt.last_frame}")
    print(f"GPR={s.gpr!r}")
    print(f"mmso_like={s.mmso_like!r}")
    print(f"mmsao_like={s.mmsao_like!r}")
    print("presence histogram (fraction of frames present: ids)")
    bins = [0] * 10
    for ratio in s.presence.values():
        bins[min(int(ratio * 10), 9)] += 1
    for k, n in enumerate(bins):
        print(f"  [{k / 10:.1f}, {(k + 1) / 10:.1f}{']' if k == 9 else ')'}: {n}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    values: dict[str, str] = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            try:
                values = {k: v for k, (v, _) in read_key_values(fh).items()}
            except ConfigError as exc:
                raise ConfigError(f"{args.config}: {exc}") from None
    if args.seed is not None:
        values["seed"] = str(args.seed)
    try:
        cfg = sim_config_from_mapping(values)
        out = generate_sequence(cfg)
    except SimulationError as exc:
        where = f"{args.config}: " if args.config else ""
        raise SimulationError(f"{where}{exc}") from None
    with open(args.out_gt, "w", encoding="utf-8", newline="\n") as fh:
        write_ground_truth(out.gt, fh)
    with open(args.out_det, "w", encoding="utf-8", newline="\n") as fh:
        write_detections(out.det, fh)
    if args.regime_log:
        with open(args.regime_log, "w", encoding="utf-8", newline="\n") as fh:
            write_regime_log(out, fh)
    print(f"seed={cfg.seed}")
    print(f"frames={cfg.n_frames}")
    print(f"gt_rows={len(out.gt)}")
    print(f"det_rows={len(out.det)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arttrack", description="Multi-object tracker with an IMM-UKF motion bank and cascaded association.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    t = sub.add_parser("track", help="track a detection file")
    t.add_argument("--det", required=True, help="MOT-format detection file")
    t.add_argument("--config", help="key = value tracker config (defaults when omitted)")
    t.add_argument("--out", required=True, help="result file to write")
    t.add_argument("--no-imm", action="store_true", help="single constant-velocity filter instead of the model bank")
    t.add_argument("--no-msdc", action="store_true", help="one association stage for all tracks")
    t.add_argument("--no-auf", action="store_true", help="fixed 0.5 cost weighting")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score a result file against ground truth")
    e.add_argument("--gt", required=True)
    e.add_argument("--res", required=True)
    e.add_argument("--iou-min", type=float, default=0.5, help="IoU threshold for CLEAR-MOT and IDF1 (default 0.5)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("stats", help="presence and motion statistics of a ground-truth file")
    s.add_argument("--gt", required=True)
    s.set_defaults(func=cmd_stats)

    m = sub.add_parser("simulate", help="write a synthetic ground-truth / detection pair")
    m.add_argument("--config", help="key = value simulation config (defaults when omitted)")
    m.add_argument("--seed", type=int, help="overrides the config seed")
    m.add_argument("--out-gt", required=True)
    m.add_argument("--out-det", required=True)
    m.add_argument("--regime-log", help="optional CSV of the active motion regime per target and frame")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except NumericalDegeneracyError as exc:
        frame = getattr(exc, "frame", None)
        at = f" at frame {frame}" if frame is not None else ""
        print(f"error: numerical degeneracy{at}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (MotFormatError, ConfigError, SimulationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
