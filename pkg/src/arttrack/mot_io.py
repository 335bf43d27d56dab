"""MOTChallenge CSV reading and writing.

Rows are ``frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z``. Detection
files carry ``id = -1``; ground-truth files use ``conf`` as a validity flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .geometry import BoundingBox, Detection

DETECTIONS = "detections"
GROUND_TRUTH = "ground_truth"


class MotFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str | None = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column
        self.source = source

    def __str__(self) -> str:
        where = [str(self.source)] if self.source else []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.column is not None:
            where.append(f"column {self.column}")
        return f"{', '.join(where)}: {self.message}" if where else self.message


@dataclass
class SequenceData:
    """Boxes grouped by 1-based frame index."""

    frames: dict[int, list[Detection]] = field(default_factory=dict)
    name: str = ""
    n_frames: int = 0
    width: int | None = None
    height: int | None = None

    @property
    def last_frame(self) -> int:
        return max(self.n_frames, max(self.frames, default=0))

    def frame_range(self) -> range:
        return range(1, self.last_frame + 1)

    def get(self, frame: int) -> list[Detection]:
        return self.frames.get(frame, [])

    def add(self, det: Detection) -> None:
        self.frames.setdefault(det.frame, []).append(det)

    def entries(self) -> list[Detection]:
        out = []
        for f in sorted(self.frames):
            out.extend(sorted(self.frames[f], key=lambda d: d.track_id))
        return out

    def ids(self) -> list[int]:
        return sorted({d.track_id for dets in self.frames.values() for d in dets})

    def __len__(self) -> int:
        return sum(len(v) for v in self.frames.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SequenceData):
            return NotImplemented
        return self.entries() == other.entries()

    def strip_ids(self) -> SequenceData:
        out = SequenceData(name=self.name, n_frames=self.n_frames, width=self.width, height=self.height)
        for d in self.entries():
            out.add(Detection(d.frame, d.box, d.confidence, -1))
        return out


def _number(text: str, line: int, column: int) -> float:
    text = text.strip()
    try:
        value = float(text)
    except ValueError:
        raise MotFormatError(f"non-numeric field {text!r}", line, column) from None
    if not math.isfinite(value):
        raise MotFormatError(f"non-finite field {text!r}", line, column)
    return value


def _integer(text: str, line: int, column: int) -> int:
    value = _number(text, line, column)
    if value != int(value):
        raise MotFormatError(f"expected an integer, got {text.strip()!r}", line, column)
    return int(value)


def parse_mot_file(stream: TextIO | Iterable[str], kind: str = DETECTIONS, name: str = "") -> SequenceData:
    """Read a MOTChallenge file into a :class:`SequenceData`.

    For ``detections`` the id column is ignored and the confidence must lie in
    [0, 1]. For ``ground_truth`` the id is kept, rows with ``conf == 0`` are
    dropped and duplicate (frame, id) pairs are rejected.
    """
    if kind not in (DETECTIONS, GROUND_TRUTH):
        raise ValueError(f"unknown kind {kind!r}")
    seq = SequenceData(name=name)
    seen: set[tuple[int, int]] = set()
    for lineno, raw in enumerate(stream, start=1):
        text = raw.strip()
        if not text:
            continue
        fields = text.split(",")
        if len(fields) < 6 or len(fields) > 10:
            raise MotFormatError(f"expected 6 to 10 comma-separated fields, got {len(fields)}", lineno)
        frame = _integer(fields[0], lineno, 1)
        if frame < 1:
            raise MotFormatError(f"frame index must be >= 1, got {frame}", lineno, 1)
        tid = _integer(fields[1], lineno, 2)
        x, y, w, h = (_number(fields[i], lineno, i + 1) for i in range(2, 6))
        conf = _number(fields[6], lineno, 7) if len(fields) > 6 else 1.0
        for i in range(7, len(fields)):
            _number(fields[i], lineno, i + 1)
        if w <= 0:
            raise MotFormatError(f"box width must be positive, got {w}", lineno, 5)
        if h <= 0:
            raise MotFormatError(f"box height must be positive, got {h}", lineno, 6)
        box = BoundingBox(x, y, w, h)
        if kind == DETECTIONS:
            if not 0.0 <= conf <= 1.0:
                raise MotFormatError(f"confidence must lie in [0, 1], got {conf}", lineno, 7)
            seq.add(Detection(frame, box, conf, -1))
        else:
            if conf == 0:
                continue
            if (frame, tid) in seen:
                raise MotFormatError(f"duplicate id {tid} in frame {frame}", lineno, 2)
            seen.add((frame, tid))
            seq.add(Detection(frame, box, 1.0, tid))
    return seq


def read_mot(path, kind: str = DETECTIONS) -> SequenceData:
    with open(path, encoding="utf-8") as fh:
        try:
            return parse_mot_file(fh, kind, name=str(path))
        except MotFormatError as exc:
            exc.source = str(path)
            raise


def format_row(frame: int, tid: int, box: BoundingBox, conf: str = "1") -> str:
    return f"{frame},{tid},{box.x:.2f},{box.y:.2f},{box.w:.2f},{box.h:.2f},{conf},-1,-1,-1\n"


def _rows(results) -> list[tuple[int, int, BoundingBox]]:
    if isinstance(results, SequenceData):
        return [(d.frame, d.track_id, d.box) for d in results.entries()]
    rows = []
    for item in results:
        if isinstance(item, Detection):
            rows.append((item.frame, item.track_id, item.box))
        else:
            frame, tid, box = item
            rows.append((int(frame), int(tid), box))
    return rows


def write_results(results, stream: TextIO) -> None:
    """Write tracker output, one ``frame,id,x,y,w,h,1,-1,-1,-1`` line per box."""
    for frame, tid, box in sorted(_rows(results), key=lambda r: (r[0], r[1])):
        stream.write(format_row(frame, tid, box))


def write_detections(seq: SequenceData, stream: TextIO) -> None:
    for d in seq.entries():
        stream.write(format_row(d.frame, -1, d.box, f"{d.confidence:.4f}"))


def write_ground_truth(seq: SequenceData, stream: TextIO) -> None:
    write_results(seq, stream)
