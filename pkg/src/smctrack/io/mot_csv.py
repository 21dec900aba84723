"""MOTChallenge-style CSV files.

Every line holds ten comma-separated fields::

    frame, id, bb_left, bb_top, bb_width, bb_height, conf, x, y, z

Raw detections carry id -1. The trailing x, y, z are ignored on input and
written as -1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO, Union

import numpy as np

from ..errors import ParseError, ValidationError
from ..evaluation import GroundTruthEntry
from ..geometry import BoundingBox, Detection, FrameObservations

N_FIELDS = 10
Source = Union[str, Path, TextIO]


@dataclass(frozen=True)
class MotCsvRecord:
    frame: int
    id: int
    bb_left: float
    bb_top: float
    bb_width: float
    bb_height: float
    conf: float
    x: float = -1.0
    y: float = -1.0
    z: float = -1.0

    @property
    def box(self) -> BoundingBox:
        return BoundingBox(self.bb_left, self.bb_top, self.bb_width, self.bb_height)

    def to_line(self) -> str:
        # repr round-trips floats exactly
        vals = (self.bb_left, self.bb_top, self.bb_width, self.bb_height, self.conf, self.x, self.y, self.z)
        return f"{self.frame},{self.id}," + ",".join(repr(float(v)) for v in vals)


def _open_text(source: Source):
    if isinstance(source, (str, Path)):
        try:
            return open(source, "r", newline=""), str(source), True
        except OSError as exc:
            raise OSError(f"{source}: {exc.strerror}") from exc
    return source, getattr(source, "name", None), False


def _parse_line(text: str, lineno: int, path) -> MotCsvRecord:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != N_FIELDS:
        raise ParseError(f"expected {N_FIELDS} fields, got {len(parts)}", lineno, path)
    try:
        frame = int(parts[0])
        ident = int(float(parts[1]))
        vals = [float(p) for p in parts[2:]]
    except ValueError as exc:
        raise ParseError(f"non-numeric field ({exc})", lineno, path) from None
    if frame < 1:
        raise ParseError(f"frame must be >= 1, got {frame}", lineno, path)
    if not all(np.isfinite(vals[:5])):
        raise ParseError("box and confidence must be finite", lineno, path)
    if vals[2] <= 0 or vals[3] <= 0:
        where = f"{path}:{lineno}" if path else f"line {lineno}"
        raise ValidationError(f"{where}: width and height must be positive, got {vals[2]} x {vals[3]}")
    return MotCsvRecord(frame, ident, *vals)


def read_records(source: Source) -> list[MotCsvRecord]:
    """All records in file order. Blank lines are skipped."""
    fh, path, owned = _open_text(source)
    try:
        records = []
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if text:
                records.append(_parse_line(text, lineno, path))
        return records
    finally:
        if owned:
            fh.close()


def records_to_frames(records: Iterable[MotCsvRecord], embeddings: dict = None) -> list[FrameObservations]:
    """Group records by frame (ascending), keeping file order within a frame.

    ``embeddings`` maps ``(frame, index_within_frame)`` to a vector.
    """
    by_frame: dict[int, list[MotCsvRecord]] = {}
    for r in records:
        by_frame.setdefault(r.frame, []).append(r)
    frames = []
    for f in sorted(by_frame):
        dets = []
        for k, r in enumerate(by_frame[f]):
            emb = None if embeddings is None else embeddings.get((f, k))
            dets.append(Detection(r.box, float(np.clip(r.conf, 0.0, 1.0)), f, emb))
        frames.append(FrameObservations(f, dets))
    return frames


def records_to_entries(records: Iterable[MotCsvRecord]) -> list[GroundTruthEntry]:
    return [GroundTruthEntry(r.frame, r.id, r.box) for r in records]


def parse_mot_csv(source: Source, embeddings: dict = None) -> list[FrameObservations]:
    """Detections file -> frames. Empty input gives an empty list."""
    return records_to_frames(read_records(source), embeddings)


def parse_gt_csv(source: Source) -> list[GroundTruthEntry]:
    return records_to_entries(read_records(source))


def result_records(tracks: Iterable) -> list[MotCsvRecord]:
    """Anything with ``frame``, ``id``, ``box`` and ``score`` (or ``conf``)
    becomes a record; sorted by (frame, id)."""
    out = []
    for t in tracks:
        if t.id <= 0:
            raise ValidationError(f"result ids must be positive, got {t.id}")
        score = getattr(t, "score", None)
        if score is None:
            score = getattr(t, "conf", 1.0)
        b = t.box
        out.append(MotCsvRecord(int(t.frame), int(t.id), b.left, b.top, b.width, b.height, float(score)))
    out.sort(key=lambda r: (r.frame, r.id))
    return out


def format_records(records: Sequence[MotCsvRecord]) -> str:
    return "".join(r.to_line() + "\n" for r in records)


def _write_text(path: Union[str, Path], text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc


def write_records(records: Sequence[MotCsvRecord], path: Union[str, Path]) -> None:
    _write_text(path, format_records(records))


def write_results_csv(tracks: Iterable, path: Union[str, Path]) -> None:
    write_records(result_records(tracks), path)


def write_detections_csv(frames: Iterable[FrameObservations], path: Union[str, Path]) -> None:
    """Detections keep their in-frame order and get id -1."""
    records = [
        MotCsvRecord(fo.frame, -1, d.box.left, d.box.top, d.box.width, d.box.height, d.score)
        for fo in frames for d in fo.detections
    ]
    write_records(records, path)


def write_gt_csv(entries: Iterable[GroundTruthEntry], path: Union[str, Path]) -> None:
    records = [
        MotCsvRecord(e.frame, e.identity, e.box.left, e.box.top, e.box.width, e.box.height, 1.0)
        for e in entries
    ]
    records.sort(key=lambda r: (r.frame, r.id))
    write_records(records, path)


def loads(text: str) -> list[MotCsvRecord]:
    return read_records(io.StringIO(text))
