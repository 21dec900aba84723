"""Embedding sidecar files: one line per detection,
``frame,index,d,v1,...,vd`` where ``index`` is the 0-based position of the
detection within its frame in the matching detections file."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Union

import numpy as np

from ..errors import ParseError
from ..geometry import FrameObservations


def read_sidecar(path: Union[str, Path]) -> dict[tuple[int, int], np.ndarray]:
    out: dict[tuple[int, int], np.ndarray] = {}
    dim = None
    with open(path, "r", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            parts = text.split(",")
            if len(parts) < 4:
                raise ParseError("expected frame,index,d,v1..vd", lineno, path)
            try:
                frame, index, d = int(parts[0]), int(parts[1]), int(parts[2])
                values = np.array([float(p) for p in parts[3:]])
            except ValueError as exc:
                raise ParseError(f"non-numeric field ({exc})", lineno, path) from None
            if d != len(values):
                raise ParseError(f"declared d={d} but found {len(values)} values", lineno, path)
            if dim is None:
                dim = d
            elif d != dim:
                raise ParseError(f"dimension {d} differs from earlier lines ({dim})", lineno, path)
            if not np.all(np.isfinite(values)):
                raise ParseError("embedding has non-finite values", lineno, path)
            if index < 0:
                raise ParseError("detection index must be >= 0", lineno, path)
            if (frame, index) in out:
                raise ParseError(f"duplicate entry for frame {frame}, index {index}", lineno, path)
            out[(frame, index)] = values
    return out


def format_sidecar(frames: Iterable[FrameObservations]) -> str:
    lines = []
    for fo in frames:
        for k, det in enumerate(fo.detections):
            if det.embedding is None:
                continue
            e = np.asarray(det.embedding, dtype=np.float64)
            lines.append(f"{fo.frame},{k},{e.size}," + ",".join(repr(float(v)) for v in e))
    return "".join(line + "\n" for line in lines)


def write_sidecar(frames: Iterable[FrameObservations], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_sidecar(frames))
