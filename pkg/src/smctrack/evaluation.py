"""CLEAR-MOT and identity (IDF1) metrics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .assignment import INFEASIBLE, hungarian_solve
from .errors import InputError, UndefinedMetricError
from .geometry import BoundingBox, iou_matrix

DEFAULT_IOU_THRESHOLD = 0.5
MT_COVERAGE = 0.8
ML_COVERAGE = 0.2


@dataclass(frozen=True)
class GroundTruthEntry:
    frame: int
    identity: int
    box: BoundingBox


def _identity(entry) -> int:
    ident = getattr(entry, "identity", None)
    return int(entry.id if ident is None else ident)


def _group(entries: Iterable, what: str) -> dict[int, tuple[list[int], list[BoundingBox]]]:
    frames: dict[int, tuple[list[int], list[BoundingBox]]] = defaultdict(lambda: ([], []))
    seen = set()
    for e in entries:
        key = (int(e.frame), _identity(e))
        if key in seen:
            raise InputError(f"duplicate {what} entry for frame {key[0]}, id {key[1]}")
        seen.add(key)
        ids, boxes = frames[key[0]]
        ids.append(key[1])
        boxes.append(e.box)
    return dict(frames)


@dataclass
class ClearMotResult:
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    gt: int = 0
    # frame -> list of (gt id, result id, iou)
    matches: dict = field(default_factory=dict)

    @property
    def mean_iou(self) -> float:
        ious = [m[2] for frame in self.matches.values() for m in frame]
        return float(np.mean(ious)) if ious else 0.0


def clear_mot_evaluate(gt: Sequence, results: Sequence,
                       iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> ClearMotResult:
    """Frame-by-frame CLEAR matching.

    Correspondences from earlier frames are kept while their IoU stays at or
    above ``iou_threshold``; remaining pairs are matched by maximum total IoU.
    A ground-truth object matched to a different result id than at its last
    match counts one identity switch.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise InputError("iou_threshold must lie in (0, 1]")
    gt_frames = _group(gt, "ground-truth")
    res_frames = _group(results, "result")
    out = ClearMotResult()
    last_match: dict[int, int] = {}
    for frame in sorted(set(gt_frames) | set(res_frames)):
        g_ids, g_boxes = gt_frames.get(frame, ([], []))
        r_ids, r_boxes = res_frames.get(frame, ([], []))
        out.gt += len(g_ids)
        ious = iou_matrix(g_boxes, r_boxes) if g_ids and r_ids else np.zeros((len(g_ids), len(r_ids)))
        r_index = {r: j for j, r in enumerate(r_ids)}
        pairs = []
        used_g, used_r = set(), set()
        for i, g in enumerate(g_ids):
            r = last_match.get(g)
            j = r_index.get(r) if r is not None else None
            if j is not None and j not in used_r and ious[i, j] >= iou_threshold:
                pairs.append((i, j))
                used_g.add(i)
                used_r.add(j)
        free_g = [i for i in range(len(g_ids)) if i not in used_g]
        free_r = [j for j in range(len(r_ids)) if j not in used_r]
        if free_g and free_r:
            sub = ious[np.ix_(free_g, free_r)]
            cost = np.where(sub >= iou_threshold, 1.0 - sub, INFEASIBLE)
            for a, b in hungarian_solve(cost).matches:
                pairs.append((free_g[a], free_r[b]))
        frame_matches = []
        for i, j in sorted(pairs):
            g, r = g_ids[i], r_ids[j]
            if g in last_match and last_match[g] != r:
                out.idsw += 1
            last_match[g] = r
            frame_matches.append((g, r, float(ious[i, j])))
        out.matches[frame] = frame_matches
        out.fn += len(g_ids) - len(pairs)
        out.fp += len(r_ids) - len(pairs)
    return out


def check_frame_range(gt: Sequence, results: Sequence) -> None:
    """Results may skip frames but must not reach outside the ground-truth span."""
    g = [int(e.frame) for e in gt]
    r = [int(e.frame) for e in results]
    if not r:
        return
    if not g:
        raise InputError("results given for a sequence with no ground truth")
    if min(r) < min(g) or max(r) > max(g):
        raise InputError(
            f"result frames {min(r)}..{max(r)} fall outside ground-truth frames {min(g)}..{max(g)}"
        )


def compute_mota(fn: int, fp: int, idsw: int, gt: int) -> float:
    if gt <= 0:
        raise UndefinedMetricError("MOTA is undefined without ground-truth objects")
    return 1.0 - (fn + fp + idsw) / gt


def idf1_from_counts(idtp: int, idfp: int, idfn: int) -> float:
    denom = 2 * idtp + idfp + idfn
    if denom == 0:
        raise UndefinedMetricError("IDF1 is undefined with no ground truth and no results")
    return 2 * idtp / denom


def identity_overlap_counts(gt: Sequence, results: Sequence,
                            iou_threshold: float = DEFAULT_IOU_THRESHOLD):
    """Per (gt id, result id) pair, the number of frames where their boxes overlap
    with IoU at or above the threshold. Returns ``(counts, gt_ids, res_ids,
    n_gt_boxes, n_res_boxes)``."""
    gt_frames = _group(gt, "ground-truth")
    res_frames = _group(results, "result")
    gt_ids = sorted({i for ids, _ in gt_frames.values() for i in ids})
    res_ids = sorted({i for ids, _ in res_frames.values() for i in ids})
    gi = {g: k for k, g in enumerate(gt_ids)}
    ri = {r: k for k, r in enumerate(res_ids)}
    counts = np.zeros((len(gt_ids), len(res_ids)), dtype=np.int64)
    for frame, (g_ids, g_boxes) in gt_frames.items():
        if frame not in res_frames:
            continue
        r_ids, r_boxes = res_frames[frame]
        ious = iou_matrix(g_boxes, r_boxes)
        for a, b in zip(*np.nonzero(ious >= iou_threshold)):
            counts[gi[g_ids[a]], ri[r_ids[b]]] += 1
    n_gt = sum(len(ids) for ids, _ in gt_frames.values())
    n_res = sum(len(ids) for ids, _ in res_frames.values())
    return counts, gt_ids, res_ids, n_gt, n_res


def compute_idf1(gt: Sequence, results: Sequence, iou_threshold: float = DEFAULT_IOU_THRESHOLD):
    """Returns ``(IDTP, IDFP, IDFN, IDF1)`` under the best one-to-one mapping
    between ground-truth and result identities."""
    counts, _, _, n_gt, n_res = identity_overlap_counts(gt, results, iou_threshold)
    idtp = 0
    if counts.size:
        # every pair feasible: zero-overlap pairs add nothing to the total
        result = hungarian_solve(-counts.astype(np.float64))
        idtp = int(sum(counts[r, c] for r, c in result.matches))
    idfp = n_res - idtp
    idfn = n_gt - idtp
    return idtp, idfp, idfn, idf1_from_counts(idtp, idfp, idfn)


def coverage_by_identity(gt: Sequence, clear: ClearMotResult) -> dict[int, float]:
    present: dict[int, int] = defaultdict(int)
    for e in gt:
        present[_identity(e)] += 1
    hit: dict[int, int] = defaultdict(int)
    for frame_matches in clear.matches.values():
        for g, _, _ in frame_matches:
            hit[g] += 1
    return {g: hit[g] / n for g, n in present.items()}


def compute_mt_ml(gt: Sequence, results: Sequence, iou_threshold: float = DEFAULT_IOU_THRESHOLD,
                  clear: ClearMotResult = None) -> tuple[float, float]:
    clear = clear or clear_mot_evaluate(gt, results, iou_threshold)
    cov = coverage_by_identity(gt, clear)
    if not cov:
        return 0.0, 0.0
    mt = sum(1 for c in cov.values() if c > MT_COVERAGE) / len(cov)
    ml = sum(1 for c in cov.values() if c < ML_COVERAGE) / len(cov)
    return mt, ml


@dataclass(frozen=True)
class MetricsReport:
    fp: int
    fn: int
    idsw: int
    gt: int
    mota: float
    idtp: int
    idfp: int
    idfn: int
    idf1: float
    mt: float
    ml: float
    mean_iou: float = 0.0

    FIELDS = ("MOTA", "IDF1", "IDs", "FP", "FN", "GT", "IDTP", "IDFP", "IDFN", "MT", "ML", "meanIoU")

    def values(self) -> dict[str, float]:
        return {
            "MOTA": self.mota, "IDF1": self.idf1, "IDs": self.idsw, "FP": self.fp,
            "FN": self.fn, "GT": self.gt, "IDTP": self.idtp, "IDFP": self.idfp,
            "IDFN": self.idfn, "MT": self.mt, "ML": self.ml, "meanIoU": self.mean_iou,
        }

    def as_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        v = self.values()
        return (
            f"MOTA {v['MOTA']:.4f}  IDF1 {v['IDF1']:.4f}  IDs {v['IDs']}  "
            f"FP {v['FP']}  FN {v['FN']}  GT {v['GT']}  "
            f"MT {v['MT']:.3f}  ML {v['ML']:.3f}  meanIoU {v['meanIoU']:.3f}"
        )

    def to_csv(self) -> str:
        v = self.values()
        return ",".join(self.FIELDS) + "\n" + ",".join(repr(v[k]) if isinstance(v[k], float) else str(v[k])
                                                      for k in self.FIELDS) + "\n"


def evaluate(gt: Sequence, results: Sequence, iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> MetricsReport:
    gt = list(gt)
    results = list(results)
    clear = clear_mot_evaluate(gt, results, iou_threshold)
    idtp, idfp, idfn, idf1 = compute_idf1(gt, results, iou_threshold)
    mt, ml = compute_mt_ml(gt, results, iou_threshold, clear)
    return MetricsReport(
        fp=clear.fp, fn=clear.fn, idsw=clear.idsw, gt=clear.gt,
        mota=compute_mota(clear.fn, clear.fp, clear.idsw, clear.gt),
        idtp=idtp, idfp=idfp, idfn=idfn, idf1=idf1, mt=mt, ml=ml, mean_iou=clear.mean_iou,
    )
