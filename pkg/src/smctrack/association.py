"""Two-stage similarity matching cascade.

Per frame:

1. lost tracks rejoin the working list and every track is Kalman-predicted;
2. detections are split at an adaptive score threshold into high / low /
   background;
3. stage one matches high detections to all tracks using an IoU-distance
   cost fused with appearance similarity (by default through an appearance
   gate);
4. stage two matches low detections to the tracks left over, by IoU alone
   or, optionally, against each track's template bank;
5. unmatched high detections above ``new_track_threshold`` found new tracks,
   unmatched tracks go (or stay) lost and are dropped after ``lost_ttl``
   frames without a match.
"""

from __future__ import annotations

import enum
import math
from decimal import Decimal
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional, Sequence

import numpy as np

from .appearance.bank import FeatureBank, multi_template_similarity
from .assignment import INFEASIBLE, hungarian_solve
from .errors import ConfigError, DegenerateFilterError, SequencingError
from .geometry import BoundingBox, Detection, FrameObservations, iou_matrix
from .motion import KalmanState, MotionNoiseConfig, kf_initiate, kf_predict, kf_update, state_to_box

FUSION_MODES = ("gate", "weighted", "eq4-literal", "iou-only")
SPLIT_MODES = ("adaptive-mean", "fixed")


@dataclass(frozen=True)
class TrackerConfig:
    gate_epsilon: float = 0.7
    new_track_threshold: float = 0.7
    match_cost_cap: float = 0.2
    det_floor: float = 0.1
    lost_ttl: int = 30
    bank_capacity: int = 50
    fusion_mode: str = "gate"
    alpha: float = 0.5
    stage2_appearance: bool = False
    stage2_enabled: bool = True
    split_mode: str = "adaptive-mean"
    fixed_split: float = 0.6
    position_std_factor: float = 1.0 / 20
    velocity_std_factor: float = 1.0 / 160

    def __post_init__(self):
        if not (0.0 <= self.det_floor < self.new_track_threshold <= 1.0):
            raise ConfigError("need 0 <= det_floor < new_track_threshold <= 1")
        if not (0.0 <= self.gate_epsilon <= 1.0):
            raise ConfigError("gate_epsilon must lie in [0, 1]")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError("alpha must lie strictly between 0 and 1")
        if self.lost_ttl < 1:
            raise ConfigError("lost_ttl must be at least 1")
        if self.bank_capacity < 1:
            raise ConfigError("bank_capacity must be at least 1")
        if not math.isfinite(self.match_cost_cap):
            raise ConfigError("match_cost_cap must be finite")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"fusion_mode must be one of {FUSION_MODES}, got {self.fusion_mode!r}")
        if self.split_mode not in SPLIT_MODES:
            raise ConfigError(f"split_mode must be one of {SPLIT_MODES}, got {self.split_mode!r}")
        if not (self.det_floor <= self.fixed_split <= 1.0):
            raise ConfigError("fixed_split must lie in [det_floor, 1]")
        # raises on non-positive factors
        self.motion

    @property
    def motion(self) -> MotionNoiseConfig:
        try:
            return MotionNoiseConfig(self.position_std_factor, self.velocity_std_factor)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


class TrackStatus(enum.Enum):
    ACTIVE = "active"
    LOST = "lost"


@dataclass
class Track:
    id: int
    kalman: KalmanState
    bank: FeatureBank
    last_embedding: Optional[np.ndarray]
    last_score: float
    start_frame: int
    status: TrackStatus = TrackStatus.ACTIVE
    frames_since_update: int = 0
    box: Optional[BoundingBox] = None

    def __post_init__(self):
        if self.box is None:
            self.box = state_to_box(self.kalman)


@dataclass(frozen=True)
class TrackOutput:
    frame: int
    id: int
    box: BoundingBox
    score: float


@dataclass
class StepReport:
    """What happened in one ``smc_step``; used by invariant checks."""

    frame: int
    threshold: float = 0.0
    n_detections: int = 0
    n_high: int = 0
    n_low: int = 0
    n_discarded: int = 0
    # (track id, detection index, motion distance, appearance similarity or nan)
    stage1_matches: list = field(default_factory=list)
    stage2_matches: list = field(default_factory=list)
    new_ids: list = field(default_factory=list)
    lost_ids: list = field(default_factory=list)
    deleted_ids: list = field(default_factory=list)


@dataclass
class TrackerState:
    tracks: list = field(default_factory=list)
    next_id: int = 1
    frame: Optional[int] = None
    deleted_ids: list = field(default_factory=list)
    last_report: Optional[StepReport] = None

    @property
    def active(self) -> list:
        return [t for t in self.tracks if t.status is TrackStatus.ACTIVE]

    @property
    def lost(self) -> list:
        return [t for t in self.tracks if t.status is TrackStatus.LOST]


# -- score split ---------------------------------------------------------------

def compute_split_threshold(dets: Sequence[Detection], mode: str = "adaptive-mean",
                            det_floor: float = 0.1, fixed_split: float = 0.6) -> float:
    """Mean score of the lower half (``ceil(N/2)`` lowest) of the detections.

    Empty input yields ``det_floor``. ``mode="fixed"`` returns ``fixed_split``.
    """
    if mode == "fixed":
        return fixed_split
    if mode != "adaptive-mean":
        raise ConfigError(f"unknown split mode {mode!r}")
    if len(dets) == 0:
        return det_floor
    scores = sorted(d.score for d in dets)
    half = scores[: (len(scores) + 1) // 2]
    # averaged as the decimals they were written as, so [0.2, 0.4] gives 0.3
    # rather than the binary 0.30000000000000004
    return float(sum(Decimal(repr(s)) for s in half) / len(half))


def _partition_indices(dets, thres, det_floor):
    high, low, discarded = [], [], []
    for i, d in enumerate(dets):
        if d.score > thres:
            high.append(i)
        elif d.score >= det_floor:
            low.append(i)
        else:
            discarded.append(i)
    return high, low, discarded


def partition_detections(dets: Sequence[Detection], thres: float, det_floor: float = 0.1):
    """Split into ``(D_high, D_low, discarded)``.

    ``score > thres`` is high, ``det_floor <= score <= thres`` is low and
    anything below ``det_floor`` is background.
    """
    if thres < det_floor:
        raise ValueError(f"threshold {thres} is below the detection floor {det_floor}")
    high, low, discarded = _partition_indices(dets, thres, det_floor)
    return [dets[i] for i in high], [dets[i] for i in low], [dets[i] for i in discarded]


# -- cost fusion ---------------------------------------------------------------
# Appearance matrices use NaN where either side has no embedding; such pairs
# are always feasible and contribute no appearance term.

def fuse_gate(motion_dist, appearance, epsilon: float = 0.7, literal: bool = False) -> np.ndarray:
    """Appearance-gated cost.

    Pairs whose similarity is below ``epsilon`` are infeasible. Feasible pairs
    cost ``motion + (1 - appearance)``, or ``motion - (1 - appearance)`` when
    ``literal`` is set.
    """
    m = np.asarray(motion_dist, dtype=np.float64)
    a = np.asarray(appearance, dtype=np.float64)
    if m.shape != a.shape:
        raise ValueError(f"matrix shapes differ: {m.shape} vs {a.shape}")
    a = np.where(np.isnan(a), 1.0, a)
    dissim = 1.0 - a
    cost = m - dissim if literal else m + dissim
    cost[a < epsilon] = INFEASIBLE
    return cost


def fuse_weighted(iou_similarity, appearance, alpha: float = 0.5) -> np.ndarray:
    """``1 - (alpha * IoU + (1 - alpha) * appearance)``, no gating."""
    s = np.asarray(iou_similarity, dtype=np.float64)
    a = np.asarray(appearance, dtype=np.float64)
    if s.shape != a.shape:
        raise ValueError(f"matrix shapes differ: {s.shape} vs {a.shape}")
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    missing = np.isnan(a)
    sim = np.where(missing, s, alpha * s + (1.0 - alpha) * np.where(missing, 0.0, a))
    return 1.0 - sim


def fuse(motion_dist, appearance, cfg: TrackerConfig) -> np.ndarray:
    if cfg.fusion_mode == "gate":
        return fuse_gate(motion_dist, appearance, cfg.gate_epsilon)
    if cfg.fusion_mode == "eq4-literal":
        return fuse_gate(motion_dist, appearance, cfg.gate_epsilon, literal=True)
    if cfg.fusion_mode == "weighted":
        return fuse_weighted(1.0 - np.asarray(motion_dist), appearance, cfg.alpha)
    return np.array(motion_dist, dtype=np.float64, copy=True)


def _last_embedding_similarity(tracks, dets) -> np.ndarray:
    out = np.full((len(tracks), len(dets)), np.nan)
    det_rows = [j for j, d in enumerate(dets) if d.embedding is not None]
    trk_rows = [i for i, t in enumerate(tracks) if t.last_embedding is not None]
    if det_rows and trk_rows:
        tm = np.array([tracks[i].last_embedding for i in trk_rows])
        dm = np.array([dets[j].embedding for j in det_rows])
        out[np.ix_(trk_rows, det_rows)] = np.clip(tm @ dm.T, -1.0, 1.0)
    return out


def _bank_similarity(tracks, dets) -> np.ndarray:
    out = np.full((len(tracks), len(dets)), np.nan)
    for j, d in enumerate(dets):
        if d.embedding is None:
            continue
        for i, t in enumerate(tracks):
            out[i, j] = multi_template_similarity(t.bank, d.embedding)
    return out


def _motion_distance(tracks, dets) -> np.ndarray:
    if not tracks or not dets:
        return np.zeros((len(tracks), len(dets)))
    return 1.0 - iou_matrix([t.box for t in tracks], [d.box for d in dets])


# -- the step ------------------------------------------------------------------

def _predict(track: Track, motion: MotionNoiseConfig) -> None:
    try:
        predicted = kf_predict(track.kalman, motion)
        box = state_to_box(predicted)
    except DegenerateFilterError:
        predicted = kf_initiate(track.box, motion)
        box = track.box
    track.kalman = predicted
    track.box = box


def _update(track: Track, det: Detection, motion: MotionNoiseConfig) -> None:
    try:
        state = kf_update(track.kalman, det.box, motion)
        box = state_to_box(state)
    except DegenerateFilterError:
        state = kf_initiate(det.box, motion)
        box = det.box
    track.kalman = state
    track.box = box
    track.last_score = det.score
    track.status = TrackStatus.ACTIVE
    track.frames_since_update = 0


def _match(tracks, dets, cost, cap):
    result = hungarian_solve(cost, cap)
    return result.matches, list(result.unmatched_rows), list(result.unmatched_cols)


def smc_step(state: TrackerState, frame: FrameObservations, cfg: TrackerConfig = TrackerConfig()):
    """Advance ``state`` by one frame (in place). Returns ``(state, outputs)``."""
    if state.frame is not None and frame.frame <= state.frame:
        raise SequencingError(f"frame {frame.frame} arrived after frame {state.frame}")
    motion = cfg.motion
    dets = list(frame.detections)
    report = StepReport(frame=frame.frame, n_detections=len(dets))

    # (1)-(2) lost tracks rejoin; everything is predicted
    pool = list(state.tracks)
    for t in pool:
        _predict(t, motion)

    # (3) score split; a detection confident enough to found a track is never "low"
    thres = compute_split_threshold(dets, cfg.split_mode, cfg.det_floor, cfg.fixed_split)
    thres = min(max(thres, cfg.det_floor), cfg.new_track_threshold)
    hi_idx, lo_idx, bg_idx = _partition_indices(dets, thres, cfg.det_floor)
    report.threshold = thres
    report.n_high, report.n_low, report.n_discarded = len(hi_idx), len(lo_idx), len(bg_idx)
    d_high = [dets[i] for i in hi_idx]
    d_low = [dets[i] for i in lo_idx]

    updated: list[Track] = []

    # (4) stage one: all tracks x high detections
    motion_dist = _motion_distance(pool, d_high)
    if cfg.fusion_mode == "iou-only":
        appearance = np.full(motion_dist.shape, np.nan)
    else:
        appearance = _last_embedding_similarity(pool, d_high)
    cost = fuse(motion_dist, appearance, cfg)
    matches, rem_rows, rem_cols = _match(pool, d_high, cost, cfg.match_cost_cap)
    for r, c in matches:
        t, d = pool[r], d_high[c]
        _update(t, d, motion)
        if d.embedding is not None:
            t.bank.insert(d.embedding, d.score, thres)
            t.last_embedding = d.embedding
        updated.append(t)
        report.stage1_matches.append((t.id, hi_idx[c], float(motion_dist[r, c]), float(appearance[r, c])))
    tl_remain = [pool[r] for r in rem_rows]
    d_remain = [d_high[c] for c in rem_cols]

    # (5) stage two: leftover tracks x low detections
    if cfg.stage2_enabled and tl_remain and d_low:
        motion_dist = _motion_distance(tl_remain, d_low)
        if cfg.stage2_appearance and cfg.fusion_mode != "iou-only":
            appearance = _bank_similarity(tl_remain, d_low)
            cost = fuse(motion_dist, appearance, cfg)
        else:
            appearance = np.full(motion_dist.shape, np.nan)
            cost = motion_dist
        matches, rem_rows, _ = _match(tl_remain, d_low, cost, cfg.match_cost_cap)
        for r, c in matches:
            t, d = tl_remain[r], d_low[c]
            _update(t, d, motion)
            if d.embedding is not None:
                t.bank.insert(d.embedding, d.score, thres)
            updated.append(t)
            report.stage2_matches.append((t.id, lo_idx[c], float(motion_dist[r, c]), float(appearance[r, c])))
        tl_rremain = [tl_remain[r] for r in rem_rows]
    else:
        tl_rremain = tl_remain
    # unmatched low detections are background

    # (6) new tracks from unmatched high detections
    born = []
    for d in d_remain:
        if d.score <= cfg.new_track_threshold:
            continue
        bank = FeatureBank(cfg.bank_capacity)
        if d.embedding is not None:
            bank.insert(d.embedding, d.score, thres)
        t = Track(
            id=state.next_id,
            kalman=kf_initiate(d.box, motion),
            bank=bank,
            last_embedding=d.embedding,
            last_score=d.score,
            start_frame=frame.frame,
            box=d.box,
        )
        state.next_id += 1
        born.append(t)
        report.new_ids.append(t.id)

    # (7) lost-list bookkeeping
    survivors = []
    for t in tl_rremain:
        t.status = TrackStatus.LOST
        t.frames_since_update += 1
        if t.frames_since_update > cfg.lost_ttl:
            state.deleted_ids.append(t.id)
            report.deleted_ids.append(t.id)
        else:
            survivors.append(t)
            report.lost_ids.append(t.id)
    keep = {id(t) for t in updated} | {id(t) for t in survivors}
    state.tracks = [t for t in pool if id(t) in keep] + born
    state.frame = frame.frame
    state.last_report = report

    # (8) emit tracks matched or born in this frame
    outputs = [TrackOutput(frame.frame, t.id, t.box, t.last_score) for t in updated + born]
    outputs.sort(key=lambda o: o.id)
    return state, outputs


def fill_gaps(frames: Iterable[FrameObservations]) -> list[FrameObservations]:
    """Insert empty frames so indices are consecutive."""
    out: list[FrameObservations] = []
    for f in frames:
        if out and f.frame <= out[-1].frame:
            raise SequencingError(f"frame {f.frame} follows frame {out[-1].frame}")
        if out:
            out.extend(FrameObservations(k) for k in range(out[-1].frame + 1, f.frame))
        out.append(f)
    return out


class Tracker:
    """Stateful convenience wrapper around :func:`smc_step`."""

    def __init__(self, cfg: TrackerConfig = TrackerConfig()):
        self.cfg = cfg
        self.state = TrackerState()

    def step(self, frame: FrameObservations) -> list[TrackOutput]:
        _, outputs = smc_step(self.state, frame, self.cfg)
        return outputs

    @property
    def tracks_created(self) -> int:
        return self.state.next_id - 1


def run_sequence(frames: Iterable[FrameObservations], cfg: TrackerConfig = TrackerConfig(),
                 tracker: Optional[Tracker] = None) -> list[TrackOutput]:
    tracker = tracker or Tracker(cfg)
    results: list[TrackOutput] = []
    for f in fill_gaps(frames):
        results.extend(tracker.step(f))
    return results
