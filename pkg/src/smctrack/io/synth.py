"""Synthetic scenarios: ground truth, scored detections and appearance.

Frame spans inside a :class:`ScenarioSpec` are 0-based and half-open
(``start <= f < end``). Emitted frames and identities follow the MOT
convention and are 1-based: scenario frame ``f`` is written as frame ``f + 1``
and identity ``i`` as id ``i + 1``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from ..appearance.extractor import CropSpec
from ..errors import ValidationError
from ..evaluation import GroundTruthEntry
from ..geometry import BoundingBox, Detection, FrameObservations


@dataclass
class ScenarioSpec:
    identities: int
    frames: int
    # per identity: [(frame, cx, cy), ...] sorted by frame; None -> random
    motion: Optional[list] = None
    # per identity (width, height); None -> random
    sizes: Optional[list] = None
    # (i, j, start, end): i and j meet at frame (start + end) // 2
    crossing_events: list = field(default_factory=list)
    # (identity, start, end, score)
    occlusion_dips: list = field(default_factory=list)
    appearance_noise_sigma: float = 0.05
    detector_miss_rate: float = 0.0
    seed: int = 0
    embedding_dim: int = 128
    # (i, j, cosine): force the identity vectors of i and j to this similarity
    appearance_cosines: list = field(default_factory=list)
    score_range: tuple = (0.75, 1.0)
    image_size: tuple = (1280, 720)
    max_speed: float = 2.0
    max_turn: float = 0.5

    def __post_init__(self):
        if self.identities < 0 or self.frames < 0:
            raise ValidationError("identities and frames must be non-negative")
        if not (0.0 <= self.detector_miss_rate < 1.0):
            raise ValidationError("detector_miss_rate must lie in [0, 1)")
        if self.appearance_noise_sigma < 0:
            raise ValidationError("appearance_noise_sigma must be non-negative")
        lo, hi = self.score_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValidationError("score_range must satisfy 0 <= lo <= hi <= 1")
        for ev in self.crossing_events:
            i, j, start, end = ev
            self._check_identity(i)
            self._check_identity(j)
            self._check_span(start, end)
        for dip in self.occlusion_dips:
            ident, start, end, score = dip
            self._check_identity(ident)
            self._check_span(start, end)
            if not (0.0 <= score <= 1.0):
                raise ValidationError(f"dip score {score} outside [0, 1]")
        if self.motion is not None:
            if len(self.motion) != self.identities:
                raise ValidationError("motion must list waypoints for every identity")
            for wps in self.motion:
                if not wps:
                    raise ValidationError("each identity needs at least one waypoint")
                frames = [w[0] for w in wps]
                if frames != sorted(frames) or len(set(frames)) != len(frames):
                    raise ValidationError("waypoint frames must be strictly increasing")
                if frames[0] < 0 or frames[-1] >= self.frames:
                    raise ValidationError("waypoint frames must lie in [0, frames)")
        if self.sizes is not None and len(self.sizes) != self.identities:
            raise ValidationError("sizes must give one (w, h) per identity")

    def _check_identity(self, i):
        if not (0 <= i < self.identities):
            raise ValidationError(f"identity {i} out of range")

    def _check_span(self, start, end):
        if not (0 <= start < end <= self.frames):
            raise ValidationError(f"frame span [{start}, {end}) outside [0, {self.frames})")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioSpec":
        if not isinstance(data, dict):
            raise ValidationError("scenario spec must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            spec = cls(**data)
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc
        spec.score_range = tuple(spec.score_range)
        spec.image_size = tuple(spec.image_size)
        return spec

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioSpec":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


class Scenario(NamedTuple):
    ground_truth: list
    frames: list
    # per frame, identity id of each detection (same order as the detections)
    labels: list
    identity_vectors: np.ndarray
    sizes: np.ndarray


def _random_waypoints(spec: ScenarioSpec, rng: np.random.Generator, size) -> list:
    W, H = spec.image_size
    w, h = size
    lo = np.array([w / 2 + 1, h / 2 + 1])
    hi = np.array([W - w / 2 - 1, H - h / 2 - 1])
    pos = rng.uniform(lo, hi)
    speed = rng.uniform(0.3, spec.max_speed)
    angle = rng.uniform(0, 2 * np.pi)
    vel = speed * np.array([np.cos(angle), np.sin(angle)])
    wps = [(0, float(pos[0]), float(pos[1]))]
    f = 0
    while f < spec.frames - 1:
        seg = int(rng.integers(15, 45))
        seg = min(seg, spec.frames - 1 - f)
        end = pos + vel * seg
        # bounce off the borders by reflecting the velocity
        for k in range(2):
            if end[k] < lo[k] or end[k] > hi[k]:
                vel[k] = -vel[k]
                end[k] = pos[k] + vel[k] * seg
                end[k] = min(max(end[k], lo[k]), hi[k])
                vel[k] = (end[k] - pos[k]) / seg
        f += seg
        pos = end
        wps.append((f, float(pos[0]), float(pos[1])))
        turn = rng.uniform(-spec.max_turn, spec.max_turn, size=2)
        vel = vel + turn
        n = np.linalg.norm(vel)
        if n > spec.max_speed:
            vel *= spec.max_speed / n
    return wps


def _interpolate(wps, frame):
    frames = [w[0] for w in wps]
    if frame < frames[0] or frame > frames[-1]:
        return None
    cx = np.interp(frame, frames, [w[1] for w in wps])
    cy = np.interp(frame, frames, [w[2] for w in wps])
    return float(cx), float(cy)


def _apply_crossing(wps_i, wps_j, start, end):
    mid = (start + end) // 2
    pi, pj = _interpolate(wps_i, mid), _interpolate(wps_j, mid)
    if pi is None or pj is None:
        raise ValidationError(f"crossing at frame {mid} involves an absent identity")
    meet = ((pi[0] + pj[0]) / 2, (pi[1] + pj[1]) / 2)

    def reroute(wps):
        a, b = _interpolate(wps, start), _interpolate(wps, end - 1)
        kept = [w for w in wps if w[0] < start or w[0] > end - 1]
        extra = [(start, *a), (mid, *meet), (end - 1, *b)]
        merged = {w[0]: w for w in kept}
        for w in extra:
            merged[w[0]] = w
        return [merged[k] for k in sorted(merged)]

    return reroute(wps_i), reroute(wps_j)


def identity_vectors(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    vecs = rng.standard_normal((spec.identities, spec.embedding_dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    for i, j, c in spec.appearance_cosines:
        u = vecs[j] - np.dot(vecs[j], vecs[i]) * vecs[i]
        u /= np.linalg.norm(u)
        vecs[j] = c * vecs[i] + np.sqrt(max(0.0, 1.0 - c * c)) * u
    return vecs


def generate_scenario(spec: ScenarioSpec) -> Scenario:
    """Deterministic (given ``spec.seed``) ground truth and detections.

    Each identity owns a unit appearance vector; a detection's embedding is
    that vector plus isotropic Gaussian noise whose expected norm is
    ``appearance_noise_sigma``, renormalized. Detection boxes equal the
    ground-truth boxes exactly.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.sizes is not None:
        sizes = np.array(spec.sizes, dtype=np.float64).reshape(spec.identities, 2)
    else:
        widths = rng.uniform(40, 70, spec.identities)
        sizes = np.stack([widths, widths * rng.uniform(2.2, 2.8, spec.identities)], axis=1)
    for i, j, _, _ in spec.crossing_events:
        sizes[j] = sizes[i]
    if spec.motion is not None:
        motion = [[tuple(map(float, w)) for w in wps] for wps in spec.motion]
        motion = [[(int(w[0]), w[1], w[2]) for w in wps] for wps in motion]
    else:
        motion = [_random_waypoints(spec, rng, sizes[i]) for i in range(spec.identities)]
    for i, j, start, end in spec.crossing_events:
        motion[i], motion[j] = _apply_crossing(motion[i], motion[j], start, end)
    vecs = identity_vectors(spec, rng)

    dips = {}
    for ident, start, end, score in spec.occlusion_dips:
        for f in range(start, end):
            dips[(ident, f)] = float(score)

    lo, hi = spec.score_range
    noise_scale = spec.appearance_noise_sigma / np.sqrt(spec.embedding_dim)
    gt, frames, labels = [], [], []
    for f in range(spec.frames):
        out_frame = f + 1
        dets, det_labels = [], []
        for i in range(spec.identities):
            pos = _interpolate(motion[i], f)
            if pos is None:
                continue
            w, h = sizes[i]
            box = BoundingBox(pos[0] - w / 2, pos[1] - h / 2, float(w), float(h))
            gt.append(GroundTruthEntry(out_frame, i + 1, box))
            score = float(rng.uniform(lo, hi))
            score = dips.get((i, f), score)
            emb = vecs[i] + rng.standard_normal(spec.embedding_dim) * noise_scale
            emb /= np.linalg.norm(emb)
            missed = rng.random() < spec.detector_miss_rate
            if missed:
                continue
            dets.append(Detection(box, score, out_frame, emb))
            det_labels.append(i + 1)
        order = rng.permutation(len(dets))
        frames.append(FrameObservations(out_frame, [dets[k] for k in order]))
        labels.append([det_labels[k] for k in order])
    return Scenario(gt, frames, labels, vecs, sizes)


# -- rendered crops for the extractor pipeline --------------------------------

class CropRenderer:
    """Per-identity synthetic appearance: a coarse grid of random colours
    (think head / torso / legs) upsampled to the crop size, with pixel noise.

    Pixel values are on the 0..255 scale; :meth:`render` returns them centred
    at zero, which is what the stub extractor expects.
    """

    def __init__(self, identities: int, seed: int = 0, crop: CropSpec = CropSpec(),
                 grid: tuple = (7, 2)):
        if crop.height % grid[0] or crop.width % grid[1]:
            raise ValidationError("crop size must be divisible by the colour grid")
        rng = np.random.default_rng(seed)
        self.crop = crop
        cells = rng.uniform(0, 255, size=(identities, grid[0], grid[1], 3))
        block = np.ones((crop.height // grid[0], crop.width // grid[1], 1))
        self.looks = np.stack([np.kron(c, block) for c in cells]) - 127.5

    def render(self, identity_index: int, rng: np.random.Generator, pixel_noise: float = 0.05) -> np.ndarray:
        look = self.looks[identity_index]
        return look + rng.standard_normal(look.shape) * (pixel_noise * 255.0)


def attach_rendered_embeddings(scenario: Scenario, embed_fn, renderer: CropRenderer,
                               pixel_noise: float = 0.05, seed: int = 0) -> list:
    """Replace detection embeddings with ``embed_fn(list_of_crops)`` applied to
    freshly rendered crops, one batch per frame. Returns the new frames."""
    rng = np.random.default_rng(seed)
    frames = []
    for fo, labels in zip(scenario.frames, scenario.labels):
        if not fo.detections:
            frames.append(fo)
            continue
        crops = [renderer.render(lab - 1, rng, pixel_noise) for lab in labels]
        embs = embed_fn(crops)
        frames.append(FrameObservations(
            fo.frame, [Detection(d.box, d.score, d.frame, e) for d, e in zip(fo.detections, embs)]
        ))
    return frames
