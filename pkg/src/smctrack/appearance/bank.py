"""Unit embeddings and the per-track multi-template feature bank."""

from __future__ import annotations

import itertools
from collections import deque
from typing import Iterator, Optional

import numpy as np

from ..errors import ValidationError

DEFAULT_CAPACITY = 50


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ValidationError("cannot normalize a zero or non-finite vector")
    return v / n


def as_embedding(v, tol: float = 1e-6) -> np.ndarray:
    """Check that ``v`` is a finite unit vector and return it as float64."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or not np.all(np.isfinite(v)):
        raise ValidationError("embedding must be a finite 1-D vector")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValidationError(f"embedding is not unit-norm (|e|={np.linalg.norm(v):.8f})")
    return v


def cosine_similarity(e1, e2) -> float:
    return float(np.clip(np.dot(e1, e2), -1.0, 1.0))


class FeatureBank:
    """High- and low-score template stores sharing one capacity.

    When an insert would exceed ``capacity`` the oldest entry across both
    stores is dropped, so the bank always holds the most recent ``capacity``
    observations of the track.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValidationError("bank capacity must be at least 1")
        self.capacity = capacity
        self.high: deque = deque()
        self.low: deque = deque()
        self._clock = itertools.count()
        self._matrix: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.high) + len(self.low)

    def templates(self) -> Iterator[tuple[np.ndarray, float]]:
        for _, e, s in itertools.chain(self.high, self.low):
            yield e, s

    def high_templates(self) -> list[tuple[np.ndarray, float]]:
        return [(e, s) for _, e, s in self.high]

    def low_templates(self) -> list[tuple[np.ndarray, float]]:
        return [(e, s) for _, e, s in self.low]

    def insert(self, embedding, det_score: float, high_low_threshold: float) -> "FeatureBank":
        if not (0.0 <= det_score <= 1.0):
            raise ValidationError(f"template score must lie in [0, 1], got {det_score}")
        entry = (next(self._clock), np.asarray(embedding, dtype=np.float64), float(det_score))
        (self.high if det_score >= high_low_threshold else self.low).append(entry)
        while len(self) > self.capacity:
            if not self.low or (self.high and self.high[0][0] < self.low[0][0]):
                self.high.popleft()
            else:
                self.low.popleft()
        self._matrix = None
        return self

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            rows = [e for e, _ in self.templates()]
            self._matrix = np.array(rows) if rows else np.zeros((0, 0))
        return self._matrix

    def copy(self) -> "FeatureBank":
        other = FeatureBank(self.capacity)
        other.high = deque(self.high)
        other.low = deque(self.low)
        stamp = max((t for t, _, _ in itertools.chain(self.high, self.low)), default=-1)
        other._clock = itertools.count(stamp + 1)
        return other


def bank_insert(bank: FeatureBank, e, det_score: float, high_low_threshold: float) -> FeatureBank:
    return bank.insert(e, det_score, high_low_threshold)


def multi_template_similarity(bank: FeatureBank, det_embedding) -> float:
    """Best cosine similarity between the query and any stored template.

    An empty bank carries no appearance evidence and scores 0.
    """
    if len(bank) == 0:
        return 0.0
    # row-wise products rather than a BLAS matvec, so a template's score does
    # not depend on how many others are stored
    sims = np.sum(bank.matrix() * np.asarray(det_embedding, dtype=np.float64), axis=1)
    return float(np.clip(np.max(sims), -1.0, 1.0))
