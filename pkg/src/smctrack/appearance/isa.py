"""Image-slicing attention head.

A feature map is cut into four quadrants (top-left, top-right, bottom-left,
bottom-right). Quadrant ``k`` gets the scalar ``k`` (1..4) added to every
entry, then becomes a ``tokens x channels`` matrix. Each quadrant owns a
Q/K/V projection. Quadrant ``i``'s output is its self-attention plus its
cross-attention onto each of the other three quadrants, all evaluated with
scaled dot-product attention. The four outputs are mean-pooled over tokens,
concatenated, projected to ``d`` dims and L2-normalized.

Everything below accepts an optional leading batch axis.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import ValidationError
from .extractor import FeatureMap

N_SLICES = 4
POSITION_CODES = np.arange(1, N_SLICES + 1, dtype=np.float64)

#: When true, every softmax asserts that its rows sum to one.
CHECK_SOFTMAX = os.environ.get("SMCTRACK_DEBUG", "0") not in ("", "0")

ARCHIVE_FORMAT = "smctrack.attention/1"


@dataclass(frozen=True)
class SliceSet:
    """Four position-coded quadrants, shape ``(4, tokens, channels)``."""

    values: np.ndarray
    rows: int
    cols: int

    @property
    def tokens(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]


def slice_feature_map(fm: FeatureMap) -> SliceSet:
    v = fm.values
    c, h, w = v.shape
    s, t = h // 2, w // 2
    quads = (v[:, :s, :t], v[:, :s, t:], v[:, s:, :t], v[:, s:, t:])
    out = np.empty((N_SLICES, s * t, c))
    for k, q in enumerate(quads):
        # token index runs row-major over the quadrant grid
        out[k] = q.reshape(c, s * t).T + POSITION_CODES[k]
    return SliceSet(out, s, t)


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    if CHECK_SOFTMAX:
        assert np.all(np.abs(z.sum(axis=-1) - 1.0) <= 1e-9), "softmax rows do not sum to 1"
    return z


def qkv_attention(Q, K, V) -> np.ndarray:
    """``softmax(Q K^T / sqrt(d_k)) V`` with the softmax taken row-wise."""
    Q = np.asarray(Q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if Q.shape[-1] != K.shape[-1]:
        raise ValidationError("Q and K must share the key dimension")
    if K.shape[-2] != V.shape[-2]:
        raise ValidationError("K and V must have the same number of rows")
    weights = _softmax_rows(Q @ np.swapaxes(K, -1, -2) / np.sqrt(Q.shape[-1]))
    return weights @ V


@dataclass(frozen=True)
class AttentionParams:
    """Projection weights.

    ``w_q``, ``w_k``, ``w_v`` have shape ``(4, channels, d_k)`` (one matrix per
    quadrant); ``w_fc`` has shape ``(4 * d_k, d)``.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_fc: np.ndarray
    extractor_seed: int = 0

    def __post_init__(self):
        for name in ("w_q", "w_k", "w_v", "w_fc"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        shapes = {self.w_q.shape, self.w_k.shape, self.w_v.shape}
        if len(shapes) != 1 or self.w_q.ndim != 3 or self.w_q.shape[0] != N_SLICES:
            raise ValidationError(f"per-slice projections must share shape (4, C, d_k), got {shapes}")
        if self.w_fc.shape[0] != N_SLICES * self.d_k:
            raise ValidationError(f"w_fc must have {N_SLICES * self.d_k} rows, got {self.w_fc.shape[0]}")

    @property
    def channels(self) -> int:
        return self.w_q.shape[1]

    @property
    def d_k(self) -> int:
        return self.w_q.shape[2]

    @property
    def dim(self) -> int:
        return self.w_fc.shape[1]

    def groups(self) -> dict[str, np.ndarray]:
        return {"w_q": self.w_q, "w_k": self.w_k, "w_v": self.w_v, "w_fc": self.w_fc}

    def replace(self, **groups) -> "AttentionParams":
        merged = {**self.groups(), **groups}
        return AttentionParams(extractor_seed=self.extractor_seed, **merged)


def init_params(channels: int, d_k: int = 16, dim: int = 128, seed: int = 0,
                extractor_seed: int = 0) -> AttentionParams:
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(channels)
    return AttentionParams(
        w_q=rng.standard_normal((N_SLICES, channels, d_k)) * scale,
        w_k=rng.standard_normal((N_SLICES, channels, d_k)) * scale,
        w_v=rng.standard_normal((N_SLICES, channels, d_k)) * scale,
        w_fc=rng.standard_normal((N_SLICES * d_k, dim)) / np.sqrt(N_SLICES * d_k),
        extractor_seed=extractor_seed,
    )


def forward(x: np.ndarray, params: AttentionParams, keep: bool = False):
    """Batched forward pass.

    ``x`` has shape ``(B, 4, tokens, channels)``. Returns ``(B, d)`` unit
    embeddings, plus the intermediate tensors when ``keep`` is set (used for
    backpropagation).
    """
    d_k = params.d_k
    q = x @ params.w_q  # (B, 4, T, d_k)
    k = x @ params.w_k
    v = x @ params.w_v
    # (B, i, j, T, T): queries of slice i against keys of slice j
    scores = q[:, :, None] @ np.swapaxes(k, -1, -2)[:, None] / np.sqrt(d_k)
    attn = _softmax_rows(scores)
    # sum over j folds self (j == i) and cross (j != i) terms together
    out = (attn @ v[:, None]).sum(axis=2)
    z = out.mean(axis=2).reshape(x.shape[0], N_SLICES * d_k)
    y = z @ params.w_fc
    norm = np.linalg.norm(y, axis=1, keepdims=True)
    emb = y / norm
    if keep:
        return emb, dict(x=x, q=q, k=k, v=v, attn=attn, z=z, y=y, norm=norm, emb=emb)
    return emb


def isa_forward(slices: SliceSet, params: AttentionParams) -> np.ndarray:
    if slices.channels != params.channels:
        raise ValidationError(
            f"slices have {slices.channels} channels, params expect {params.channels}"
        )
    return forward(slices.values[None], params)[0]


def isa_forward_many(slice_sets, params: AttentionParams) -> np.ndarray:
    if len(slice_sets) == 0:
        return np.zeros((0, params.dim))
    return forward(np.stack([s.values for s in slice_sets]), params)


def save_params(params: AttentionParams, path: Union[str, Path]) -> None:
    """Write an ``.npz`` archive (layout documented in the README)."""
    np.savez(
        path,
        format=np.array(ARCHIVE_FORMAT),
        w_q=params.w_q,
        w_k=params.w_k,
        w_v=params.w_v,
        w_fc=params.w_fc,
        d_k=np.array(params.d_k),
        d=np.array(params.dim),
        extractor_seed=np.array(params.extractor_seed),
    )


def load_params(path: Union[str, Path]) -> AttentionParams:
    with np.load(path, allow_pickle=False) as data:
        fmt = str(data["format"]) if "format" in data else None
        if fmt != ARCHIVE_FORMAT:
            raise ValidationError(f"{path}: not an attention parameter archive (format={fmt!r})")
        params = AttentionParams(
            w_q=data["w_q"], w_k=data["w_k"], w_v=data["w_v"], w_fc=data["w_fc"],
            extractor_seed=int(data["extractor_seed"]),
        )
        if int(data["d_k"]) != params.d_k or int(data["d"]) != params.dim:
            raise ValidationError(f"{path}: declared d_k/d disagree with tensor shapes")
    return params
