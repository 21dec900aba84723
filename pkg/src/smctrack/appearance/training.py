"""Toy Siamese training of the attention head with hand-written gradients.

Loss: mean over pairs of ``(cos(e_a, e_b) - label)^2`` with label 1 for the
same identity and 0 otherwise. Plain gradient descent, learning rate on a
cosine-annealing schedule. The extractor stays frozen.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import DivergenceError
from .extractor import Extractor
from .isa import AttentionParams, N_SLICES, forward
from .slm import to_slices

DEFAULT_LR = 6.5e-3
DEFAULT_EPOCHS = 150


def cosine_annealing(lr0: float, epochs: int, lr_min: float = 0.0) -> Callable[[int], float]:
    def schedule(epoch: int) -> float:
        return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * epoch / max(epochs, 1)))
    return schedule


def backward(cache: dict, params: AttentionParams, grad_emb: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every weight group, given dL/d(embedding)."""
    x, q, k, v, attn = cache["x"], cache["q"], cache["k"], cache["v"], cache["attn"]
    z, norm, emb = cache["z"], cache["norm"], cache["emb"]
    d_k = params.d_k
    n_tok = x.shape[2]
    scale = 1.0 / np.sqrt(d_k)

    # y / |y|
    g_y = (grad_emb - emb * np.sum(emb * grad_emb, axis=1, keepdims=True)) / norm
    g_fc = z.T @ g_y
    g_pooled = (g_y @ params.w_fc.T).reshape(-1, N_SLICES, d_k)
    g_out = np.broadcast_to(g_pooled[:, :, None, :] / n_tok, q.shape)

    # attn[b, i, j] maps slice-j values to slice-i outputs
    g_v = (np.swapaxes(attn, -1, -2) @ g_out[:, :, None]).sum(axis=1)
    g_attn = g_out[:, :, None] @ np.swapaxes(v, -1, -2)[:, None]
    g_scores = attn * (g_attn - np.sum(g_attn * attn, axis=-1, keepdims=True))
    g_q = (g_scores @ k[:, None]).sum(axis=2) * scale
    g_k = (np.swapaxes(g_scores, -1, -2) @ q[:, :, None]).sum(axis=1) * scale

    xt = np.swapaxes(x, -1, -2)
    return {
        "w_q": (xt @ g_q).sum(axis=0),
        "w_k": (xt @ g_k).sum(axis=0),
        "w_v": (xt @ g_v).sum(axis=0),
        "w_fc": g_fc,
    }


def _stack_pairs(pairs, extractor):
    inputs, index_a, index_b, labels = [], [], [], []
    for a, b, label in pairs:
        index_a.append(len(inputs))
        inputs.append(to_slices(a, extractor).values)
        index_b.append(len(inputs))
        inputs.append(to_slices(b, extractor).values)
        labels.append(float(label))
    return np.stack(inputs), np.array(index_a), np.array(index_b), np.array(labels)


def pair_loss(params: AttentionParams, x, index_a, index_b, labels, with_grad: bool = False):
    if not with_grad:
        emb = forward(x, params)
        sims = np.sum(emb[index_a] * emb[index_b], axis=1)
        return float(np.mean((sims - labels) ** 2))
    emb, cache = forward(x, params, keep=True)
    sims = np.sum(emb[index_a] * emb[index_b], axis=1)
    resid = sims - labels
    loss = float(np.mean(resid ** 2))
    g_sim = 2.0 * resid / len(labels)
    g_emb = np.zeros_like(emb)
    np.add.at(g_emb, index_a, g_sim[:, None] * emb[index_b])
    np.add.at(g_emb, index_b, g_sim[:, None] * emb[index_a])
    return loss, backward(cache, params, g_emb)


def train_siamese_toy(
    pairs: Sequence,
    params: AttentionParams,
    epochs: int = DEFAULT_EPOCHS,
    lr: float = DEFAULT_LR,
    lr_schedule: Optional[Callable[[int], float]] = None,
    extractor: Optional[Extractor] = None,
    history: Optional[list] = None,
) -> AttentionParams:
    """Full-batch gradient descent on the pair MSE.

    ``pairs`` holds ``(a, b, label)`` triples where ``a``/``b`` are crops,
    feature maps or slice sets. If ``history`` is a list, the loss before
    each epoch is appended to it, followed by the final loss.
    """
    x, ia, ib, labels = _stack_pairs(pairs, extractor)
    schedule = lr_schedule or cosine_annealing(lr, epochs)
    for epoch in range(epochs):
        loss, grads = pair_loss(params, x, ia, ib, labels, with_grad=True)
        if not math.isfinite(loss):
            raise DivergenceError(epoch, loss)
        if history is not None:
            history.append(loss)
        step = schedule(epoch)
        params = params.replace(**{name: getattr(params, name) - step * g for name, g in grads.items()})
    final = pair_loss(params, x, ia, ib, labels)
    if not math.isfinite(final):
        raise DivergenceError(epochs, final)
    if history is not None:
        history.append(final)
    return params
