"""Built-in oracle suites run by ``smctrack selfcheck``.

Each suite compares a production routine with an independent, deliberately
naive computation and returns a list of failure messages (empty on success).
"""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from .appearance.extractor import FeatureMap
from .appearance.isa import _softmax_rows, init_params, qkv_attention, slice_feature_map
from .appearance.training import pair_loss
from .assignment import hungarian_solve
from .evaluation import GroundTruthEntry, compute_idf1, compute_mota, evaluate, identity_overlap_counts
from .geometry import BoundingBox


# -- oracles ------------------------------------------------------------------

def brute_force_assignment(cost: np.ndarray) -> tuple[int, float]:
    """(pairs, total cost) of the best matching by exhaustive enumeration:
    most feasible pairs first, then least cost. Infeasible = non-finite."""
    cost = np.asarray(cost, dtype=np.float64)
    transposed = cost.shape[0] > cost.shape[1]
    c = cost.T if transposed else cost
    rows, cols = c.shape
    best = (0, 0.0)
    best_key = None
    for perm in itertools.permutations(range(cols), rows):
        pairs = [(r, perm[r]) for r in range(rows) if np.isfinite(c[r, perm[r]])]
        if transposed:
            pairs = sorted((col, r) for r, col in pairs)
            total = sum(cost[r, col] for r, col in pairs)
        else:
            total = sum(c[r, col] for r, col in pairs)
        key = (-len(pairs), total)
        if best_key is None or key < best_key:
            best_key, best = key, (len(pairs), total)
    return best


def direct_attention(Q, K, V) -> np.ndarray:
    """Scaled dot-product attention written out entry by entry."""
    n, d = Q.shape
    m = K.shape[0]
    out = np.zeros((n, V.shape[1]))
    for i in range(n):
        s = [sum(Q[i, t] * K[j, t] for t in range(d)) / math.sqrt(d) for j in range(m)]
        top = max(s)
        w = [math.exp(v - top) for v in s]
        z = sum(w)
        for j in range(m):
            out[i] += (w[j] / z) * V[j]
    return out


def brute_force_idtp(counts: np.ndarray) -> int:
    g, r = counts.shape
    best = 0
    if g <= r:
        for perm in itertools.permutations(range(r), g):
            best = max(best, sum(int(counts[i, perm[i]]) for i in range(g)))
    else:
        for perm in itertools.permutations(range(g), r):
            best = max(best, sum(int(counts[perm[j], j]) for j in range(r)))
    return best


def gradient_check(seed: int = 0, step: float = 1e-5, channels: int = 3, d_k: int = 4,
                   dim: int = 8, n_pairs: int = 3) -> float:
    """Max relative error between analytic and central-difference gradients of
    the pair loss, on feature maps whose quadrants hold two tokens each."""
    rng = np.random.default_rng(seed)
    params = init_params(channels, d_k=d_k, dim=dim, seed=seed)
    maps = [slice_feature_map(FeatureMap(rng.standard_normal((channels, 2, 4)))) for _ in range(2 * n_pairs)]
    x = np.stack([m.values for m in maps])
    ia = np.arange(0, 2 * n_pairs, 2)
    ib = ia + 1
    labels = (np.arange(n_pairs) % 2).astype(np.float64)
    _, grads = pair_loss(params, x, ia, ib, labels, with_grad=True)
    worst = 0.0
    for name, w in params.groups().items():
        for idx in np.ndindex(w.shape):
            plus, minus = w.copy(), w.copy()
            plus[idx] += step
            minus[idx] -= step
            lp = pair_loss(params.replace(**{name: plus}), x, ia, ib, labels)
            lm = pair_loss(params.replace(**{name: minus}), x, ia, ib, labels)
            numeric = (lp - lm) / (2 * step)
            analytic = grads[name][idx]
            denom = max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst


# -- suites -------------------------------------------------------------------

def suite_hungarian(trials: int = 200, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    failures = []
    for t in range(trials):
        shape = tuple(rng.integers(1, 7, size=2))
        cost = rng.uniform(0, 10, size=shape)
        if t % 3 == 0:
            cost[rng.random(shape) < 0.3] = np.inf
        n, total = brute_force_assignment(cost)
        res = hungarian_solve(cost)
        if len(res.matches) != n or not math.isclose(res.total_cost(cost), total, rel_tol=1e-12, abs_tol=1e-12):
            failures.append(f"matrix {t} {shape}: got {len(res.matches)} pairs / {res.total_cost(cost)!r}, "
                            f"expected {n} / {total!r}")
    return failures


def suite_gradient() -> list[str]:
    err = gradient_check()
    return [] if err < 1e-3 else [f"max relative gradient error {err:.3g} >= 1e-3"]


def suite_attention(trials: int = 100, seed: int = 0) -> list[str]:
    rng = np.random.default_rng(seed)
    failures = []
    for t in range(trials):
        n, m, d, dv = rng.integers(1, 8, size=4)
        Q = rng.standard_normal((n, d)) * 3
        K = rng.standard_normal((m, d)) * 3
        V = rng.standard_normal((m, dv))
        rows = _softmax_rows(Q @ K.T / np.sqrt(d)).sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > 1e-9:
            failures.append(f"input {t}: softmax row sum off by {np.max(np.abs(rows - 1.0)):.3g}")
        diff = np.max(np.abs(qkv_attention(Q, K, V) - direct_attention(Q, K, V)))
        if diff > 1e-10:
            failures.append(f"input {t}: attention differs from direct evaluation by {diff:.3g}")
    return failures


def _box(x):
    return BoundingBox(float(x), 0.0, 10.0, 10.0)


def suite_metrics(trials: int = 50, seed: int = 0) -> list[str]:
    failures = []
    for args, want in [((0, 0, 0, 100), 1.0), ((50, 50, 10, 100), -0.1), ((100, 0, 0, 100), 0.0)]:
        got = compute_mota(*args)
        if not math.isclose(got, want, abs_tol=1e-12):
            failures.append(f"compute_mota{args} = {got!r}, expected {want!r}")

    # two targets whose result ids swap from frame 2 on: one switch per target
    gt = [GroundTruthEntry(f, g, _box(100 * g)) for f in (1, 2, 3) for g in (1, 2)]
    res = [GroundTruthEntry(f, (g if f == 1 else 3 - g), _box(100 * g)) for f in (1, 2, 3) for g in (1, 2)]
    rep = evaluate(gt, res)
    if rep.idsw != 2 or rep.fp or rep.fn:
        failures.append(f"swap case: IDSW {rep.idsw}, FP {rep.fp}, FN {rep.fn}; expected 2, 0, 0")
    single = [GroundTruthEntry(f, 1 if f < 2 else 2, _box(100)) for f in (1, 2, 3)]
    rep = evaluate([GroundTruthEntry(f, 1, _box(100)) for f in (1, 2, 3)], single)
    if rep.idsw != 1:
        failures.append(f"single re-label: IDSW {rep.idsw}, expected 1")

    rep = evaluate(gt, gt)
    if (rep.mota, rep.idf1, rep.idsw) != (1.0, 1.0, 0):
        failures.append(f"self-evaluation gave MOTA {rep.mota}, IDF1 {rep.idf1}, IDSW {rep.idsw}")

    rng = np.random.default_rng(seed)
    for t in range(trials):
        gt_ids = int(rng.integers(1, 5))
        n_frames = int(rng.integers(2, 8))
        gt = [GroundTruthEntry(f, g, _box(100 * g)) for f in range(1, n_frames + 1) for g in range(1, gt_ids + 1)
              if rng.random() < 0.9]
        res = []
        for e in gt:
            if rng.random() < 0.85:
                res.append(GroundTruthEntry(e.frame, int(rng.integers(1, 5)), e.box))
        res = list({(e.frame, e.identity): e for e in res}.values())
        counts = identity_overlap_counts(gt, res)[0]
        want = brute_force_idtp(counts) if counts.size else 0
        got = compute_idf1(gt, res)[0] if gt or res else 0
        if got != want:
            failures.append(f"random case {t}: IDTP {got}, brute force {want}")
    return failures


SUITES: dict[str, Callable[[], list[str]]] = {
    "hungarian-brute-force": suite_hungarian,
    "gradient-check": suite_gradient,
    "attention-row-sums": suite_attention,
    "metrics-hand-cases": suite_metrics,
}


def run_all(out=print) -> int:
    """Run every suite, print one line each, return the number of failing suites."""
    failed = 0
    for name, suite in SUITES.items():
        problems = suite()
        out(f"{'PASS' if not problems else 'FAIL'}  {name}")
        for p in problems[:10]:
            out(f"      {p}")
        failed += bool(problems)
    return failed
