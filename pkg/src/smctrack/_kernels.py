"""Hot numeric kernels.

Every kernel exists twice: a plain loop version that numba compiles with
``@njit`` and a vectorized numpy (or scipy) fallback. The JIT path is used
when numba imports cleanly and ``SMCTRACK_DISABLE_NUMBA`` is unset (or "0").
Both paths are importable explicitly (``*_jit`` / ``*_py``) so tests and the
benchmark can compare them.
"""

import os

import numpy as np
from scipy.optimize import linear_sum_assignment

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

_DISABLED = os.environ.get("SMCTRACK_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")
HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def _iou_matrix_loop(a, b):
    # a: (n, 4), b: (m, 4) in (left, top, width, height)
    n = a.shape[0]
    m = b.shape[0]
    out = np.zeros((n, m))
    for i in range(n):
        ax0 = a[i, 0]
        ay0 = a[i, 1]
        area_a = a[i, 2] * a[i, 3]
        for j in range(m):
            dx = b[j, 0] - ax0
            dy = b[j, 1] - ay0
            iw = min(a[i, 2], dx + b[j, 2]) - max(0.0, dx)
            ih = min(a[i, 3], dy + b[j, 3]) - max(0.0, dy)
            if iw <= 0.0 or ih <= 0.0:
                continue
            inter = iw * ih
            out[i, j] = inter / (area_a + b[j, 2] * b[j, 3] - inter)
    return out


def iou_matrix_py(a, b):
    """Vectorized numpy IoU between two (n, 4) / (m, 4) tlwh arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    # offsets from a's corner, so identical boxes overlap by exactly their size
    dx = b[:, 0][None, :] - a[:, 0][:, None]
    dy = b[:, 1][None, :] - a[:, 1][:, None]
    iw = np.minimum(a[:, 2][:, None], dx + b[:, 2][None, :]) - np.maximum(0.0, dx)
    ih = np.minimum(a[:, 3][:, None], dy + b[:, 3][None, :]) - np.maximum(0.0, dy)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    area_a = a[:, 2] * a[:, 3]
    area_b = b[:, 2] * b[:, 3]
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def _assign_rows_loop(cost):
    """Min-cost assignment of every row to a distinct column (rows <= cols).

    Shortest augmenting path with dual potentials, O(n^2 m). ``cost`` must be
    finite. Returns ``col_of_row`` (int64, length n).
    """
    n = cost.shape[0]
    m = cost.shape[1]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    # p[j]: row (1-based) assigned to column j; p[0] is the row being inserted
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    minv = np.empty(m + 1)
    used = np.zeros(m + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = inf
            used[j] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of_row = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row


def assign_rows_py(cost):
    """Fallback: scipy's rectangular solver (same optimum, ties may differ)."""
    cost = np.asarray(cost, dtype=np.float64)
    rows, cols = linear_sum_assignment(cost)
    col_of_row = np.full(cost.shape[0], -1, dtype=np.int64)
    col_of_row[rows] = cols
    return col_of_row


if HAVE_NUMBA:
    _iou_matrix_nb = numba.njit(cache=True)(_iou_matrix_loop)
    _assign_rows_nb = numba.njit(cache=True)(_assign_rows_loop)

    def iou_matrix_jit(a, b):
        a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
        b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
        return _iou_matrix_nb(a, b)

    def assign_rows_jit(cost):
        return _assign_rows_nb(np.ascontiguousarray(cost, dtype=np.float64))

else:  # pragma: no cover
    iou_matrix_jit = iou_matrix_py
    assign_rows_jit = assign_rows_py


if USE_NUMBA:
    iou_matrix = iou_matrix_jit
    assign_rows = assign_rows_jit
else:
    iou_matrix = iou_matrix_py
    assign_rows = assign_rows_py


def warmup():
    """Trigger JIT compilation so later timings exclude it."""
    iou_matrix(np.array([[0.0, 0.0, 1.0, 1.0]]), np.array([[0.0, 0.0, 1.0, 1.0]]))
    assign_rows(np.array([[0.0, 1.0], [1.0, 0.0]]))
