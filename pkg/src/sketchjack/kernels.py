"""Hot loops: Givens re-triangularization after deleting one column.

Deleting column ``j`` from an ``s x s`` upper-triangular ``R`` leaves an
upper Hessenberg block in columns ``j..s-2``. Rotating rows ``(k, k+1)``
for ``k = j..s-2`` restores triangular form. The same sweep serves both
jackknife fast paths:

* randomized SVD needs the last column ``q`` of the full orthogonal factor,
  obtained by applying the transposed rotations to ``e_s`` in reverse order;
* Nystrom needs the triangular factor itself, which is the Cholesky factor
  of ``B`` with row and column ``j`` removed when ``R`` is the Cholesky
  factor of ``B``.

Each public function dispatches to a numba kernel or to a numpy
implementation vectorized across replicates, see :mod:`sketchjack._accel`.
"""

import math

import numpy as np
from scipy.linalg import solve_triangular

from ._accel import NUMBA_ENABLED, njit


# --------------------------------------------------------------------------
# numba kernels (plain loops; also runnable as Python when numba is absent)
# --------------------------------------------------------------------------

@njit(cache=True)
def _delete_column_qr_loop(R, j):
    s = R.shape[0]
    H = np.empty((s, s - 1))
    for col in range(s - 1):
        src = col if col < j else col + 1
        for row in range(s):
            H[row, col] = R[row, src]
    cs = np.ones(s - 1)
    sn = np.zeros(s - 1)
    flag = False
    for k in range(j, s - 1):
        a = H[k, k]
        b = H[k + 1, k]
        if b == 0.0:
            if a == 0.0:
                flag = True
            continue
        r = math.hypot(a, b)
        c = a / r
        t = b / r
        cs[k] = c
        sn[k] = t
        for col in range(k, s - 1):
            h1 = H[k, col]
            h2 = H[k + 1, col]
            H[k, col] = c * h1 + t * h2
            H[k + 1, col] = -t * h1 + c * h2
        H[k + 1, k] = 0.0
    q = np.zeros(s)
    q[s - 1] = 1.0
    for k in range(s - 2, j - 1, -1):
        v1 = q[k]
        v2 = q[k + 1]
        q[k] = cs[k] * v1 - sn[k] * v2
        q[k + 1] = sn[k] * v1 + cs[k] * v2
    return H[: s - 1].copy(), q, flag


@njit(cache=True)
def _deletion_qr_all_loop(R):
    s = R.shape[0]
    factors = np.empty((s, s - 1, s - 1))
    qs = np.empty((s, s))
    flags = np.zeros(s, dtype=np.bool_)
    for j in range(s):
        Rt, q, flag = _delete_column_qr_loop(R, j)
        factors[j] = Rt
        qs[j] = q
        flags[j] = flag
    return factors, qs, flags


@njit(cache=True)
def _deleted_gram_solves_loop(factors, B):
    # w_j = B_j^{-1} b_j and schur_j = beta_j - b_j^T w_j, with B_j = L^T L
    s = B.shape[0]
    W = np.empty((s, s - 1))
    schur = np.empty(s)
    for j in range(s):
        L = factors[j]
        n = s - 1
        b = np.empty(n)
        for i in range(n):
            b[i] = B[i if i < j else i + 1, j]
        # forward solve L^T z = b
        z = np.empty(n)
        for i in range(n):
            acc = b[i]
            for k in range(i):
                acc -= L[k, i] * z[k]
            z[i] = acc / L[i, i]
        # back solve L w = z
        w = np.empty(n)
        for i in range(n - 1, -1, -1):
            acc = z[i]
            for k in range(i + 1, n):
                acc -= L[i, k] * w[k]
            w[i] = acc / L[i, i]
        dot = 0.0
        for i in range(n):
            dot += b[i] * w[i]
        W[j] = w
        schur[j] = B[j, j] - dot
    return W, schur


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def _deleted_columns(R):
    s = R.shape[0]
    idx = np.array([[c if c < j else c + 1 for c in range(s - 1)] for j in range(s)])
    return np.ascontiguousarray(R[:, idx].transpose(1, 0, 2))


def _delete_column_qr_numpy(R, j):
    s = R.shape[0]
    H = np.delete(R, j, axis=1)
    cs = np.ones(s - 1)
    sn = np.zeros(s - 1)
    flag = False
    for k in range(j, s - 1):
        a, b = H[k, k], H[k + 1, k]
        if b == 0.0:
            flag = flag or a == 0.0
            continue
        r = math.hypot(a, b)
        c, t = a / r, b / r
        cs[k], sn[k] = c, t
        top, bot = H[k, k:].copy(), H[k + 1, k:].copy()
        H[k, k:] = c * top + t * bot
        H[k + 1, k:] = -t * top + c * bot
        H[k + 1, k] = 0.0
    q = np.zeros(s)
    q[-1] = 1.0
    for k in range(s - 2, j - 1, -1):
        v1, v2 = q[k], q[k + 1]
        q[k] = cs[k] * v1 - sn[k] * v2
        q[k + 1] = sn[k] * v1 + cs[k] * v2
    return H[: s - 1].copy(), q, flag


def _deletion_qr_all_numpy(R):
    """All ``s`` deletions at once; the sweep at step ``k`` touches replicates ``j <= k``."""
    s = R.shape[0]
    H = _deleted_columns(R)
    cs = np.ones((s, s - 1))
    sn = np.zeros((s, s - 1))
    flags = np.zeros(s, dtype=bool)
    for k in range(s - 1):
        a = H[: k + 1, k, k]
        b = H[: k + 1, k + 1, k]
        r = np.hypot(a, b)
        live = b != 0.0
        flags[: k + 1] |= (~live) & (a == 0.0)
        rr = np.where(live, r, 1.0)
        c = np.where(live, a / rr, 1.0)
        t = np.where(live, b / rr, 0.0)
        cs[: k + 1, k] = c
        sn[: k + 1, k] = t
        top = H[: k + 1, k, k:].copy()
        bot = H[: k + 1, k + 1, k:].copy()
        H[: k + 1, k, k:] = c[:, None] * top + t[:, None] * bot
        H[: k + 1, k + 1, k:] = -t[:, None] * top + c[:, None] * bot
        H[: k + 1, k + 1, k] = 0.0
    qs = np.zeros((s, s))
    qs[:, -1] = 1.0
    for k in range(s - 2, -1, -1):
        v1 = qs[: k + 1, k].copy()
        v2 = qs[: k + 1, k + 1].copy()
        qs[: k + 1, k] = cs[: k + 1, k] * v1 - sn[: k + 1, k] * v2
        qs[: k + 1, k + 1] = sn[: k + 1, k] * v1 + cs[: k + 1, k] * v2
    return H[:, : s - 1, :].copy(), qs, flags


def _deleted_gram_solves_numpy(factors, B):
    s = B.shape[0]
    W = np.empty((s, s - 1))
    schur = np.empty(s)
    for j in range(s):
        b = np.delete(B[:, j], j)
        z = solve_triangular(factors[j], b, trans="T", lower=False)
        w = solve_triangular(factors[j], z, lower=False)
        W[j] = w
        schur[j] = B[j, j] - b @ w
    return W, schur


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def _prep(R):
    R = np.ascontiguousarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError(f"expected a square upper-triangular matrix, got shape {R.shape}")
    if R.shape[0] < 2:
        raise ValueError("column deletion needs at least 2 columns")
    return R


def delete_column_qr(R, j, *, use_numba=None):
    """Re-triangularize ``R`` after deleting column ``j`` (0-based).

    Returns ``(Rt, q, flag)``: the ``(s-1) x (s-1)`` triangular factor, the
    unit vector ``q`` spanning the orthogonal complement of the range of the
    column-deleted matrix, and whether an exactly zero pivot pair was met.
    """
    R = _prep(R)
    if not 0 <= j < R.shape[0]:
        raise IndexError(f"column index {j} out of range for s={R.shape[0]}")
    use_numba = NUMBA_ENABLED if use_numba is None else use_numba
    fn = _delete_column_qr_loop if use_numba else _delete_column_qr_numpy
    Rt, q, flag = fn(R, int(j))
    return Rt, q, bool(flag)


def deletion_qr_all(R, *, use_numba=None):
    """:func:`delete_column_qr` for every ``j``; returns stacked ``(factors, qs, flags)``."""
    R = _prep(R)
    use_numba = NUMBA_ENABLED if use_numba is None else use_numba
    fn = _deletion_qr_all_loop if use_numba else _deletion_qr_all_numpy
    return fn(R)


def deleted_gram_solves(factors, B, *, use_numba=None):
    """Solve ``B_j w_j = b_j`` for each ``j`` given Cholesky factors of ``B_j``.

    ``B_j`` is ``B`` without row and column ``j`` and ``b_j`` is column ``j``
    of ``B`` without entry ``j``. Returns ``(W, schur)`` where row ``j`` of
    ``W`` is ``w_j`` and ``schur[j] = B[j, j] - b_j @ w_j``.
    """
    factors = np.ascontiguousarray(factors, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    use_numba = NUMBA_ENABLED if use_numba is None else use_numba
    fn = _deleted_gram_solves_loop if use_numba else _deleted_gram_solves_numpy
    return fn(factors, B)
