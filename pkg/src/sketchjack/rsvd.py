"""Randomized SVD with subspace iteration and its jackknife core matrices."""

from dataclasses import dataclass, field

import numpy as np

from .cores import CoreReplicates
from .errors import DegeneracyError, ParameterError
from .kernels import deletion_qr_all
from .testmat import gaussian_sketch

__all__ = [
    "RsvdResult", "CoreReplicates", "rsvd", "core_replicates", "core_replicates_baseline",
    "core_replicates_fast", "projector_replicates", "entry_tukey", "singular_vector_tukey",
    "full_core",
]


@dataclass(frozen=True, eq=False)
class RsvdResult:
    """Factors of ``X = U diag(Sigma) V^T`` plus the sketch byproducts.

    ``R`` is the triangular factor of the sketch ``Y = QR`` and ``Utilde`` the
    inner left singular vectors with ``U = Q Utilde``; both are needed for the
    replicate cores. ``degenerate`` is set when ``R`` is numerically singular.
    """

    U: np.ndarray = field(repr=False)
    Sigma: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    Utilde: np.ndarray = field(repr=False)
    Omega: np.ndarray = field(repr=False)
    q: int
    seed: int
    degenerate: bool = False

    @property
    def s(self):
        return self.Sigma.size

    def approximation(self):
        return (self.U * self.Sigma) @ self.V.T

    def factor_bases(self):
        return self.U, self.V


def _sign_fix(U):
    """Signs making the largest-magnitude entry of every column positive."""
    idx = np.argmax(np.abs(U), axis=0)
    sgn = np.sign(U[idx, np.arange(U.shape[1])])
    sgn[sgn == 0] = 1.0
    return sgn


def _is_degenerate(R):
    diag = np.abs(np.diag(R))
    return bool(diag.min() <= R.shape[0] * np.finfo(float).eps * max(diag.max(), np.finfo(float).tiny))


def rsvd(A, s, q, seed):
    """Rank-``s`` randomized SVD of ``A`` with ``q`` steps of subspace iteration.

    Forms ``Y = A (A^T A)^q Omega`` without intermediate re-orthonormalization,
    so large ``q`` on matrices with fast spectral decay loses the trailing
    directions to rounding; ``q <= 2`` is the intended range.
    """
    d1, d2 = A.shape
    if not 1 <= s <= min(d1, d2):
        raise ParameterError(f"need 1 <= s <= min(d1, d2) = {min(d1, d2)}, got s={s}")
    if q < 0:
        raise ParameterError(f"q must be nonnegative, got {q}")
    Omega = gaussian_sketch(d2, s, seed).values
    Z = Omega
    for _ in range(q):
        Z = A.rmatmat(A.matmat(Z))
    Y = A.matmat(Z)
    Q, R = np.linalg.qr(Y)
    C = A.rmatmat(Q).T
    Ut, Sigma, Vt = np.linalg.svd(C, full_matrices=False)
    U = Q @ Ut
    sgn = _sign_fix(U)
    return RsvdResult(U=U * sgn, Sigma=Sigma, V=Vt.T * sgn, R=R, Utilde=Ut * sgn,
                      Omega=Omega, q=int(q), seed=int(seed), degenerate=_is_degenerate(R))


def _check_jackknifable(res):
    if res.s < 2:
        raise ParameterError("jackknife needs s >= 2")


def core_replicates_baseline(res):
    """Cores ``T_j = Ut^T Qt Qt^T Ut Sigma`` from a fresh QR of each column-deleted ``R``.

    ``O(s^3)`` per replicate.
    """
    _check_jackknifable(res)
    s = res.s
    cores = np.empty((s, s, s))
    for j in range(s):
        Qt, _ = np.linalg.qr(np.delete(res.R, j, axis=1))
        P = res.Utilde.T @ Qt
        cores[j] = (P @ P.T) * res.Sigma[None, :]
    return CoreReplicates.from_dense(cores)


def _null_vector(Rp):
    U, _, _ = np.linalg.svd(Rp, full_matrices=True)
    return U[:, -1]


def core_replicates_fast(res, use_numba=None):
    """Cores as rank-one updates ``T_j = Sigma + x_j y_j^T``.

    With ``q_j`` the unit vector orthogonal to the range of ``R`` minus its
    column ``j``, ``x_j = -Ut^T q_j`` and ``y_j = Sigma Ut^T q_j``. The
    ``q_j`` come from Givens re-triangularization, ``O(s^2)`` each. Replicates
    that meet an exactly zero pivot pair take ``q_j`` from an SVD instead and
    are marked in ``fallback``.
    """
    _check_jackknifable(res)
    _, qs, flags = deletion_qr_all(res.R, use_numba=use_numba)
    qs = np.array(qs)
    flags = np.asarray(flags, dtype=bool)
    for j in np.flatnonzero(flags):
        qs[j] = _null_vector(np.delete(res.R, j, axis=1))
    proj = qs @ res.Utilde
    return CoreReplicates.from_rank_one(np.diag(res.Sigma), -proj, proj * res.Sigma[None, :],
                                        fallback=flags)


def core_replicates(res, fast=True, use_numba=None):
    if fast:
        return core_replicates_fast(res, use_numba=use_numba)
    return core_replicates_baseline(res)


def full_core(res):
    """Core of the full approximation in the basis of the replicate cores."""
    return np.diag(res.Sigma)


def projector_replicates(cores, i, side="left", check_gap=True, rtol=1e-8):
    """Replace each core by its ``i``-th (0-based) left or right singular projector.

    With ``check_gap`` a :class:`DegeneracyError` naming the replicate is
    raised when ``sigma_i`` ties a neighbour within relative ``rtol``;
    the projector is then ill-defined.
    """
    if side not in ("left", "right"):
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")
    stored = cores.stored()
    n = min(stored.shape[1:])
    if not 0 <= i < n:
        raise ParameterError(f"projector index {i} out of range for cores of rank {n}")
    u, sv, vt = np.linalg.svd(stored)
    if check_gap:
        for j in range(stored.shape[0]):
            si = sv[j, i]
            for nb in (i - 1, i + 1):
                if 0 <= nb < n and abs(sv[j, nb] - si) <= rtol * si:
                    raise DegeneracyError(
                        f"replicate {j}: singular value {i} ties index {nb} "
                        f"({si:.17g} vs {sv[j, nb]:.17g}); projector is ill-defined", index=j)
    vec = u[:, :, i] if side == "left" else vt[:, i, :]
    return CoreReplicates.from_dense(vec[:, :, None] * vec[:, None, :], frame=cores.frame)


def _frame_vectors(cores, left, right):
    if cores.frame is not None:
        return cores.frame @ left, cores.frame @ right
    return left, right


def entry_tukey(cores, res, m, n, absolute=False):
    """Tukey variance estimate for entry ``(m, n)`` of the approximation.

    Replicate entries are ``E_j = U[m] T_j V[n]^T``; with ``absolute`` the
    estimate is taken over ``|E_j|``.
    """
    from .jack import tukey_scalar

    L, M = res.factor_bases()
    u, v = _frame_vectors(cores, L[m], M[n])
    if cores.representation == "rank-one":
        E = u @ cores.base @ v + (cores.xs @ u) * (cores.ys @ v)
    else:
        E = np.einsum("a,jab,b->j", u, cores.dense, v)
    return tukey_scalar(np.abs(E) if absolute else E)


def singular_vector_tukey(cores, res, i, side="left"):
    """Entrywise jackknife for the absolute ``i``-th (0-based) singular vector.

    Returns ``(values, estimates)``: ``|U[:, i]|`` of the full result and the
    Tukey variance estimate of each entry across replicates, where replicate
    ``j`` contributes ``|L u_i(T_j)|``.
    """
    from .jack import tukey

    if side not in ("left", "right"):
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")
    L, M = res.factor_bases()
    basis = L if side == "left" else M
    u, _, vt = np.linalg.svd(cores.materialize())
    vecs = u[:, :, i] if side == "left" else vt[:, i, :]
    entries = np.abs(basis @ vecs.T)
    return np.abs(basis[:, i]), tukey(entries, axis=1)
