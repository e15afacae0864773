"""Single-view Nystrom approximation and its jackknife core matrices."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .cores import CoreReplicates
from .errors import DegeneracyError, ParameterError
from .kernels import delete_column_qr, deleted_gram_solves, deletion_qr_all
from .rsvd import _sign_fix
from .testmat import gaussian_sketch

UNIT_ROUNDOFF = 2.0 ** -52


class CholeskyFailure(DegeneracyError):
    pass


@dataclass(frozen=True, eq=False)
class NystromResult:
    """``X = V diag(Lambda) V^T`` together with the factors the jackknife reuses.

    ``Y + nu Omega = QR``, ``B = Omega^T (Y + nu Omega)`` symmetrized,
    ``B = C^T C`` with upper-triangular ``C``, and ``R C^{-1} = U diag(Sigma) Z^T``.
    """

    V: np.ndarray = field(repr=False)
    Lambda: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    Sigma: np.ndarray = field(repr=False)
    Omega: np.ndarray = field(repr=False)
    nu: float
    seed: int

    @property
    def s(self):
        return self.Sigma.size

    def approximation(self):
        return (self.V * self.Lambda) @ self.V.T

    def factor_bases(self):
        return self.V, self.V


def nystrom(A, s, seed, shift_multiplier=1.0):
    """Rank-``s`` single-view Nystrom approximation of a PSD matrix.

    The sketch is shifted by ``nu = shift_multiplier * 2^-52 * ||A Omega||_2``
    before factoring and the shift is removed from the eigenvalues afterwards.
    """
    d1, d2 = A.shape
    if d1 != d2 or not A.is_symmetric:
        raise ParameterError("Nystrom approximation needs a square symmetric (PSD) matrix")
    if not 1 <= s <= d1:
        raise ParameterError(f"need 1 <= s <= d = {d1}, got s={s}")
    if not shift_multiplier > 0:
        raise ParameterError(f"shift multiplier must be positive, got {shift_multiplier}")
    Omega = gaussian_sketch(d1, s, seed).values
    Y = A.matmat(Omega)
    nu = shift_multiplier * UNIT_ROUNDOFF * float(np.linalg.norm(Y, 2))
    Y = Y + nu * Omega
    Q, R = np.linalg.qr(Y)
    B = Omega.T @ Y
    B = 0.5 * (B + B.T)
    try:
        C = cholesky(B, lower=False)
    except LinAlgError:
        raise CholeskyFailure(
            "Cholesky factorization of Omega^T Y failed; the core is not numerically "
            "positive definite. Retry with a larger shift multiplier.") from None
    F = solve_triangular(C, R.T, trans="T", lower=False).T
    U, Sigma, _ = np.linalg.svd(F)
    V = Q @ U
    sgn = _sign_fix(V)
    return NystromResult(V=V * sgn, Lambda=np.maximum(Sigma ** 2 - nu, 0.0), Q=Q, R=R, B=B,
                         C=C, U=U * sgn, Sigma=Sigma, Omega=Omega, nu=nu, seed=int(seed))


def _check_jackknifable(res):
    if res.s < 2:
        raise ParameterError("jackknife needs s >= 2")


def _replicate_core(res, j):
    """``S_j = R_j B_j^{-1} R_j^T`` by a fresh Cholesky factorization."""
    keep = np.delete(np.arange(res.s), j)
    Bj = res.B[np.ix_(keep, keep)]
    try:
        Lj = cholesky(Bj, lower=False)
    except LinAlgError:
        raise DegeneracyError(f"replicate {j}: B_j is not numerically positive definite",
                              index=j) from None
    G = solve_triangular(Lj, res.R[:, keep].T, trans="T", lower=False)
    return G.T @ G


def core_replicates_baseline(res):
    """Cores ``T_j = U^T R_j B_j^{-1} R_j^T U``, ``O(s^3)`` per replicate."""
    _check_jackknifable(res)
    cores = np.empty((res.s, res.s, res.s))
    for j in range(res.s):
        cores[j] = res.U.T @ _replicate_core(res, j) @ res.U
    return CoreReplicates.from_dense(cores)


def full_core(res):
    """``U^T R B^{-1} R^T U = diag(Sigma^2)``, the unshifted full core."""
    return np.diag(res.Sigma ** 2)


def base_core(res):
    """``M = R B^{-1} R^T`` in sketch-basis coordinates."""
    G = solve_triangular(res.C, res.R.T, trans="T", lower=False)
    return G.T @ G


def _positive_rows(factors):
    diag = np.diagonal(factors, axis1=-2, axis2=-1)
    sgn = np.where(diag < 0, -1.0, 1.0)
    return factors * sgn[..., :, None]


def cholesky_delete_downdate(C, j, use_numba=None):
    """Cholesky factor of ``C^T C`` with row and column ``j`` (0-based) removed.

    Deletes column ``j`` of ``C`` and zeroes the resulting subdiagonal with
    Givens rotations, ``O(s^2)``.
    """
    C = np.asarray(C, dtype=np.float64)
    if np.any(np.diag(C) <= 0):
        raise ParameterError("C must be upper triangular with positive diagonal")
    if C.shape[0] == 1:
        raise ParameterError("cannot delete from a 1x1 factor")
    Rt, _, _ = delete_column_qr(C, j, use_numba=use_numba)
    Rt = _positive_rows(Rt)
    if not np.all(np.diag(Rt) > 0):
        raise DegeneracyError(f"lost positive definiteness deleting index {j}", index=j)
    return Rt


def core_replicates_fast(res, use_numba=None):
    """Cores as rank-one downdates ``S_j = M - x_j x_j^T`` of ``M = R B^{-1} R^T``.

    Viewing index ``j`` as the last one, ``x_j = R z_j / sqrt(beta - b^T B_j^{-1} b)``
    where ``z_j`` holds ``-B_j^{-1} b`` off position ``j`` and ``1`` at ``j``.
    ``B_j`` is factored by deleting row and column ``j`` from the Cholesky
    factor of ``B``. The cores live in sketch-basis coordinates with
    ``frame = U``. Replicates whose Schur complement is not positive are
    recomputed from scratch and the cores are then stored densely.
    """
    _check_jackknifable(res)
    s = res.s
    factors, _, flags = deletion_qr_all(res.C, use_numba=use_numba)
    factors = _positive_rows(np.asarray(factors))
    W, schur = deleted_gram_solves(factors, res.B, use_numba=use_numba)
    bad = (np.asarray(flags, dtype=bool) | ~(schur > 0) | ~np.all(np.isfinite(W), axis=1)
           | np.any(np.diagonal(factors, axis1=1, axis2=2) <= 0, axis=1))
    Z = np.empty((s, s))
    for j in range(s):
        Z[:, j] = np.insert(-W[j], j, 1.0)
    scale = np.sqrt(np.where(bad, 1.0, schur))
    xs = (res.R @ Z).T / scale[:, None]
    M = base_core(res)
    if not bad.any():
        return CoreReplicates.from_rank_one(M, xs, -xs, frame=res.U)
    cores = M[None, :, :] - xs[:, :, None] * xs[:, None, :]
    for j in np.flatnonzero(bad):
        cores[j] = _replicate_core(res, j)
    return CoreReplicates.from_dense(cores, frame=res.U, fallback=bad)


def core_replicates(res, fast=True, use_numba=None):
    if fast:
        return core_replicates_fast(res, use_numba=use_numba)
    return core_replicates_baseline(res)
