import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import nystrom_dense, nystrom_pinv, random_spd
from sketchjack import jack
from sketchjack import nystrom as nys
from sketchjack.errors import DegeneracyError, ParameterError
from sketchjack.testmat import MatrixSource, gaussian_sketch, gen_exp_decay, gen_noisy_lr


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def _psd_source(rng, d, rank=None):
    G = rng.standard_normal((d, rank or d))
    M = G @ G.T / d
    return MatrixSource.dense(0.5 * (M + M.T), symmetric=True)


@pytest.fixture(scope="module")
def expdecay100():
    return gen_exp_decay(100, 5, 0.25)


# --- the algorithm --------------------------------------------------------

def test_exact_recovery():
    A = MatrixSource.diagonal([5.0, 4.0, 3.0] + [0.0] * 47)
    res = nys.nystrom(A, 10, seed=1)
    assert _rel(res.approximation(), A.to_dense()) <= 1e-8


def test_result_invariants(expdecay100):
    res = nys.nystrom(expdecay100, 20, seed=0)
    assert np.all(res.Lambda >= 0)
    assert np.linalg.norm(res.V.T @ res.V - np.eye(20)) <= 1e-10 * np.sqrt(20)
    np.testing.assert_array_equal(res.B, res.B.T)
    np.testing.assert_allclose(res.C.T @ res.C, res.B, rtol=1e-12, atol=1e-14)
    assert res.nu == pytest.approx(2.0 ** -52 * np.linalg.norm(
        expdecay100.matmat(gaussian_sketch(100, 20, 0).values), 2))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32), s=st.integers(1, 10))
def test_output_psd_and_bounded(seed, s):
    A = _psd_source(np.random.default_rng(seed), 15)
    X = nys.nystrom(A, s, seed).approximation()
    ev = np.linalg.eigvalsh(0.5 * (X + X.T))
    top = np.linalg.norm(A.to_dense(), 2)
    assert ev.min() >= -1e-12 * top
    assert ev.max() <= top * (1 + 1e-10)


def test_matches_pseudoinverse_definition(expdecay100):
    res = nys.nystrom(expdecay100, 20, seed=0)
    ref = nystrom_pinv(expdecay100.to_dense(), gaussian_sketch(100, 20, 0).values)
    assert _rel(res.approximation(), ref) <= 1e-6


def test_matches_dense_stable_oracle(expdecay100):
    res = nys.nystrom(expdecay100, 20, seed=0)
    ref = nystrom_dense(expdecay100.to_dense(), res.Omega, res.nu)
    assert _rel(res.approximation(), ref) <= 1e-10


def test_rejects_non_symmetric(rng):
    with pytest.raises(ParameterError):
        nys.nystrom(MatrixSource.dense(rng.standard_normal((5, 5))), 2, 0)
    with pytest.raises(ParameterError):
        nys.nystrom(MatrixSource.dense(rng.standard_normal((5, 4))), 2, 0)


def test_cholesky_failure_advises_shift():
    # an indefinite symmetric matrix makes Omega^T A Omega indefinite
    A = MatrixSource.diagonal([1.0, -1.0, 1.0, -1.0])
    with pytest.raises(nys.CholeskyFailure, match="shift multiplier"):
        for seed in range(20):
            nys.nystrom(A, 4, seed)


def test_shift_multiplier_scales_nu(expdecay100):
    a = nys.nystrom(expdecay100, 10, 3)
    b = nys.nystrom(expdecay100, 10, 3, shift_multiplier=100.0)
    assert b.nu == pytest.approx(100 * a.nu)


# --- Cholesky deletion ----------------------------------------------------

def test_cholesky_delete_hand_cases(use_numba):
    C = np.array([[2.0, 1.0], [0.0, 2.0]])
    np.testing.assert_allclose(nys.cholesky_delete_downdate(C, 1, use_numba=use_numba), [[2.0]])
    np.testing.assert_allclose(nys.cholesky_delete_downdate(C, 0, use_numba=use_numba),
                               [[np.sqrt(5.0)]], rtol=1e-15)


def test_cholesky_delete_random_spd(use_numba, rng):
    B = random_spd(rng, 6, cond=100.0)
    C = np.linalg.cholesky(B).T
    for j in range(6):
        L = nys.cholesky_delete_downdate(C, j, use_numba=use_numba)
        keep = np.delete(np.arange(6), j)
        assert np.all(np.diag(L) > 0)
        assert np.allclose(np.tril(L, -1), 0.0)
        np.testing.assert_allclose(L.T @ L, B[np.ix_(keep, keep)], atol=1e-12)
        np.testing.assert_allclose(L, np.linalg.cholesky(B[np.ix_(keep, keep)]).T, atol=1e-12)


def test_cholesky_delete_rejects_invalid():
    with pytest.raises(ParameterError):
        nys.cholesky_delete_downdate(np.array([[1.0, 0.0], [0.0, -1.0]]), 0)
    with pytest.raises(ParameterError):
        nys.cholesky_delete_downdate(np.array([[1.0]]), 0)


# --- cores ----------------------------------------------------------------

def test_exact_rank_cores_all_equal():
    A = MatrixSource.diagonal([3.0, 2.0, 1.0] + [0.0] * 27)
    res = nys.nystrom(A, 6, seed=2)
    T = nys.core_replicates_baseline(res).materialize()
    Tbar = T.mean(axis=0)
    assert max(np.linalg.norm(t - Tbar) for t in T) <= 1e-6 * np.linalg.norm(Tbar)


def test_single_column_rejected():
    res = nys.nystrom(MatrixSource.diagonal([2.0, 1.0, 0.5]), 1, seed=0)
    with pytest.raises(ParameterError):
        nys.core_replicates_baseline(res)
    with pytest.raises(ParameterError):
        nys.core_replicates_fast(res)


def test_baseline_matches_recomputation(rng):
    A = _psd_source(rng, 30)
    res = nys.nystrom(A, 5, seed=4)
    T = nys.core_replicates_baseline(res).materialize()
    for j in range(5):
        ref = nystrom_dense(A.to_dense(), np.delete(res.Omega, j, axis=1), res.nu)
        assert _rel(res.V @ T[j] @ res.V.T, ref) <= 1e-6


def test_fast_matches_baseline(expdecay100, use_numba):
    res = nys.nystrom(expdecay100, 20, seed=0)
    fast = nys.core_replicates_fast(res, use_numba=use_numba)
    base = nys.core_replicates_baseline(res)
    assert fast.representation == "rank-one"
    F, Bm = fast.materialize(), base.materialize()
    assert max(_rel(F[j], Bm[j]) for j in range(20)) <= 1e-8
    a, b = jack.jack_frobenius(fast).value, jack.jack_frobenius(base).value
    assert a == pytest.approx(b, rel=1e-8)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32), s=st.integers(2, 15))
def test_fast_matches_recomputation_property(seed, s):
    A = gen_noisy_lr(60, 5, 1e-4, seed % 1000)
    res = nys.nystrom(A, s, seed)
    T = nys.core_replicates_fast(res).materialize()
    Ad = A.to_dense()
    for j in range(s):
        ref = nystrom_dense(Ad, np.delete(res.Omega, j, axis=1), res.nu)
        assert _rel(res.V @ T[j] @ res.V.T, ref) <= 1e-6


def test_two_by_two_hand_update():
    # B = [[4, 2], [2, 5]], R = I: delete index 2 (last)
    B = np.array([[4.0, 2.0], [2.0, 5.0]])
    C = np.linalg.cholesky(B).T
    R = np.eye(2)
    F = np.linalg.solve(C.T, R.T).T
    U, Sigma, _ = np.linalg.svd(F)
    res = nys.NystromResult(V=U, Lambda=Sigma ** 2, Q=np.eye(2), R=R, B=B, C=C, U=U,
                            Sigma=Sigma, Omega=np.eye(2), nu=0.0, seed=0)
    cores = nys.core_replicates_fast(res)
    x = np.array([-2.0 / 4.0, 1.0]) / np.sqrt(5.0 - 4.0 / 4.0)
    S = np.linalg.inv(B) - np.outer(x, x)
    np.testing.assert_allclose(cores.stored()[1], S, atol=1e-15)
    # deleting index 2 leaves [[1/4, 0], [0, 0]]
    np.testing.assert_allclose(S, [[0.25, 0.0], [0.0, 0.0]], atol=1e-15)


def test_rank_one_downdates_are_below_base(expdecay100):
    res = nys.nystrom(expdecay100, 12, seed=5)
    cores = nys.core_replicates_fast(res)
    M = nys.base_core(res)
    for S in cores.stored():
        assert np.linalg.eigvalsh(M - S).min() >= -1e-12 * np.linalg.norm(M)
        assert np.linalg.eigvalsh(0.5 * (S + S.T)).min() >= -1e-10 * np.linalg.norm(M)


def test_full_core_is_base_in_inner_basis(expdecay100):
    res = nys.nystrom(expdecay100, 12, seed=5)
    np.testing.assert_allclose(res.U.T @ nys.base_core(res) @ res.U, nys.full_core(res),
                               atol=1e-12)


def test_alternative_update_vector_oracle(expdecay100):
    res = nys.nystrom(expdecay100, 10, seed=7)
    cores = nys.core_replicates_fast(res)
    Binv = np.linalg.inv(res.B)
    for j in range(10):
        x = res.R @ Binv[:, j] / np.sqrt(Binv[j, j])
        np.testing.assert_allclose(abs(cores.xs[j] @ x), x @ x, rtol=1e-8)


def test_conjugation_invariance():
    # error depends only on the spectrum when the sketch is conjugated too
    d, s = 40, 8
    A = gen_exp_decay(d, 3, 0.3)
    Qm, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((d, d)))
    Ad = A.to_dense()
    Ac = Qm @ Ad @ Qm.T
    Ac = 0.5 * (Ac + Ac.T)
    for seed in range(3):
        Omega = gaussian_sketch(d, s, seed).values
        X = nystrom_dense(Ad, Omega, 0.0)
        Xc = nystrom_dense(Ac, Qm @ Omega, 0.0)
        assert np.linalg.norm(Ad - X) == pytest.approx(np.linalg.norm(Ac - Xc), rel=1e-10)


def _crafted(B, C):
    n = B.shape[0]
    return nys.NystromResult(V=np.eye(n), Lambda=np.ones(n), Q=np.eye(n), R=np.eye(n), B=B,
                             C=C, U=np.eye(n), Sigma=np.ones(n), Omega=np.eye(n), nu=0.0,
                             seed=0)


def test_identity_core_has_no_fallback():
    res = _crafted(np.eye(3), np.eye(3))
    cores = nys.core_replicates_fast(res)
    assert not cores.fallback.any()
    np.testing.assert_allclose(cores.materialize(),
                               nys.core_replicates_baseline(res).materialize(), atol=1e-15)


def test_nonpositive_schur_complement_falls_back():
    # the last diagonal entry makes beta - b^T B_j^{-1} b negative for j = 2 only
    B = np.diag([1.0, 1.0, -1.0])
    cores = nys.core_replicates_fast(_crafted(B, np.eye(3)))
    assert cores.representation == "dense"
    np.testing.assert_array_equal(cores.fallback, [False, False, True])
    np.testing.assert_allclose(cores.stored()[2], np.diag([1.0, 1.0, 0.0]), atol=1e-15)


def test_baseline_reports_indefinite_replicate():
    B = np.diag([1.0, -1.0, -1.0])
    with pytest.raises(DegeneracyError) as info:
        nys.core_replicates_baseline(_crafted(B, np.eye(3)))
    assert info.value.index == 0
