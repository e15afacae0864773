import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import replicate_mean_sq_dev, rsvd_dense
from sketchjack import jack
from sketchjack import rsvd as rs
from sketchjack.cores import CoreReplicates
from sketchjack.errors import DegeneracyError, ParameterError
from sketchjack.testmat import MatrixSource, gaussian_sketch, gen_exp_decay


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture(scope="module")
def expdecay100():
    return gen_exp_decay(100, 5, 0.25)


# --- the algorithm --------------------------------------------------------

def test_exact_recovery_low_rank():
    A = MatrixSource.diagonal([3.0, 2.0, 1.0, 0.0, 0.0, 0.0])
    res = rs.rsvd(A, 4, 0, seed=5)
    assert np.linalg.norm(A.to_dense() - res.approximation()) <= 1e-10


def test_factor_invariants(expdecay100):
    res = rs.rsvd(expdecay100, 20, 2, seed=0)
    s = res.s
    assert np.linalg.norm(res.U.T @ res.U - np.eye(s)) <= 1e-10 * np.sqrt(s)
    assert np.linalg.norm(res.V.T @ res.V - np.eye(s)) <= 1e-10 * np.sqrt(s)
    assert np.all(np.diff(res.Sigma) <= 0) and np.all(res.Sigma >= 0)
    assert np.allclose(np.tril(res.R, -1), 0.0)
    # largest-magnitude entry of every left singular vector is positive
    idx = np.argmax(np.abs(res.U), axis=0)
    assert np.all(res.U[idx, np.arange(s)] > 0)


def test_matches_dense_oracle(expdecay100):
    res = rs.rsvd(expdecay100, 20, 2, seed=0)
    A = expdecay100.to_dense()
    X_ref = rsvd_dense(A, gaussian_sketch(100, 20, 0).values, 2)
    err = np.linalg.norm(A - res.approximation()) / np.linalg.norm(A)
    err_ref = np.linalg.norm(A - X_ref) / np.linalg.norm(A)
    assert abs(err - err_ref) <= 1e-12


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32), s=st.integers(1, 8), q=st.integers(0, 2))
def test_never_beats_truncated_svd(seed, s, q):
    M = np.random.default_rng(seed).standard_normal((12, 9))
    A = MatrixSource.dense(M)
    res = rs.rsvd(A, s, q, seed)
    sv = np.linalg.svd(M, compute_uv=False)
    optimal = np.sqrt(np.sum(sv[s:] ** 2))
    assert np.linalg.norm(M - res.approximation()) >= optimal - 1e-10 * np.linalg.norm(M)


def test_rectangular_input(rng):
    M = rng.standard_normal((15, 8))
    res = rs.rsvd(MatrixSource.dense(M), 5, 1, seed=2)
    assert res.U.shape == (15, 5) and res.V.shape == (8, 5)


@pytest.mark.parametrize("s,q", [(0, 0), (7, 0), (3, -1)])
def test_rejects_bad_parameters(s, q):
    with pytest.raises(ParameterError):
        rs.rsvd(MatrixSource.diagonal(np.ones(6)), s, q, 0)


def test_degenerate_sketch_flagged():
    res = rs.rsvd(MatrixSource.diagonal([1.0, 1.0, 0, 0, 0]), 4, 0, seed=1)
    assert res.degenerate


# --- baseline cores -------------------------------------------------------

def test_exact_rank_cores_all_equal():
    A = MatrixSource.diagonal([4.0, 3.0, 2.0] + [0.0] * 17)
    res = rs.rsvd(A, 6, 1, seed=3)
    cores = rs.core_replicates_baseline(res).materialize()
    spread = max(np.linalg.norm(c - cores.mean(axis=0)) for c in cores)
    assert spread <= 1e-8 * np.linalg.norm(res.Sigma)


def test_two_by_two_hand_formula():
    R = np.array([[2.0, 1.0], [0.0, 3.0]])
    Ut = np.array([[0.6, -0.8], [0.8, 0.6]])
    Sigma = np.array([5.0, 2.0])
    res = rs.RsvdResult(U=Ut, Sigma=Sigma, V=np.eye(2), R=R, Utilde=Ut, Omega=np.eye(2),
                        q=0, seed=0)
    cores = rs.core_replicates_baseline(res).materialize()
    for j in range(2):
        col = R[:, 1 - j]
        qt = col / np.linalg.norm(col)
        expected = Ut.T @ np.outer(qt, qt) @ Ut @ np.diag(Sigma)
        np.testing.assert_allclose(cores[j], expected, atol=1e-15)
    fast = rs.core_replicates_fast(res).materialize()
    np.testing.assert_allclose(fast, cores, atol=1e-14)


def test_baseline_complement_identity(expdecay100):
    res = rs.rsvd(expdecay100, 8, 1, seed=4)
    cores = rs.core_replicates_baseline(res).materialize()
    for j in range(8):
        Qfull, _ = np.linalg.qr(np.delete(res.R, j, axis=1), mode="complete")
        q = Qfull[:, -1]
        expected = res.Utilde.T @ (np.eye(8) - np.outer(q, q)) @ res.Utilde @ np.diag(res.Sigma)
        np.testing.assert_allclose(cores[j], expected, atol=1e-12)


# --- fast cores -----------------------------------------------------------

def test_fast_matches_baseline(expdecay100, use_numba):
    res = rs.rsvd(expdecay100, 20, 2, seed=0)
    fast = rs.core_replicates_fast(res, use_numba=use_numba)
    base = rs.core_replicates_baseline(res)
    assert fast.representation == "rank-one"
    F, Bm = fast.materialize(), base.materialize()
    worst = max(_rel(F[j], Bm[j]) for j in range(20))
    assert worst <= 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32), s=st.integers(2, 20), q=st.integers(0, 2))
def test_fast_matches_baseline_property(seed, s, q):
    res = rs.rsvd(gen_exp_decay(60, 5, 0.25), s, q, seed)
    F = rs.core_replicates_fast(res).materialize()
    Bm = rs.core_replicates_baseline(res).materialize()
    assert max(_rel(F[j], Bm[j]) for j in range(s)) <= 1e-10


def test_rank_one_norm_bound(expdecay100):
    res = rs.rsvd(expdecay100, 15, 1, seed=8)
    cores = rs.core_replicates_fast(res)
    norms = np.linalg.norm(cores.xs, axis=1) * np.linalg.norm(cores.ys, axis=1)
    assert np.all(norms <= res.Sigma[0] * (1 + 1e-12))


@pytest.mark.parametrize("q", [0, 1, 2])
def test_replicates_match_recomputation(q):
    A = gen_exp_decay(150, 5, 0.25)
    s = 12
    res = rs.rsvd(A, s, q, seed=21)
    Omega = gaussian_sketch(150, s, 21).values
    T = rs.core_replicates_fast(res).materialize()
    Ad = A.to_dense()
    for j in range(s):
        Xj = rsvd_dense(Ad, np.delete(Omega, j, axis=1), q)
        assert _rel(res.U @ T[j] @ res.V.T, Xj) <= 1e-8


def test_last_deletion_equals_narrower_sketch():
    A = gen_exp_decay(80, 5, 0.25)
    res = rs.rsvd(A, 10, 1, seed=13)
    T = rs.core_replicates_fast(res).materialize()
    narrow = rs.rsvd(A, 9, 1, seed=13).approximation()
    assert _rel(res.U @ T[-1] @ res.V.T, narrow) <= 1e-10


def test_exact_dependence_falls_back():
    # duplicate sketch columns make R singular with an exactly zero pivot pair
    R = np.array([[1.0, 0.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    res = rs.RsvdResult(U=np.eye(3), Sigma=np.array([3.0, 2.0, 1.0]), V=np.eye(3), R=R,
                        Utilde=np.eye(3), Omega=np.eye(3), q=0, seed=0)
    cores = rs.core_replicates_fast(res)
    assert cores.fallback[0]
    Rp = np.delete(R, 0, axis=1)
    x = cores.xs[0]
    # the fallback direction is orthogonal to the remaining columns
    np.testing.assert_allclose(x @ Rp, 0.0, atol=1e-14)


def test_jackknife_needs_two_columns():
    res = rs.rsvd(MatrixSource.diagonal([1.0, 0.5]), 1, 0, 0)
    with pytest.raises(ParameterError):
        rs.core_replicates(res)


# --- derived quantities ---------------------------------------------------

def test_projector_identical_cores_zero_jack():
    cores = CoreReplicates.from_dense(np.repeat(np.diag([3.0, 2.0, 1.0])[None], 4, axis=0))
    P = rs.projector_replicates(cores, 0)
    assert jack.jack_frobenius(P).value == 0.0


def test_projector_of_diagonal_core():
    cores = CoreReplicates.from_dense(np.array([np.diag([3.0, 1.0]), np.diag([3.0, 1.0])]))
    P = rs.projector_replicates(cores, 0).materialize()
    np.testing.assert_allclose(P[0], [[1.0, 0.0], [0.0, 0.0]])
    Pr = rs.projector_replicates(cores, 1, side="right").materialize()
    np.testing.assert_allclose(Pr[1], [[0.0, 0.0], [0.0, 1.0]])


def test_projector_tie_raises_with_index():
    cores = CoreReplicates.from_dense(np.array([np.diag([3.0, 1.0]), np.diag([2.0, 2.0])]))
    with pytest.raises(DegeneracyError) as info:
        rs.projector_replicates(cores, 0)
    assert info.value.index == 1
    rs.projector_replicates(cores, 0, check_gap=False)


def test_projector_stability_ordering():
    A = gen_exp_decay(300, 5, 0.25)
    res = rs.rsvd(A, 140, 2, seed=1)
    cores = rs.core_replicates(res)
    j5 = jack.jack_frobenius(rs.projector_replicates(cores, 4, check_gap=False)).value
    j6 = jack.jack_frobenius(rs.projector_replicates(cores, 5, check_gap=False)).value
    assert j5 >= 10 * j6


def test_entry_tukey_trivial_cases():
    eq = CoreReplicates.from_dense(np.ones((3, 1, 1)))
    res = rs.RsvdResult(U=np.ones((1, 1)), Sigma=np.ones(1), V=np.ones((1, 1)), R=np.eye(1),
                        Utilde=np.eye(1), Omega=np.eye(1), q=0, seed=0)
    assert rs.entry_tukey(eq, res, 0, 0) == 0.0
    vals = CoreReplicates.from_dense(np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1))
    assert rs.entry_tukey(vals, res, 0, 0) == pytest.approx(2.0)


def test_entry_tukey_matches_materialized_replicates(rng):
    A = MatrixSource.dense(rng.standard_normal((10, 8)))
    res = rs.rsvd(A, 4, 0, seed=6)
    cores = rs.core_replicates(res)
    X = np.array([res.U @ T @ res.V.T for T in cores.materialize()])
    for m, n in [(0, 0), (3, 5), (9, 7)]:
        E = X[:, m, n]
        assert rs.entry_tukey(cores, res, m, n) == pytest.approx(np.sum((E - E.mean()) ** 2))
        Ea = np.abs(E)
        assert rs.entry_tukey(cores, res, m, n, absolute=True) == \
            pytest.approx(np.sum((Ea - Ea.mean()) ** 2))


def test_entrywise_sum_equals_jack_squared(rng):
    A = MatrixSource.dense(rng.standard_normal((7, 6)))
    res = rs.rsvd(A, 4, 1, seed=9)
    cores = rs.core_replicates(res)
    total = sum(rs.entry_tukey(cores, res, m, n) for m in range(7) for n in range(6))
    X = np.array([res.U @ T @ res.V.T for T in cores.materialize()])
    assert total == pytest.approx(jack.jack_frobenius(cores).value ** 2, rel=1e-10)
    assert total == pytest.approx(replicate_mean_sq_dev(X), rel=1e-10)


def test_singular_vector_tukey_shapes(expdecay100):
    res = rs.rsvd(expdecay100, 10, 0, seed=2)
    cores = rs.core_replicates(res)
    values, est = rs.singular_vector_tukey(cores, res, 0)
    assert values.shape == (100,) and est.shape == (100,)
    assert np.all(est >= 0)
    with pytest.raises(ParameterError):
        rs.singular_vector_tukey(cores, res, 0, side="middle")
