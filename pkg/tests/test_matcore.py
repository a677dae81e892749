import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langevin_rank.errors import DimensionMismatch, NumericalFailure
from langevin_rank.matcore import (
    KroneckerOp,
    SpdMat,
    SymMat,
    jacobi_eig,
    numeric_rank,
    random_orthogonal,
    random_psd,
    random_spd,
    spd_sqrt,
    sym_eig,
    sym_expm,
)


def taylor_expm(a, terms=30):
    """Scaling-and-squaring truncated series; independent of any eigensolver."""
    s = max(0, int(np.ceil(np.log2(max(np.linalg.norm(a, 1), 1.0)))) + 1)
    b = a / 2**s
    out, term = np.eye(a.shape[0]), np.eye(a.shape[0])
    for k in range(1, terms + 1):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def test_symmat_symmetrizes_exactly():
    m = SymMat([[1.0, 2.0], [2.0 + 1e-9, 3.0]])
    assert m.a[0, 1] == m.a[1, 0]
    with pytest.raises(ValueError):
        m.a[0, 0] = 5.0


def test_symmat_rejects_bad_shapes():
    with pytest.raises(DimensionMismatch):
        SymMat(np.zeros((2, 3)))
    with pytest.raises(DimensionMismatch):
        SymMat(np.zeros((0, 0)))


def test_spd_rejects_indefinite():
    with pytest.raises(ValueError):
        SpdMat(np.diag([1.0, 0.0]))


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_eig_identity_and_diag(method):
    assert np.allclose(sym_eig(SymMat(np.eye(3)), method).eigenvalues, [1, 1, 1])
    assert np.allclose(sym_eig(SymMat.diag([2, -1, 0]), method).eigenvalues, [-1, 0, 2])


@pytest.mark.parametrize("n", [1, 2, 5, 8, 13])
def test_lapack_matches_jacobi(n, rng):
    a = rng.standard_normal((n, n))
    m = SymMat(a + a.T)
    lap, jac = sym_eig(m), jacobi_eig(m.a)
    assert np.allclose(lap.eigenvalues, jac.eigenvalues, atol=1e-8)
    for e in (lap, jac):
        v = e.eigenvectors
        assert np.allclose(v.T @ v, np.eye(n), atol=1e-10)
        assert np.linalg.norm(e.reconstruct() - m.a) <= 1e-10 * max(np.linalg.norm(m.a), 1)
        assert np.all(np.diff(e.eigenvalues) >= 0)


def test_jacobi_sweep_cap():
    a = np.random.default_rng(3).standard_normal((10, 10))
    with pytest.raises(NumericalFailure):
        jacobi_eig(a + a.T, max_sweeps=1)


def test_spd_sqrt_examples(rng):
    assert np.allclose(spd_sqrt(SpdMat.identity(3)).a, np.eye(3))
    assert np.allclose(spd_sqrt(SpdMat(np.diag([4.0, 9.0]))).a, np.diag([2.0, 3.0]))
    m = random_spd(5, rng)
    r = spd_sqrt(m).a
    assert np.linalg.norm(r @ r - m.a) <= 1e-9 * np.linalg.norm(m.a)
    assert np.linalg.eigvalsh(r)[0] > 0


def test_sym_expm_examples(rng):
    assert np.allclose(sym_expm(SymMat.zeros(3), 2.5).a, np.eye(3))
    assert np.allclose(sym_expm(SymMat.diag([1, -1]), math.log(2)).a, np.diag([2.0, 0.5]))
    a = rng.standard_normal((6, 6))
    m = SymMat(a + a.T)
    ref = taylor_expm(-0.3 * m.a)
    assert np.linalg.norm(sym_expm(m, -0.3).a - ref) <= 1e-9 * np.linalg.norm(ref)


def test_numeric_rank_examples():
    assert numeric_rank(SymMat.zeros(4)) == 0
    assert numeric_rank(SymMat.diag([1, 1, 1e-15])) == 2
    with pytest.raises(ValueError):
        numeric_rank(SymMat.zeros(2), 0.0)


@pytest.mark.parametrize("rank", [0, 1, 4, 9])
def test_numeric_rank_of_random_psd(rank, rng):
    assert numeric_rank(random_psd(9, rank, rng)) == rank


def test_random_orthogonal(rng):
    q = random_orthogonal(7, rng)
    assert np.allclose(q.T @ q, np.eye(7), atol=1e-12)


def test_random_spd_condition(rng):
    lam = random_spd(6, rng, cond=1e4).eig.eigenvalues
    assert lam[-1] / lam[0] == pytest.approx(1e4, rel=1e-8)


@settings(max_examples=100, deadline=None)
@given(
    p=st.integers(1, 6), q=st.integers(1, 6), r=st.integers(1, 6), s=st.integers(1, 6),
    k=st.integers(1, 3), seed=st.integers(0, 2**32 - 1),
)
def test_kronecker_matches_dense(p, q, r, s, k, seed):
    g = np.random.default_rng(seed)
    op = KroneckerOp(g.standard_normal((p, q)), g.standard_normal((r, s)))
    dense = np.kron(op.left, op.right)
    assert op.shape == dense.shape
    v = g.standard_normal(q * s)
    assert np.allclose(op.apply(v), dense @ v, atol=1e-10)
    w = g.standard_normal(p * r)
    assert np.allclose(op.rapply(w), dense.T @ w, atol=1e-10)
    block = g.standard_normal((q * s, k))
    assert np.allclose(op.apply(block), dense @ block, atol=1e-10)


def test_kronecker_dimension_check():
    op = KroneckerOp(np.eye(2), np.eye(3))
    with pytest.raises(DimensionMismatch):
        op.apply(np.ones(5))


@pytest.mark.parametrize("n", [2, 4, 6])
def test_similar_form_spectrum_matches_general_eig(n, rng):
    g = random_spd(n, rng)
    a = rng.standard_normal((n, n))
    h = a + a.T
    gh = spd_sqrt(g).a
    sym = np.linalg.eigvalsh(gh @ h @ gh)
    gen = np.linalg.eigvals(g.a @ h)
    assert np.max(np.abs(gen.imag)) < 1e-8
    assert np.allclose(np.sort(gen.real), sym, atol=1e-8)
