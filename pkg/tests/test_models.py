import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mourrelab import models, mourre
from mourrelab.errors import (
    DependentVectors,
    HypothesisViolated,
    IntervalViolation,
    LengthMismatch,
    RegistryMiss,
    TooSmall,
)
from mourrelab.operators import RealInterval, from_dense


# --- lattice ---------------------------------------------------------------------


@pytest.mark.parametrize("flavor", ["circulant", "dirichlet"])
def test_laplacian_closed_form(flavor):
    for N in (8, 13, 32):
        got = np.linalg.eigvalsh(models.laplacian(N, flavor))
        assert np.allclose(got, models.laplacian_eigenvalues(N, flavor), atol=1e-13)


def test_lattice_n8_spectrum_and_hermiticity():
    m = models.lattice_model(8)
    want = np.sort(models.band_function(2 - 2 * np.cos(2 * np.pi * np.arange(8) / 8)))
    assert np.allclose(m.H.spectral.eigenvalues, want, atol=1e-14)
    A = models.dilation_generator(8)
    assert np.array_equal(A, A.conj().T)
    assert m.H.dim == m.A.dim == 8


def test_lattice_rejects_small_and_unknown_flavor():
    with pytest.raises(TooSmall):
        models.lattice_model(7)
    with pytest.raises(ValueError):
        models.laplacian(8, "mobius")


def test_lattice_interval_meets_spectrum():
    m = models.lattice_model(64)
    assert m.recommended_interval.contains(m.H.spectral.eigenvalues).any()


@pytest.mark.parametrize("N", [64, 128])
def test_lattice_bulk_constant_positive(N):
    # the literal compressed commutator is negative at finite N; the
    # translation-invariant part carries the positive constant
    m = models.lattice_model(N)
    assert models.bulk_constant(m) == pytest.approx(0.3129, abs=1e-3)
    assert mourre.mourre_best_constant(m.H, m.A, m.recommended_interval).c_strict < 0


def test_bulk_symbol_matches_commutator_on_plane_waves():
    # on the infinite lattice [h(L), iA] acts on e^{ikx} as 2 sin^2(k) h'(L)
    k = np.linspace(0.1, 3.0, 7)
    ell = 2 - 2 * np.cos(k)
    want = 2 * np.sin(k) ** 2 / (1 + ell) ** 2
    assert np.allclose(models.bulk_symbol(ell), want, atol=1e-14)


def test_bulk_constant_empty_interval():
    m = models.lattice_model(16)
    assert models.bulk_constant(m, RealInterval.closed(5, 6)) == np.inf


# --- multiplication ------------------------------------------------------------------


def test_multiplication_model():
    m = models.multiplication_model(64, 10.0)
    a = np.diag(m.A.matrix).real
    assert np.array_equal(m.A.matrix, np.diag(a))
    assert np.all(a >= 1.0)
    h = 2 * 10.0 / 63
    lam = m.H.spectral.eigenvalues
    assert lam[0] >= 0 and lam[-1] <= 4 / h**2
    assert m.metadata["h"] == pytest.approx(h)
    with pytest.raises(TooSmall):
        models.multiplication_model(16)


# --- rank-one sums ------------------------------------------------------------------------


def test_rank_one_eigenvector_term_commutes():
    A1 = np.diag([1.0, 2.0, 3.0])
    r = models.rank_one_sum(A1, [np.eye(3)[0]], [1.0])
    assert np.max(np.abs(r.operator.matrix @ A1 - A1 @ r.operator.matrix)) == 0.0
    assert r.identity_residual == 0.0


@given(st.integers(2, 8), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_rank_one_identity(n, terms, seed):
    rng = np.random.default_rng(seed)
    terms = min(terms, n)
    A1 = rng.normal(size=(n, n))
    A1 = A1 + A1.T
    g = [rng.normal(size=n) + 1j * rng.normal(size=n) for _ in range(terms)]
    alpha = rng.normal(size=terms)
    r = models.rank_one_sum(A1, g, alpha)
    scale = max(1.0, np.abs(A1).max()) * max(np.linalg.norm(v) ** 2 for v in g) * np.abs(alpha).max()
    assert r.identity_residual <= 1e-12 * scale
    C = r.operator.matrix
    assert np.array_equal(C, C.conj().T)


def test_rank_one_errors():
    A1 = np.diag([1.0, 2.0])
    with pytest.raises(LengthMismatch):
        models.rank_one_sum(A1, [np.ones(2)], [1.0, 2.0])
    with pytest.raises(LengthMismatch):
        models.rank_one_sum(A1, [np.ones(3)], [1.0])
    with pytest.raises(DependentVectors):
        models.rank_one_sum(A1, [np.ones(2), 2 * np.ones(2)], [1.0, 1.0])
    with pytest.raises(HypothesisViolated):
        models.rank_one_sum(A1, [np.array([0.0, 1.0])], [1.0], weight_bound=1.0)


def test_geometric_tail():
    assert models.geometric_tail(2.0, 20) == pytest.approx(2.0**-20)


def test_truncation_tail_bound():
    rng = np.random.default_rng(5)
    n = 40
    A1 = models.tridiagonal_conjugate(n)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    alpha = 2.0 ** -np.arange(1, n + 1)
    for M in (5, 10, 20):
        short = models.rank_one_sum(A1, list(Q.T[:M]), alpha[:M], tail_bound=models.geometric_tail(2.0, M))
        longer = models.rank_one_sum(A1, list(Q.T[:M + 10]), alpha[:M + 10])
        gap = np.linalg.norm(longer.operator.matrix - short.operator.matrix, 2)
        assert gap <= short.tail_bound


# --- artificial example -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def example():
    return models.artificial_example(N0=64, N1=8, seed=7)


def test_artificial_census_and_placement(example):
    I = example.recommended_interval
    lam = example.H.spectral.eigenvalues
    H1 = example.H.matrix[64:, 64:]
    inner = np.linalg.eigvalsh(H1)
    assert np.all(I.contains(inner))
    assert I.contains(lam).sum() >= 8
    assert example.metadata["C_norm"] <= 0.25 * min(0.5 - I.lo, I.hi - 0.5) + 1e-12


def test_artificial_block_spectral_union(example):
    base = models.lattice_model(64)
    H1 = example.H.matrix[64:, 64:]
    union = np.sort(np.concatenate([base.H.spectral.eigenvalues, np.linalg.eigvalsh(H1)]))
    assert np.allclose(example.H.spectral.eigenvalues, union, atol=1e-10)


def test_artificial_commutator_is_block_diagonal(example):
    base = models.lattice_model(64)
    C = example.H.matrix[64:, 64:] - 0.5 * np.eye(8)
    A1 = example.A.matrix[64:, 64:]
    full = mourre.commutator_form(example.H, example.A).matrix
    assert np.max(np.abs(full[:64, :64] - mourre.commutator_form(base.H, base.A).matrix)) <= 1e-14
    assert np.max(np.abs(full[64:, 64:] - 1j * (C @ A1 - A1 @ C))) <= 1e-14
    assert np.max(np.abs(full[:64, 64:])) == 0.0


def test_artificial_compression_identity(example):
    # spec(H1) lies inside I, so the H1-block eigenvectors plus the H0 point
    # spectrum in I span exactly Ran E_I(H)
    I = example.recommended_interval
    spec = example.H.spectral
    V = spec.eigenvectors[:, I.contains(spec.eigenvalues)]
    block = models.block_projection(example).matrix
    assert np.allclose(V @ V.conj().T @ block, block, atol=1e-12)
    Pc = np.eye(72) - V @ V.conj().T
    full = mourre.commutator_form(example.H, example.A).matrix
    H0_only = np.zeros_like(full)
    H0_only[:64, :64] = full[:64, :64]
    assert np.max(np.abs(Pc @ full @ Pc - Pc @ H0_only @ Pc)) <= 1e-10


def test_artificial_determinism_and_seed():
    a = models.artificial_example(N0=32, N1=8, seed=3)
    b = models.artificial_example(N0=32, N1=8, seed=3)
    c = models.artificial_example(N0=32, N1=8, seed=4)
    assert np.array_equal(a.H.matrix, b.H.matrix)
    assert not np.array_equal(a.H.matrix, c.H.matrix)


def test_artificial_rejections():
    with pytest.raises(IntervalViolation):
        models.artificial_example(N0=32, N1=8, lam=0.05)
    with pytest.raises(ValueError):
        models.artificial_example(N0=32, N1=8, decay=1.0)


def test_projections(example):
    I = example.recommended_interval
    P = models.point_projection(example, I)
    assert P.rank == I.contains(example.H.spectral.eigenvalues).sum()
    assert np.allclose(P.matrix @ P.matrix, P.matrix, atol=1e-12)
    B = models.block_projection(example)
    assert B.rank == 8 and np.array_equal(B.matrix @ B.matrix, B.matrix)


# --- registry -------------------------------------------------------------------------------------


def test_registry_references():
    m = models.model_from_reference("lattice{N=16}")
    assert m.dim == 16 and m.metadata["flavor"] == "circulant"
    assert models.model_from_reference("lattice_dirichlet{N=16}").metadata["flavor"] == "dirichlet"
    m = models.model_from_reference("artificial{N0=32,N1=8,lambda=0.45,decay=3,seed=2}")
    assert m.metadata["lambda"] == 0.45 and m.dim == 40
    with pytest.raises(RegistryMiss):
        models.model_from_reference("torus{N=4}")
    with pytest.raises(RegistryMiss):
        models.model_from_reference("lattice{M=4}")


def test_model_operators_share_dimension():
    for ref in ("lattice{N=16}", "multiplication{N=40,L=5}", "artificial{N0=16,N1=4}"):
        m = models.model_from_reference(ref)
        assert m.H.dim == m.A.dim
        assert isinstance(m.H, type(from_dense(np.eye(1))))
