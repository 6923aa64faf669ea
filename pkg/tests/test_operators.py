import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_hermitian
from mourrelab import symbols as S
from mourrelab.errors import (
    AsymmetryExceedsTolerance,
    FunctionUndefinedAtEigenvalue,
    NonSquare,
    ParseError,
    RealShift,
)
from mourrelab.operators import (
    Projection,
    RealInterval,
    apply_function,
    from_dense,
    operator_norm,
    read_matrix,
    spectral_decomposition,
    spectral_projection,
    weighted_resolvent_norm,
    write_matrix,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)


def test_from_dense_identity_and_sigma_x():
    assert np.array_equal(from_dense(np.eye(3), 1e-12).matrix, np.eye(3))
    assert np.array_equal(from_dense(SX).matrix, SX)


def test_from_dense_symmetrizes_small_skew():
    op = from_dense([[0, 1 + 1e-13], [1, 0]], 1e-10)
    assert np.allclose(op.matrix, SX, atol=1e-13)
    assert op.matrix[0, 1] == op.matrix[1, 0].conjugate()


def test_from_dense_rejects():
    with pytest.raises(NonSquare):
        from_dense(np.zeros((2, 3)))
    with pytest.raises(AsymmetryExceedsTolerance) as exc:
        from_dense([[0, 1], [0, 0]])
    assert exc.value.measured > 1e-10


def test_decomposition_diagonal_and_sigma_x():
    spec = spectral_decomposition(from_dense(np.diag([3.0, 1.0, 2.0])))
    assert np.allclose(spec.eigenvalues, [1, 2, 3])
    assert np.allclose(np.abs(spec.eigenvectors), [[0, 0, 1], [1, 0, 0], [0, 1, 0]])
    spec = from_dense(SX).spectral
    assert np.allclose(spec.eigenvalues, [-1, 1])
    v = spec.eigenvectors[:, 1]
    assert abs(abs(np.vdot(v, [1, 1])) / np.sqrt(2) - 1) < 1e-14


def test_decomposition_is_deterministic(rng):
    M = random_hermitian(8, rng)
    a = from_dense(M).spectral
    b = from_dense(M).spectral
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


@given(st.integers(1, 24), st.integers(0, 2**32 - 1))
def test_spectral_data_invariants(n, seed):
    rng = np.random.default_rng(seed)
    H = from_dense(random_hermitian(n, rng))
    spec = H.spectral
    V, lam = spec.eigenvectors, spec.eigenvalues
    assert np.all(np.diff(lam) >= 0)
    assert np.max(np.abs(V.conj().T @ V - np.eye(n))) <= 1e-10
    assert np.linalg.norm(spec.reconstruct() - H.matrix) <= 1e-10 * max(np.linalg.norm(H.matrix), 1e-300)
    assert np.max(np.abs(H.matrix @ V - V * lam)) <= 1e-9 * max(H.norm, 1e-300)


def test_spectral_projection_examples():
    spec = from_dense(np.diag([1.0, 2.0, 3.0])).spectral
    P = spectral_projection(spec, RealInterval.closed(1.5, 2.5))
    assert np.allclose(P.matrix, np.diag([0, 1, 0])) and P.rank == 1
    P = spectral_projection(spec, RealInterval.closed(10, 11))
    assert np.allclose(P.matrix, 0) and P.rank == 0
    P = spectral_projection(from_dense(SX).spectral, RealInterval.closed(0, 2))
    assert np.allclose(P.matrix, 0.5 * np.ones((2, 2)))


@given(st.integers(1, 16), st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(0, 3))
def test_projection_invariants(n, seed, lo, width):
    rng = np.random.default_rng(seed)
    # repeated eigenvalues exercise the dyad-sum construction
    lam = np.round(rng.normal(size=n), 1)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    spec = from_dense((Q * lam) @ Q.conj().T).spectral
    P = spectral_projection(spec, RealInterval.closed(lo, lo + width))
    M = P.matrix
    assert np.max(np.abs(M @ M - M)) <= 1e-10
    assert np.max(np.abs(M - M.conj().T)) <= 1e-10
    assert abs(np.trace(M).real - P.rank) <= 1e-8


def test_interval_boundary_rule():
    I = RealInterval(1.0, 2.0)  # [1, 2)
    assert list(I.contains([1.0, 2.0, 1.5, 1.0 - 1e-14])) == [True, False, True, True]
    assert list(RealInterval.parse("0.3:0.7").contains([0.3, 0.7])) == [True, True]
    with pytest.raises(ValueError):
        RealInterval(2.0, 1.0)


def test_apply_function_examples():
    H = from_dense(np.diag([0.5, 2.0]))
    assert np.allclose(apply_function(H.spectral, lambda t: t).matrix, H.matrix)
    assert np.allclose(apply_function(H.spectral, lambda t: np.ones_like(t)).matrix, np.eye(2))
    chi = S.default_family().chi
    Ht = apply_function(H.spectral, lambda t: t * chi(t))
    assert np.allclose(Ht.matrix, np.diag([0.5, 0.0]))
    with pytest.raises(FunctionUndefinedAtEigenvalue), np.errstate(divide="ignore"):
        apply_function(from_dense(np.diag([0.0, 1.0])).spectral, lambda t: 1.0 / t)


def test_weighted_resolvent_examples():
    H = from_dense(np.diag([1.0, 2.0]))
    eta = 1e-3
    assert weighted_resolvent_norm(H, H.spectral, 1 + 1j * eta, 0.0) == pytest.approx(1 / eta, rel=1e-12)
    lam, a, s = 0.7, 3.0, 0.6
    val = weighted_resolvent_norm(from_dense([[lam]]), from_dense([[a]]).spectral, lam + 1j * eta, s)
    assert val == pytest.approx((1 + a * a) ** (-s) / eta, rel=1e-12)
    with pytest.raises(RealShift):
        weighted_resolvent_norm(H, H.spectral, 1.5, 0.0)


def test_weighted_resolvent_matches_distance(rng):
    for _ in range(100):
        n = int(rng.integers(1, 12))
        H = from_dense(random_hermitian(n, rng))
        z = complex(rng.normal(), rng.choice([-1, 1]) * 10 ** rng.uniform(-3, 0))
        d = np.min(np.abs(H.spectral.eigenvalues - z))
        assert weighted_resolvent_norm(H, H.spectral, z, 0.0) == pytest.approx(1 / d, rel=1e-10)


def test_reduced_weighted_resolvent_uses_projection():
    H = from_dense(np.diag([1.0, 2.0]))
    P = Projection(np.diag([1.0, 0.0]).astype(complex), 1)
    val = weighted_resolvent_norm(H, H.spectral, 1 + 1e-3j, 0.0, P.complement)
    assert val == pytest.approx(1 / abs(2 - (1 + 1e-3j)), rel=1e-12)


def test_resolvent_bound_for_weights_on_probe_grid(rng):
    # ||<A>^s (A - z)^-1|| <= C <x>^s / |y| for 0 < |y| <= <x>/2; C fitted once
    A = from_dense(random_hermitian(20, rng, 3.0))
    spec, s = A.spectral, 0.7
    W = spec.japanese_power(s)
    xs = np.linspace(-10, 10, 20)
    ratios = []
    for x in xs:
        jx = np.sqrt(1 + x * x)
        for y in np.geomspace(1e-3, 0.5, 20) * jx:
            n = operator_norm(W @ spec.resolvent(complex(x, y)))
            ratios.append(n * y / jx**s)
    C = max(ratios)
    assert np.isfinite(C) and C < 10.0


def test_matrix_text_round_trip(rng):
    M = random_hermitian(5, rng) * np.pi
    buf = io.StringIO()
    write_matrix(buf, M)
    buf.seek(0)
    back = read_matrix(buf)
    assert np.max(np.abs(back - M)) <= 1e-15
    with pytest.raises(ParseError):
        read_matrix(io.StringIO("2\n1,0 0,0\n"))


def test_operator_norm_large_zero_and_null_start():
    n = 120
    assert operator_norm(np.zeros((n, n))) == 0.0
    # the fixed start vector (all ones) lies in the null space of M
    M = np.zeros((n, n))
    M[0, 0], M[0, 1] = 1.0, -1.0
    assert abs(operator_norm(M) - np.sqrt(2.0)) <= 1e-12
