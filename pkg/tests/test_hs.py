import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hermitian
from mourrelab import hs, mourre
from mourrelab import symbols as S
from mourrelab.harness.acceptance import spread_hermitian
from mourrelab.errors import (
    BadSymbolOrder,
    DimensionMismatch,
    OrderViolation,
    QuadratureNotConverged,
)
from mourrelab.models import lattice_model
from mourrelab.operators import apply_function, from_dense

SX = np.array([[0, 1], [1, 0]], dtype=complex)


def oracle_error(A, ref):
    sym = S.symbol_from_reference(ref)
    # phi_R has order 0 and needs the extended mode
    got = hs.hs_apply(A, S.almost_analytic(sym), hs.QuadratureConfig(extended=True), raise_on_failure=False)
    want = apply_function(A.spectral, sym).matrix
    err = np.linalg.norm(got.operator.matrix - want) / max(np.linalg.norm(want), 1e-300)
    return err, got


# --- hs_apply --------------------------------------------------------------------


def test_hs_one_by_one_lorentzian():
    res = hs.hs_apply(from_dense([[0.0]]), S.lorentzian())
    assert abs(res.operator.matrix[0, 0] - 1.0) <= 1e-6
    assert res.converged


def test_hs_chi_on_diagonal():
    A = from_dense(np.diag([-1.0, 0.0, 2.0]))
    res = hs.hs_apply(A, S.almost_analytic(S.symbol_from_reference("chi")))
    assert np.allclose(res.operator.matrix, np.diag([1.0, 1.0, 0.0]), atol=1e-6)


def test_hs_chi4_random_16(rng):
    A = from_dense(random_hermitian(16, rng, 3.0))
    err, res = oracle_error(A, "chi_R{R=4}")
    assert err <= 1e-6
    assert res.certificate <= 1e-6


@settings(max_examples=8)
@given(st.integers(2, 24), st.integers(0, 2**32 - 1),
       st.sampled_from(["chi", "chi_R{R=4}", "lorentzian", "phi_R{s=0.6,R=4}"]))
def test_hs_matches_oracle(n, seed, ref):
    # one eigenvalue near 0 and one in [5, 8] keep every oracle nonzero
    A = spread_hermitian(n, np.random.default_rng(seed))
    err, res = oracle_error(A, ref)
    assert err <= max(1e-6, res.certificate)


def test_hs_rejects_order_zero_without_extended_mode():
    A = from_dense(np.diag([0.0, 1.0]))
    with pytest.raises(BadSymbolOrder):
        hs.hs_apply(A, S.japanese(0.5))
    with pytest.raises(BadSymbolOrder):
        hs.hs_apply(A, S.identity())


def test_hs_reports_unconverged_iterate():
    A = from_dense(np.diag([0.0, 0.5, 1.0]))
    q = hs.QuadratureConfig(x_cells=4, y_cells=2, refinement_levels=1, target_rel_error=1e-14)
    with pytest.raises(QuadratureNotConverged) as exc:
        hs.hs_apply(A, S.lorentzian(), q)
    assert exc.value.result is not None
    assert exc.value.certificate > 1e-14
    res = hs.hs_apply(A, S.lorentzian(), q, raise_on_failure=False)
    assert not res.converged and res.levels_used == 2


def test_error_estimate_rules():
    assert hs._error_estimate([]) == math.inf
    assert hs._error_estimate([1e-3]) == 1e-3
    assert hs._error_estimate([1e-3, 1e-3]) == 1e-2
    assert hs._error_estimate([1e-2, 1e-3]) == 1e-3


# --- ad_iter -----------------------------------------------------------------------


def test_ad_iter_examples():
    A = np.diag([1.0, 2.0])
    assert np.array_equal(hs.ad_iter(SX, A, 1), [[0, 1], [-1, 0]])
    assert np.array_equal(hs.ad_iter(SX, A, 2), SX)


def test_ad_iter_rank_one(rng):
    n = 6
    A = random_hermitian(n, rng)
    f, g = rng.normal(size=n) + 1j * rng.normal(size=n), rng.normal(size=n) + 1j * rng.normal(size=n)
    B = np.outer(f, g.conj())
    want = np.outer(f, (A @ g).conj()) - np.outer(A @ f, g.conj())
    assert np.max(np.abs(hs.ad_iter(B, A, 1) - want)) <= 1e-12


def test_ad_iter_errors():
    with pytest.raises(DimensionMismatch):
        hs.ad_iter(np.eye(2), np.eye(3), 1)
    with pytest.raises(ValueError):
        hs.ad_iter(np.eye(2), np.eye(2), 0)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_ad_iter_linear_and_odd_in_A(p, seed, c):
    rng = np.random.default_rng(seed)
    A, B1, B2 = (random_hermitian(5, rng) for _ in range(3))
    lhs = hs.ad_iter(B1 + c * B2, A, 1)
    assert np.allclose(lhs, hs.ad_iter(B1, A, 1) + c * hs.ad_iter(B2, A, 1), atol=1e-12)
    assert np.array_equal(hs.ad_iter(B1, -A, 1), -hs.ad_iter(B1, A, 1))
    assert np.allclose(hs.ad_iter(B1, -A, p), (-1) ** p * hs.ad_iter(B1, A, p), atol=1e-9)


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_ad_iter_diagonal_formula(p, seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(-4, 5, size=5).astype(float)
    B = random_hermitian(5, rng)
    want = (a[None, :] - a[:, None]) ** p * B
    assert np.allclose(hs.ad_iter(B, np.diag(a), p), want, rtol=0, atol=1e-12 * max(1, np.abs(want).max()))


def test_ad_iter_eigenbasis_agrees(rng):
    A = from_dense(random_hermitian(8, rng))
    B = random_hermitian(8, rng)
    for p in (1, 2, 3):
        direct = hs.ad_iter(B, A, p)
        assert np.allclose(hs.ad_iter_eigenbasis(B, A, p), direct, atol=1e-10 * np.abs(direct).max())


# --- commutator_expand -----------------------------------------------------------------


def test_sign_convention_is_calibrated():
    assert hs.SIGN_CONVENTION in (1, -1)
    A = from_dense(np.diag([1.0, 2.0]))
    res = hs.commutator_expand(SX, A, S.identity(), 2)
    assert np.allclose(res.terms[0], res.commutator, atol=1e-14)


def test_expand_identity_symbol_leaves_no_remainder(rng):
    A = from_dense(random_hermitian(7, rng))
    res = hs.commutator_expand(random_hermitian(7, rng), A, S.identity(), 2)
    assert np.linalg.norm(res.remainder, 2) <= 1e-10


def test_expand_k1_is_the_commutator(rng):
    A = from_dense(random_hermitian(5, rng))
    B = random_hermitian(5, rng)
    phi = S.lorentzian()
    res = hs.commutator_expand(B, A, phi, 1)
    assert res.terms == []
    assert np.array_equal(res.remainder, res.commutator)
    P = apply_function(A.spectral, phi).matrix
    assert np.allclose(res.commutator, P @ B - B @ P, atol=1e-13)


def test_expand_chi2_diagonal(rng):
    A = from_dense(np.diag([1.0, 2.0, 3.0]))
    res = hs.commutator_expand(random_hermitian(3, rng), A, S.symbol_from_reference("chi_R{R=2}"), 3)
    assert len(res.terms) == 2
    assert res.identity_residual() <= 1e-9


def test_expand_order_violation():
    A = from_dense(np.diag([0.0, 1.0]))
    with pytest.raises(OrderViolation):
        hs.commutator_expand(SX, A, S.japanese(2.0), 2)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_remainder_by_quadrature_matches_algebra(k, rng):
    A = from_dense(np.diag(np.linspace(-2, 2, 6)))
    B = random_hermitian(6, rng)
    res = hs.commutator_expand(B, A, S.lorentzian(), k, remainder_by_quadrature=True)
    scale = np.linalg.norm(res.remainder)
    assert np.linalg.norm(res.remainder_quadrature - res.remainder) <= max(10 * res.certificate, 1e-6) * scale


def test_remainder_kernel_matches_expansion(rng):
    a = np.array([-1.0, 0.3, 2.0, 2.5])
    A = from_dense(np.diag(a))
    B = random_hermitian(4, rng)
    phi = S.lorentzian()
    res = hs.commutator_expand(B, A, phi, 2)
    K = hs.remainder_kernel_exact(phi, a, 2)
    assert np.allclose(res.remainder, -hs.SIGN_CONVENTION * K * B, atol=1e-13) or \
        np.allclose(res.remainder, hs.SIGN_CONVENTION * K * B, atol=1e-13)


# --- scaling_probe ------------------------------------------------------------------------


def test_probe_constant_and_power():
    fit = hs.scaling_probe(lambda R: 1.0, [8, 16, 32, 64], 0.0)
    assert fit.fitted_slope == 0.0 and fit.passed
    fit = hs.scaling_probe(lambda R: R**2, [8, 16, 32, 64], 2.0)
    assert abs(fit.fitted_slope - 2.0) <= 1e-12
    assert fit.residual <= 1e-12


def test_probe_zero_family_and_short_grid():
    fit = hs.scaling_probe(lambda R: 0.0, [1, 2, 4, 8], -1.0)
    assert fit.verdict == "identically zero" and math.isnan(fit.fitted_slope)
    assert fit.to_dict()["fitted_slope"] is None
    with pytest.raises(ValueError):
        hs.scaling_probe(lambda R: R, [1, 2, 4], 1.0)


def test_probe_fails_on_wrong_target():
    fit = hs.scaling_probe(lambda R: R**-1.0, [2, 4, 8, 16], 0.0)
    assert fit.verdict == "fail"


def test_remainder_probe_reference_case():
    A = hs.diagonal_conjugate(256)
    B = hs.neighbour_coupling(A.dim)
    fit = hs.remainder_probe(A, B, -1.2, 0.6, 0.6, 2, [8, 16, 32, 64, 128])
    assert abs(fit.fitted_slope - (-1.2 + 1.2 - 2)) <= 0.3
    assert fit.passed


def test_remainder_probe_outside_hypotheses():
    A = hs.diagonal_conjugate(32)
    B = hs.neighbour_coupling(A.dim)
    fit = hs.remainder_probe(A, B, 0.0, 0.5, 1.0, 2, [2, 4, 8, 16])
    assert fit.verdict == "outside lemma hypotheses"
    assert not fit.passed


def test_theta_cutoff_vanishes_when_commuting():
    m = lattice_model(16)
    tau, theta = mourre.interval_cutoffs(m.recommended_interval)
    # H as its own conjugate operator: theta(H) commutes with every g(H)
    fam = hs.theta_cutoff_family(m.H, m.H, theta, "chi", 0.5)
    fit = hs.scaling_probe(lambda R: 0.0 if fam(R) < 1e-12 else fam(R), [1, 2, 4, 8], -0.5)
    assert fit.verdict == "identically zero"


def test_weighted_norm_diagonal():
    A = from_dense(np.diag([0.0, 3.0]))
    X = np.array([[0, 1], [0, 0]], dtype=complex)
    assert abs(hs.weighted_norm(A, X, 1.0, 0.0) - 1.0) <= 1e-14
    assert abs(hs.weighted_norm(A, X, 0.0, 1.0) - math.sqrt(10.0)) <= 1e-13
