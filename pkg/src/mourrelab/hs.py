"""Functional calculus by 2-D quadrature, iterated commutators, expansions.

``hs_apply`` evaluates ``phi(A) = (1/pi) ∬ dbar(phi^C)(z) (A - z)^-1 dx dy``
on A's eigenvalues: in the eigenbasis the operator integral reduces to one
scalar integral per eigenvalue, all sharing the same grid and the same
``dbar`` samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import (
    BadSymbolOrder,
    DegenerateFit,
    DimensionMismatch,
    OrderViolation,
    QuadratureNotConverged,
)
from .operators import SelfAdjointOperator, apply_function, from_dense, operator_norm
from .symbols import (
    AlmostAnalyticExtension,
    almost_analytic,
    bump,
    default_family,
    japanese,
    make_phi_psi,
    scale_symbol,
)

# log-scale span of the outer (tail) region: the paired +x/-x integrand of
# an order-rho symbol decays like |x|^(rho-1), so e^-25 leaves ~1e-11
TAIL_SPAN = 25.0
# width of the smooth hand-over between the inner and outer x grids
TAIL_RAMP = 4.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Midpoint grid parameters.

    ``x_cells``/``y_cells`` describe the coarsest inner grid (``y_cells`` on
    ``0 < y <= c2 <x>``, the lower half plane follows by conjugate symmetry).
    Each refinement level multiplies both by sqrt(2). ``y_floor`` of None means
    ``1e-4 * min eigengap`` floored at ``1e-8``.
    """

    x_cells: int = 64
    y_cells: int = 16
    y_floor: float | None = None
    refinement_levels: int = 8
    target_rel_error: float = 1e-6
    tail_cells_per_unit: int = 32
    extended: bool = False


@dataclass
class HSResult:
    operator: SelfAdjointOperator
    certificate: float
    level_error: float
    strip_bound: float
    levels_used: int
    converged: bool
    values: np.ndarray = field(repr=False)


def _min_gap(a):
    d = np.diff(np.sort(a))
    d = d[d > 0]
    return float(d.min()) if d.size else 1.0


def _grid_contribution(ext, a, x, wx, v, wv, y_floor):
    """``(2/pi) Re sum w dbar / (a - z)`` over the upper-half grid ``(x, c2<x>v)``."""
    c = ext.coefficients(x)
    if not np.any(c):
        return np.zeros(a.shape)
    jx = np.sqrt(1.0 + x**2)
    X = x[:, None]
    D, Y = ext.dbar_on_grid(c, x, v)
    W = (wx * ext.c2 * jx)[:, None] * wv[None, :]
    keep = (np.abs(D) > 0) & (Y >= y_floor)
    Dw = D[keep] * W[keep]
    xs, ys = X.repeat(Y.shape[1], axis=1)[keep], Y[keep]
    out = np.empty(a.shape)
    _cauchy_sum(a, xs, ys, np.ascontiguousarray(Dw.real), np.ascontiguousarray(Dw.imag), out)
    return (2.0 / math.pi) * out


@numba.njit(cache=True)
def _cauchy_sum(a, x, y, dr, di, out):
    # out[k] = Re sum_j (dr_j + i di_j) / (a_k - x_j - i y_j)
    for k in range(a.size):
        acc = 0.0
        for j in range(x.size):
            p = a[k] - x[j]
            acc += (dr[j] * p - di[j] * y[j]) / (p * p + y[j] * y[j])
        out[k] = acc


def _midpoints(lo, hi, n):
    h = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * h, np.full(n, h)


def _needs_tail(ext, q):
    base = ext.base
    sup = base.support
    if sup is not None and np.isfinite(sup.lo) and np.isfinite(sup.hi):
        return False
    if base.order >= 1.0 or (base.order >= 0.0 and not q.extended):
        raise BadSymbolOrder(
            f"{base.name} has order {base.order:g}; need a negative order, compact "
            "support, or extended mode for order in [0, 1)"
        )
    return True


def _x_nodes(ext, a, q, scale):
    """Quadrature nodes in x, their weights and the plain cell widths.

    Compactly supported symbols use one uniform grid on the support. Otherwise
    a smooth plateau splits the line into an inner uniform grid that holds
    every pole and two outer grids, uniform in ``w`` with
    ``|x| = X0 + TAIL_RAMP (e^w - 1)``, reaching ``e^TAIL_SPAN X0``.
    """
    cells = lambda width: round(q.x_cells * scale) * max(1, math.ceil(width / 8.0))
    if not _needs_tail(ext, q):
        lo, hi = ext.base.support.lo, ext.base.support.hi
        x, dx = _midpoints(lo, hi, cells(hi - lo))
        return x, dx, dx
    X0 = float(np.max(np.abs(a), initial=0.0)) + 2.0
    d = TAIL_RAMP
    plateau = bump(-X0, X0, d)
    x, dx = _midpoints(-X0 - d, X0 + d, cells(2 * X0 + 2 * d))
    xs, ws, raw = [x], [dx * plateau(x)], [dx]
    span = TAIL_SPAN / max(1.0 - ext.base.order, 0.2)
    W = math.log1p(X0 * (math.exp(span) - 1.0) / d)
    # the tail is smooth and resolved early; refine it at half the rate
    w, dw = _midpoints(0.0, W, math.ceil(q.tail_cells_per_unit * W * math.sqrt(scale)))
    r = X0 + d * np.expm1(w)
    jac = d * np.exp(w) * dw
    outer = 1.0 - plateau(r)
    for sign in (1.0, -1.0):
        xs.append(sign * r)
        ws.append(jac * outer)
        raw.append(jac * (r > X0 + d))
    return np.concatenate(xs), np.concatenate(ws), np.concatenate(raw)


def _error_estimate(diffs):
    """Error of the latest level from the last level differences.

    With a contraction ratio ``rho`` between successive differences the
    remaining error is about ``diff * rho / (1 - rho)``; the estimate never
    drops below the last difference and is 10x the difference when the
    ratio is not clearly below one.
    """
    if not diffs:
        return math.inf
    last = diffs[-1]
    if len(diffs) < 2 or diffs[-2] == 0.0:
        return last
    rho = last / diffs[-2]
    if rho >= 0.9:
        return 10.0 * last
    return last * max(1.0, rho / (1.0 - rho))


def hs_scalar(ext, a, q=QuadratureConfig()):
    """Quadrature values ``phi(a_k)`` for an array of real points.

    Returns ``(values, level_error, strip_bound, levels_used, converged)``:
    ``level_error`` is the refinement-based error estimate and ``strip_bound``
    the bound for the dropped strip near the real axis, both relative to
    the 2-norm of the values.
    """
    a = np.asarray(a, dtype=float)
    y_floor = q.y_floor if q.y_floor is not None else max(1e-4 * _min_gap(a), 1e-8)
    prev = None
    diffs = []
    for level in range(q.refinement_levels + 1):
        scale = 2.0 ** (level / 2)
        x, wx, raw = _x_nodes(ext, a, q, scale)
        v, wv = _midpoints(0.0, 1.0, round(q.y_cells * scale))
        values = _grid_contribution(ext, a, x, wx, v, wv, y_floor)
        norm = max(np.linalg.norm(values), 1e-300)
        strip = _strip_bound(ext, x, raw, y_floor) * math.sqrt(a.size) / norm
        if prev is not None:
            diffs.append(float(np.linalg.norm(values - prev) / norm))
            if _error_estimate(diffs) + strip <= q.target_rel_error:
                break
        prev = values
    err = _error_estimate(diffs)
    return values, err, strip, level + 1, err + strip <= q.target_rel_error


def _strip_bound(ext, x, dx, y_floor):
    """Bound on the dropped strip ``|y| < y_floor`` for one eigenvalue.

    Near the axis ``|dbar| <= |phi^(l+1)(x)| |y|^l / (2 l!)`` and
    ``|(a - z)^-1| <= 1/|y|``, which integrates to
    ``y_floor^l / (pi l l!) * ∫|phi^(l+1)|``.
    """
    l = ext.l
    integral = float(np.sum(np.abs(ext.base.eval(l + 1, x)) * dx))
    return y_floor**l / (math.pi * l * math.factorial(l)) * integral


def hs_apply(A, ext, q=QuadratureConfig(), raise_on_failure=True):
    """``phi(A)`` by Helffer-Sjostrand quadrature, with an error certificate.

    Raises :class:`QuadratureNotConverged` carrying the best iterate when
    the certificate stays above ``q.target_rel_error``.
    """
    if not isinstance(ext, AlmostAnalyticExtension):
        ext = almost_analytic(ext)
    spec = A.spectral
    values, diff, strip, levels, ok = hs_scalar(ext, spec.eigenvalues, q)
    M = spec.function_matrix(values)
    op = from_dense(M, sym_tol=1e-8, label=f"hs({ext.base.name})")
    result = HSResult(op, diff + strip, diff, strip, levels, ok, values)
    if not ok and raise_on_failure:
        raise QuadratureNotConverged(
            f"certificate {diff + strip:.2e} above target {q.target_rel_error:.1e}",
            result,
            diff + strip,
        )
    return result


# --- iterated commutators -------------------------------------------------


def _dense(M):
    return np.asarray(M.matrix if isinstance(M, SelfAdjointOperator) else M, dtype=complex)


def ad_iter(B, A, p):
    """``ad_A^p(B)`` with ``ad_A(B) = BA - AB``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    Bm, Am = _dense(B), _dense(A)
    if Bm.shape != Am.shape:
        raise DimensionMismatch(f"{Bm.shape} vs {Am.shape}")
    out = Bm
    for _ in range(p):
        out = out @ Am - Am @ out
    return out


def ad_iter_eigenbasis(B, A, p):
    """Same as :func:`ad_iter`, through ``(a_j - a_i)^p`` in A's eigenbasis."""
    spec = A.spectral
    V = spec.eigenvectors
    a = spec.eigenvalues
    Bt = V.conj().T @ _dense(B) @ V
    Bt = Bt * (a[None, :] - a[:, None]) ** p
    return V @ Bt @ V.conj().T


def _calibrate_sign():
    """Sign making ``sum_j s/j! phi^(j)(A) ad_A^j(B)`` expand ``[phi(A), B]``.

    For ``phi`` the identity the single ``j = 1`` term must reproduce
    ``[A, B]`` exactly; ``ad_A(B) = BA - AB = -[A, B]`` fixes ``s``.
    """
    A = np.diag([1.0, 2.0])
    B = np.array([[0.0, 1.0], [1.0, 0.0]])
    term = ad_iter(B, A, 1)
    target = A @ B - B @ A
    return 1 if np.allclose(term, target) else -1


SIGN_CONVENTION = _calibrate_sign()


@dataclass
class ExpansionResult:
    terms: list
    remainder: np.ndarray
    sign_convention: int
    commutator: np.ndarray
    remainder_quadrature: np.ndarray | None = None
    certificate: float = 0.0

    def identity_residual(self):
        total = sum(self.terms, np.zeros_like(self.commutator)) + self.remainder
        return float(np.linalg.norm(total - self.commutator, 2))


def commutator_expand(B, A, phi, k, q=None, remainder_by_quadrature=False):
    """Expansion of ``[phi(A), B]`` to order ``k`` with remainder ``I_k``.

    ``terms[j-1] = sign/j! phi^(j)(A) ad_A^j(B)`` for ``j = 1..k-1`` and
    ``I_k = [phi(A), B] - sum(terms)``. With ``remainder_by_quadrature`` the
    remainder is also computed independently from its integral
    representation (see :func:`remainder_integral`).
    """
    if phi.order >= k:
        raise OrderViolation(f"symbol order {phi.order:g} must be below k = {k}")
    spec = A.spectral
    a = spec.eigenvalues
    V = spec.eigenvectors
    Bm = _dense(B)
    derivs = phi.derivatives(a, max(k - 1, 0))
    phiA = spec.function_matrix(derivs[0])
    comm = phiA @ Bm - Bm @ phiA
    terms = []
    for j in range(1, k):
        fj = spec.function_matrix(derivs[j])
        terms.append(SIGN_CONVENTION / math.factorial(j) * fj @ ad_iter_eigenbasis(Bm, A, j))
    remainder = comm - sum(terms, np.zeros_like(comm))
    res = ExpansionResult(terms, remainder, SIGN_CONVENTION, comm)
    if remainder_by_quadrature:
        Ik, cert = remainder_integral(Bm, A, phi, k, q or QuadratureConfig())
        res.remainder_quadrature = Ik
        res.certificate = cert
    return res


def remainder_kernel_exact(phi, a, k):
    """Divided-difference kernel of ``I_k`` in A's eigenbasis.

    ``(I_k)_ij = K_ij B~_ij`` with
    ``K_ij = phi(a_i) - sum_{j<k} phi^(j)(a_i)(a_j - a_i)^j/j! - phi(a_j)`` up to
    the sign fixed by the expansion; computed from exact derivatives.
    """
    d = phi.derivatives(a, max(k - 1, 0))
    diff = a[None, :] - a[:, None]  # a_j - a_i
    taylor = np.zeros_like(diff)
    for j in range(k):
        taylor = taylor + d[j][:, None] * diff**j / math.factorial(j)
    return taylor - d[0][None, :]


def remainder_integral(B, A, phi, k, q):
    """``I_k`` from the integral form of the Taylor remainder, by quadrature.

    In A's eigenbasis the integral factorizes into scalar integrals
    ``G(a_i, a_j) = (1/pi)∬ dbar / ((a_i - z)^k (a_j - z))`` which the
    grid evaluates for all eigenvalue pairs at once. Returns the matrix
    and the relative level-difference certificate.
    """
    spec = A.spectral
    a = spec.eigenvalues
    V = spec.eigenvectors
    Bt = V.conj().T @ _dense(B) @ V
    # the pair kernel has a pole of order k + 1 at the real axis
    ext = almost_analytic(phi, k + 3)
    G, cert = _pair_integrals(ext, a, k, q)
    adk = Bt * (a[None, :] - a[:, None]) ** k
    It = -((-1.0) ** k) * G * adk
    return V @ It @ V.conj().T, cert


def _pair_integrals(ext, a, k, q):
    y_floor = q.y_floor if q.y_floor is not None else max(1e-4 * _min_gap(a), 1e-8)
    prev = None
    diffs = []
    for level in range(q.refinement_levels + 1):
        scale = 2.0 ** (level / 2)
        x, wx, _ = _x_nodes(ext, a, q, scale)
        v, wv = _midpoints(0.0, 1.0, round(q.y_cells * scale))
        c = ext.coefficients(x)
        jx = np.sqrt(1.0 + x**2)
        X = x[:, None]
        D, Y = ext.dbar_on_grid(c, x, v)
        W = (wx * ext.c2 * jx)[:, None] * wv[None, :]
        keep = (np.abs(D) > 0) & (Y >= y_floor)
        Dw = (D * W)[keep]
        z = (X + 1j * Y)[keep]
        Ri = 1.0 / (a[:, None] - z[None, :])
        # the lower half plane contributes the complex conjugate
        G = (2.0 / math.pi) * ((Ri**k * Dw[None, :]) @ Ri.T).real
        if prev is not None:
            diffs.append(float(np.linalg.norm(G - prev) / max(np.linalg.norm(G), 1e-300)))
            if _error_estimate(diffs) <= q.target_rel_error:
                break
        prev = G
    return G, _error_estimate(diffs)


# --- exponent fits -------------------------------------------------------------


@dataclass
class ScalingFit:
    R_values: np.ndarray
    norms: np.ndarray
    fitted_slope: float
    residual: float
    target_slope: float
    verdict: str
    slope_tol: float = 0.3
    residual_cap: float = 0.5

    @property
    def passed(self):
        return self.verdict in ("pass", "identically zero")

    def to_dict(self):
        return {
            "R": [float(r) for r in self.R_values],
            "norms": [float(n) for n in self.norms],
            "fitted_slope": None if math.isnan(self.fitted_slope) else self.fitted_slope,
            "residual": None if math.isnan(self.residual) else self.residual,
            "target_slope": self.target_slope,
            "slope_tol": self.slope_tol,
            "verdict": self.verdict,
        }

    def csv_rows(self):
        return [("R", "norm")] + [(float(r), float(n)) for r, n in zip(self.R_values, self.norms)]


def scaling_probe(norm_family, R_grid, target_slope, slope_tol=0.3, residual_cap=0.5):
    """Fit ``log norm = slope * log R + c`` and compare the slope to a target."""
    R = np.asarray(R_grid, dtype=float)
    if R.size < 4:
        raise ValueError("scaling_probe needs at least 4 grid points")
    norms = np.array([float(norm_family(r)) for r in R])
    if np.all(norms == 0.0):
        return ScalingFit(R, norms, math.nan, math.nan, target_slope, "identically zero",
                          slope_tol, residual_cap)
    if np.all(np.abs(norms - norms[0]) < 1e-14):
        # a constant family has slope exactly 0; no fit needed
        ok = abs(target_slope) <= slope_tol
        return ScalingFit(R, norms, 0.0, 0.0, target_slope, "pass" if ok else "fail",
                          slope_tol, residual_cap)
    if np.any(norms <= 0.0):
        raise DegenerateFit("some norms vanish; cannot fit a power law")
    lx, ly = np.log(R), np.log(norms)
    slope, icpt = np.polyfit(lx, ly, 1)
    residual = float(np.max(np.abs(ly - (slope * lx + icpt))))
    ok = abs(slope - target_slope) <= slope_tol and residual <= residual_cap
    return ScalingFit(R, norms, float(slope), residual, target_slope,
                      "pass" if ok else "fail", slope_tol, residual_cap)


def weighted_norm(A, X, s_left, s_right):
    """``|| <A>^s_left X <A>^s_right ||`` with exact oracle weights."""
    spec = A.spectral
    L = spec.japanese_power(s_left)
    Rw = spec.japanese_power(s_right)
    return operator_norm(L @ _dense(X) @ Rw)


# --- scaling families -------------------------------------------------------------


def diagonal_conjugate(half_width=256):
    """``A = diag(-m, ..., m)``."""
    return from_dense(np.diag(np.arange(-half_width, half_width + 1, dtype=float)), label="diag")


def neighbour_coupling(n):
    """Symmetric nearest-neighbour matrix: every ``ad_A^j`` is bounded for diagonal ``A``."""
    return 0.5 * (np.eye(n, k=1) + np.eye(n, k=-1))


def remainder_family(A, B, rho, s, s_prime, k, family=None):
    """``R -> || <A>^s I_k(phi_R) <A>^s' ||`` with ``phi_R(t) = chi_tilde(t/R) <t>^rho``.

    ``I_k`` comes from :func:`commutator_expand` (exact derivative oracle).
    The expected decay is ``R^(rho + s + s' - k)`` when ``s' < 1`` and
    ``rho + s + s' < k``.
    """
    family = family or default_family()
    base = family.chi_tilde_total

    def norm(R):
        phi = scale_symbol(base, R) * japanese(rho)
        res = commutator_expand(B, A, phi, k)
        return weighted_norm(A, res.remainder, s, s_prime)

    return norm


def remainder_probe(A, B, rho, s, s_prime, k, R_grid, **fit_kw):
    fit = scaling_probe(remainder_family(A, B, rho, s, s_prime, k), R_grid,
                        rho + s + s_prime - k, **fit_kw)
    if not (s_prime < 1 and rho + s + s_prime < k):
        fit.verdict = "outside lemma hypotheses"
    return fit


def cutoff_weight_family(A, alpha, s=0.6):
    """``R -> || C_R <A>^alpha ||`` with ``C_R = sqrt(psi_R)(A)``; decay ``R^alpha``."""
    def norm(R):
        C = apply_function(A.spectral, make_phi_psi(s, R).sqrt_psi_R).matrix
        return weighted_norm(A, C, 0.0, alpha)

    return norm


def cutoff_commutator_family(A, B, alpha, s=0.6):
    """``R -> || [B, C_R] <A>^alpha ||``; decay ``R^(alpha - 1)`` for ``0 <= alpha < 1``."""
    Bm = _dense(B)

    def norm(R):
        C = apply_function(A.spectral, make_phi_psi(s, R).sqrt_psi_R).matrix
        return weighted_norm(A, Bm @ C - C @ Bm, 0.0, alpha)

    return norm


def theta_cutoff_family(H, A, theta, cutoff="chi", alpha=0.0, s=0.6):
    """``R -> || [theta(H), g_R(A)] <A>^alpha ||`` for a cutoff ``g_R`` of ``A``.

    ``cutoff`` picks ``g_R``: ``"chi"`` is ``chi(./R)``, ``"tilde_weight"`` is
    ``<t>^-s chi_tilde(t/R)``. In infinite volume with ``theta(H)`` smooth in
    ``A`` these decay like ``R^(alpha-1)`` and ``R^(alpha-s-1)``.
    """
    family = default_family()
    T = apply_function(H.spectral, theta).matrix
    if cutoff == "chi":
        make = lambda R: scale_symbol(family.chi, R)
    elif cutoff == "tilde_weight":
        make = lambda R: japanese(-s) * scale_symbol(family.chi_tilde_total, R)
    else:
        raise ValueError(f"unknown cutoff {cutoff!r}")

    def norm(R):
        G = apply_function(A.spectral, make(R)).matrix
        return weighted_norm(A, T @ G - G @ T, 0.0, alpha)

    return norm
