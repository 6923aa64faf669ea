"""Mourre constants, Virial residuals and the local-Hamiltonian identities.

A finite matrix satisfies the commutator estimate with a compact error term
for any constant, so only two numbers carry information here: the strict
constant (lowest eigenvalue of ``[H, iA]`` compressed to ``Ran E_I(H)``) and
the projected constant (same, after removing a projection ``P``). Behaviour
in the large-N limit is probed across truncation families instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import symbols as sym
from .errors import DimensionMismatch, HypothesisViolated, NonInvariantProjection, SymbolNotVanishingAtZero
from .operators import (
    Projection,
    RealInterval,
    SelfAdjointOperator,
    apply_function,
    from_dense,
    operator_norm,
    spectral_projection,
)

VACUOUS = math.inf


def _matrix(X):
    if isinstance(X, SelfAdjointOperator):
        return np.asarray(X.matrix)
    if isinstance(X, Projection):
        return np.asarray(X.matrix)
    return np.asarray(X)


def commutator_form(H, A):
    """``i(HA - AH)``, symmetrized so it is Hermitian to the last bit."""
    Hm, Am = _matrix(H), _matrix(A)
    if Hm.shape != Am.shape:
        raise DimensionMismatch(f"H is {Hm.shape}, A is {Am.shape}")
    C = 1j * (Hm @ Am - Am @ Hm)
    return from_dense(0.5 * (C + C.conj().T), label="[H,iA]")


def _range_basis(Q, rtol=1e-10):
    U, sv, _ = np.linalg.svd(Q)
    if sv.size == 0 or sv[0] == 0.0:
        return U[:, :0]
    return U[:, sv > rtol * max(sv[0], 1.0)]


def compressed_minimum(C, Q):
    """Lowest eigenvalue of ``C`` on ``Ran Q``; ``inf`` for a zero range."""
    U = _range_basis(np.asarray(Q))
    if U.shape[1] == 0:
        return VACUOUS
    M = U.conj().T @ _matrix(C) @ U
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


@dataclass
class MourreReport:
    interval: RealInterval
    c_strict: float
    c_projected: float
    eigenvalues_in_I: list
    virial_residuals: list
    commutator_norm: float
    flags: list = field(default_factory=list)

    @property
    def virial_max_residual(self):
        return max(self.virial_residuals, default=0.0)

    def to_dict(self):
        def num(c):
            return None if math.isinf(c) else c

        return {
            "interval": self.interval.to_dict(),
            "c_strict": num(self.c_strict),
            "c_projected": num(self.c_projected),
            "eigenvalues": [float(x) for x in self.eigenvalues_in_I],
            "virial_max_residual": self.virial_max_residual,
            "commutator_norm": self.commutator_norm,
            "flags": list(self.flags),
        }


def mourre_best_constant(H, A, I, P=None, commutator=None):
    """Best strict and projected Mourre constants of ``(H, A)`` on ``I``.

    ``c`` is the lowest eigenvalue of ``[H, iA]`` compressed to the range of
    ``E_I(H) P^perp`` (``P = 0`` for the strict constant). An empty range
    gives ``inf`` and a flag. ``commutator`` replaces ``[H, iA]`` in the
    compressions, e.g. by a model's bulk commutator; Virial residuals always
    use the literal one.
    """
    spec = H.spectral
    C = commutator_form(H, A)
    Cc = C if commutator is None else from_dense(commutator, sym_tol=1e-8, label="commutator")
    E = spectral_projection(spec, I)
    flags = ["finite-dimensional: the compact-error form holds for any c; only the strict/projected constants are informative"]
    c_strict = compressed_minimum(Cc, E.matrix)
    if P is None:
        P = Projection.zero(spec.dim)
    c_projected = compressed_minimum(Cc, E.matrix @ P.complement.matrix)
    if commutator is not None:
        flags.append("compressions use a supplied commutator")
    if math.isinf(c_strict):
        flags.append("vacuous strict compression: Ran E_I(H) = {0}")
    if math.isinf(c_projected):
        flags.append("vacuous projected compression: Ran E_I(H)P^perp = {0}")
    inside = I.contains(spec.eigenvalues, scale=spec.spectral_radius)
    return MourreReport(
        I,
        c_strict,
        c_projected,
        list(spec.eigenvalues[inside]),
        _virial_residuals(C, spec, inside),
        C.norm,
        flags,
    )


def _virial_residuals(C, spec, mask):
    V = spec.eigenvectors[:, mask]
    Cm = _matrix(C)
    return [float(abs(np.vdot(f, Cm @ f))) for f in V.T]


def virial_check(H, A, I, tol=1e-10):
    """``|<f, [H, iA] f>|`` for every eigenpair of ``H`` with eigenvalue in ``I``.

    Returns the residual list; use :func:`virial_passes` to compare with
    ``tol * ||[H, iA]||``.
    """
    spec = H.spectral
    inside = I.contains(spec.eigenvalues, scale=spec.spectral_radius)
    return _virial_residuals(commutator_form(H, A), spec, inside)


def virial_passes(H, A, I, tol=1e-10):
    res = virial_check(H, A, I)
    scale = commutator_form(H, A).norm
    return max(res, default=0.0) <= tol * max(scale, 1e-300)


def local_hamiltonian(H_spec, tau):
    """``H_tau = f(H)`` with ``f(t) = t tau(t)``."""
    return apply_function(H_spec, lambda t: t * tau(t), label="H_tau")


def interval_cutoffs(I):
    """A pair ``(tau, theta)`` of plateau cutoffs adapted to ``I``.

    ``theta`` is supported inside ``I`` and ``tau = 1`` on all of ``I``, so
    ``tau * theta = theta``.
    """
    w = I.width
    theta = sym.bump(I.lo + 0.25 * w, I.hi - 0.25 * w, 0.2 * w)
    tau = sym.bump(I.lo, I.hi, 0.25 * w)
    return tau, theta


def default_z_samples(I):
    mid, quarter = I.midpoint, 0.25 * I.width
    return [complex(x, y) for x in (mid - quarter, mid + quarter) for y in (0.1, -0.1, 0.01, -0.01)]


@dataclass
class TransferReport:
    c: float
    commutator_margin: float
    commutator_residual: float
    resolvent_residual: float
    flags: list

    def to_dict(self):
        return {
            "c": None if math.isinf(self.c) else self.c,
            "commutator_margin": self.commutator_margin,
            "commutator_residual": self.commutator_residual,
            "resolvent_residual": self.resolvent_residual,
            "flags": self.flags,
        }


def transfer_check(H, A, tau, theta, I, z_samples=None, P=None):
    """Check that ``H_tau`` can replace ``H`` inside ``theta(H)``.

    (a) ``theta(H) [H_tau, iA] theta(H) - c theta(H)^2`` has no eigenvalue
    below ``-1e-10`` (relative), where ``c`` is the Mourre constant on ``I``;
    (b) ``(H - z)^-1 theta(H) = (H_tau - z)^-1 theta(H)`` over ``z_samples``.
    """
    spec = H.spectral
    lam = spec.eigenvalues
    th, ta = theta(lam), tau(lam)
    gap = np.max(np.abs(th * ta - th), initial=0.0)
    if gap > 1e-12:
        raise HypothesisViolated(f"tau*theta differs from theta on spec(H) by {gap:.2e}")
    Ht = local_hamiltonian(spec, tau)
    Th = spec.function_matrix(th)
    flags = []

    report = mourre_best_constant(H, A, I, P)
    c = report.c_strict if P is None else report.c_projected
    Ct = _matrix(commutator_form(Ht, A))
    Q = Th if P is None else Th @ P.complement.matrix
    if math.isinf(c):
        flags.append("vacuous compression: theta(H) vanishes on spec(H)")
        margin, residual = 0.0, 0.0
    else:
        M = Q.conj().T @ Ct @ Q - c * (Q.conj().T @ Q)
        margin = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])
        scale = max(operator_norm(Ct), abs(c), 1.0) * max(operator_norm(Q), 1.0) ** 2
        residual = max(0.0, -margin) / scale

    z_samples = default_z_samples(I) if z_samples is None else z_samples
    Ht_spec = Ht.spectral
    resolvent = 0.0
    for z in z_samples:
        left = spec.resolvent(z) @ Th
        right = Ht_spec.resolvent(z) @ Th
        resolvent = max(resolvent, operator_norm(left - right))
    return TransferReport(c, margin, residual, resolvent, flags)


def feshbach_check(H, P, phi):
    """``max(||phi(HP^perp) P||, ||phi(HP^perp) - phi(H) P^perp||)``."""
    Hm, Pm = _matrix(H), _matrix(P)
    if Hm.shape != Pm.shape:
        raise DimensionMismatch(f"H is {Hm.shape}, P is {Pm.shape}")
    comm = operator_norm(Hm @ Pm - Pm @ Hm)
    if comm > 1e-10 * max(operator_norm(Hm), 1.0):
        raise NonInvariantProjection(f"||[H, P]|| = {comm:.2e}")
    at_zero = float(phi(np.zeros(1))[0])
    if abs(at_zero) > 1e-12:
        raise SymbolNotVanishingAtZero(f"phi(0) = {at_zero:.3e}")
    Pc = np.eye(Hm.shape[0]) - Pm
    HPc = from_dense(0.5 * (Hm @ Pc + Pc @ Hm), sym_tol=1e-8)
    left = apply_function(HPc.spectral, phi).matrix
    right = apply_function(H.spectral, phi).matrix @ Pc
    return max(operator_norm(left @ Pm), operator_norm(left - right))


def eigenvector_weight_norms(H, A, I, k):
    """Rows ``(lambda, [||A^j f|| for j = 0..k-2])`` for eigenpairs in ``I``."""
    spec = H.spectral
    Am = _matrix(A)
    inside = I.contains(spec.eigenvalues, scale=spec.spectral_radius)
    rows = []
    for lam, f in zip(spec.eigenvalues[inside], spec.eigenvectors[:, inside].T):
        norms, g = [], f
        for j in range(max(k - 1, 0)):
            norms.append(float(np.linalg.norm(g)))
            g = Am @ g
        rows.append((float(lam), norms))
    return rows


def _trend_slope(Ns, values):
    x, y = np.log(np.asarray(Ns, float)), np.log(np.maximum(np.asarray(values, float), 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def weight_norms_across(builder, Ns, k, interval=None, bound_slope=0.1):
    """Largest ``||A^j f||`` over eigenvectors in ``I`` along a truncation family.

    ``builder(N)`` returns a model instance. The verdict is "bounded" when the
    log-log slope of the maximum in ``N`` is at most ``bound_slope`` for
    every ``j``.
    """
    table = []
    for N in Ns:
        m = builder(N)
        I = interval if interval is not None else m.recommended_interval
        rows = eigenvector_weight_norms(m.H, m.A, I, k)
        table.append([max((r[1][j] for r in rows), default=0.0) for j in range(max(k - 1, 0))])
    table = np.array(table)
    slopes = [_trend_slope(Ns, table[:, j]) if np.all(table[:, j] > 0) else 0.0 for j in range(table.shape[1])]
    bounded = all(sl <= bound_slope for sl in slopes)
    return {"N": list(Ns), "max_norms": table.tolist(), "slopes": slopes,
            "verdict": "bounded" if bounded else "growing"}


def regularity_probe(builder, Ns, p=2):
    """Norms ``||ad_A^j(H)||``, ``j = 1..p``, along a truncation family.

    Only a surrogate for local regularity classes, which have no meaning at
    fixed finite size.
    """
    rows = []
    for N in Ns:
        m = builder(N)
        Hm, Am = _matrix(m.H), _matrix(m.A)
        X, norms = Hm, []
        for _ in range(p):
            X = X @ Am - Am @ X
            norms.append(operator_norm(X))
        rows.append(norms)
    return {"label": "regularity probe", "N": list(Ns), "norms": rows}
