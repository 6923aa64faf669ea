"""Weighted resolvent scans, special sequences and the propagation probe.

Everything is evaluated at ``Im z >= eta_floor``; below the floor a finite
matrix resolves its individual eigenvalues and growth trends in ``1/eta`` stop
meaning anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EtaBelowFloor, HypothesisViolated
from .operators import Projection, RealInterval, SelfAdjointOperator, WeightedResolvent, apply_function

RE_GRID_POINTS = 64
BOUNDED_SLOPE = 0.1
DIVERGENT_SLOPE = 0.4


def eta_floor(H, I):
    """``3 x`` mean eigenvalue spacing of ``H`` in ``I``.

    With no eigenvalue in ``I`` the floor is ``1e-12`` times the spectral
    radius.
    """
    spec = H.spectral
    count = int(I.contains(spec.eigenvalues, scale=spec.spectral_radius).sum())
    if count == 0:
        return 1e-12 * max(spec.spectral_radius, 1e-300)
    return 3.0 * I.width / count


def default_eta_grid(floor, points=5, span=16.0):
    """Geometric grid from ``span * floor`` down to ``floor``."""
    return floor * np.geomspace(span, 1.0, points)


def chebyshev_grid(I, n=RE_GRID_POINTS):
    j = np.arange(n)
    return np.sort(I.midpoint + 0.5 * I.width * np.cos((2 * j + 1) * np.pi / (2 * n)))


def fit_slope(eta, values):
    """Least-squares slope of ``log values`` against ``-log eta``."""
    x = -np.log(np.asarray(eta, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope)


def trend_verdict(slope, bounded=BOUNDED_SLOPE, divergent=DIVERGENT_SLOPE):
    if slope <= bounded:
        return "bounded-trend"
    if slope >= divergent:
        return "divergent-trend"
    return "inconclusive"


def _check_etas(eta_grid, floor):
    eta = np.asarray(eta_grid, dtype=float)
    if np.any(eta < floor * (1 - 1e-12)):
        raise EtaBelowFloor(f"eta {eta.min():.3e} below floor {floor:.3e}")
    return eta


def _sup_over_re(W, I, eta, grid, eigenvalues):
    """Max of ``||W(x + i eta)||`` over the grid, refined at nearby eigenvalues.

    Eigenvalues of ``H`` lying in the grid cells next to the grid argmax are
    added as candidates. Ties go to the smaller real part.
    """
    norms = np.array([W.norm(complex(x, eta)) for x in grid])
    best = int(np.argmax(norms))
    lo = grid[best - 1] if best > 0 else I.lo
    hi = grid[best + 1] if best + 1 < grid.size else I.hi
    extra = eigenvalues[(eigenvalues >= lo) & (eigenvalues <= hi)]
    x_best, n_best = grid[best], norms[best]
    for x in extra:
        n = W.norm(complex(x, eta))
        if n > n_best or (n == n_best and x < x_best):
            x_best, n_best = x, n
    return float(x_best), float(n_best)


@dataclass
class LAPScan:
    interval: RealInterval
    s: float
    eta_grid: np.ndarray
    sup_norms: np.ndarray
    argmax_re: np.ndarray
    projection_mode: str
    growth_slope: float
    eta_floor: float
    verdict: str

    def to_dict(self):
        return {
            "interval": self.interval.to_dict(),
            "s": self.s,
            "slope": self.growth_slope,
            "verdict": self.verdict,
            "eta_floor": self.eta_floor,
            "mode": self.projection_mode,
        }

    def csv_rows(self):
        return [("eta", "sup_norm")] + [(float(e), float(n)) for e, n in zip(self.eta_grid, self.sup_norms)]

    def plot_data(self):
        return "".join(f"{e:.17g} {n:.17g}\n" for e, n in zip(self.eta_grid, self.sup_norms))


def lap_scan(H, A, I, s, mode="full", eta_grid=None, re_points=RE_GRID_POINTS):
    """Sup over ``Re z in I`` of ``||<A>^-s (H - z)^-1 Q <A>^-s||`` for each eta.

    ``mode`` is ``"full"`` (``Q = 1``) or a :class:`Projection` ``P`` for the
    reduced scan (``Q = 1 - P``).
    """
    floor = eta_floor(H, I)
    eta = _check_etas(default_eta_grid(floor) if eta_grid is None else eta_grid, floor)
    if eta.size < 4:
        raise ValueError("the slope fit needs at least 4 eta values")
    if isinstance(mode, Projection):
        Q, label = mode.complement, "reduced"
    elif mode == "full":
        Q, label = None, "full"
    else:
        raise ValueError(f"mode must be 'full' or a Projection, got {mode!r}")
    W = WeightedResolvent(H, A.spectral, s, Q)
    grid = chebyshev_grid(I, re_points)
    ev = H.spectral.eigenvalues
    ev = ev[I.contains(ev, scale=H.spectral.spectral_radius)]
    xs, norms = [], []
    for e in eta:
        x, n = _sup_over_re(W, I, float(e), grid, ev)
        xs.append(x)
        norms.append(n)
    norms = np.array(norms)
    slope = fit_slope(eta, norms)
    return LAPScan(I, float(s), eta, norms, np.array(xs), label, slope, floor, trend_verdict(slope))


# --- special sequences -----------------------------------------------------------


@dataclass
class SequenceEntry:
    z: complex
    g: np.ndarray
    f: np.ndarray
    k: float


@dataclass
class SpecialSequence:
    entries: list
    s: float
    interval: RealInterval
    mass: float
    mass_sequence: list
    k_slope: float
    verdict: str
    weights: tuple = field(repr=False, default=None)

    @property
    def positive_mass(self):
        return self.verdict == "positive mass"

    @property
    def eta(self):
        return np.array([e.z.imag for e in self.entries])

    def identity_residuals(self, H):
        """Max deviations of ``||<A>^-s f_n||`` and ``k_n ||<A>^s (H - z_n) f_n||`` from 1."""
        w_minus, w_plus = self.weights
        Hm = np.asarray(H.matrix)
        r1 = r2 = 0.0
        for e in self.entries:
            r1 = max(r1, abs(np.linalg.norm(w_minus @ e.f) - 1.0))
            u = Hm @ e.f - e.z * e.f
            r2 = max(r2, abs(e.k * np.linalg.norm(w_plus @ u) - 1.0))
        return r1, r2

    def to_dict(self):
        return {
            "interval": self.interval.to_dict(),
            "s": self.s,
            "eta": self.eta.tolist(),
            "k": [e.k for e in self.entries],
            "re_z": [e.z.real for e in self.entries],
            "mass_sequence": self.mass_sequence,
            "mass": self.mass,
            "k_slope": self.k_slope,
            "verdict": self.verdict,
        }


def special_sequence(H_b, A, I, s, eta_schedule, re_points=RE_GRID_POINTS):
    """Approximate-eigenvector sequence ``(z_n, g_n, f_n, k_n)`` along ``eta_schedule``.

    ``z_n`` maximizes the weighted resolvent norm over ``Re z in I``,
    ``k_n`` is that norm, ``g_n`` the top right singular vector scaled to
    ``k_n ||g_n|| = 1`` and ``f_n = (H_b - z_n)^-1 <A>^-s g_n``.
    """
    eta = np.asarray(eta_schedule, dtype=float)
    if eta.size < 2 or np.any(np.diff(eta) >= 0):
        raise ValueError("eta_schedule must be strictly decreasing with at least 2 entries")
    A_spec = A.spectral
    W = WeightedResolvent(H_b, A_spec, s)
    grid = chebyshev_grid(I, re_points)
    ev = H_b.spectral.eigenvalues
    ev = ev[I.contains(ev, scale=H_b.spectral.spectral_radius)]
    H_spec = H_b.spectral
    entries, masses = [], []
    for e in eta:
        x, _ = _sup_over_re(W, I, float(e), grid, ev)
        z = complex(x, e)
        _, v = W.top(z)
        k = float(np.linalg.norm(W.matrix(z) @ v))
        g = v / k
        f = H_spec.resolvent(z) @ (W.weight @ g)
        entries.append(SequenceEntry(z, g, f, k))
        masses.append(float(np.linalg.norm(W.weight @ f)))
    ks = np.array([en.k for en in entries])
    slope = fit_slope(eta, ks)
    verdict = "positive mass" if slope >= DIVERGENT_SLOPE else "not a special sequence"
    return SpecialSequence(entries, float(s), I, masses[-1], masses, slope, verdict,
                           (W.weight, W.inverse_weight))


def _decay_slope(eta, values, scale):
    values = np.asarray(values, dtype=float)
    if np.all(values <= 1e-13 * scale):
        return math.inf
    return float(np.polyfit(np.log(eta), np.log(np.maximum(values, 1e-300)), 1)[0])


def virial_like_check(seq, H_b, phi_A, min_slope=0.5):
    """``v_n = |<f_n, [H_b, phi(A)] f_n>|`` and its decay rate in ``eta_n``.

    ``phi_A`` is the bounded operator ``phi(A)`` (matrix or operator).
    Passes when ``v_n`` vanishes or decays at least like ``eta^min_slope``.
    """
    B = np.asarray(phi_A.matrix if isinstance(phi_A, SelfAdjointOperator) else phi_A)
    Hm = np.asarray(H_b.matrix)
    K = Hm @ B - B @ Hm
    v = [float(abs(np.vdot(e.f, K @ e.f))) for e in seq.entries]
    scale = max(np.linalg.norm(K, 2), 1e-300) * max(np.linalg.norm(e.f) ** 2 for e in seq.entries)
    slope = _decay_slope(seq.eta, v, scale)
    return {"eta": seq.eta.tolist(), "v": v, "decay_slope": slope,
            "verdict": "pass" if slope >= min_slope else "fail"}


def localization_check(seq, H, theta, A=None):
    """``||(1 - theta)(H) f_n||`` and the defect data of ``theta(H) f_n``.

    ``theta`` must equal 1 at every eigenvalue of ``H`` in the sequence's
    interval. With ``A`` the measured ``||<A>^s theta(H) <A>^-s||`` is
    reported as well.
    """
    spec = H.spectral
    lam = spec.eigenvalues
    inside = seq.interval.contains(lam, scale=spec.spectral_radius)
    th = np.asarray(theta(lam), dtype=float)
    if np.any(np.abs(th[inside] - 1.0) > 1e-12):
        raise HypothesisViolated("theta is not 1 on the spectrum inside the interval")
    Th = spec.function_matrix(th)
    Rest = spec.function_matrix(1.0 - th)
    w_minus, w_plus = seq.weights
    Hm = np.asarray(H.matrix)
    leak, mass, defect = [], [], []
    for e in seq.entries:
        leak.append(float(np.linalg.norm(Rest @ e.f)))
        tf = Th @ e.f
        mass.append(float(np.linalg.norm(w_minus @ tf)))
        defect.append(float(e.k * np.linalg.norm(w_plus @ (Hm @ tf - e.z * tf))))
    out = {"eta": seq.eta.tolist(), "leak": leak, "mass": mass, "scaled_defect": defect,
           "verdict": seq.verdict}
    scale = max(np.linalg.norm(e.f) for e in seq.entries)
    out["leak_slope"] = _decay_slope(seq.eta, leak, scale)
    if A is not None:
        out["weight_conjugated_norm"] = float(np.linalg.norm(w_plus @ Th @ w_minus, 2))
    return out


# --- propagation probe ------------------------------------------------------------


@dataclass
class PropagationTable:
    T: np.ndarray
    J: np.ndarray
    plateau: float
    deviation_bound: np.ndarray

    @property
    def ratio(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.T > 0, self.J / (2 * self.T), 0.0)

    def to_dict(self):
        return {"T": self.T.tolist(), "J": self.J.tolist(), "J_over_2T": self.ratio.tolist(),
                "plateau": self.plateau, "deviation_bound": self.deviation_bound.tolist()}


def time_decay_probe(H, A, I, s, f, T_grid, degeneracy_tol=1e-12):
    """``J(T) = ∫_{-T}^{T} ||<A>^-s e^{itH} E_I(H) f||^2 dt`` in closed form.

    With ``c = V^H E_I f`` and ``W = V^H <A>^-2s V``,
    ``J(T) = sum_jk conj(c_j) c_k W_jk 2 sin(w_jk T) / w_jk`` where
    ``w_jk = lambda_k - lambda_j`` (``2T`` on the diagonal). ``plateau`` is the
    limit of ``J/2T``; ``deviation_bound[i]`` bounds ``|J/2T - plateau|``.
    """
    f = np.asarray(f, dtype=complex)
    if abs(np.linalg.norm(f) - 1.0) > 1e-10:
        raise ValueError("f must be a unit vector")
    spec = H.spectral
    lam = spec.eigenvalues
    mask = I.contains(lam, scale=spec.spectral_radius)
    V = spec.eigenvectors[:, mask]
    c = V.conj().T @ f
    w2 = A.spectral.japanese_power(-2.0 * s)
    W = V.conj().T @ w2 @ V
    lm = lam[mask]
    omega = lm[None, :] - lm[:, None]
    Kmat = np.conj(c)[:, None] * c[None, :] * W
    same = np.abs(omega) <= degeneracy_tol * max(spec.spectral_radius, 1.0)
    plateau = float(np.real(Kmat[same].sum()))
    T = np.asarray(T_grid, dtype=float)
    J = np.empty_like(T)
    for i, t in enumerate(T):
        # 2 sin(wT)/w = 2T sinc(wT/pi) in numpy's normalization
        J[i] = float(np.real(np.sum(Kmat * 2.0 * t * np.sinc(omega * t / np.pi))))
    off = np.abs(Kmat[~same])
    gaps = np.abs(omega[~same])
    with np.errstate(divide="ignore"):
        bound = np.array([float(np.sum(off / (gaps * t))) if t > 0 else math.inf for t in T])
    return PropagationTable(T, J, plateau, bound)
