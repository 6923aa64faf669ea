"""Symbols of a real variable, smooth cutoff families, almost-analytic extensions.

A :class:`Symbol` is a function together with a declared order ``rho``
(``|f^(k)(t)| <~ <t>^(rho - k)``). Built-in symbols produce exact Taylor
jets, so derivatives of any order needed by the quadrature are available
without finite differencing. User callables fall back to central
differences and are flagged as lower accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import jets
from .errors import BadExponent, BadScale, InsufficientDerivatives
from .operators import RealInterval
from .registry import build

# closed-form symbols can be differentiated to any order; this is the
# number advertised to consumers
JET_MAX_DERIV = 24
FD_ROUNDOFF_FACTOR = 4.0
FD_MAX_DERIV = 3

# the bump exp(-1/u) is set to zero below this threshold (it is < 1e-260 there)
_BUMP_EPS = 1.0 / 600.0


def _shift(u, c):
    out = np.array(u, copy=True)
    out[0] = out[0] + c
    return out


def _masked(u, mask, fill):
    """Replace the jet ``u`` by the constant ``fill`` where ``mask`` is False."""
    safe = np.array(u, copy=True)
    safe[:, ~mask] = 0.0
    safe[0][~mask] = fill
    return safe


def _bump(u):
    """Jet of ``b(u) = exp(-1/u)`` for ``u > 0``, zero otherwise."""
    mask = u[0] > _BUMP_EPS
    out = jets.exp(-jets.reciprocal(_masked(u, mask, 1.0)))
    out[:, ~mask] = 0.0
    return out


def smoothstep_jet(u):
    """``S(u) = b(u) / (b(u) + b(1 - u))``: 0 for ``u <= 0``, 1 for ``u >= 1``."""
    bu = _bump(u)
    bv = _bump(_shift(-u, 1.0))
    return jets.div(bu, bu + bv)


def ramp_root_jet(u):
    """``Q(u) = sqrt(2 S(u) S'(u))``, written without a square root of zero.

    With ``D = b(u) + b(1-u)`` one has ``2 S S' = 2 b(u)^2 b(1-u) (u^-2 + (1-u)^-2) / D^3``.
    """
    mask = (u[0] > _BUMP_EPS) & (u[0] < 1.0 - _BUMP_EPS / 2)
    us = _masked(u, mask, 0.5)
    vs = _shift(-us, 1.0)
    bu = jets.exp(-jets.reciprocal(us))
    half_bv = jets.exp(-0.5 * jets.reciprocal(vs))
    D = bu + jets.mul(half_bv, half_bv)
    inv_u2 = jets.reciprocal(jets.mul(us, us))
    inv_v2 = jets.reciprocal(jets.mul(vs, vs))
    root = jets.sqrt(inv_u2 + inv_v2)
    out = math.sqrt(2.0) * jets.mul(jets.mul(bu, half_bv), jets.mul(root, jets.power(D, -1.5)))
    out[:, ~mask] = 0.0
    return out


def _hull(a, b):
    if a is None or b is None:
        return None
    return RealInterval(min(a.lo, b.lo), max(a.hi, b.hi), True, True)


def _intersection(a, b):
    if a is None:
        return b
    if b is None:
        return a
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        lo = hi = 0.5 * (lo + hi)
    return RealInterval(lo, hi, True, True)


class Symbol:
    """Smooth function with derivative oracle and declared symbol order.

    Parameters
    ----------
    taylor : callable
        ``taylor(t, K)`` returns normalized Taylor coefficients of shape
        ``(K + 1,) + t.shape``.
    order : float
        Declared order ``rho``.
    max_deriv : int
        Highest derivative the oracle supports.
    support : RealInterval or None
        Closed set outside which the symbol and all its derivatives vanish.
    """

    def __init__(self, taylor, order, max_deriv=JET_MAX_DERIV, support=None,
                 deriv_mode="closed_form", name="symbol", analytic=False):
        self._taylor = taylor
        # real-analytic symbols tolerate high Taylor orders in extensions;
        # bump-based cutoffs have huge high derivatives and do not
        self.analytic = analytic
        self.order = float(order)
        self.max_deriv = int(max_deriv)
        self.support = support
        self.deriv_mode = deriv_mode
        self.name = name

    def __repr__(self):
        return f"Symbol({self.name}, order={self.order:g}, mode={self.deriv_mode})"

    def taylor(self, t, K):
        if K > self.max_deriv:
            raise InsufficientDerivatives(
                f"{self.name} supports {self.max_deriv} derivatives, {K} requested"
            )
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self.taylor(t[None], K)[:, 0]
        c = np.asarray(self._taylor(t, K), dtype=float)
        if self.support is not None:
            inside = (t >= self.support.lo) & (t <= self.support.hi)
            c = np.where(inside, c, 0.0)
        return c

    def derivatives(self, t, K):
        """Array ``d[k] = f^(k)(t)`` for ``k = 0..K``."""
        return jets.derivatives(self.taylor(t, K))

    def eval(self, k, t):
        return math.factorial(k) * self.taylor(t, k)[k]

    def __call__(self, t):
        return self.eval(0, t)

    # arithmetic --------------------------------------------------------
    def _combine(self, other, op, order, support, label):
        if not isinstance(other, Symbol):
            other = constant(float(other))
        mode = "closed_form" if self.deriv_mode == other.deriv_mode == "closed_form" else "finite_difference"
        return Symbol(
            lambda t, K: op(self._taylor(t, K), other._taylor(t, K)),
            order,
            min(self.max_deriv, other.max_deriv),
            support,
            mode,
            label,
            self.analytic and other.analytic,
        )

    def __add__(self, other):
        if not isinstance(other, Symbol):
            other = constant(float(other))
        return self._combine(other, np.add, max(self.order, other.order),
                             _hull(self.support, other.support), f"({self.name}+{other.name})")

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if not isinstance(other, Symbol):
            c = float(other)
            return Symbol(lambda t, K: c * self._taylor(t, K), self.order, self.max_deriv,
                          self.support, self.deriv_mode, f"{c:g}*{self.name}", self.analytic)
        return self._combine(other, jets.mul, self.order + other.order,
                             _intersection(self.support, other.support),
                             f"{self.name}*{other.name}")

    __rmul__ = __mul__

    def derivative(self):
        """The symbol ``f'`` (order drops by one)."""
        def taylor(t, K):
            c = self._taylor(t, K + 1)
            return c[1:] * np.arange(1, K + 2).reshape((-1,) + (1,) * (c.ndim - 1))

        return Symbol(taylor, self.order - 1, self.max_deriv - 1, self.support,
                      self.deriv_mode, f"{self.name}'", self.analytic)


def from_jet(fn, order, support=None, name="symbol", analytic=False):
    """Symbol whose jet is ``fn(u)`` applied to the jet ``u`` of the identity."""
    return Symbol(lambda t, K: fn(jets.variable(t, K)), order, support=support, name=name,
                  analytic=analytic)


def constant(c):
    return Symbol(lambda t, K: jets.constant(c, t, K), 0.0, name=f"{c:g}", analytic=True)


def identity():
    return from_jet(lambda u: u, 1.0, name="identity", analytic=True)


def japanese(alpha):
    """``t -> <t>^alpha = (1 + t^2)^(alpha/2)``, a symbol of order ``alpha``."""
    return from_jet(lambda u: jets.power(_shift(jets.mul(u, u), 1.0), 0.5 * alpha),
                    alpha, name=f"japanese{{alpha={alpha:g}}}", analytic=True)


def weight(s):
    """The weight ``<t>^-s``."""
    sym = japanese(-s)
    sym.name = f"weight{{s={s:g}}}"
    return sym


def lorentzian():
    """``(1 + t^2)^-1``."""
    return from_jet(lambda u: jets.reciprocal(_shift(jets.mul(u, u), 1.0)), -2.0,
                    name="lorentzian", analytic=True)


def bump(lo, hi, margin):
    """Smooth plateau: 1 on ``[lo, hi]``, 0 outside ``[lo - margin, hi + margin]``."""
    if margin <= 0 or lo > hi:
        raise ValueError("bump needs lo <= hi and a positive margin")

    def fn(u):
        left = smoothstep_jet(_shift(u, margin - lo) / margin)
        right = smoothstep_jet(_shift(-u, hi + margin) / margin)
        return jets.mul(left, right)

    return from_jet(fn, 0.0, RealInterval(lo - margin, hi + margin, True, True),
                    f"bump{{lo={lo:g},hi={hi:g},margin={margin:g}}}")


def from_callable(f, order, support=None, name="user", step=1e-3):
    """Wrap a plain vectorized function; derivatives by central differences.

    The stencil has 9 points (offsets -4..4) with spacing ``h = step * <t>``.
    Each derivative is also taken at spacing ``2h``; where the two agree to
    within a few times the roundoff of the narrow stencil (``eps |f| / h**k``)
    the wide one is used, since it carries 2**k less roundoff. Smooth symbols
    like ``<t>^a`` need that for k = 3; bump functions keep the narrow one.
    """
    offsets = np.arange(-4, 5, dtype=float)
    vander = np.array([offsets**m / math.factorial(m) for m in range(9)])
    weights = np.linalg.solve(vander, np.eye(9))  # column k gives the k-th derivative

    abs_sums = np.abs(weights).sum(axis=0)

    def taylor(t, K):
        h = step * np.sqrt(1.0 + t**2)
        narrow = np.stack([np.asarray(f(t + j * h), dtype=float) for j in offsets])
        wide = np.stack([np.asarray(f(t + 2.0 * j * h), dtype=float) for j in offsets])
        size = np.max(np.abs(narrow), axis=0)
        c = np.empty((K + 1,) + t.shape)
        c[0] = narrow[4]
        for k in range(1, K + 1):
            d1 = np.tensordot(weights[:, k], narrow, axes=1) / h**k
            d2 = np.tensordot(weights[:, k], wide, axes=1) / (2.0 * h) ** k
            roundoff = FD_ROUNDOFF_FACTOR * np.finfo(float).eps * abs_sums[k] * size / h**k
            c[k] = np.where(np.abs(d2 - d1) <= roundoff, d2, d1) / math.factorial(k)
        return c

    return Symbol(taylor, order, FD_MAX_DERIV, support, "finite_difference", name)


def with_finite_differences(sym, step=1e-3):
    """Same function as ``sym`` but with derivatives by finite differences."""
    return from_callable(sym, sym.order, sym.support, sym.name + "[fd]", step)


def scale_symbol(sym, R):
    """``t -> sym(t / R)`` for ``R >= 1``."""
    if not R >= 1.0:
        raise BadScale(f"scale must be >= 1, got {R}")
    R = float(R)
    support = None
    if sym.support is not None:
        support = RealInterval(sym.support.lo * R, sym.support.hi * R, True, True)

    def taylor(t, K):
        return jets.scale_argument(sym._taylor(t / R, K), 1.0 / R)

    return Symbol(taylor, sym.order, sym.max_deriv, support, sym.deriv_mode,
                  f"{sym.name}_{R:g}", sym.analytic)


@dataclass(frozen=True)
class CutoffFamily:
    """Smooth partition of unity ``1 = chi + chi_tilde_plus + chi_tilde_minus``.

    ``sqrt_chi_tilde[sigma]`` squares to ``chi_tilde_sigma`` and
    ``sqrt_sigma_chi_tilde_prime[sigma]`` squares to ``sigma * chi_tilde_sigma'``
    for ``sigma`` in ``(+1, -1)``.
    """

    chi: Symbol
    chi_tilde_plus: Symbol
    chi_tilde_minus: Symbol
    sqrt_chi_tilde: dict
    sqrt_sigma_chi_tilde_prime: dict
    profile: str = "S(u) = b(u)/(b(u)+b(1-u)), b(u) = exp(-1/u)"

    def chi_tilde(self, sigma):
        return self.chi_tilde_plus if sigma > 0 else self.chi_tilde_minus

    @property
    def chi_tilde_total(self):
        """``1 - chi``."""
        return self.chi_tilde_plus + self.chi_tilde_minus


def _ramp(sigma):
    # jet of u -> sigma*u - 1 for the ramps living on sigma*[1, 2]
    return lambda u: _shift(sigma * u, -1.0)


def make_cutoff_family():
    inf = math.inf
    plus_support = RealInterval(1.0, inf, True, True)
    minus_support = RealInterval(-inf, -1.0, True, True)

    def tilde(sigma):
        ramp = _ramp(sigma)
        return lambda u: jets.mul(smoothstep_jet(ramp(u)), smoothstep_jet(ramp(u)))

    tilde_plus = from_jet(tilde(1), 0.0, plus_support, "chi_tilde_plus")
    tilde_minus = from_jet(tilde(-1), 0.0, minus_support, "chi_tilde_minus")

    def chi_fn(u):
        return jets.constant(1.0, u[0], u.shape[0] - 1) - tilde(1)(u) - tilde(-1)(u)

    chi = from_jet(chi_fn, 0.0, RealInterval(-2.0, 2.0, True, True), "chi")
    sqrt_tilde = {
        1: from_jet(lambda u: smoothstep_jet(_ramp(1)(u)), 0.0, plus_support, "sqrt_chi_tilde_plus"),
        -1: from_jet(lambda u: smoothstep_jet(_ramp(-1)(u)), 0.0, minus_support, "sqrt_chi_tilde_minus"),
    }
    sqrt_prime = {
        1: from_jet(lambda u: ramp_root_jet(_ramp(1)(u)), 0.0,
                    RealInterval(1.0, 2.0, True, True), "sqrt_chi_tilde_plus_prime"),
        -1: from_jet(lambda u: ramp_root_jet(_ramp(-1)(u)), 0.0,
                     RealInterval(-2.0, -1.0, True, True), "sqrt_minus_chi_tilde_minus_prime"),
    }
    return CutoffFamily(chi, tilde_plus, tilde_minus, sqrt_tilde, sqrt_prime)


_FAMILY = None


def default_family():
    global _FAMILY
    if _FAMILY is None:
        _FAMILY = make_cutoff_family()
    return _FAMILY


def g_sup(s):
    """``sup_t |t| <t>^-2s``, attained at ``t^2 = 1 / (2s - 1)``."""
    t2 = 1.0 / (2.0 * s - 1.0)
    return math.sqrt(t2) * (1.0 + t2) ** (-s)


@dataclass(frozen=True)
class PhiPsi:
    phi_R: Symbol
    psi_R: Symbol
    sqrt_psi_R: Symbol
    h: float
    psi_product: Symbol


def make_phi_psi(s, R, family=None):
    """Build ``phi_R``, ``psi_R``, ``sqrt(psi_R)`` and the constant ``h``.

    With ``g(t) = t <t>^-2s``:
    ``phi_R = sum_sigma chi_tilde_sigma(t/R)^2 (sigma h - g)`` and
    ``psi_R = R (phi_R' + (chi_tilde_+^2 + chi_tilde_-^2)(t/R) g')``.
    ``psi_product`` evaluates the same function as
    ``sum_sigma 2 chi_tilde_sigma'(t/R) chi_tilde_sigma(t/R) (sigma h - g)``.
    """
    if not 0.5 < s < 1.0:
        raise BadExponent(f"s must lie in (1/2, 1), got {s}")
    if not R >= 1.0:
        raise BadScale(f"scale must be >= 1, got {R}")
    family = family or default_family()
    R = float(R)
    h = 1.01 * g_sup(s)

    def g(u):
        return jets.mul(u, jets.power(_shift(jets.mul(u, u), 1.0), -s))

    def phi_fn(u):
        out = 0.0
        for sigma in (1, -1):
            st = smoothstep_jet(_shift(sigma * u / R, -1.0))
            st2 = jets.mul(st, st)
            out = out + jets.mul(jets.mul(st2, st2), _shift(-g(u), sigma * h))
        return out

    phi = from_jet(phi_fn, 0.0, name=f"phi_R{{s={s:g},R={R:g}}}")
    g_prime = from_jet(g, 1.0 - 2.0 * s).derivative()
    tilde_sq = scale_symbol(family.chi_tilde_plus * family.chi_tilde_plus
                            + family.chi_tilde_minus * family.chi_tilde_minus, R)
    psi = R * (phi.derivative() + tilde_sq * g_prime)
    psi.support = RealInterval(-2.0 * R, 2.0 * R, True, True)
    psi.name = f"psi_R{{s={s:g},R={R:g}}}"

    def product_fn(u):
        out = 0.0
        for sigma in (1, -1):
            v = _shift(sigma * u / R, -1.0)
            st = smoothstep_jet(v)
            q = ramp_root_jet(v)
            # sigma * chi_tilde_sigma' (in the variable t/R) equals q^2
            out = out + 2.0 * jets.mul(jets.mul(q, q), jets.mul(jets.mul(st, st), sigma * _shift(-g(u), sigma * h)))
        return out

    def sqrt_fn(u):
        out = 0.0
        for sigma in (1, -1):
            v = _shift(sigma * u / R, -1.0)
            amp = jets.sqrt(_shift(-sigma * g(u), h))
            out = out + math.sqrt(2.0) * jets.mul(jets.mul(ramp_root_jet(v), smoothstep_jet(v)), amp)
        return out

    support = RealInterval(-2.0 * R, 2.0 * R, True, True)
    product = from_jet(product_fn, 0.0, support, f"psi_R_product{{s={s:g},R={R:g}}}")
    root = from_jet(sqrt_fn, 0.0, support, f"sqrt_psi_R{{s={s:g},R={R:g}}}")
    return PhiPsi(phi, psi, root, h, product)


def probe_grid(R_max=1.0, n=10_000):
    """``n`` Chebyshev points on ``[-10 R_max, 10 R_max]``."""
    k = np.arange(n)
    return 10.0 * R_max * np.cos(np.pi * (k + 0.5) / n)


def seminorm(sym, k, grid=None, weight_power=None):
    """On-grid ``sup <t>^(k - rho) |f^(k)(t)|``; ``weight_power`` overrides ``k - rho``."""
    grid = probe_grid() if grid is None else grid
    p = k - sym.order if weight_power is None else weight_power
    d = sym.eval(k, grid)
    return float(np.max((1.0 + grid**2) ** (0.5 * p) * np.abs(d)))


def scaling_seminorm(sym, k, grid):
    """On-grid ``sup |t|^k |f^(k)(t)|``, the quantity bounded uniformly in the scale."""
    return float(np.max(np.abs(grid) ** k * np.abs(sym.eval(k, grid))))


class AlmostAnalyticExtension:
    """Almost-analytic extension of order ``l`` of a symbol.

    ``phi^C(x + iy) = (sum_{r<=l} phi^(r)(x) (iy)^r / r!) sigma(y / (c2 <x>))``
    with ``sigma(v) = chi(2 v)``, so the extension vanishes for
    ``|y| > c2 <x>``.
    """

    def __init__(self, base, l, family=None, c2=0.5):
        if l < 1:
            raise ValueError("Taylor order l must be >= 1")
        if base.max_deriv < l + 1:
            raise InsufficientDerivatives(
                f"{base.name} has {base.max_deriv} derivatives, extension of order {l} needs {l + 1}"
            )
        self.base = base
        self.l = int(l)
        self.c2 = float(c2)
        self.family = family or default_family()

    @property
    def taylor_order(self):
        return self.l

    def coefficients(self, x):
        """Taylor coefficients ``phi^(r)(x)/r!`` for ``r = 0..l+1``."""
        return self.base.taylor(x, self.l + 1)

    def _cutoff(self, u):
        c = self.family.chi.taylor(2.0 * u, 1)
        return c[0], 2.0 * c[1]

    def extension(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        c = self.coefficients(x)
        jx = np.sqrt(1.0 + x**2)
        sig, _ = self._cutoff(y / (self.c2 * jx))
        T = np.zeros(x.shape, dtype=complex)
        iy = 1j * y
        for r in range(self.l, -1, -1):
            T = T * iy + c[r]
        return T * sig

    def dbar_from_coefficients(self, c, x, y, cutoff=None):
        """``(d/dx + i d/dy) phi^C / 2`` given precomputed coefficients at ``x``.

        ``cutoff`` may carry ``(sigma(u), sigma'(u))`` already evaluated at
        ``u = y / (c2 <x>)``.
        """
        jx2 = 1.0 + x**2
        jx = np.sqrt(jx2)
        u = y / (self.c2 * jx)
        sig, dsig = self._cutoff(u) if cutoff is None else cutoff
        iy = 1j * y
        T = np.zeros(np.broadcast_shapes(x.shape, y.shape), dtype=complex)
        for r in range(self.l, -1, -1):
            T = T * iy + c[r]
        interior = (self.l + 1) * c[self.l + 1] * iy**self.l * sig
        cutoff = T * dsig * (-u * x / jx2 + 1j / (self.c2 * jx))
        return 0.5 * (interior + cutoff)

    def dbar_on_grid(self, c, x, v):
        """``dbar`` at ``y = c2 <x> v`` for 1-D ``x`` (coefficients ``c``) and 1-D ``v``."""
        sig, dsig = self._cutoff(v)
        X = x[..., None]
        Y = self.c2 * np.sqrt(1.0 + X**2) * v
        return self.dbar_from_coefficients(c[..., None], X, Y, (sig, dsig)), Y

    def dbar(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return self.dbar_from_coefficients(self.coefficients(x), x, y)

    def probe_extent(self):
        sup = self.base.support
        if sup is not None and np.isfinite(sup.lo) and np.isfinite(sup.hi):
            return max(1.0, abs(sup.lo), abs(sup.hi))
        return 10.0

    @cached_property
    def c1(self):
        """Measured ``sup |dbar| <x>^(l+1-rho) |y|^-l`` on the probe grid."""
        x = probe_grid(self.probe_extent(), 2000)
        v = np.linspace(1.0 / 64, 1.0, 64)
        X, Vg = np.meshgrid(x, v, indexing="ij")
        jx = np.sqrt(1.0 + X**2)
        Y = self.c2 * jx * Vg
        vals = np.abs(self.dbar(X, Y)) * jx ** (self.l + 1 - self.base.order) / Y**self.l
        return float(np.max(vals))


def default_taylor_order(sym):
    """Taylor order that keeps quadrature cheap: high for analytic symbols."""
    return min(6, sym.max_deriv - 1) if sym.analytic else min(2, sym.max_deriv - 1)


def almost_analytic(sym, l=None, family=None):
    return AlmostAnalyticExtension(sym, default_taylor_order(sym) if l is None else l, family)


def _phi_R(s, R):
    return make_phi_psi(s, R).phi_R


def _psi_R(s, R):
    return make_phi_psi(s, R).psi_R


def _sqrt_psi_R(s, R):
    return make_phi_psi(s, R).sqrt_psi_R


def _chi_R(R=1.0):
    return scale_symbol(default_family().chi, R)


SYMBOL_REGISTRY = {
    "chi": (lambda: default_family().chi, ()),
    "chi_R": (_chi_R, ("R",)),
    "chi_tilde_plus": (lambda: default_family().chi_tilde_plus, ()),
    "chi_tilde_minus": (lambda: default_family().chi_tilde_minus, ()),
    "chi_tilde": (lambda: default_family().chi_tilde_total, ()),
    "identity": (identity, ()),
    "lorentzian": (lorentzian, ()),
    "weight": (weight, ("s",)),
    "japanese": (japanese, ("alpha",)),
    "bump": (bump, ("lo", "hi", "margin")),
    "phi_R": (_phi_R, ("s", "R")),
    "psi_R": (_psi_R, ("s", "R")),
    "sqrt_psi_R": (_sqrt_psi_R, ("s", "R")),
}


def symbol_from_reference(text):
    """Resolve e.g. ``"phi_R{s=0.6,R=8}"`` against :data:`SYMBOL_REGISTRY`."""
    return build(SYMBOL_REGISTRY, text)
