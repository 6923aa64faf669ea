"""Dense Hermitian spectral engine.

Every higher module goes through :class:`SelfAdjointOperator` and its cached
:class:`SpectralData`. Functions of an operator and resolvents are evaluated
in the eigenbasis, so a single ``eigh`` call serves whole grids of spectral
parameters.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import (
    AsymmetryExceedsTolerance,
    EigensolverFailure,
    FunctionUndefinedAtEigenvalue,
    NonSquare,
    ParseError,
    RealShift,
)

# above this dimension operator norms go through ARPACK instead of a full SVD
DENSE_NORM_MAX_DIM = 96


@dataclass(frozen=True)
class RealInterval:
    """Interval of the real line with a deterministic membership rule.

    Closed ends accept points within ``boundary_tol`` outside the interval;
    open ends reject points within ``boundary_tol`` inside it. The default
    is the half-open ``[lo, hi)``.
    """

    lo: float
    hi: float
    closed_lo: bool = True
    closed_hi: bool = False
    boundary_tol: float | None = None

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval: lo={self.lo} > hi={self.hi}")

    @classmethod
    def closed(cls, lo, hi, boundary_tol=None):
        return cls(float(lo), float(hi), True, True, boundary_tol)

    @classmethod
    def parse(cls, text):
        """Parse ``"lo:hi"`` into a closed interval."""
        try:
            lo, hi = (float(part) for part in text.split(":"))
        except ValueError as exc:
            raise ValueError(f"interval must look like 'lo:hi', got {text!r}") from exc
        return cls.closed(lo, hi)

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    def tolerance(self, scale=1.0):
        if self.boundary_tol is not None:
            return self.boundary_tol
        return 1e-12 * max(scale, 1e-300)

    def contains(self, values, scale=1.0):
        values = np.asarray(values, dtype=float)
        tol = self.tolerance(scale)
        lower = values >= self.lo - tol if self.closed_lo else values > self.lo + tol
        upper = values <= self.hi + tol if self.closed_hi else values < self.hi - tol
        return lower & upper

    def expanded(self, margin):
        return RealInterval(
            self.lo - margin, self.hi + margin, self.closed_lo, self.closed_hi, self.boundary_tol
        )

    def to_dict(self):
        return {
            "lo": self.lo,
            "hi": self.hi,
            "closed_lo": self.closed_lo,
            "closed_hi": self.closed_hi,
        }


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Ascending eigenvalues and a unitary matrix of eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(self.eigenvalues)))

    def function_matrix(self, values):
        """``V diag(values) V^H`` for a vector of (possibly complex) values."""
        V = self.eigenvectors
        return (V * values) @ V.conj().T

    def resolvent(self, z):
        z = complex(z)
        if z.imag == 0.0:
            raise RealShift(f"resolvent requested at real point {z.real}")
        return self.function_matrix(1.0 / (self.eigenvalues - z))

    def japanese_power(self, alpha):
        """``<A>^alpha = (1 + A^2)^(alpha/2)`` as a dense matrix."""
        return self.function_matrix((1.0 + self.eigenvalues**2) ** (0.5 * alpha))

    def reconstruct(self):
        return self.function_matrix(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class SelfAdjointOperator:
    """Hermitian matrix with a lazily cached spectral decomposition.

    Build instances with :func:`from_dense`; the stored matrix is exactly
    Hermitian and read-only.
    """

    matrix: np.ndarray
    label: str = ""

    @property
    def dim(self):
        return self.matrix.shape[0]

    @cached_property
    def spectral(self):
        return _decompose(self.matrix)

    @cached_property
    def norm(self):
        return float(np.max(np.abs(self.spectral.eigenvalues)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __repr__(self):
        return f"SelfAdjointOperator(dim={self.dim}, label={self.label!r})"


def from_dense(raw, sym_tol=1e-10, label=""):
    """Validate and symmetrize a square matrix into a :class:`SelfAdjointOperator`.

    Parameters
    ----------
    raw : array_like
        Square complex matrix.
    sym_tol : float
        Allowed relative asymmetry ``||raw - raw^H||_F / ||raw||_F``.
    label : str
        Free-form name carried into reports.
    """
    M = np.array(raw, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise NonSquare(f"expected a non-empty square matrix, got shape {M.shape}")
    scale = np.linalg.norm(M)
    skew = np.linalg.norm(M - M.conj().T)
    if skew > sym_tol * scale:
        raise AsymmetryExceedsTolerance(skew / scale if scale else np.inf, sym_tol)
    M = 0.5 * (M + M.conj().T)
    M.setflags(write=False)
    return SelfAdjointOperator(M, label)


def spectral_decomposition(op):
    return op.spectral


def _decompose(M):
    try:
        # divide-and-conquer (numpy's heevd); the MRRR driver scipy uses by
        # default loses about two digits of orthogonality on clustered spectra
        w, V = np.linalg.eigh(M)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverFailure(str(exc)) from exc
    # fix the phase gauge so repeated calls and platforms agree on columns
    idx = np.argmax(np.abs(V), axis=0)
    pivots = V[idx, np.arange(V.shape[1])]
    V = V * (np.abs(pivots) / pivots)
    scale = max(np.linalg.norm(M), 1e-300)
    recon = np.linalg.norm((V * w) @ V.conj().T - M) / scale
    if not np.all(np.isfinite(w)) or recon > 1e-10:
        raise EigensolverFailure(f"reconstruction error {recon:.3e}")
    w.setflags(write=False)
    V.setflags(write=False)
    return SpectralData(w, V)


@dataclass(frozen=True, eq=False)
class Projection:
    matrix: np.ndarray
    rank: int

    @property
    def complement(self):
        n = self.matrix.shape[0]
        return Projection(np.eye(n) - self.matrix, n - self.rank)

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros((dim, dim), dtype=complex), 0)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim, dtype=complex), dim)

    @classmethod
    def from_columns(cls, columns):
        """Orthogonal projection onto the span of ``columns`` (orthonormalized)."""
        Q, _ = np.linalg.qr(np.asarray(columns, dtype=complex))
        return cls(Q @ Q.conj().T, Q.shape[1])


def spectral_projection(spec, interval):
    """Sum of eigen-dyads whose eigenvalue lies in ``interval``."""
    mask = interval.contains(spec.eigenvalues, scale=spec.spectral_radius)
    Vs = spec.eigenvectors[:, mask]
    return Projection(Vs @ Vs.conj().T, int(mask.sum()))


def _evaluate(f, x):
    try:
        values = np.asarray(f(x))
        if values.shape != x.shape:
            raise ValueError
    except (TypeError, ValueError):
        values = np.array([f(float(t)) for t in x])
    return values


def apply_function(spec, f, label=""):
    """``f(A) = V diag(f(lambda)) V^H`` for a real-valued function ``f``."""
    values = _evaluate(f, spec.eigenvalues)
    if not np.all(np.isfinite(values)):
        bad = spec.eigenvalues[~np.isfinite(values)]
        raise FunctionUndefinedAtEigenvalue(f"f is not finite at eigenvalues {bad[:5]}")
    if np.iscomplexobj(values):
        if np.max(np.abs(values.imag), initial=0.0) > 1e-14 * max(1.0, np.max(np.abs(values))):
            raise ValueError("apply_function needs a real-valued f; use function_matrix")
        values = values.real
    M = spec.function_matrix(values.astype(float))
    M = 0.5 * (M + M.conj().T)
    M.setflags(write=False)
    return SelfAdjointOperator(M, label)


def operator_norm(M):
    """Spectral norm; ARPACK with a fixed start vector for large matrices."""
    M = np.asarray(M)
    if min(M.shape) <= DENSE_NORM_MAX_DIM:
        return float(scipy.linalg.svdvals(M)[0]) if M.size else 0.0
    if not np.any(M):
        return 0.0
    try:
        return top_singular_triplet(lambda x: M @ x, lambda y: M.conj().T @ y, M.shape[1])[0]
    except scipy.sparse.linalg.ArpackError:
        # start vector in the null space of M^H M
        return float(scipy.linalg.svdvals(M)[0])


def top_singular_triplet(matvec, rmatvec, n, tol=1e-13):
    """Largest singular value and right singular vector of an implicit operator."""
    op = scipy.sparse.linalg.LinearOperator(
        (n, n), matvec=lambda x: rmatvec(matvec(x)), dtype=complex
    )
    v0 = np.ones(n, dtype=complex) / np.sqrt(n)
    vals, vecs = scipy.sparse.linalg.eigsh(op, k=1, which="LA", v0=v0, tol=tol)
    v = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    return float(np.sqrt(max(vals[0], 0.0))), v


class WeightedResolvent:
    """``<A>^-s (H - z)^-1 Q <A>^-s`` for many ``z`` with shared factors.

    ``Q`` is applied exactly where written, between the resolvent and the
    right weight.
    """

    def __init__(self, H, A_spec, s, Q=None):
        if s < 0:
            raise ValueError("weight exponent s must be nonnegative")
        self.H_spec = H.spectral
        self.s = float(s)
        w = (1.0 + A_spec.eigenvalues**2) ** (-0.5 * s)
        self.weight = A_spec.function_matrix(w)
        self.inverse_weight = A_spec.function_matrix(1.0 / w)
        V = self.H_spec.eigenvectors
        right = self.weight if Q is None else np.asarray(Q.matrix if isinstance(Q, Projection) else Q) @ self.weight
        self.left = self.weight @ V
        self.right = V.conj().T @ right
        self.dim = V.shape[0]

    def _diag(self, z):
        z = complex(z)
        if z.imag == 0.0:
            raise RealShift(f"weighted resolvent requested at real point {z.real}")
        return 1.0 / (self.H_spec.eigenvalues - z)

    def matrix(self, z):
        return (self.left * self._diag(z)) @ self.right

    def norm(self, z):
        return self.top(z)[0]

    def top(self, z):
        """Operator norm and a unit top right-singular vector at ``z``."""
        d = self._diag(z)
        if self.dim <= DENSE_NORM_MAX_DIM:
            M = (self.left * d) @ self.right
            _, sv, Vh = np.linalg.svd(M)
            return float(sv[0]), Vh[0].conj()
        L, Rt, dc = self.left, self.right, d.conj()
        Lh, Rh = L.conj().T, Rt.conj().T
        return top_singular_triplet(
            lambda x: L @ (d * (Rt @ x)), lambda y: Rh @ (dc * (Lh @ y)), self.dim
        )


def weighted_resolvent_norm(H, A_spec, z, s, Q=None):
    """Operator 2-norm of ``<A>^-s (H - z)^-1 Q <A>^-s``."""
    return WeightedResolvent(H, A_spec, s, Q).norm(z)


def write_matrix(target, M):
    """Write ``M`` in the text format: ``n`` then ``n`` rows of ``re,im`` pairs."""
    M = np.asarray(M, dtype=complex)
    lines = [str(M.shape[0])]
    for row in M:
        lines.append(" ".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row))
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w") as fh:
            fh.write(text)
    else:
        target.write(text)


def read_matrix(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
        name = str(source)
    else:
        text = source.read()
        name = getattr(source, "name", "<stream>")
    lines = [ln for ln in io.StringIO(text).read().splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty matrix file", name)
    try:
        n = int(lines[0])
    except ValueError:
        raise ParseError(f"first line must be the dimension, got {lines[0]!r}", name, 1) from None
    if len(lines) != n + 1:
        raise ParseError(f"expected {n} rows, found {len(lines) - 1}", name)
    M = np.empty((n, n), dtype=complex)
    for i, line in enumerate(lines[1:]):
        entries = line.split()
        if len(entries) != n:
            raise ParseError(f"expected {n} entries, found {len(entries)}", name, i + 2)
        for j, entry in enumerate(entries):
            try:
                re, im = entry.split(",")
                M[i, j] = complex(float(re), float(im))
            except ValueError:
                raise ParseError(f"bad entry {entry!r}", name, i + 2) from None
    return M
