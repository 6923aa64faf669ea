"""Built-in operator pairs ``(H, A)`` parameterized by truncation size.

* ``lattice_model``: ``H = L (1 + L)^-1`` for the 1-D discrete Laplacian ``L``
  and ``A`` the symmetrized dilation generator.
* ``multiplication_model``: Dirichlet Laplacian on ``[-L, L]`` with ``A``
  multiplication by ``<x>``.
* ``artificial_example``: ``H0 (+) (lambda + C)`` with ``C`` a fast-decaying
  sum of rank-one terms, which breaks the strict estimate on ``I`` while the
  projected one survives.

Pseudo-random inputs come from ``numpy.random.default_rng(seed)`` (PCG64),
which is reproducible across platforms for a given numpy major version.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DependentVectors, HypothesisViolated, IntervalViolation, LengthMismatch, TooSmall
from .operators import Projection, RealInterval, SelfAdjointOperator, from_dense, operator_norm


@dataclass
class ModelInstance:
    H: SelfAdjointOperator
    A: SelfAdjointOperator
    recommended_interval: RealInterval
    metadata: dict = field(default_factory=dict)
    # translation-invariant part of [H, iA] where one exists (see lattice_model)
    bulk_commutator: np.ndarray | None = None

    @property
    def dim(self):
        return self.H.dim


def laplacian(N, flavor="circulant"):
    """``2 - shift - shift^T``; periodic or Dirichlet boundary."""
    L = 2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)
    if flavor == "circulant":
        L[0, -1] = L[-1, 0] = -1.0
    elif flavor != "dirichlet":
        raise ValueError(f"unknown flavor {flavor!r}")
    return L


def laplacian_eigenvalues(N, flavor="circulant"):
    """Closed form: ``2 - 2cos(2 pi k / N)`` or ``2 - 2cos(pi k / (N + 1))``."""
    if flavor == "circulant":
        k = np.arange(N)
        return np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * k / N))
    k = np.arange(1, N + 1)
    return 2.0 - 2.0 * np.cos(np.pi * k / (N + 1))


def dilation_generator(N, flavor="circulant"):
    """``-i (X D + D X) / 2`` with ``D`` the centered difference and ``X`` centered."""
    D = 0.5 * (np.eye(N, k=1) - np.eye(N, k=-1))
    if flavor == "circulant":
        D[0, -1], D[-1, 0] = -0.5, 0.5
    X = np.diag(np.arange(N) - 0.5 * (N - 1))
    return -0.5j * (X @ D + D @ X)


def band_function(t):
    return t / (1.0 + t)


def bulk_symbol(ell):
    """``[h(L), iA]`` for the infinite lattice as a function of ``L``.

    With ``sin^2 k = ell - ell^2/4`` the commutator is the multiplier
    ``2 sin^2(k) h'(ell)``, ``h(t) = t / (1 + t)``.
    """
    return 2.0 * (ell - 0.25 * ell**2) / (1.0 + ell) ** 2


def lattice_model(N, flavor="circulant"):
    if N < 8:
        raise TooSmall(f"lattice model needs N >= 8, got {N}")
    Lap = from_dense(laplacian(N, flavor), label="laplacian")
    ls = Lap.spectral
    V = ls.eigenvectors
    H = from_dense((V * band_function(ls.eigenvalues)) @ V.conj().T, label=f"lattice{{N={N}}}")
    A = from_dense(dilation_generator(N, flavor), label="dilation")
    bulk = (V * bulk_symbol(ls.eigenvalues)) @ V.conj().T
    top = band_function(4.0)
    I = RealInterval.closed(0.25 * top, 0.75 * top)
    return ModelInstance(H, A, I, {"model": "lattice", "N": N, "flavor": flavor}, bulk)


def bulk_constant(model, I=None):
    """Lowest value of the bulk commutator over eigenvalues of ``H`` in ``I``.

    This is the measured Mourre constant of the infinite lattice on ``I``
    sampled at the finite momenta; the literal compression is never positive
    once ``I`` contains an eigenvalue.
    """
    I = I or model.recommended_interval
    ell = model.H.spectral.eigenvalues
    ell = ell / (1.0 - ell)  # invert h(t) = t / (1 + t)
    mask = I.contains(model.H.spectral.eigenvalues)
    if not mask.any():
        return np.inf
    return float(np.min(bulk_symbol(ell[mask])))


def multiplication_model(N, L=50.0):
    if N < 32:
        raise TooSmall(f"multiplication model needs N >= 32, got {N}")
    h = 2.0 * L / (N - 1)
    x = np.linspace(-L, L, N)
    H = from_dense(laplacian(N, "dirichlet") / h**2, label=f"multiplication{{N={N},L={L:g}}}")
    A = from_dense(np.diag(np.sqrt(1.0 + x**2)), label="<x>")
    top = 4.0 / h**2
    I = RealInterval.closed(0.25 * top, 0.75 * top)
    return ModelInstance(H, A, I, {"model": "multiplication", "N": N, "L": L, "h": h})


@dataclass
class RankOneSum:
    operator: SelfAdjointOperator
    tail_bound: float
    identity_residual: float
    weight_norms: list


def geometric_tail(decay, M, g_sq_bound=1.0):
    """``sum_{n > M} decay^-n * g_sq_bound``."""
    return g_sq_bound * decay ** (-M) / (decay - 1.0)


def rank_one_sum(A1, g, alpha, weight_bound=None, tail_bound=0.0):
    """``C = sum alpha_n g_n g_n^H`` with the commutator identity checked.

    ``[C, A1] = sum alpha_n (g_n (A1 g_n)^H - (A1 g_n) g_n^H)`` is evaluated
    both ways; the difference is ``identity_residual``. ``tail_bound`` is the
    caller's bound on the dropped terms and is passed through.
    """
    g = [np.asarray(v, dtype=complex) for v in g]
    alpha = [float(a) for a in alpha]
    if len(g) != len(alpha):
        raise LengthMismatch(f"{len(g)} vectors vs {len(alpha)} coefficients")
    Am = np.asarray(A1.matrix if isinstance(A1, SelfAdjointOperator) else A1, dtype=complex)
    n = Am.shape[0]
    if g:
        G = np.stack(g, axis=1)
        if G.shape[0] != n:
            raise LengthMismatch(f"vectors of length {G.shape[0]} for dimension {n}")
        if np.linalg.matrix_rank(G) < len(g):
            raise DependentVectors("rank-one directions are linearly dependent")
    weights = [float(np.linalg.norm(Am @ (Am @ v))) for v in g]
    if weight_bound is not None and max(weights, default=0.0) > weight_bound:
        raise HypothesisViolated(f"||A1^2 g_n|| = {max(weights):.3e} exceeds {weight_bound:.3e}")
    C = np.zeros((n, n), dtype=complex)
    expected = np.zeros((n, n), dtype=complex)
    for a, v in zip(alpha, g):
        Av = Am @ v
        C += a * np.outer(v, v.conj())
        expected += a * (np.outer(v, Av.conj()) - np.outer(Av, v.conj()))
    residual = float(np.max(np.abs(C @ Am - Am @ C - expected), initial=0.0))
    return RankOneSum(from_dense(C, label="rank-one sum"), float(tail_bound), residual, weights)


def tridiagonal_conjugate(N1):
    """Fixed Hermitian ``A1``: centered diagonal with 1/2 off-diagonals."""
    return np.diag(np.arange(N1) - 0.5 * (N1 - 1)) + 0.5 * (np.eye(N1, k=1) + np.eye(N1, k=-1))


def artificial_example(N0=128, N1=16, lam=0.5, decay=2.0, seed=7, flavor="circulant"):
    """Block-diagonal ``H = H0 (+) (lam + C)``, ``A = A0 (+) A1``.

    ``C`` is scaled so that ``lam +- ||C||`` stays a quarter of the distance
    to the ends of ``I`` inside ``I``; ``metadata["blocks"]`` holds the block
    sizes and ``metadata["terms"]`` the rank-one data.
    """
    if not decay > 1.0:
        raise ValueError("decay must exceed 1")
    base = lattice_model(N0, flavor)
    I = base.recommended_interval
    if not (I.lo < lam < I.hi):
        raise IntervalViolation(f"lambda = {lam} is not interior to {I.lo}:{I.hi}")
    rng = np.random.default_rng(seed)
    A1 = tridiagonal_conjugate(N1)
    raw = rng.normal(size=(N1, N1)) + 1j * rng.normal(size=(N1, N1))
    Qm, _ = np.linalg.qr(raw)
    g = Qm + 0.1 * (rng.normal(size=(N1, N1)) + 1j * rng.normal(size=(N1, N1))) / np.sqrt(2 * N1)
    g = g / np.linalg.norm(g, axis=0)
    n = np.arange(1, N1 + 1)
    alpha = (-1.0) ** (n + 1) * decay ** (-n.astype(float))
    bound = operator_norm(A1) ** 2
    raw_sum = rank_one_sum(A1, list(g.T), alpha, weight_bound=bound * (1 + 1e-12))
    target = 0.25 * min(lam - I.lo, I.hi - lam)
    scale = target / raw_sum.operator.norm
    alpha = alpha * scale
    ros = rank_one_sum(A1, list(g.T), alpha, weight_bound=bound * (1 + 1e-12),
                       tail_bound=geometric_tail(decay, N1) * scale)
    C = ros.operator.matrix
    if not (lam - ros.operator.norm >= I.lo and lam + ros.operator.norm <= I.hi):
        raise IntervalViolation("lambda +- ||C|| leaves the interval")

    H1 = lam * np.eye(N1) + C
    H = np.zeros((N0 + N1, N0 + N1), dtype=complex)
    A = np.zeros_like(H)
    H[:N0, :N0], H[N0:, N0:] = base.H.matrix, H1
    A[:N0, :N0], A[N0:, N0:] = base.A.matrix, A1
    comm1 = 1j * (C @ A1 - A1 @ C)
    bulk = np.zeros_like(H)
    bulk[:N0, :N0], bulk[N0:, N0:] = base.bulk_commutator, 0.5 * (comm1 + comm1.conj().T)
    meta = {
        "model": "artificial", "N0": N0, "N1": N1, "lambda": lam, "decay": decay, "seed": seed,
        "interval": I.to_dict(), "C_norm": ros.operator.norm, "tail_bound": ros.tail_bound,
        "rank_one_identity_residual": ros.identity_residual,
        "h0_bulk_constant": bulk_constant(base),
        "blocks": [N0, N1],
        "terms": {"alpha": alpha.tolist(), "weight_bound": bound},
    }
    label = f"artificial{{N0={N0},N1={N1},lambda={lam:g},decay={decay:g},seed={seed}}}"
    return ModelInstance(from_dense(H, label=label), from_dense(A, label="A0+A1"), I, meta, bulk)


def block_projection(model):
    """Projection onto the second block (the rank-one part) of an artificial example."""
    N0, N1 = model.metadata["blocks"]
    P = np.zeros((N0 + N1, N0 + N1), dtype=complex)
    P[N0:, N0:] = np.eye(N1)
    return Projection(P, N1)


def point_projection(model, interval):
    """Projection onto the eigenvectors of ``H`` with eigenvalue in ``interval``.

    At finite size this is the whole spectral projection, i.e. the full
    point-spectrum projection over ``interval``.
    """
    spec = model.H.spectral
    mask = interval.contains(spec.eigenvalues, scale=spec.spectral_radius)
    V = spec.eigenvectors[:, mask]
    return Projection(V @ V.conj().T, int(mask.sum()))


def _artificial(N0=128, N1=16, decay=2.0, seed=7, **kw):
    lam = kw.pop("lambda", 0.5)
    if kw:
        raise TypeError(f"unexpected keys {sorted(kw)}")
    return artificial_example(int(N0), int(N1), lam, decay, int(seed))


MODEL_REGISTRY = {
    "lattice": (lambda N=64: lattice_model(int(N)), {"N"}),
    "lattice_dirichlet": (lambda N=64: lattice_model(int(N), "dirichlet"), {"N"}),
    "multiplication": (lambda N=512, L=50.0: multiplication_model(int(N), L), {"N", "L"}),
    "artificial": (_artificial, {"N0", "N1", "lambda", "decay", "seed"}),
}


def model_from_reference(text):
    """Build a model from ``"name{key=value,...}"``, e.g. ``"lattice{N=64}"``."""
    from .registry import build

    return build(MODEL_REGISTRY, text)
