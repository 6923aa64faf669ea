"""Functional calculus by almost-analytic extension, and commutator expansions.

First compare the quadrature value of chi_R(A) against exact diagonalization.
Then expand [B, phi(A)] to order k and watch the remainder shrink as R grows,
at the rate fixed by the symbol order and the weights.
"""
import numpy as np

from mourrelab import hs
from mourrelab import symbols as S
from mourrelab.harness.acceptance import spread_hermitian
from mourrelab.operators import apply_function

rng = np.random.default_rng(0)
A = spread_hermitian(24, rng)
sym = S.symbol_from_reference("chi_R{R=4}")
res = hs.hs_apply(A, S.almost_analytic(sym))
exact = apply_function(A.spectral, sym).matrix
err = np.linalg.norm(res.operator.matrix - exact) / np.linalg.norm(exact)
print(f"chi_R(A), n=24: relative error {err:.2e}, certificate {res.certificate:.2e}, levels {res.levels_used}")

A = hs.diagonal_conjugate(256)
B = hs.neighbour_coupling(A.dim)
R = [8, 16, 32, 64, 128]
for k in (1, 2, 3):
    fit = hs.remainder_probe(A, B, -1.2, 0.6, 0.6, k, R)
    print(f"k={k}: remainder slope {fit.fitted_slope:+.3f} against target {fit.target_slope:+.2f}  [{fit.verdict}]")
