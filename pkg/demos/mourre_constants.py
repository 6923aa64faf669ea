"""Mourre constants on the built-in models.

The discrete lattice gives a negative literal constant because the truncated
dilation generator breaks translation invariance at the ends. The
translation-invariant part of the commutator keeps a positive constant.
On the block example the strict estimate fails on I because H1 puts
eigenvalues there, and projecting them out restores positivity.
"""
from mourrelab import models, mourre

for N in (64, 128, 256):
    m = models.lattice_model(N)
    I = m.recommended_interval
    literal = mourre.mourre_best_constant(m.H, m.A, I)
    print(f"lattice N={N:4d}  I=[{I.lo:.2f}, {I.hi:.2f}]  literal c={literal.c_strict:8.3f}  bulk c={models.bulk_constant(m):.4f}")

ex = models.artificial_example()
I = ex.recommended_interval
strict = mourre.mourre_best_constant(ex.H, ex.A, I)
proj = mourre.mourre_best_constant(ex.H, ex.A, I, models.block_projection(ex), commutator=ex.bulk_commutator)
print(f"\nblock example dim={ex.dim}")
print(f"  strict c on I        = {strict.c_strict:.3f}")
print(f"  projected c (bulk)   = {proj.c_projected:.4f}")
print(f"  eigenvalues in I     = {len(strict.eigenvalues_in_I)}")
print(f"  worst Virial residual= {max(strict.virial_residuals, default=0.0):.2e}")
