"""Weighted resolvent growth as eta shrinks toward the level spacing.

On the block example, eigenvalues of H1 inside I make the full weighted
resolvent grow like 1/eta. Projecting them out leaves a bounded quantity.
Eta stays above the spacing floor; below it every finite matrix looks like
point spectrum.
"""
from mourrelab import lap, models

ex = models.artificial_example()
I = ex.recommended_interval
floor = lap.eta_floor(ex.H, I)
grid = lap.default_eta_grid(floor, 5, 4.0)
full = lap.lap_scan(ex.H, ex.A, I, 0.7, eta_grid=grid)
P = models.point_projection(ex, I.expanded(0.25 * I.width))
reduced = lap.lap_scan(ex.H, ex.A, I, 0.7, mode=P, eta_grid=grid)

print(f"eta floor {floor:.4g}")
print(f"{'eta':>10} {'full':>12} {'reduced':>12}")
for e, a, b in zip(grid, full.sup_norms, reduced.sup_norms):
    print(f"{e:10.4g} {a:12.4g} {b:12.4g}")
print(f"log-log slope: full {full.growth_slope:.3f}, reduced {reduced.growth_slope:.3f}")
