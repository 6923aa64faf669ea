"""Sweeps behind the free parameters of the acceptance checks.

Writes calibration/sweep.json. Sections:

  lap_multiplication   slope of the weighted resolvent in 1/eta for the
                       multiplication model, N in {128, 256} and box sizes L,
                       s in {0.3, 0.5, 0.7}; picks L, then confirms at N = 512
  block_windows        full / reduced slopes of the block example for eta
                       windows [floor, span * floor]
  remainder            remainder exponents on two R grids
  cutoff               C_R exponents for s in {0.6, 0.9} and two R grids
  lattice_constants    literal and bulk Mourre constants for growing N

Run:  python3 calibration/sweep.py [--only name,...]
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from mourrelab import hs, lap, models, mourre
from mourrelab.harness.acceptance import REMAINDER_CASES
from mourrelab.harness.reports import dumps

OUT = Path(__file__).with_name("sweep.json")


def lap_multiplication(Ns=(128, 256), Ls=(50.0, 200.0, 1000.0, 4000.0), ss=(0.3, 0.5, 0.7)):
    rows = []
    for N in Ns:
        for L in Ls:
            m = models.multiplication_model(N, L)
            I = m.recommended_interval
            for s in ss:
                scan = lap.lap_scan(m.H, m.A, I, s)
                rows.append({"N": N, "L": L, "s": s, "slope": scan.growth_slope, "eta_floor": scan.eta_floor})
                print(f"  N={N} L={L:g} s={s}: slope {scan.growth_slope:.3f}", flush=True)
    # lowest s = 0.7 slope at the largest N, keeping s = 0.3 divergent
    top = max(Ns)
    ok = [L for L in Ls
          if next(r["slope"] for r in rows if r["N"] == top and r["L"] == L and r["s"] == 0.3) >= lap.DIVERGENT_SLOPE]
    chosen = min(ok, key=lambda L: next(r["slope"] for r in rows
                                        if r["N"] == top and r["L"] == L and r["s"] == 0.7))
    m = models.multiplication_model(512, chosen)
    confirm = {s: lap.lap_scan(m.H, m.A, m.recommended_interval, s).growth_slope for s in (0.3, 0.7)}
    print(f"  chosen L={chosen:g}; N=512 slopes {confirm}", flush=True)
    return {"rows": rows, "chosen_L": chosen, "confirm_N512": confirm}


def block_windows(spans=(2.0, 4.0, 16.0), s=0.7):
    ex = models.artificial_example()
    I = ex.recommended_interval
    floor = lap.eta_floor(ex.H, I)
    point = models.point_projection(ex, I.expanded(0.25 * I.width))
    block = models.block_projection(ex)
    rows = []
    for span in spans:
        grid = lap.default_eta_grid(floor, 5, span)
        full = lap.lap_scan(ex.H, ex.A, I, s, eta_grid=grid).growth_slope
        red_point = lap.lap_scan(ex.H, ex.A, I, s, mode=point, eta_grid=grid).growth_slope
        red_block = lap.lap_scan(ex.H, ex.A, I, s, mode=block, eta_grid=grid).growth_slope
        rows.append({"span": span, "full": full, "reduced_point": red_point, "reduced_block": red_block})
        print(f"  span {span:g}: full {full:.3f} reduced(point) {red_point:.3f} reduced(block) {red_block:.3f}",
              flush=True)
    return {"eta_floor": floor, "rows": rows}


def remainder():
    out = []
    for half_width, R in ((256, (8.0, 16.0, 32.0, 64.0, 128.0)), (512, (16.0, 32.0, 64.0, 128.0, 256.0))):
        A = hs.diagonal_conjugate(half_width)
        B = hs.neighbour_coupling(A.dim)
        for case in REMAINDER_CASES:
            f = hs.remainder_probe(A, B, *case, R)
            out.append({"half_width": half_width, "R": list(R), "rho": case[0], "s": case[1],
                        "s_prime": case[2], "k": case[3], "target": f.target_slope,
                        "slope": f.fitted_slope, "residual": f.residual})
            print(f"  m={half_width} {case}: slope {f.fitted_slope:.3f} target {f.target_slope}", flush=True)
    return out


def cutoff():
    A = hs.diagonal_conjugate(256)
    B = hs.neighbour_coupling(A.dim)
    out = []
    for s in (0.6, 0.9):
        for R in ((8.0, 16.0, 32.0, 64.0, 128.0), (16.0, 32.0, 64.0, 128.0)):
            for a in (-0.5, 0.0, 0.5, 1.0):
                f = hs.scaling_probe(hs.cutoff_weight_family(A, a, s), R, a, slope_tol=0.15)
                out.append({"s": s, "R": list(R), "family": "C_R<A>^a", "alpha": a, "slope": f.fitted_slope})
            for a in (0.0, 0.5, 0.9):
                f = hs.scaling_probe(hs.cutoff_commutator_family(A, B, a, s), R, a - 1.0)
                out.append({"s": s, "R": list(R), "family": "[B,C_R]<A>^a", "alpha": a, "slope": f.fitted_slope})
            print(f"  s={s} R from {R[0]:g}: " + " ".join(f"{r['slope']:+.3f}" for r in out[-7:]), flush=True)
    return out


def lattice_constants(Ns=(64, 128, 256)):
    out = []
    for N in Ns:
        m = models.lattice_model(N)
        I = m.recommended_interval
        literal = mourre.mourre_best_constant(m.H, m.A, I)
        out.append({"N": N, "c_strict_literal": literal.c_strict, "bulk_constant": models.bulk_constant(m)})
        print(f"  N={N}: literal {literal.c_strict:.4f} bulk {out[-1]['bulk_constant']:.4f}", flush=True)
    return out


SWEEPS = {
    "lap_multiplication": lap_multiplication,
    "block_windows": block_windows,
    "remainder": remainder,
    "cutoff": cutoff,
    "lattice_constants": lattice_constants,
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", help="comma-separated sweep names")
    args = ap.parse_args()
    names = args.only.split(",") if args.only else list(SWEEPS)
    data = json.loads(OUT.read_text()) if OUT.exists() else {}
    for name in names:
        t0 = time.perf_counter()
        print(name, flush=True)
        data[name] = SWEEPS[name]()
        print(f"  {time.perf_counter() - t0:.1f} s", flush=True)
    data["schema"] = "mourre-lab/1"
    OUT.write_text(dumps(data))


if __name__ == "__main__":
    main()
