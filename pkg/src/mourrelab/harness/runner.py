"""Execute a scenario: build the model, run each operation, write reports.

Operations run sequentially in file order. Each produces a result record
``{label, op, quantity, verdict, data, files}``; the scenario passes when no
record has verdict ``"fail"``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import hs, lap, models, mourre
from .. import symbols as S
from ..errors import DegenerateFit, EtaBelowFloor, MourreLabError, ParseError, RegistryMiss, VerdictFailure
from ..operators import RealInterval, apply_function
from . import acceptance
from .config import load_scenario, parse_scenario_text
from .reports import ReportWriter

EXIT_PASS, EXIT_USAGE, EXIT_VERDICT, EXIT_INTERNAL = 0, 1, 2, 3

QUANTITY = {
    "hs_verify": "almost-analytic quadrature of phi(A) against the spectral oracle",
    "mourre": "lowest eigenvalue of [H, iA] compressed to Ran E_I(H) P^perp",
    "virial": "eigenvector expectations of [H, iA]",
    "lap": "sup over Re z in I of ||<A>^-s (H - z)^-1 <A>^-s|| against Im z",
    "probe": "power-law exponent of a weighted operator norm in the scale R",
    "transfer": "replacing H by H_tau inside theta(H)",
    "feshbach": "phi(H P^perp) against phi(H) P^perp",
    "rank_one": "commutator of a finite sum of rank-one operators",
    "special_sequence": "approximate eigenvectors from the weighted resolvent maximum",
    "propagation": "time-integrated weighted propagation J(T) in closed form",
}


@dataclass
class ScenarioRun:
    status: int
    report: dict
    path: Path | None
    failures: list


def _floats(text, sep=","):
    return [float(x) for x in str(text).split(sep) if x.strip()]


def _interval(params, model, key="interval"):
    if key in params:
        try:
            return RealInterval.parse(params[key])
        except ValueError as exc:
            raise ParseError(str(exc)) from None
    if model is None:
        raise ParseError("no interval given and no model to recommend one")
    return model.recommended_interval


def _eta_grid(text, floor):
    """``min:max:points``; a trailing ``x`` on min/max means multiples of the floor."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ParseError(f"eta must look like min:max:points, got {text!r}")

    def value(p):
        p = p.strip()
        return float(p[:-1]) * floor if p.endswith("x") else float(p)

    lo, hi, n = value(parts[0]), value(parts[1]), int(parts[2])
    return np.geomspace(hi, lo, n)


def _need_model(model, op):
    if model is None:
        raise ParseError(f"op {op!r} needs a [scenario] model")
    return model


# --- operations --------------------------------------------------------------------


def op_hs_verify(p, model, sc, writer, label):
    refs = [r.strip() for r in p.get("symbols", "chi;chi_R{R=4};lorentzian;phi_R{s=0.6,R=4}").split(";")]
    syms = {r: S.symbol_from_reference(r) for r in refs if r}
    count, max_dim = int(p.get("count", 10)), int(p.get("max_dim", 16))
    q = hs.QuadratureConfig(target_rel_error=float(p.get("target", 3e-7)), extended=True)
    rng = np.random.default_rng(sc.seed)
    worst = {r: 0.0 for r in syms}
    for trial in range(count):
        A = acceptance.spread_hermitian(4 + trial % (max_dim - 3), rng)
        for r, sym in syms.items():
            res = hs.hs_apply(A, S.almost_analytic(sym), q, raise_on_failure=False)
            oracle = apply_function(A.spectral, sym).matrix
            nrm = np.linalg.norm(oracle)
            err = np.linalg.norm(res.operator.matrix - oracle) / (nrm if nrm > 0 else 1.0)
            worst[r] = max(worst[r], float(err))
    ok = max(worst.values(), default=0.0) <= sc.tolerance("hs")
    return ok, {"worst_rel_error": worst, "count": count, "max_dim": max_dim}


def _reference_constant(model, I):
    """Bulk constant of the unperturbed lattice part on ``I``, when there is one."""
    if "h0_bulk_constant" in model.metadata:
        return model.metadata["h0_bulk_constant"]
    if model.bulk_commutator is not None:
        return models.bulk_constant(model, I)
    return None


def op_mourre(p, model, sc, writer, label):
    m = _need_model(model, "mourre")
    I = _interval(p, m)
    kind = p.get("projection", "none")
    if kind == "none":
        P = None
    elif kind == "block":
        if "blocks" not in m.metadata:
            raise ParseError("projection = block needs a block model")
        P = models.block_projection(m)
    elif kind == "point":
        P = models.point_projection(m, I.expanded(0.25 * I.width))
    else:
        raise ParseError(f"projection must be none, block or point, got {kind!r}")
    literal = mourre.mourre_best_constant(m.H, m.A, I, P)
    data = literal.to_dict()
    data["projection"] = kind
    checks = [literal.virial_max_residual <= sc.tolerance("virial") * max(literal.commutator_norm, 1e-300)]
    bulk = None
    if m.bulk_commutator is not None:
        bulk = mourre.mourre_best_constant(m.H, m.A, I, P, commutator=m.bulk_commutator)
        data["bulk"] = {"c_strict": bulk.c_strict, "c_projected": bulk.c_projected}
        data["reference_constant"] = _reference_constant(m, I)
    if "max_c_strict" in p:
        checks.append(literal.c_strict <= float(p["max_c_strict"]))
    if "min_c_strict" in p:
        c = bulk.c_strict if bulk is not None else literal.c_strict
        checks.append(c >= float(p["min_c_strict"]))
    projected = bulk.c_projected if bulk is not None else literal.c_projected
    if "min_c_projected" in p:
        checks.append(projected >= float(p["min_c_projected"]))
    if "min_c_projected_ratio" in p:
        ref = _reference_constant(m, I)
        if ref is None:
            raise ParseError("min_c_projected_ratio needs a model with a reference constant")
        checks.append(projected >= float(p["min_c_projected_ratio"]) * ref)
    return all(checks), data


def op_virial(p, model, sc, writer, label):
    m = _need_model(model, "virial")
    spec = m.H.spectral
    if "interval" in p:
        I = _interval(p, m)
    else:
        I = RealInterval.closed(spec.eigenvalues[0] - 1.0, spec.eigenvalues[-1] + 1.0)
    res = mourre.virial_check(m.H, m.A, I)
    scale = mourre.commutator_form(m.H, m.A).norm
    rel = max(res, default=0.0) / max(scale, 1e-300)
    return rel <= sc.tolerance("virial"), {"max_relative_residual": rel, "eigenpairs": len(res),
                                           "interval": I.to_dict()}


def op_lap(p, model, sc, writer, label):
    m = _need_model(model, "lap")
    I = _interval(p, m)
    s = float(p.get("s", 0.7))
    floor = lap.eta_floor(m.H, I)
    grid = _eta_grid(p["eta"], floor) if "eta" in p else None
    mode = p.get("mode", "full")
    if mode == "reduced":
        proj = models.point_projection(m, I.expanded(0.25 * I.width))
    elif mode == "block":
        proj = models.block_projection(m)
    elif mode == "full":
        proj = "full"
    else:
        raise ParseError(f"mode must be full, reduced or block, got {mode!r}")
    scan = lap.lap_scan(m.H, m.A, I, s, mode=proj, eta_grid=grid)
    scan.verdict = lap.trend_verdict(scan.growth_slope, sc.tolerance("bounded"), sc.tolerance("divergent"))
    files = writer.add_table(label, scan.csv_rows())
    data = dict(scan.to_dict(), eta=scan.eta_grid, sup_norms=scan.sup_norms, files=files)
    expect = p.get("expect", "none")
    if expect == "none":
        ok = True
    elif expect in ("bounded", "divergent"):
        ok = scan.verdict == expect + "-trend"
    else:
        raise ParseError(f"expect must be bounded, divergent or none, got {expect!r}")
    return ok, data


def op_probe(p, model, sc, writer, label):
    A = hs.diagonal_conjugate(int(p.get("half_width", 256)))
    B = hs.neighbour_coupling(A.dim)
    R = _floats(p.get("scales", "8,16,32,64,128"))
    family = p.get("family", "remainder")
    s = float(p.get("s", 0.6))
    tol = sc.tolerance("slope")
    if family == "remainder":
        rho, sp, k = float(p.get("rho", 0.0)), float(p.get("s_prime", s)), int(p.get("k", 2))
        fit = hs.remainder_probe(A, B, rho, s, sp, k, R, slope_tol=tol)
    elif family in ("cutoff_weight", "cutoff_commutator"):
        alpha = float(p.get("alpha", 0.0))
        if family == "cutoff_weight":
            fit = hs.scaling_probe(hs.cutoff_weight_family(A, alpha, s), R, alpha, slope_tol=tol)
        else:
            fit = hs.scaling_probe(hs.cutoff_commutator_family(A, B, alpha, s), R, alpha - 1.0, slope_tol=tol)
    else:
        raise ParseError(f"unknown probe family {family!r}")
    files = writer.add_table(label, fit.csv_rows())
    return fit.passed, dict(fit.to_dict(), family=family, files=files)


def op_transfer(p, model, sc, writer, label):
    m = _need_model(model, "transfer")
    I = _interval(p, m)
    tau, theta = mourre.interval_cutoffs(I)
    t = mourre.transfer_check(m.H, m.A, tau, theta, I)
    tol = sc.tolerance("transfer")
    return t.commutator_residual <= tol and t.resolvent_residual <= tol, t.to_dict()


def op_feshbach(p, model, sc, writer, label):
    m = _need_model(model, "feshbach")
    I = _interval(p, m)
    P, phi = acceptance.feshbach_case(m, I)
    r = mourre.feshbach_check(m.H, P, phi)
    return r <= sc.tolerance("feshbach"), {"residual": r, "rank": P.rank}


def op_rank_one(p, model, sc, writer, label):
    if model is not None and "rank_one_identity_residual" in model.metadata:
        r = model.metadata["rank_one_identity_residual"]
        source = "model"
    else:
        rng = np.random.default_rng(sc.seed)
        n = 8
        g = list(rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n)))
        r = models.rank_one_sum(models.tridiagonal_conjugate(n), g, rng.normal(size=3)).identity_residual
        source = "random"
    return r <= sc.tolerance("rank_one"), {"identity_residual": r, "source": source}


def op_special_sequence(p, model, sc, writer, label):
    m = _need_model(model, "special_sequence")
    I = _interval(p, m)
    s = float(p.get("s", 0.7))
    sched = acceptance.sequence_schedule(m.H, I, int(p.get("points", 6)), float(p.get("depth", 1e-4)))
    seq = lap.special_sequence(m.H, m.A, I, s, sched)
    r1, r2 = seq.identity_residuals(m.H)
    data = dict(seq.to_dict(), identity_residuals=[r1, r2])
    ok = max(r1, r2) <= sc.tolerance("identity")
    if seq.positive_mass:
        v = lap.virial_like_check(seq, m.H, apply_function(m.A.spectral, S.default_family().chi))
        data["virial_like"] = {"decay_slope": v["decay_slope"], "verdict": v["verdict"]}
        ok = ok and v["verdict"] == "pass"
    return ok, data


def op_propagation(p, model, sc, writer, label):
    m = _need_model(model, "propagation")
    I = _interval(p, m)
    T = _floats(p.get("times", "0.5,3,40,1000"))
    e1, e2 = acceptance.propagation_errors(m, I, float(p.get("s", 0.7)), T,
                                           np.random.default_rng(sc.seed), int(p.get("states", 6)))
    tol = sc.tolerance("propagation")
    return e1 <= tol and e2 <= tol, {"eigenvector_rel_error": e1, "two_level_rel_error": e2, "T": T}


OPS = {
    "hs_verify": op_hs_verify,
    "mourre": op_mourre,
    "virial": op_virial,
    "lap": op_lap,
    "probe": op_probe,
    "transfer": op_transfer,
    "feshbach": op_feshbach,
    "rank_one": op_rank_one,
    "special_sequence": op_special_sequence,
    "propagation": op_propagation,
}


def execute(scenario, out_dir=None):
    """Run a parsed scenario and write its reports. Returns a :class:`ScenarioRun`."""
    started, t0 = time.time(), time.perf_counter()
    model = models.model_from_reference(scenario.model) if scenario.model else None
    writer = ReportWriter(out_dir if out_dir is not None else scenario.output)
    records, failures = [], []
    for op in scenario.operations:
        try:
            ok, data = OPS[op.op](op.params, model, scenario, writer, op.label)
        except (ValueError, ParseError, EtaBelowFloor, DegenerateFit) as exc:
            raise ParseError(f"[{op.label}]: {exc}", scenario.path, op.line) from None
        verdict = "pass" if ok else "fail"
        if not ok:
            failures.append(op.label)
        records.append({"label": op.label, "op": op.op, "quantity": QUANTITY[op.op],
                        "verdict": verdict, "data": data})
    report = {
        "scenario": scenario.name,
        "model": scenario.model,
        "seed": scenario.seed,
        "tolerances": scenario.tolerances,
        "operations": records,
        "passed": not failures,
        "failures": failures,
    }
    if model is not None:
        report["model_metadata"] = {k: v for k, v in model.metadata.items() if k != "terms"}
    path = writer.write(report, started, time.perf_counter() - t0)
    return ScenarioRun(EXIT_PASS if not failures else EXIT_VERDICT, report, path, failures)


def run_scenario(path, out_dir=None, tolerances=None, raise_on_failure=False):
    """Parse and run the scenario file at ``path``.

    ``tolerances`` overrides entries of the file's ``[tolerances]`` section.
    With ``raise_on_failure`` a failing verdict raises :class:`VerdictFailure`
    after the reports are written.
    """
    scenario = load_scenario(path)
    if tolerances:
        from .config import apply_tolerance_overrides

        scenario.tolerances = apply_tolerance_overrides(scenario.tolerances, tolerances, str(path))
    run = execute(scenario, out_dir)
    if raise_on_failure and run.failures:
        raise VerdictFailure(run.failures)
    return run


def run_text(text, out_dir, name="<string>"):
    return execute(parse_scenario_text(text, name), out_dir)


def exit_code(fn, *args, echo=print, **kw):
    """Call ``fn`` and map the outcome to the documented exit codes."""
    try:
        run = fn(*args, **kw)
    except (ParseError, RegistryMiss) as exc:
        echo(f"error: {exc}")
        return EXIT_USAGE, None
    except VerdictFailure as exc:
        echo(f"verdict failure: {', '.join(exc.failures)}")
        return EXIT_VERDICT, None
    except MourreLabError as exc:
        echo(f"error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL, None
    except Exception as exc:  # noqa: BLE001 - the CLI reports, never tracebacks
        echo(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL, None
    if run.failures:
        echo(f"verdict failure: {', '.join(run.failures)}")
    return run.status, run


def summary_line(run):
    state = "PASS" if not run.failures else "FAIL"
    return f"{run.report['scenario']}: {state} ({len(run.report['operations'])} operations) -> {run.path}"

