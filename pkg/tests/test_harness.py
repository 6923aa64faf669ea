import json
from pathlib import Path

import numpy as np
import pytest

from mourrelab.errors import ParseError, RegistryMiss, VerdictFailure
from mourrelab.harness import cli, config, reports, runner

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"
GOLDEN = SCENARIOS / "golden"
SHIPPED = sorted(p.stem for p in SCENARIOS.glob("*.ini"))

HEAD = "[scenario]\nname = t\nmodel = lattice{N=16}\n"


def parse(text):
    return config.parse_scenario_text(text, "t.ini")


# --- parsing ------------------------------------------------------------------------


def test_parse_minimal():
    sc = parse(HEAD + "\n[strict]\nop = mourre\ninterval = 0.2:0.6\n")
    assert sc.name == "t" and sc.model == "lattice{N=16}" and sc.seed == 0
    assert [(o.label, o.op) for o in sc.operations] == [("strict", "mourre")]
    assert sc.operations[0].params == {"interval": "0.2:0.6"}
    assert sc.operations[0].line == 5
    assert sc.tolerance("virial") == 1e-10


def test_parse_tolerance_section():
    sc = parse(HEAD + "[tolerances]\nvirial = 1e-9\n")
    assert sc.tolerance("virial") == 1e-9
    with pytest.raises(ParseError) as exc:
        parse(HEAD + "[tolerances]\nvirial = loose\n")
    assert exc.value.line == 5
    with pytest.raises(ParseError) as exc:
        parse(HEAD + "[tolerances]\nwobble = 1\n")
    assert "wobble" in str(exc.value) and exc.value.line == 5


@pytest.mark.parametrize("text, line, needle", [
    (HEAD + "\n[x]\nop = teleport\n", 6, "teleport"),
    (HEAD + "\n[x]\nop = mourre\nspeed = 3\n", 7, "speed"),
    (HEAD + "\n[x]\ninterval = 0:1\n", 5, "no 'op'"),
    (HEAD + "colour = red\n", 4, "colour"),
    ("[scenario]\nmodel = lattice\n", 1, "name"),
    ("name = t\n", 1, "before the first"),
    (HEAD + "[x]\nop = virial\n[x]\nop = virial\n", 6, "duplicate section"),
    (HEAD + "seed = many\n", 4, "seed"),
    ("[other]\nop = virial\n", 1, "missing [scenario]"),
])
def test_parse_errors_carry_line_numbers(text, line, needle):
    with pytest.raises(ParseError) as exc:
        parse(text)
    assert exc.value.line == line
    assert needle in str(exc.value)
    assert str(exc.value).startswith(f"t.ini:{line}:")


def test_tolerance_overrides():
    out = config.apply_tolerance_overrides(config.DEFAULT_TOLERANCES, {"slope": "0.2"})
    assert out["slope"] == 0.2 and config.DEFAULT_TOLERANCES["slope"] == 0.3
    with pytest.raises(ParseError):
        config.apply_tolerance_overrides(config.DEFAULT_TOLERANCES, {"nope": "1"})
    with pytest.raises(ParseError):
        config.apply_tolerance_overrides(config.DEFAULT_TOLERANCES, {"slope": "x"})


def test_shipped_example_matches_builtin_text():
    assert (SCENARIOS / "example45.ini").read_text() == config.EXAMPLE45


# --- running ------------------------------------------------------------------------------


def test_empty_operations_pass(tmp_path):
    run = runner.run_text("[scenario]\nname = empty\n", tmp_path)
    assert run.status == runner.EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["operations"] == [] and report["passed"] and report["schema"] == reports.SCHEMA


def test_unknown_model_is_registry_miss(tmp_path):
    with pytest.raises(RegistryMiss):
        runner.run_text("[scenario]\nname = t\nmodel = torus{N=4}\n", tmp_path)


def test_bad_parameter_value_reports_section_line(tmp_path):
    with pytest.raises(ParseError) as exc:
        runner.run_text(HEAD + "\n[bad]\nop = virial\ninterval = 0.2-0.6\n", tmp_path, "t.ini")
    assert exc.value.line == 5 and "[bad]" in str(exc.value)


def test_eta_below_floor_is_a_parse_error(tmp_path):
    text = HEAD + "\n[scan]\nop = lap\ns = 0.7\neta = 0.5x:4x:5\n"
    with pytest.raises(ParseError):
        runner.run_text(text, tmp_path)


def test_failing_verdict_sets_exit_2(tmp_path):
    text = HEAD + "\n[too strict]\nop = mourre\nmin_c_strict = 10\n"
    run = runner.run_text(text, tmp_path)
    assert run.status == runner.EXIT_VERDICT and run.failures == ["too strict"]
    path = tmp_path / "s.ini"
    path.write_text(text)
    with pytest.raises(VerdictFailure):
        runner.run_scenario(path, tmp_path / "o", raise_on_failure=True)


def test_report_tags_every_operation(tmp_path):
    run = runner.run_text(HEAD + "\n[v]\nop = virial\n\n[r]\nop = rank_one\n", tmp_path)
    for rec in run.report["operations"]:
        assert rec["quantity"] == runner.QUANTITY[rec["op"]]
    assert set(runner.QUANTITY) == set(config.OPERATIONS) == set(runner.OPS)


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenarios_match_goldens(name, tmp_path):
    run = runner.run_scenario(SCENARIOS / f"{name}.ini", tmp_path)
    assert run.status == runner.EXIT_PASS, run.failures
    expected = json.loads((GOLDEN / name / "report.json").read_text())
    actual = json.loads((tmp_path / "report.json").read_text())
    assert reports.compare_reports(actual, expected, rtol=1e-6, atol=1e-9) == []
    for table in (GOLDEN / name).glob("*.csv"):
        assert (tmp_path / table.name).exists()


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    runner.run_scenario(SCENARIOS / "lattice.ini", a)
    runner.run_scenario(SCENARIOS / "lattice.ini", b)
    names = sorted(p.name for p in a.iterdir())
    assert "report.meta.json" in names
    for n in names:
        if n != "report.meta.json":
            assert (a / n).read_bytes() == (b / n).read_bytes(), n


# --- reports ---------------------------------------------------------------------------------


def test_plain_and_dumps():
    obj = {"b": np.float64(1.5), "a": [np.int64(2), np.inf, complex(1, 2)], "c": np.array([1.0, 2.0])}
    text = reports.dumps(obj)
    assert text.index('"a"') < text.index('"b"')
    back = json.loads(text)
    assert back["b"] == 1.5 and back["c"] == [1.0, 2.0]
    assert back["a"][1] is None or back["a"][1] == "inf"


def test_slug_csv_and_plot():
    assert reports.slug("Full resolvent (s=0.7)") == "full_resolvent_s_0_7"
    rows = [("eta", "norm"), (0.5, 2.0), (0.25, 4.0)]
    assert reports.csv_text(rows).splitlines()[0] == "eta,norm"
    plot = reports.plot_text(rows[1:], "eta norm")
    assert plot.splitlines() == ["# eta norm", "0.5 2", "0.25 4"]


def test_compare_reports_tolerances():
    exp = {"x": 1.0, "tag": "a", "v": [1, 2], "r": 1e-16}
    assert reports.compare_reports({"x": 1.0 + 1e-9, "tag": "a", "v": [1, 2], "r": 3e-16}, exp) == []
    bad = reports.compare_reports({"x": 1.1, "tag": "b", "v": [1], "extra": 0}, exp)
    assert any("/x" in m for m in bad) and any("/tag" in m for m in bad)
    assert any("/v" in m for m in bad) and any("one side" in m for m in bad)
    assert reports.compare_reports({"x": 1.1}, {"x": 1.0}, field_tol={"x": (0.2, 0.0)}) == []


# --- CLI -----------------------------------------------------------------------------------------


def test_cli_bad_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["mourre", "--no-such-flag"])
    assert exc.value.code == runner.EXIT_USAGE


def test_cli_mourre_prints_report(tmp_path, capsys):
    code = cli.main(["mourre", "--model", "lattice{N=16}", "--interval", "0.3:0.7", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == runner.EXIT_PASS
    assert "PASS" in out and '"c_strict"' in out
    assert (tmp_path / "report.json").exists()


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["mourre", "--model", "torus{N=3}", "--out", str(tmp_path)]) == runner.EXIT_USAGE
    assert cli.main(["mourre", "--model", "lattice{N=16}", "--tol", "bogus=1", "--out", str(tmp_path)]) == 1
    bad = tmp_path / "bad.ini"
    bad.write_text(HEAD + "\n[x]\nop = teleport\n")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == runner.EXIT_USAGE
    assert "teleport" in capsys.readouterr().out
    failing = tmp_path / "fail.ini"
    failing.write_text(HEAD + "\n[x]\nop = mourre\nmin_c_strict = 10\n")
    assert cli.main(["run", str(failing), "--out", str(tmp_path / "f")]) == runner.EXIT_VERDICT


def test_cli_lap_writes_table(tmp_path, capsys):
    code = cli.main(["lap", "--model", "multiplication{N=64,L=20}", "--s", "0.7", "--out", str(tmp_path)])
    assert code in (runner.EXIT_PASS, runner.EXIT_VERDICT)
    assert list(tmp_path.glob("*.csv")) and '"slope"' in capsys.readouterr().out


def test_cli_probe_and_hs_verify(tmp_path, capsys):
    code = cli.main(["probe", "--family", "cutoff_weight", "--alpha", "0.5", "--s", "0.9",
                     "--R", "16,32,64,128", "--half-width", "256", "--out", str(tmp_path / "p")])
    assert code == runner.EXIT_PASS
    # at R = 128 the cutoff misses spec(A) = [-128, 128]: no power law to fit
    code = cli.main(["probe", "--family", "cutoff_weight", "--alpha", "0.5", "--s", "0.9",
                     "--R", "16,32,64,128", "--half-width", "128", "--out", str(tmp_path / "q")])
    assert code == runner.EXIT_USAGE
    code = cli.main(["hs-verify", "--count", "2", "--max-dim", "6", "--out", str(tmp_path / "h")])
    assert code == runner.EXIT_PASS


def test_cli_example45(tmp_path, capsys):
    assert cli.main(["example45", "--out", str(tmp_path)]) == runner.EXIT_PASS
    report = json.loads((tmp_path / "report.json").read_text())
    assert [o["verdict"] for o in report["operations"]] == ["pass"] * 8
