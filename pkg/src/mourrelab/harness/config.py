"""Scenario files: INI with a ``[scenario]`` header, tolerances and operations.

::

    [scenario]
    name = example45
    model = artificial{N0=128,N1=16,lambda=0.5,decay=2,seed=7}
    output = out/example45
    seed = 7

    [tolerances]
    virial = 1e-10

    [strict constant]
    op = mourre
    interval = 0.2:0.6

Every other section is one operation, run in file order; the section name
labels its outputs and ``op`` selects what runs. Unknown keys are errors.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from ..errors import ParseError

DEFAULT_TOLERANCES = {
    "hs": 1e-6,
    "expansion": 1e-8,
    "virial": 1e-10,
    "transfer": 1e-10,
    "feshbach": 1e-10,
    "rank_one": 1e-12,
    "identity": 1e-10,
    "propagation": 1e-10,
    "slope": 0.3,
    "bounded": 0.1,
    "divergent": 0.4,
}

SCENARIO_KEYS = {"name", "model", "output", "seed"}

# op name -> accepted keys (besides ``op``)
OPERATIONS = {
    "hs_verify": {"symbols", "count", "max_dim", "target"},
    "mourre": {"interval", "projection", "min_c_strict", "max_c_strict", "min_c_projected",
               "min_c_projected_ratio"},
    "virial": {"interval"},
    "lap": {"interval", "s", "mode", "eta", "expect"},
    "probe": {"family", "rho", "s", "s_prime", "k", "alpha", "scales", "half_width"},
    "transfer": {"interval"},
    "feshbach": {"interval"},
    "rank_one": set(),
    "special_sequence": {"interval", "s", "depth", "points"},
    "propagation": {"interval", "s", "times", "states"},
}


@dataclass
class Operation:
    label: str
    op: str
    params: dict
    line: int | None = None


@dataclass
class Scenario:
    name: str
    model: str | None
    output: str
    seed: int = 0
    operations: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    path: str | None = None

    def tolerance(self, name):
        return self.tolerances[name]


def _line_index(text):
    """Line numbers of section headers and of keys within each section."""
    sections, keys = {}, {}
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[(.+)\]$", line)
        if m:
            current = m.group(1).strip()
            sections.setdefault(current, n)
            continue
        if current and line and line[0] not in "#;":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            keys.setdefault((current, key), n)
    return sections, keys


def apply_tolerance_overrides(tolerances, overrides, path=None):
    """Merge ``{name: value}`` overrides, rejecting unknown names."""
    out = dict(tolerances)
    for key, value in overrides.items():
        if key not in DEFAULT_TOLERANCES:
            raise ParseError(f"unknown tolerance {key!r}; known: {', '.join(sorted(DEFAULT_TOLERANCES))}",
                             path)
        try:
            out[key] = float(value)
        except ValueError:
            raise ParseError(f"tolerance {key!r} is not a number: {value!r}", path) from None
    return out


def parse_scenario_text(text, path="<string>"):
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str.lower
    try:
        parser.read_string(text, source=path)
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", path, exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r} in [{exc.section}]", path, exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("content before the first [section]", path, exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", path, lineno) from None
    sections, keys = _line_index(text)

    def where(section, key=None):
        if key is not None and (section, key) in keys:
            return keys[(section, key)]
        return sections.get(section)

    if "scenario" not in parser:
        raise ParseError("missing [scenario] section", path, 1)
    head = parser["scenario"]
    for key in head:
        if key not in SCENARIO_KEYS:
            raise ParseError(f"unknown key {key!r} in [scenario]", path, where("scenario", key))
    if "name" not in head:
        raise ParseError("[scenario] needs a name", path, where("scenario"))
    try:
        seed = int(head.get("seed", "0"))
    except ValueError:
        raise ParseError("seed must be an integer", path, where("scenario", "seed")) from None
    scenario = Scenario(
        name=head["name"],
        model=head.get("model"),
        output=head.get("output", head["name"]),
        seed=seed,
        path=path,
    )

    if "tolerances" in parser:
        for key, value in parser["tolerances"].items():
            if key not in DEFAULT_TOLERANCES:
                raise ParseError(f"unknown tolerance {key!r}", path, where("tolerances", key))
            try:
                scenario.tolerances[key] = float(value)
            except ValueError:
                raise ParseError(f"tolerance {key!r} is not a number", path, where("tolerances", key)) from None

    for section in parser.sections():
        if section in ("scenario", "tolerances"):
            continue
        body = dict(parser[section])
        op = body.pop("op", None)
        if op is None:
            raise ParseError(f"section [{section}] has no 'op' key", path, where(section))
        if op not in OPERATIONS:
            raise ParseError(f"unknown op {op!r} in [{section}]; known: {', '.join(sorted(OPERATIONS))}",
                             path, where(section, "op"))
        for key in body:
            if key not in OPERATIONS[op]:
                raise ParseError(f"op {op!r} does not take key {key!r}", path, where(section, key))
        scenario.operations.append(Operation(section, op, body, where(section)))
    return scenario


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario_text(fh.read(), str(path))


# the block example of the artificial model, shipped as scenarios/example45.ini
EXAMPLE45 = """\
[scenario]
name = example45
model = artificial{N0=128,N1=16,lambda=0.5,decay=2,seed=7}
output = out/example45
seed = 7

[strict constant]
op = mourre
max_c_strict = 1e-8

[projected constant]
op = mourre
projection = block
min_c_projected_ratio = 0.5

[full resolvent]
op = lap
s = 0.7
mode = full
eta = 1x:4x:5
expect = divergent

[reduced resolvent]
op = lap
s = 0.7
mode = reduced
eta = 1x:4x:5
expect = bounded

[virial]
op = virial

[transfer]
op = transfer

[feshbach]
op = feshbach

[rank one]
op = rank_one
"""
