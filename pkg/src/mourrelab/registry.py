"""Parser for registry references such as ``phi_R{s=0.6,R=8}``."""

import re

from .errors import ParseError, RegistryMiss

_REF = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\{(.*)\})?\s*$")


def parse_reference(text):
    """Split ``name{k=v,...}`` into the name and a dict of float parameters."""
    m = _REF.match(text)
    if m is None:
        raise ParseError(f"malformed registry reference {text!r}")
    name, body = m.group(1), m.group(2)
    params = {}
    if body is not None and body.strip():
        for item in body.split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ParseError(f"expected key=value in {text!r}, got {item!r}")
            if key in params:
                raise ParseError(f"duplicate key {key!r} in {text!r}")
            try:
                params[key] = float(value)
            except ValueError:
                raise ParseError(f"value of {key!r} in {text!r} is not a real number") from None
    return name, params


def build(table, text):
    """Look ``text`` up in ``table`` (name -> (factory, allowed keys))."""
    name, params = parse_reference(text)
    if name not in table:
        raise RegistryMiss(f"unknown entry {name!r}; known: {', '.join(sorted(table))}")
    factory, allowed = table[name]
    unknown = set(params) - set(allowed)
    if unknown:
        raise RegistryMiss(f"{name} does not take {', '.join(sorted(unknown))}")
    return factory(**params)
