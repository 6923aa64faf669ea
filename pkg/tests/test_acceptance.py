"""Acceptance criteria 1-10, one test each.

Each test prints a single pass/fail line (visible with ``pytest -s``) and
asserts the criterion at its stated tolerance. Run the whole set with
``pytest tests/test_acceptance.py -s`` or ``mourrelab suite``.
"""
import json

import pytest

from mourrelab.harness import acceptance


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    out = acceptance.run_all([number], echo=None)[0]
    print()
    print(out.line())
    print(json.dumps(out.to_dict()["measured"], default=str, sort_keys=True))
    assert out.passed, out.line()
