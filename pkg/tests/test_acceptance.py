"""The eight headline criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line per criterion.
"""
import pytest

from cocycle_lab.acceptance import ALL_CHECKS


@pytest.mark.acceptance
@pytest.mark.parametrize("check", ALL_CHECKS, ids=[f.__name__.removeprefix("check_") for f in ALL_CHECKS])
def test_criterion(check):
    result = check()
    print()
    print(result.line(), result.detail)
    assert result.passed, result.detail
