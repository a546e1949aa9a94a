"""Acceptance criteria at their stated tolerances, one test per criterion.

Each result line is printed in the pytest terminal summary; running this file
directly prints the same lines and exits non-zero if any criterion fails.
"""
import sys

import pytest

from vanhove.suites import SUITES

RESULTS: list = []


@pytest.mark.acceptance
@pytest.mark.parametrize("name", list(SUITES))
def test_criterion(name):
    res = SUITES[name]()
    RESULTS.append(res.line())
    print(res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    ok = True
    for name, fn in SUITES.items():
        res = fn()
        ok &= res.passed
        print(res.line(), flush=True)
    sys.exit(0 if ok else 1)
