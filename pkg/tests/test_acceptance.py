"""The ten acceptance criteria, one test each, at their stated tolerances.

Each test prints a ``PASS``/``FAIL`` line with the criterion's key numbers.
Run ``python3 tests/test_acceptance.py`` for the lines alone.
"""

import json
import sys

import pytest

from hypergauss.battery import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + res.line())
        print(json.dumps(res.details, default=str, sort_keys=True)[:2000])
    assert res.passed, res.details


if __name__ == "__main__":
    failed = 0
    for number in sorted(CRITERIA):
        res = CRITERIA[number]()
        print(res.line(), flush=True)
        failed += not res.passed
    sys.exit(1 if failed else 0)
