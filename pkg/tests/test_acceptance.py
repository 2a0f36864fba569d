"""One test per acceptance criterion; each prints its PASS/FAIL line."""

import pytest

from coopduality import acceptance

CRITERIA = sorted(acceptance.CRITERIA)


@pytest.mark.parametrize("number", CRITERIA, ids=[f"criterion_{n:02d}" for n in CRITERIA])
def test_criterion(number, capsys):
    result = acceptance.CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
