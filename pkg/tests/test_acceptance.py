"""One test per acceptance criterion, each at its stated tolerance."""

import pytest

from randroots.acceptance import TITLES, run_criterion

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("number", sorted(TITLES), ids=lambda i: f"criterion_{i:02d}")
def test_criterion(number):
    result = run_criterion(number)
    line = result.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert result.passed, line
