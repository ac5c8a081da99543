import numpy as np
import pytest

from klmismatch import joint_from_conditionals

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def example_pair():
    """Two observations with equal marginals; decisions disagree at both."""
    pr = joint_from_conditionals([0.5, 0.5], np.array([[0.9, 0.2], [0.1, 0.8]]))
    q = joint_from_conditionals([0.5, 0.5], np.array([[0.4, 0.3], [0.6, 0.7]]))
    return pr, q


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
