import numpy as np
import pytest

from curvecast.splines import SplineSpace
from curvecast.synth import random_spec

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0][2:])):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cubic_space():
    return SplineSpace.from_breaks([0.0, 0.25, 0.5, 0.75, 1.0], 4)


@pytest.fixture
def small_spec():
    # seven spans on [0, 1]; a cut at 0.25 leaves N1 = 5 < p + q = 7, so the
    # conditional law of the continuation is not degenerate. Cuts just past a
    # break leave a very short span and an ill-conditioned G11, so tests
    # keep away from them.
    return random_spec(7, 10, 3, 4, level=10.0)
