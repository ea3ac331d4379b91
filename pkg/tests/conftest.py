import numpy as np
import pytest

from omegascale import BandOmega, BrownianDrift, CramerLundberg

# Shared benchmark: both process families plus the two-level band rate used
# throughout the cross-validation tests.
BAND = dict(p=0.3, q=1.0, a=0.5, b=1.2)


@pytest.fixture(scope="session")
def bm():
    return BrownianDrift(mu=1.0, sigma=np.sqrt(2.0))


@pytest.fixture(scope="session")
def cl():
    return CramerLundberg(mu=1.2, vartheta=1.0, rho=1.5)


@pytest.fixture(scope="session")
def band():
    return BandOmega(**BAND)


# Acceptance-criteria reporting: each criterion test records one line here;
# the terminal summary prints them all so a full run always ends with a
# per-criterion pass/fail listing.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance():
    def record(criterion: int, passed: bool, detail: str):
        ACCEPTANCE_LINES.append((criterion, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num, passed, detail in sorted(ACCEPTANCE_LINES):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")
