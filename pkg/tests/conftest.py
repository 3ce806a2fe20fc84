import numpy as np
import pytest

from shrinkage_priors.posterior import PosteriorContext
from shrinkage_priors.priors import make_horseshoe, registry


@pytest.fixture(scope="session")
def horseshoe():
    return make_horseshoe()


@pytest.fixture(scope="session")
def families():
    return registry()


@pytest.fixture
def ctx1(horseshoe):
    return PosteriorContext(horseshoe, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" in report.nodeid and report.when == "call":
        _ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        verdict = "PASS" if _ACCEPTANCE[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
