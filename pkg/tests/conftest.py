import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slosh.config import ExperimentConfig
from slosh.pipeline import settle

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def desk_cfg():
    return ExperimentConfig.desk()


@pytest.fixture(scope="session")
def desk_settled(desk_cfg):
    """Settled 150-particle state, shared by every test that needs a resting fluid."""
    return settle(desk_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting -------------------------------------------------

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        props = dict(report.user_properties)
        _ACCEPTANCE[report.nodeid] = (props.get("criterion", report.nodeid.split("::")[-1]), report.outcome,
                                      props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in sorted(_ACCEPTANCE.values(), key=lambda v: int(v[0].split()[0])):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {name}: {verdict}  {detail}")
