import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    if report.when == "call" or report.failed:
        name = report.nodeid.split("::")[-1]
        if _ACCEPTANCE.get(name) != "FAIL":
            _ACCEPTANCE[name] = {"passed": "PASS", "failed": "FAIL"}.get(report.outcome, "SKIP")


def pytest_terminal_summary(terminalreporter):
    rows = _ACCEPTANCE
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, verdict in sorted(rows.items(), key=lambda kv: int(kv[0].split("_")[2])):
        label = " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"criterion {name.split('_')[2]} ({label}): {verdict}")
