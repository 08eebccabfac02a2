import numpy as np
import pytest

from frostrom.mesh import CaseGeometry, build_grid


@pytest.fixture(scope="session")
def fine_grid():
    return build_grid(CaseGeometry(), 70, 80)


@pytest.fixture(scope="session")
def coarse_grid():
    return build_grid(CaseGeometry(), 35, 40)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid or rep.when != "call" and outcome != "error":
                continue
            name = nodeid.split("::")[-1]
            detail = dict(getattr(rep, "user_properties", [])).get("detail", "")
            lines.append((name, "PASS" if outcome == "passed" else "FAIL", detail))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in sorted(lines):
        num = int(name.split("_")[2])
        terminalreporter.write_line(f"criterion {num:2d} {status}  {name}  {detail}".rstrip())
