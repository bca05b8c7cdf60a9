import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call":
                continue
            props = [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
            if props:
                lines.extend(props)
            elif outcome == "failed" and "test_acceptance" in rep.nodeid:
                lines.append(f"FAIL  {rep.nodeid.split('::')[-1]}: raised before reaching a verdict")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
