"""Shared fixtures and the acceptance-criteria summary table."""

import numpy as np
import pytest

ACCEPTANCE_RESULTS = []


def record_acceptance(index: int, name: str, passed: bool, detail: str):
    ACCEPTANCE_RESULTS.append((index, name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for idx, name, ok, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{idx}] {status}  {name}: {detail}")


@pytest.fixture(scope="session")
def reference_channel_20():
    """Channel basis of the reference run (Gamma = 0, kappa*tau = 20)."""
    from czlink.lindblad_engine import GateConfig, evolve_channel_basis

    cfg = GateConfig(kappa=1.0, tau=20.0)
    return cfg, evolve_channel_basis(cfg)
