import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from pathlib import Path

settings.register_profile(
    "loss",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("loss")

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def scenario_path():
    def get(name):
        return SCENARIOS / f"{name}.cfg"

    return get


# ---------------------------------------------------------------------------
# shared 2-D runs (reference to 0.2 s and the three-grid sweep)

ACOUSTIC_TIMES = (0.02, 0.04, 0.06, 0.1, 0.15, 0.2)


@pytest.fixture(scope="session")
def acoustic_cfg():
    from loss_sim.config import load_config

    return load_config(SCENARIOS / "acoustic2d.cfg")


@pytest.fixture(scope="session")
def acoustic_reference(acoustic_cfg):
    from loss_sim.spectral import reference_run

    return reference_run(acoustic_cfg, ["v3"], ACOUSTIC_TIMES)


@pytest.fixture(scope="session")
def acoustic_sweep(acoustic_cfg, acoustic_reference):
    from loss_sim.harness import convergence_sweep

    return convergence_sweep(acoustic_cfg, [32, 64, 128], [0.02, 0.04, 0.06], reference=acoustic_reference)


# ---------------------------------------------------------------------------
# acceptance report: one line per criterion, repeated in the terminal summary

_REPORT: dict[str, str] = {}


@pytest.fixture(scope="session")
def acceptance_report():
    def record(key: str, ok: bool, detail: str):
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
        _REPORT[key] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_REPORT, key=lambda k: (int(k.rstrip("abc")), k)):
        terminalreporter.write_line(_REPORT[key])
