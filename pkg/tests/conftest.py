import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def synthetic():
    from netrepair.data import load_dataset

    return load_dataset("synthetic", seed=0)


@pytest.fixture(scope="session")
def baseline(synthetic):
    """cnn-small trained two epochs on the synthetic corpus."""
    from netrepair.orchestrate.pipeline import train_baseline

    return train_baseline("cnn-small", 2, synthetic, seed=0, epochs=2, lr=0.05)


@pytest.fixture(scope="session")
def zero_defect(baseline):
    from netrepair.defects import DefectSpec, inject_defect

    return inject_defect(baseline, DefectSpec("weight-zero", "fc2", 0.3, seed=0))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
