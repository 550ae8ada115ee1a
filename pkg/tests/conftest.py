import numpy as np
import pytest

from oculodec.synthgen import GenConfig, generate_session


def short_config(**kw) -> GenConfig:
    """About a minute of free viewing: 3 runs, 12 trials."""
    base = dict(seed=0, duration_s=60.0, n_trials_per_direction=3, fixation_block_s=5.0,
                lead_in_s=1.0, inter_run_s=1.0)
    base.update(kw)
    return GenConfig(**base)


@pytest.fixture(scope="session")
def short_session():
    return generate_session(short_config(seed=7))


@pytest.fixture(scope="session")
def fv_session():
    """Free viewing, 4 runs x 48 trials, 500 Hz (cheap but realistic timing)."""
    return generate_session(GenConfig(seed=11, fs_neural=500.0, n_runs=4,
                                      n_trials_per_direction=48))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the run (stdout is captured)
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
