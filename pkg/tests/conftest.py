import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from skewloc.analytic import ProcessParams

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SIGMA_PAIRS = [(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)]


@pytest.fixture(params=SIGMA_PAIRS, ids=lambda p: f"sigma{p[0]:g}-{p[1]:g}")
def obm_params(request):
    return ProcessParams.oscillating(*request.param)


@pytest.fixture
def bm():
    return ProcessParams.oscillating(1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance-criterion lines at the end of the run."""
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
