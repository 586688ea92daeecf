import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def diag123():
    from schatten.linops import diagonal
    return diagonal([1.0, 2.0, 3.0])


@pytest.fixture
def spd10():
    """Fixed seeded 10 x 10 SPD matrix with eigenvalues in [1, 3]."""
    from schatten.matgen import spd_with_spectrum
    eigs = np.random.default_rng(10).uniform(1.0, 3.0, 10)
    return spd_with_spectrum(eigs, seed=11), np.sort(eigs)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
