import numpy as np
import pytest

from wlanbw.dcf import DcfConfig, StationConfig, run_replications
from wlanbw.probe_queue import ProbeTrainSpec


@pytest.fixture(scope="session")
def quiet_ensemble():
    """Small no-contention DCF ensemble (300 reps of 60 packets at 3 Mbps)."""
    cfg = DcfConfig(probe=ProbeTrainSpec.from_rate(60, 3e6), seed=21)
    return run_replications(cfg, 300)


@pytest.fixture(scope="session")
def contended_ensemble():
    """300 reps of 80-packet trains at 5 Mbps against a 4 Mbps Poisson contender."""
    cfg = DcfConfig(
        probe=ProbeTrainSpec.from_rate(80, 5e6),
        contenders=(StationConfig(1500, 4e6, "poisson"),),
        seed=22,
        probe_start_us=100_000,
    )
    return run_replications(cfg, 300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
