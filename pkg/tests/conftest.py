import time

import pytest

from tschsim.federate import fedavg
from tschsim.scenario import ScenarioConfig, train_model
from tschsim.traffic import PATTERNS

_VERDICTS: dict[int, str] = {}


@pytest.fixture(scope="session")
def record_criterion():
    """Store one PASS/FAIL line per acceptance criterion for the run summary."""
    def record(number: int, ok: bool, detail: str) -> bool:
        _VERDICTS[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        print(_VERDICTS[number])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[n])


@pytest.fixture(scope="session")
def global_table():
    """Tables trained on simple5 under each traffic pattern (1e7 ms each), merged.

    Returns (frozen table, training result per pattern, seconds spent).
    """
    t0 = time.perf_counter()
    base = ScenarioConfig(name="train", topology="simple5", protocol="rl-asl", mode="train",
                          seed=1)
    runs = {p: train_model(base.with_changes(traffic=p)) for p in PATTERNS}
    q = fedavg([r.model for r in runs.values()])
    return q, runs, time.perf_counter() - t0
