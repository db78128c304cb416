from functools import lru_cache

import pytest

from delayhit.tracegen import SyntheticSpec, gen_synthetic

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@lru_cache(maxsize=None)
def synthetic_trace(seed: int, arrival: str = "poisson"):
    return tuple(gen_synthetic(SyntheticSpec(arrival=arrival, seed=seed)))


@pytest.fixture
def record_criterion():
    def record(name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
