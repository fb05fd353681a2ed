import functools

import pytest
from hypothesis import settings

from sinkrate.benchmarks import benchmark_scenarios
from sinkrate.runner import analyse
from sinkrate.scenario import parse_scenario

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_ACCEPTANCE_LINES = {}


@functools.lru_cache(maxsize=None)
def benchmark(name: str, epsilon: float | None = None):
    """Cached ``analyse`` result for one catalogue entry."""
    specs = {s["name"]: (i, s) for i, s in enumerate(benchmark_scenarios())}
    i, spec = specs[name]
    return analyse(parse_scenario(spec, i), epsilon)


TRACE_BENCHMARKS = ("zero_cost", "separable", "two_by_two", "gauss_sq_eps1", "gauss_sq_eps0.25",
                    "gauss_sq_far", "gauss2d_sq", "dist_pow1", "dist_pow1.5", "dist_pow0.5",
                    "bounded_custom", "stability16")


@pytest.fixture
def acceptance_line():
    def record(number: int, title: str, passed: bool, detail: str = ""):
        _ACCEPTANCE_LINES[number] = (title, passed, detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE_LINES):
        title, passed, detail = _ACCEPTANCE_LINES[n]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {n:2d}. {title}" + (f" ({detail})" if detail else ""))
