import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from svipha.scenario_space import ScenarioSpace

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@st.composite
def scenario_spaces(draw, max_stages=3, max_scenarios=30, max_dim=3):
    """Random finite trees: each stage splits every node into 1..3 children."""
    n_stages = draw(st.integers(1, max_stages))
    dims = tuple(draw(st.integers(0 if k else 1, max_dim)) for k in range(n_stages))
    leaves = [()]
    for _ in range(n_stages - 1):
        new = []
        for leaf in leaves:
            kids = draw(st.integers(1, 3))
            new.extend(leaf + (c,) for c in range(kids))
            if len(new) >= max_scenarios:
                break
        leaves = new[:max_scenarios]
    weights = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=len(leaves), max_size=len(leaves))))
    p = weights / weights.sum()
    p[-1] = 1.0 - p[:-1].sum()
    history = [tuple(leaf[:k] for k in range(n_stages)) for leaf in leaves]
    return ScenarioSpace(dims, p, history)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``PASS/FAIL criterion N: ...`` line and fail the test when ``ok`` is false."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(n: int, ok: bool, details: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {details}"
        lines.append((n, line))
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
