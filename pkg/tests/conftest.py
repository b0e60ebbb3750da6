import json
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from gse_supply.scenario import RunConfig, bundled_scenario, fixture_path, run_pipeline  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fixtures_dir():
    return fixture_path("")


@pytest.fixture(scope="session")
def trajectories():
    return json.loads(fixture_path("paper_params/trajectories.json").read_text())


@pytest.fixture(scope="session")
def runs():
    """Bundled scenarios run once per session, keyed by name."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_pipeline(RunConfig.load(bundled_scenario(name)))
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n][1])
