import time
from dataclasses import dataclass, field

import pytest
from hypothesis import HealthCheck, settings

from regrasp_tamp import _pykernels
from regrasp_tamp.cli import run_planner
from regrasp_tamp.planner import execute
from regrasp_tamp.scenes import generate_scene_suite

settings.register_profile("repo", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("repo")

try:
    from regrasp_tamp import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _ckernels is not None:
    BACKENDS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


PLANNERS = ("multimodal", "baseline", "dijkstra-task")


@dataclass
class SuiteRun:
    scenes: list
    results: dict = field(default_factory=dict)  # (index, planner) -> (PlanResult, StabilityReport | None)
    seconds: dict = field(default_factory=dict)

    def get(self, idx, planner):
        return self.results[(idx, planner)]


@pytest.fixture(scope="session")
def suite():
    return generate_scene_suite(0)


@pytest.fixture(scope="session")
def suite_run(suite):
    run = SuiteRun(suite)
    for name in PLANNERS:
        t0 = time.perf_counter()
        for i, scene in enumerate(suite, start=1):
            result = run_planner(scene, name)
            report = execute(scene, result) if result.solved else None
            run.results[(i, name)] = (result, report)
        run.seconds[name] = time.perf_counter() - t0
    return run


# one summary line per acceptance criterion -------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or rep.failed:
        ok, _ = _CRITERIA.get(n, (True, title))
        _CRITERIA[n] = (ok and rep.passed, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, title = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
