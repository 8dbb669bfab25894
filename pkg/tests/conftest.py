import pytest

from waphandoff.scenario import canonical_scenario_path, load_scenario
from waphandoff.simulation import run

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        previous = _criteria.get(number, (title, "PASS"))[1]
        status = "PASS" if report.outcome == "passed" and previous == "PASS" else "FAIL"
        _criteria[number] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")


@pytest.fixture(scope="session")
def canonical():
    return load_scenario(canonical_scenario_path())


@pytest.fixture(scope="session")
def with_wap_run(canonical):
    return run(canonical.with_overrides(wap_enabled=True))


@pytest.fixture(scope="session")
def without_wap_run(canonical):
    return run(canonical.with_overrides(wap_enabled=False))
