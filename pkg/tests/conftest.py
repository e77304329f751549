import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CRITERIA = {
    1: "schedule arithmetic",
    2: "clean-channel ranging",
    3: "time-of-flight spot values",
    4: "interference regime",
    5: "aliasing",
    6: "removal (saturation and telemetry)",
    7: "power-off",
    8: "controllable injection",
    9: "metric oracles",
    10: "robustness coefficient spot values",
    11: "corruption bounds",
    12: "band estimate",
}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")
    config._criterion_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    results = item.config._criterion_outcomes.setdefault(marker.args[0], [])
    if report.when == "call" or report.failed:
        results.append(report.passed)


def pytest_terminal_summary(terminalreporter, config):
    outcomes = config._criterion_outcomes
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        if n not in outcomes:
            continue
        ok = all(outcomes[n])
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {CRITERIA[n]}")
