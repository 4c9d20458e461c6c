import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


_criteria: dict[int, list[tuple[str, bool]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    # an expected failure still counts as a failed requirement
    ok = rep.passed and not hasattr(rep, "wasxfail")
    parts = _criteria.setdefault(mark.args[0], [])
    parts[:] = [p for p in parts if p[0] != item.name] + [(item.name, ok)]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        parts = _criteria[k]
        failed = [name for name, ok in parts if not ok]
        status = "FAIL" if failed else "PASS"
        note = f" (failing: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {k}: {status} [{len(parts) - len(failed)}/{len(parts)} checks]{note}")
