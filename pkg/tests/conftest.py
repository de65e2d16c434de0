from __future__ import annotations

import pytest

from roistitch.latency import LatencyProfile, ProfileEntry, linear_law_profile


@pytest.fixture
def small_profile() -> LatencyProfile:
    # slack(1) = 130, slack(2) = 200, slack(3) = 260
    return LatencyProfile(
        (100, 100),
        (ProfileEntry(1, 100, 10), ProfileEntry(2, 170, 10), ProfileEntry(3, 230, 10)),
    )


@pytest.fixture
def default_profile() -> LatencyProfile:
    return linear_law_profile(16, 30, 18, 1.5, 0.5)


_acceptance: list[tuple[int, str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        number, title = marker.args
        detail = "; ".join(f"{k}={v}" for k, v in rep.user_properties)
        _acceptance.append((number, title, "PASS" if rep.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, detail in sorted(_acceptance):
        line = f"criterion {number:>2} {status}  {title}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
