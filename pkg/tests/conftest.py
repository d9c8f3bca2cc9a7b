import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

EXTENDED = os.environ.get("CHANMAGIC_EXTENDED", "1") != "0"


def pytest_collection_modifyitems(config, items):
    if EXTENDED:
        return
    skip = pytest.mark.skip(reason="five-qubit check disabled by CHANMAGIC_EXTENDED=0")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_clifford_gates(rng, n, depth):
    gates = []
    for _ in range(depth):
        if n > 1 and rng.random() < 0.4:
            a, b = rng.choice(n, 2, replace=False)
            gates.append((["CNOT", "CZ", "SWAP"][rng.integers(3)], (int(a), int(b))))
        else:
            gates.append((["H", "S", "SDG", "X", "Y", "Z"][rng.integers(6)], (int(rng.integers(n)),)))
    return gates


# one summary line per acceptance criterion ------------------------------------

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    entry = _CRITERIA.setdefault(crit[0], {"title": crit[1], "passed": 0, "failed": 0, "skipped": 0})
    entry[report.outcome] += 1


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.criterion = (int(mark.args[0]), str(mark.args[1]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "FAIL" if e["failed"] else ("PASS" if e["passed"] else "SKIP")
        extra = f" ({e['skipped']} part(s) skipped)" if e["skipped"] and status != "SKIP" else ""
        terminalreporter.write_line(f"criterion {num:2d} {status}: {e['title']}{extra}")
