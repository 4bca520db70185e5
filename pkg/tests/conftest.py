from collections import defaultdict

import pytest

from groomkit import synth

CRITERIA = {
    1: "codec exactness against a naive DFT oracle",
    2: "curliness preservation under frequency interpolation",
    3: "penetration ordering nearest < parting-aware < bilinear",
    4: "weight-equation correctness",
    5: "refinement invariants",
    6: "literal lookahead rotation factors",
    7: "metric identities",
    8: "messiness structure",
    9: "latent stand-in contracts",
    10: "determinism across runs and thread counts",
}

_outcomes = defaultdict(list)
_unattainable = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    rep.criterion = marker.args[0] if marker else None
    rep.in_acceptance = item.module.__name__ == "test_acceptance"


def pytest_runtest_logreport(report):
    if not getattr(report, "in_acceptance", False):
        return
    if report.when == "call" or report.failed:
        name = report.nodeid.split("::")[-1]
        if hasattr(report, "wasxfail"):
            _unattainable.append((name, report.outcome, report.wasxfail))
        elif report.failed and "XPASS(strict)" in str(report.longrepr):
            _unattainable.append((name, "xpassed", str(report.longrepr)))
        elif report.criterion is not None:
            _outcomes[report.criterion].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes and not _unattainable:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        runs = _outcomes.get(n)
        if not runs:
            tr.line(f"criterion {n:2d}: NOT RUN  {title}")
            continue
        verdict = "PASS" if all(runs) else "FAIL"
        tr.line(f"criterion {n:2d}: {verdict}     {title} ({sum(runs)}/{len(runs)} checks)")
    for name, outcome, reason in _unattainable:
        label = "XFAIL (known unattainable)" if outcome == "skipped" else "UNEXPECTED PASS"
        tr.line(f"{label}: {name}: {reason}")


@pytest.fixture(scope="session")
def parted_low():
    return synth.generate_map(synth.parted_recipe())
