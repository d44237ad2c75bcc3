import os

import pytest

from permflag.certify import upper_bound


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    os.environ.setdefault("PERMFLAG_CACHE", str(tmp_path_factory.mktemp("cache")))
    yield


@pytest.fixture(scope="session")
def cert132():
    cert, sol = upper_bound((1, 3, 2), 3)
    return cert, sol


def pytest_collection_modifyitems(config, items):
    if os.environ.get("PERMFLAG_EXTENDED") == "1":
        return
    skip = pytest.mark.skip(reason="extended run; set PERMFLAG_EXTENDED=1")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    setattr(item, "rep_" + rep.when, rep)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    skipped = [r for r in terminalreporter.stats.get("skipped", [])
               if "test_acceptance.py" in r.nodeid]
    if not RESULTS and not skipped:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in RESULTS:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    for r in skipped:
        name = r.nodeid.rsplit("::", 1)[-1].removeprefix("test_")
        terminalreporter.write_line(f"[SKIP] {name}: {r.longrepr[2]}")
