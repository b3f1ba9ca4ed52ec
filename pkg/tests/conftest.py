import pytest

from ringtrace.fixtures import two_branch
from ringtrace.ingest import build_ledger


class TwoBranch:
    def __init__(self):
        self.spec, self.sources, self.refs = two_branch()
        self.view, self.report = build_ledger(self.spec, self.sources)

    def uid(self, name: str, branch: str = "main") -> int:
        return self.view.resolve(self.refs[name], branch)

    def uids(self, names: str, branch: str = "main") -> set:
        return {self.uid(n, branch) for n in names}


@pytest.fixture
def twob():
    return TwoBranch()


# -- acceptance reporting ---------------------------------------------------------
# Tests marked ``criterion("name")`` get one PASS/FAIL line in the terminal
# summary, plus whatever detail they attach with ``record_property("detail", ...)``.

_criteria: list[tuple[str, bool, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        name = marker.args[0]
        callspec = getattr(item, "callspec", None)
        if callspec is not None:
            name = f"{name} [{callspec.id}]"
        _criteria.append((name, rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in _criteria:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
