import pytest

_LINES: list[str] = []


class AcceptanceRecorder:
    """Collects one PASS/FAIL line per acceptance check."""

    def __init__(self, criterion: str):
        self.criterion = criterion
        self.results: list[bool] = []

    def check(self, label: str, ok: bool, detail: str = "") -> bool:
        ok = bool(ok)
        line = f"{'PASS' if ok else 'FAIL'} [{self.criterion}] {label}" + (f": {detail}" if detail else "")
        _LINES.append(line)
        print(line)
        self.results.append(ok)
        return ok

    @property
    def all_ok(self) -> bool:
        return all(self.results)


@pytest.fixture
def acceptance(request):
    marker = request.node.get_closest_marker("criterion")
    name = marker.args[0] if marker else request.node.name
    return AcceptanceRecorder(name)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion this test covers")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _LINES:
        terminalreporter.write_line(line)
