import pytest

_LINES = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """``criterion(k, passed, detail)`` records one acceptance line and returns ``passed``."""
    lines = request.config.stash.setdefault(_LINES, {})

    def report(k, passed, detail=""):
        lines[k] = f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        print(lines[k])
        return passed

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
