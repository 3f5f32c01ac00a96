import pytest

_LINES = []


@pytest.fixture(scope="session")
def ref_cache(tmp_path_factory):
    """Reference-solution cache shared by every test in the session."""
    return tmp_path_factory.mktemp("ref_cache")


@pytest.fixture(scope="session")
def record():
    """``record(criterion, passed, detail)`` adds a line to the acceptance summary."""

    def add(criterion, passed, detail):
        line = f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}: {detail}"
        _LINES.append(line)
        print(line)
        return passed

    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
