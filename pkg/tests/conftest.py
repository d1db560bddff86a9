import pytest

VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request, capsys):
    """Record one pass/fail line for an acceptance criterion and echo it."""

    def record(n, title, ok, detail):
        line = f"C{n:<2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        request.config.stash.setdefault(VERDICTS, []).append((n, line))
        with capsys.disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
