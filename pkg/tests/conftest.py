import pytest

RESULTS = pytest.StashKey[list]()


@pytest.fixture()
def verdict(request):
    """Record one acceptance line; the test still asserts on its own."""
    lines = request.config.stash.setdefault(RESULTS, [])

    def record(name: str, ok: bool, detail: str) -> bool:
        lines.append(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(RESULTS, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines):
            terminalreporter.write_line(line)
