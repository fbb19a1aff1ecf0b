import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` prints and records one acceptance verdict line."""

    def record(number, ok, detail):
        verdict = {True: "PASS", False: "FAIL", None: "N/A "}[ok]
        line = f"[acceptance {number}] {verdict} {detail}"
        _CRITERIA.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
