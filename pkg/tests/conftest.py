import pytest

# (criterion number, passed, detail) collected by test_acceptance
ACCEPTANCE: list[tuple[int, bool, str]] = []


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE.append((number, ok, detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
