import pytest

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}: {detail}")


@pytest.fixture
def record_criterion():
    def record(key: str, passed: bool, detail: str) -> None:
        ACCEPTANCE[key] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'}  {key}: {detail}")

    return record
