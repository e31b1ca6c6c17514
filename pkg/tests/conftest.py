import pytest

# criterion id -> (passed, detail), filled by the acceptance tests
ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    def record(cid, passed, detail):
        ACCEPTANCE[cid] = (bool(passed), detail)
        print(f"CRITERION {cid}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: (int("".join(ch for ch in c if ch.isdigit())), c)):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"CRITERION {cid}: {'PASS' if ok else 'FAIL'} {detail}")
