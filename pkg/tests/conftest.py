import pytest

from truncgauss.tables import build_regions, default_table

# criterion number -> list of Check records, filled by test_acceptance.py
ACCEPTANCE: dict[int, list] = {}


@pytest.fixture(scope="session")
def table():
    return default_table()


@pytest.fixture(scope="session")
def tiny_table():
    return build_regions(20)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[crit]
        hard = [c for c in checks if c.hard]
        n_ok = sum(c.passed for c in hard)
        verdict = "PASS" if n_ok == len(hard) else "FAIL"
        tr.write_line(f"criterion {crit:>2}: {verdict} ({n_ok}/{len(hard)} hard checks)")
        for c in checks:
            if not c.passed or len(checks) <= 4:
                tr.write_line("    " + c.line())
