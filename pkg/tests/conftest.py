"""Collects one line per acceptance criterion and prints them after the run."""

ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    detail = dict(report.user_properties).get("detail", "")
    ACCEPTANCE.append((crit, "PASS" if report.passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, verdict, detail in sorted(ACCEPTANCE, key=lambda r: _key(r[0])):
        terminalreporter.write_line(f"[{verdict}] criterion {crit}: {detail}")


def _key(crit: str):
    digits = "".join(c for c in crit if c.isdigit())
    return int(digits or 0), crit
