import re

CRITERION = re.compile(r"test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    lines = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or rep.when not in ("call", "setup"):
                continue
            detail = dict(getattr(rep, "user_properties", ())).get("detail", "")
            status = "PASS" if rep.passed else "FAIL"
            if rep.when == "setup" and rep.passed:
                continue
            lines[int(m.group(1))] = f"criterion {int(m.group(1)):2d}: {status}  {detail}"
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
