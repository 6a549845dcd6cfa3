from __future__ import annotations

# acceptance outcomes, keyed by criterion label, filled by test_acceptance
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def _order(label: str):
    num = "".join(c for c in label if c.isdigit())
    return int(num), label


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=_order):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
