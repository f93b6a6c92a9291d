from __future__ import annotations

from collections import OrderedDict

import pytest

# criterion number -> [(clause, passed, detail)]
ACCEPTANCE: "OrderedDict[int, list[tuple[str, bool, str]]]" = OrderedDict()


@pytest.fixture
def criterion():
    """``criterion(n, clause, ok, detail)`` records a result and asserts it."""

    def check(number: int, clause: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE.setdefault(number, []).append((clause, bool(ok), detail))
        assert ok, f"acceptance {number} ({clause}): {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        clauses = ACCEPTANCE[number]
        failed = [c for c in clauses if not c[1]]
        status = "FAIL" if failed else "PASS"
        shown = failed or clauses
        detail = "; ".join(f"{c}: {d}" if d else c for c, _, d in shown)
        tr.write_line(f"criterion {number:>2}: {status}  {detail}")
