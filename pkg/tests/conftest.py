import os
import time
from contextlib import contextmanager

import pytest

# the randomized suites revisit many subexpressions; must precede the first sympy import
os.environ.setdefault("SYMPY_CACHE_SIZE", "50000")

ACCEPTANCE = []


class _Outcome:
    ok = False
    detail = ""


@pytest.fixture
def criterion():
    """Time a block, record one PASS/FAIL line, then assert it."""

    @contextmanager
    def run(number, title, budget):
        out = _Outcome()
        t0 = time.perf_counter()
        try:
            yield out
        finally:
            dt = time.perf_counter() - t0
            in_time = dt < budget
            status = "PASS" if out.ok and in_time else "FAIL"
            line = f"criterion {number:>2}  {status}  {dt:6.2f} s (budget {budget:g} s)  {title}"
            if out.detail:
                line += f"  [{out.detail}]"
            if not in_time:
                line += "  [over budget]"
            ACCEPTANCE.append((number, line))
            print(line)
        assert out.ok, out.detail
        assert in_time, f"{dt:.2f} s exceeds {budget} s"

    return run


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
