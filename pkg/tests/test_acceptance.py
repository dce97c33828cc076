"""Acceptance suite: every criterion at its stated tolerance.

The ``check`` subcommand runs all criteria once; each test below asserts
one row of its pass/fail table.  One line per criterion is printed in the
terminal summary.
"""

import contextlib
import csv
import io

import pytest

from conftest import ACCEPTANCE_LINES
from spacelike_mcf.acceptance import CRITERIA
from spacelike_mcf.cli import main


@pytest.fixture(scope="module")
def check_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("check")
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(["check", "--out", str(out)])
    lines = [ln for ln in buf.getvalue().splitlines() if ln.startswith("criterion")]
    ACCEPTANCE_LINES.extend(lines)
    print("\n".join(lines))
    with open(out / "check.csv", newline="") as fh:
        rows = {int(r["criterion"]): r for r in csv.DictReader(fh)}
    return code, rows, lines


@pytest.mark.parametrize("crit", CRITERIA, ids=[f"criterion_{c.number:02d}_{c.title.replace(' ', '_')}"
                                                for c in CRITERIA])
def test_criterion(check_run, crit):
    _, rows, lines = check_run
    row = rows[crit.number]
    line = next(ln for ln in lines if ln.startswith(f"criterion {crit.number:2d} "))
    print(line)
    assert row["passed"] == "true", line


def test_check_subcommand_green(check_run):
    code, rows, lines = check_run
    assert len(lines) == len(CRITERIA) == 10
    assert code == 0
