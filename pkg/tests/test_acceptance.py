"""Acceptance matrix A1-A8 on the default fixtures, fields and tolerances.

Set HSDECOMP_WORKERS to spread fixtures over processes; results are identical.
"""

import os

import pytest

from conftest import ACCEPTANCE_LINES
from hsdecomp.suite import CHECKS, SuiteConfig, run_suite

TOTAL_RUNTIME_TARGET = 600.0


@pytest.fixture(scope="module")
def report():
    return run_suite(SuiteConfig(workers=int(os.environ.get("HSDECOMP_WORKERS", "1"))))


def _record(request, line: str) -> None:
    print(line)
    request.config.stash[ACCEPTANCE_LINES].append(line)


@pytest.mark.slow
@pytest.mark.parametrize("cid", list(CHECKS))
def test_criterion(report, cid, request):
    s = report.summary[cid]
    failed = [r for r in report.rows if r.check == cid and not r.passed]
    _record(request, f"{cid} {'PASS' if s.passed else 'FAIL'}  rows={s.rows} failed={s.failed}  {CHECKS[cid]}")
    assert s.rows > 0
    assert s.passed, "\n".join(f"{r.fixture} {r.field} {r.metric}={r.value:.6g} ceiling={r.ceiling} {r.detail}"
                               for r in failed[:20])


@pytest.mark.slow
def test_total_runtime(report, request):
    ok = report.runtime <= TOTAL_RUNTIME_TARGET
    _record(request, f"total {'PASS' if ok else 'FAIL'}  {report.runtime:.0f}s (target {TOTAL_RUNTIME_TARGET:.0f}s)")
    assert ok
