import numpy as np

from claritas.network import load_bundled
from claritas.suite import run_paper_suite


def test_fresh_suite_passes():
    report = run_paper_suite()
    assert report.n_passed == 4, report.table()
    robust_multi = report.results[-1]
    assert robust_multi.note == "achieved in paper mode"


def test_misconfigured_interest_is_flagged():
    s = load_bundled("six_bank_multi_period.json").replace(alpha=1.0)
    report = run_paper_suite({"multi_step": s})
    failed = [r.name for r in report.results if not r.passed]
    assert failed == ["multi_step"]
    table = report.table()
    assert "19.74 +/- 0.1" in table and "FAIL" in table


def test_lowered_budget_is_flagged():
    s = load_bundled("six_bank_single_period.json")
    s = s.replace(budget=np.array([5.0]))
    report = run_paper_suite({"single_step": s})
    single = report.results[0]
    assert not single.passed
    checks = {c.name: c for c in single.checks}
    assert float(checks["total injection"].actual) == 5.0
    assert not checks["terminal residual"].passed
    assert checks["loss without control"].passed
