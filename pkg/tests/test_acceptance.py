"""Acceptance gate: the ten suite criteria, one test and one printed
pass/fail line each.

Tolerances are pinned inside the suite itself (deeplin.acceptance); these
tests only assert the reported outcome, so a red here means the underlying
guarantee failed, not that a tolerance drifted.
"""

import pytest

from deeplin.acceptance import CRITERIA, run_suite

EXPECTED = {
    1: "01-derivatives",
    2: "02-gradient-lower-bound",
    3: "03-hessian-upper-bound",
    4: "04-near-identity-gd",
    5: "05-symmetric-pd-gd",
    6: "06-power-projection",
    7: "07-balanced-factorization",
    8: "08-projection-optimality",
    9: "09-failure-floors",
    10: "10-determinism",
}


def test_criteria_table_is_complete():
    assert len(CRITERIA) == 10
    assert all(budget > 0 for _, budget in CRITERIA)


@pytest.mark.parametrize("idx", sorted(EXPECTED))
def test_criterion(idx):
    report = run_suite(criteria=[idx])[0]
    flag = "PASS" if report.status == "pass" else "FAIL"
    line = (
        f"criterion {idx:02d} [{flag}] {report.scenario_id} "
        f"({report.wall_clock:.1f}s): {report.detail}"
    )
    print(line)
    assert report.scenario_id == EXPECTED[idx], line
    assert report.status == "pass", line
