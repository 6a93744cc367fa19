"""Acceptance suite: runs every criterion once at its stated tolerances and prints one line per criterion."""
import pytest

from cransec.harness.acceptance import CRITERIA, AcceptanceSettings, inject_violation, run_acceptance


@pytest.fixture(scope="module")
def report():
    rep = run_acceptance(AcceptanceSettings())
    print()
    for line in rep.lines():
        print(line)
    return rep


@pytest.mark.parametrize("cid", CRITERIA)
def test_criterion(report, cid):
    res = report.criteria[cid]
    print(res.line())
    assert res.error is None, res.error
    assert res.checks, "criterion produced no measurements"
    assert res.passed, res.line()


def test_report_carries_measured_numbers(report):
    data = report.to_dict()
    assert set(data["criteria"]) == set(CRITERIA)
    for entry in data["criteria"].values():
        assert all("measured" in c and "bound" in c for c in entry["checks"])


@pytest.mark.parametrize("cid", CRITERIA)
def test_injected_violation_fails_the_criterion(report, cid):
    tampered = inject_violation(report, {cid: 10.0})
    assert not tampered.criteria[cid].passed
    others = [c for c in CRITERIA if c != cid]
    assert all(tampered.criteria[c].passed == report.criteria[c].passed for c in others)
