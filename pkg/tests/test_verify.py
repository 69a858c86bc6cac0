import dataclasses

import pytest

from stepmaximin import CheckResult, format_results, run_verification
from stepmaximin.verify import available_checks


def test_fast_level_all_pass():
    results = run_verification("fast", seed=123)
    assert [r.name for r in results] == list(available_checks("fast"))
    failures = [r for r in results if not r.passed]
    assert not failures, format_results(results)


def test_available_checks_levels():
    fast = available_checks("fast")
    slow = available_checks("slow")
    assert set(fast) < set(slow)
    assert "uniform-closed-forms" in fast
    assert "grid-maximin-oracle" in slow
    with pytest.raises(ValueError):
        available_checks("medium")


def test_bad_level_rejected():
    with pytest.raises(ValueError):
        run_verification("extreme")


def test_corrupted_constant_is_caught_by_name():
    """Nudging one stepup rung must trip the closed-form check; untouched
    checks that never solve ladders still pass."""

    def corrupt(ladder):
        values = list(ladder.values)
        if len(values) >= 2:
            values[1] += 2e-4
        return dataclasses.replace(
            ladder, values=tuple(values), residuals=ladder.residuals
        )

    results = run_verification("fast", seed=123, ladder_transform=corrupt)
    by_name = {r.name: r for r in results}
    assert not by_name["uniform-closed-forms"].passed
    assert by_name["pair-constant-ordering"].passed


def test_check_exceptions_become_failures():
    def explode(ladder):
        raise RuntimeError("rigged")

    results = run_verification("fast", seed=123, ladder_transform=explode)
    by_name = {r.name: r for r in results}
    assert not by_name["uniform-closed-forms"].passed
    assert "rigged" in by_name["uniform-closed-forms"].detail


def test_format_results_layout():
    results = [
        CheckResult(name="alpha-check", passed=True, detail="ok", elapsed=0.05),
        CheckResult(name="beta-check", passed=False, detail="off by 1", elapsed=1.5),
    ]
    text = format_results(results)
    lines = text.splitlines()
    assert lines[0].startswith("PASS alpha-check")
    assert lines[1].startswith("FAIL beta-check")
    assert lines[-1] == "1/2 checks passed"
