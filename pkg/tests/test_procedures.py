import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stepmaximin import (
    ConstantLadder,
    Decision,
    LadderKind,
    ModelSpec,
    PairRegion,
    PairVariant,
    Verdict,
    check_monotone,
    holm_bonferroni,
    holm_procedure,
    pair_classify,
    solve_pair_constants,
    solve_stepdown,
    solve_stepup,
    stepdown_decide,
    stepdown_procedure,
    stepup_decide,
    stepup_procedure,
)
from stepmaximin.procedures import (
    holm_reject_mask,
    pair_classify_batch,
    statistic_to_p,
    stepdown_reject_mask,
    stepup_reject_mask,
)


@pytest.fixture(scope="module")
def uniform3_down():
    return solve_stepdown(ModelSpec.iid_uniform_null(3), 0.05)


@pytest.fixture(scope="module")
def random_rows():
    rng = np.random.default_rng(314)
    X = rng.normal(1.0, 1.3, size=(4000, 4))
    # salt in ties and sentinels
    X[:200, 1] = X[:200, 0]
    X[200:260, 2] = math.inf
    X[260:320, 3] = -math.inf
    return X


@pytest.fixture(scope="module")
def sym_pair():
    return solve_pair_constants(ModelSpec.iid_normal(2), 0.05, (1.0, 1.0))


@pytest.fixture(scope="module")
def uniform2_up():
    return solve_stepup(ModelSpec.iid_uniform_null(2), 0.05)


class TestStepdown:
    def test_reject_both_when_both_clear_top_rung(self, normal5_ladders):
        down, _ = normal5_ladders
        ladder = solve_stepdown(ModelSpec.iid_normal(2), 0.05)
        f1, f2 = ladder.values
        d = stepdown_decide([f2 + 1, f1 + 1], ladder)
        assert d.rejected == {0, 1}

    def test_gate_blocks_everything_below_top_rung(self):
        # both statistics beat the marginal rung but neither beats the joint
        # one, so the walk stops at step one and nothing is rejected
        ladder = solve_stepdown(ModelSpec.iid_normal(2), 0.05)
        f1, f2 = ladder.values
        x = f2 - 1e-6
        assert x > f1
        d = stepdown_decide([x, x], ladder)
        assert d.rejected == frozenset()

    def test_hand_traced_uniform_example(self, uniform3_down):
        d = stepdown_decide([0.99, 0.98, 0.10], uniform3_down)
        assert d.rejected == {0, 1}
        assert [s.verdict for s in d.trace] == ["reject", "reject", "accept"]
        assert d.trace[0].threshold == pytest.approx(0.983048, abs=5e-7)
        assert d.trace[1].threshold == pytest.approx(0.974679, abs=5e-7)
        assert d.trace[2].threshold == pytest.approx(0.95, abs=1e-12)

    def test_boundary_is_rejected(self):
        # the comparison is weak: a statistic equal to its rung passes
        ladder = solve_stepdown(ModelSpec.iid_normal(1), 0.05)
        d = stepdown_decide([ladder.values[0]], ladder)
        assert d.rejected == {0}

    def test_ties_resolved_by_lower_index(self):
        ladder = solve_stepdown(ModelSpec.iid_normal(3), 0.05)
        d = stepdown_decide([2.5, 2.5, 2.5], ladder)
        assert [s.index for s in d.trace] == [0, 1, 2]

    def test_sentinels(self):
        ladder = solve_stepdown(ModelSpec.iid_normal(3), 0.05)
        d = stepdown_decide([math.inf, 0.0, -math.inf], ladder)
        assert 0 in d.rejected
        assert 2 not in d.rejected

    def test_trace_covers_every_hypothesis(self, uniform3_down):
        d = stepdown_decide([0.2, 0.99, 0.5], uniform3_down)
        assert sorted(s.index for s in d.trace) == [0, 1, 2]

    def test_wrong_kind_rejected(self, uniform2_up):
        with pytest.raises(ValueError):
            stepdown_decide([0.5, 0.5], uniform2_up)

    def test_length_and_nan_checked(self, uniform3_down):
        with pytest.raises(ValueError):
            stepdown_decide([0.5], uniform3_down)
        with pytest.raises(ValueError):
            stepdown_decide([0.5, math.nan, 0.2], uniform3_down)


class TestStepup:
    def test_bottom_statistic_over_first_rung_rejects_all(self, uniform2_up):
        d = stepup_decide([0.97, 0.96], uniform2_up)
        assert d.rejected == {0, 1}

    def test_all_below_rungs_rejects_none(self, uniform2_up):
        d = stepup_decide([0.96, 0.94], uniform2_up)
        assert d.rejected == frozenset()

    def test_top_only_rejection(self, uniform2_up):
        d = stepup_decide([0.98, 0.94], uniform2_up)
        assert d.rejected == {0}

    def test_boundary_is_accepted(self):
        # the exceedance is strict: sitting exactly on the rung does not fire
        ladder = solve_stepup(ModelSpec.iid_uniform_null(2), 0.05)
        d = stepup_decide([0.975, 0.2], ladder)
        assert d.rejected == frozenset()
        d2 = stepup_decide([0.975 + 1e-9, 0.2], ladder)
        assert d2.rejected == {0}

    def test_ties_resolved_by_lower_index(self):
        ladder = solve_stepup(ModelSpec.iid_normal(3), 0.05)
        d = stepup_decide([1.0, 1.0, 1.0], ladder)
        assert [s.index for s in d.trace] == [0, 1, 2]

    def test_sentinels(self):
        ladder = solve_stepup(ModelSpec.iid_normal(3), 0.05)
        d = stepup_decide([-math.inf, math.inf, 0.0], ladder)
        assert 1 in d.rejected
        assert 0 not in d.rejected

    def test_wrong_kind_rejected(self, uniform3_down):
        with pytest.raises(ValueError):
            stepup_decide([0.5, 0.5, 0.5], uniform3_down)


class TestHolm:
    def test_hand_traced_example(self):
        d = holm_bonferroni([0.01, 0.03], 0.05)
        assert d.rejected == {0, 1}
        assert d.trace[0].threshold == pytest.approx(0.025)
        assert d.trace[1].threshold == pytest.approx(0.05)

    def test_no_rejections_above_alpha(self):
        d = holm_bonferroni([0.3, 0.8, 0.06], 0.05)
        assert d.rejected == frozenset()

    def test_walk_stops_at_first_failure(self):
        # third p-value would pass its own threshold but the second blocks it
        d = holm_bonferroni([0.001, 0.9, 0.002], 0.05)
        assert d.rejected == {0, 2}
        d2 = holm_bonferroni([0.001, 0.02, 0.051], 0.05)
        assert d2.rejected == {0, 1}

    def test_thresholds_are_stricter_than_exact_independent(self):
        # at step one with four hypotheses the exact independent cutoff
        # 1 - 0.95**0.25 clears Holm's alpha/4
        exact = 1.0 - 0.95 ** 0.25
        assert exact == pytest.approx(0.012741, abs=5e-7)
        assert exact > 0.05 / 4

    def test_validation(self):
        with pytest.raises(ValueError):
            holm_bonferroni([0.5, 1.2], 0.05)
        with pytest.raises(ValueError):
            holm_bonferroni([], 0.05)
        with pytest.raises(ValueError):
            holm_bonferroni([0.5], 0.0)


class TestBatchAgreement:
    """The vectorised masks must reproduce the scalar walks row for row."""

    def test_stepdown(self, random_rows):
        ladder = solve_stepdown(ModelSpec.iid_normal(4), 0.05)
        mask = stepdown_reject_mask(random_rows, ladder)
        for row, got in zip(random_rows, mask):
            want = stepdown_decide(row, ladder).rejected
            assert {i for i in range(4) if got[i]} == want

    def test_stepup(self, random_rows):
        ladder = solve_stepup(ModelSpec.iid_normal(4), 0.05)
        mask = stepup_reject_mask(random_rows, ladder)
        for row, got in zip(random_rows, mask):
            want = stepup_decide(row, ladder).rejected
            assert {i for i in range(4) if got[i]} == want

    def test_holm(self, random_rows):
        model = ModelSpec.iid_normal(4)
        finite = random_rows[np.isfinite(random_rows).all(axis=1)]
        P = statistic_to_p(model, finite)
        mask = holm_reject_mask(P, 0.05)
        for row, got in zip(P, mask):
            want = holm_bonferroni(row.tolist(), 0.05).rejected
            assert {i for i in range(4) if got[i]} == want

    def test_procedure_bundles_agree(self, random_rows):
        model = ModelSpec.iid_normal(4)
        for proc in (
            stepdown_procedure(solve_stepdown(model, 0.05)),
            stepup_procedure(solve_stepup(model, 0.05)),
            holm_procedure(model, 0.05),
        ):
            mask = proc.reject_mask(random_rows[:500])
            for row, got in zip(random_rows[:500], mask):
                assert {i for i in range(4) if got[i]} == proc.decide(row).rejected


class TestStructuralProperties:
    @given(
        x=st.lists(st.floats(-4, 6), min_size=4, max_size=4),
        bumps=st.lists(st.floats(0, 3), min_size=4, max_size=4),
    )
    @settings(max_examples=150, deadline=None)
    def test_rejection_count_grows_with_the_data(self, x, bumps):
        model = ModelSpec.iid_normal(4)
        down = solve_stepdown(model, 0.05)
        up = solve_stepup(model, 0.05)
        y = [a + b for a, b in zip(x, bumps)]
        assert stepdown_decide(y, down).n_rejected >= stepdown_decide(x, down).n_rejected
        assert stepup_decide(y, up).n_rejected >= stepup_decide(x, up).n_rejected

    @given(x=st.lists(st.floats(-4, 6), min_size=3, max_size=3))
    @settings(max_examples=150, deadline=None)
    def test_permutation_equivariance(self, x):
        if len(set(x)) < 3:
            return
        model = ModelSpec.iid_normal(3)
        down = solve_stepdown(model, 0.05)
        perm = [2, 0, 1]
        base = stepdown_decide(x, down).rejected
        permuted = stepdown_decide([x[i] for i in perm], down).rejected
        assert permuted == {perm.index(i) for i in base}

    def test_same_ladder_stepup_dominates_stepdown(self):
        # run both walks over one shared rung vector: the stepup reading
        # rejects a superset on every input
        model = ModelSpec.iid_normal(3)
        down = solve_stepdown(model, 0.05)
        as_up = ConstantLadder(
            kind=LadderKind.STEPUP,
            alpha=down.alpha,
            model=model,
            values=down.values,
            residuals=down.residuals,
        )
        rng = np.random.default_rng(2718)
        X = rng.normal(0.8, 1.2, size=(100_000, 3))
        sd = stepdown_reject_mask(X, down)
        su = stepup_reject_mask(X, as_up)
        assert bool((sd <= su).all())

    def test_own_constants_comparison_fails_in_the_gap(self):
        """With each rule on its own exact ladder there is a positive-measure
        region where stepdown rejects more: top statistic between f_k and
        d_k, everything else far below."""
        model = ModelSpec.iid_normal(2)
        down = solve_stepdown(model, 0.05)
        up = solve_stepup(model, 0.05)
        x = [1.0, 0.5 * (down.values[1] + up.values[1])]
        assert down.values[1] < x[1] <= up.values[1]
        assert stepdown_decide(x, down).n_rejected == 1
        assert stepup_decide(x, up).n_rejected == 0

    def test_reject_ge_regions_nest(self):
        model = ModelSpec.iid_normal(4)
        up = solve_stepup(model, 0.05)
        rng = np.random.default_rng(55)
        X = rng.normal(1.0, 1.5, size=(50_000, 4))
        counts = stepup_reject_mask(X, up).sum(axis=1)
        # {count >= j+1} a subset of {count >= j} holds by construction of
        # counting; the substantive check is on the walk itself: rejecting
        # j+1 hypotheses means the same x also rejects j under the truncated
        # comparison, which the count encodes
        for j in range(1, 4):
            assert np.all((counts >= j + 1) <= (counts >= j))


class TestPairClassifier:
    def test_second_only_region(self, sym_pair):
        b1 = sym_pair.marginal[0]
        a2 = sym_pair.high_stepdown[1]
        assert pair_classify(
            [b1 - 1, a2 + 1], sym_pair, PairVariant.STEPDOWN_OPTIMAL
        ) is PairRegion.REJECT_SECOND

    def test_both_above_everything(self, sym_pair):
        t1, t2 = sym_pair.high_stepup
        assert pair_classify(
            [t1 + 1, t2 + 1], sym_pair, PairVariant.STEPUP_OPTIMAL
        ) is PairRegion.REJECT_BOTH

    def test_regions_partition_plane(self, sym_pair):
        rng = np.random.default_rng(77)
        X = rng.normal(1.6, 1.0, size=(20_000, 2))
        for variant in PairVariant:
            codes = pair_classify_batch(X, sym_pair, variant)
            assert set(np.unique(codes)) <= {0, 1, 2, 3}
            # scalar path agrees with the batch path
            for row in X[:50]:
                region = pair_classify(row, sym_pair, variant)
                code = pair_classify_batch(row[None, :], sym_pair, variant)[0]
                assert region.rejected == {
                    PairRegion.REJECT_NONE: frozenset(),
                    PairRegion.REJECT_SECOND: frozenset({1}),
                    PairRegion.REJECT_FIRST: frozenset({0}),
                    PairRegion.REJECT_BOTH: frozenset({0, 1}),
                }[_code_to_region(code)]

    def test_symmetric_stepdown_variant_equals_ladder_walk(self, sym_pair):
        """Away from region boundaries the two-hypothesis classifier and the
        two-rung stepdown walk are the same rule when the calibration shifts
        are equal."""
        model = ModelSpec.iid_normal(2)
        ladder = solve_stepdown(model, 0.05)
        rng = np.random.default_rng(123)
        X = rng.normal(1.6, 1.0, size=(100_000, 2))
        codes = pair_classify_batch(X, sym_pair, PairVariant.STEPDOWN_OPTIMAL)
        mask = stepdown_reject_mask(X, ladder)
        want = mask[:, 0].astype(np.int8) * 2 + mask[:, 1].astype(np.int8)
        np.testing.assert_array_equal(codes, want)

    def test_symmetric_stepup_variant_equals_ladder_walk(self, sym_pair):
        model = ModelSpec.iid_normal(2)
        ladder = solve_stepup(model, 0.05)
        rng = np.random.default_rng(124)
        X = rng.normal(1.6, 1.0, size=(100_000, 2))
        codes = pair_classify_batch(X, sym_pair, PairVariant.STEPUP_OPTIMAL)
        mask = stepup_reject_mask(X, ladder)
        want = mask[:, 0].astype(np.int8) * 2 + mask[:, 1].astype(np.int8)
        np.testing.assert_array_equal(codes, want)

    def test_batch_shape_validated(self, sym_pair):
        with pytest.raises(ValueError):
            pair_classify_batch(np.zeros((5, 3)), sym_pair, PairVariant.STEPDOWN_OPTIMAL)


def _code_to_region(code: int) -> PairRegion:
    return (
        PairRegion.REJECT_NONE,
        PairRegion.REJECT_SECOND,
        PairRegion.REJECT_FIRST,
        PairRegion.REJECT_BOTH,
    )[code]


class TestMonotoneChecker:
    def test_stepdown_clean(self):
        ladder = solve_stepdown(ModelSpec.iid_normal(4), 0.05)
        report = check_monotone(
            lambda x: stepdown_decide(x, ladder), [2.2, 1.8, 0.1, -0.4], 10_000, 5
        )
        assert report.ok
        assert report.trials == 10_000

    def test_stepup_clean(self):
        ladder = solve_stepup(ModelSpec.iid_normal(4), 0.05)
        report = check_monotone(
            lambda x: stepup_decide(x, ladder), [2.2, 1.8, 0.1, -0.4], 10_000, 5
        )
        assert report.ok

    def test_window_rule_control_caught(self):
        """Negative control: a rule that rejects only inside a bounded window
        is not label-monotone, and the prober must find that quickly."""

        def window_rule(x):
            verdicts = tuple(
                Verdict.REJECT if 1.0 <= v <= 2.0 else Verdict.ACCEPT for v in x
            )
            return Decision(verdicts=verdicts, trace=())

        report = check_monotone(window_rule, [1.5, 0.2], 200, 9)
        assert len(report.violations) >= 1
        v = report.violations[0]
        assert v.rejected_x != v.rejected_y

    def test_trials_validated(self):
        with pytest.raises(ValueError):
            check_monotone(lambda x: None, [0.0], 0, 1)


class TestStatisticToP:
    def test_normal_tail(self):
        model = ModelSpec.iid_normal(2)
        p = statistic_to_p(model, np.array([0.0, 1.6448536269514722]))
        assert p[0] == pytest.approx(0.5, abs=1e-15)
        assert p[1] == pytest.approx(0.05, abs=1e-10)

    def test_uniform_complement(self):
        model = ModelSpec.iid_uniform_null(2)
        p = statistic_to_p(model, np.array([0.3, 1.4]))
        assert p[0] == pytest.approx(0.7, abs=1e-15)
        assert p[1] == 0.0

    def test_round_trip_with_holm_ordering(self):
        # larger statistics map to smaller p-values, preserving walk order
        model = ModelSpec.iid_normal(3)
        x = np.array([2.0, -0.5, 0.7])
        p = statistic_to_p(model, x)
        assert np.argsort(-x).tolist() == np.argsort(p).tolist()
