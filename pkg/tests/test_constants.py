import math
from fractions import Fraction

import pytest

from stepmaximin import (
    ConstantLadder,
    LadderKind,
    ModelSpec,
    NonMonotoneLadderError,
    PairConstants,
    RESIDUAL_TOL,
    UnsupportedShiftError,
    clear_constant_cache,
    solve_pair_constants,
    solve_pair_stepdown,
    solve_pair_stepup,
    solve_stepdown,
    solve_stepup,
)
import stepmaximin.constants as constants_mod

from oracles import (
    chain_orderstat_cdf,
    equicorr_orderstat_cdf,
    iid_normal_orderstat_cdf,
    normal_cdf_hp,
    normal_quantile_hp,
)


def exact_uniform_stepup(alpha: Fraction, k: int) -> list[Fraction]:
    """Independent exact-rational solve of the stepup ladder on [0, 1].

    The defining level on j coordinates, as a function of the top rung above
    the previous one, is affine with slope j * (1 - alpha), so each rung is
    one exact division away from the previous prefix.
    """
    target = 1 - alpha
    values = [target]
    for j in range(2, k + 1):
        base = chain_orderstat_cdf(values + [values[-1]])
        values.append(values[-1] + (target - base) / (j * target))
    return values


class TestStepdown:
    def test_uniform_closed_form(self):
        ladder = solve_stepdown(ModelSpec.iid_uniform_null(4), 0.05)
        for j, v in enumerate(ladder.values, 1):
            assert v == pytest.approx(0.95 ** (1.0 / j), abs=1e-15)
        assert ladder.values[0] == pytest.approx(0.95, abs=1e-15)
        assert max(ladder.residuals) <= RESIDUAL_TOL

    def test_normal_closed_form(self):
        ladder = solve_stepdown(ModelSpec.iid_normal(3), 0.05)
        for j, v in enumerate(ladder.values, 1):
            assert v == pytest.approx(
                normal_quantile_hp(0.95 ** (1.0 / j)), abs=1e-11
            )

    def test_values_strictly_increasing(self, normal5_ladders):
        down, up = normal5_ladders
        for ladder in (down, up):
            for lo, hi in zip(ladder.values, ladder.values[1:]):
                assert hi > lo

    def test_constants_depend_on_index_only(self):
        # the rung for j active hypotheses is the same whatever k it sits in
        clear_constant_cache()
        big = solve_stepdown(ModelSpec.equicorr_normal(5, 0.25), 0.05)
        small = solve_stepdown(ModelSpec.equicorr_normal(3, 0.25), 0.05)
        assert big.values[:3] == small.values

    def test_equicorr_against_quadrature_oracle(self):
        ladder = solve_stepdown(ModelSpec.equicorr_normal(4, 0.5), 0.05)
        for j, v in enumerate(ladder.values, 1):
            level = equicorr_orderstat_cdf([v] * j, 0.5)
            assert level == pytest.approx(0.95, abs=2e-9)

    def test_alpha_validated(self):
        m = ModelSpec.iid_normal(2)
        for bad in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(ValueError):
                solve_stepdown(m, bad)


class TestStepup:
    def test_uniform_matches_exact_rational_solve(self):
        ladder = solve_stepup(ModelSpec.iid_uniform_null(6), 0.05)
        exact = exact_uniform_stepup(Fraction(1, 20), 6)
        for got, want in zip(ladder.values, exact):
            assert got == pytest.approx(float(want), abs=1e-12)
        # spot values of the exact solve itself
        assert exact[1] == Fraction(39, 40)
        assert exact[2] == Fraction("0.983125")

    def test_uniform_known_values(self):
        ladder = solve_stepup(ModelSpec.iid_uniform_null(4), 0.05)
        assert ladder.values[0] == pytest.approx(0.95, abs=1e-15)
        assert ladder.values[1] == 0.975
        assert ladder.values[2] == pytest.approx(0.983125, abs=1e-15)
        assert ladder.values[3] == pytest.approx(0.9872865234375, abs=1e-12)
        assert max(ladder.residuals) <= 1e-9

    def test_second_rung_is_not_the_general_pattern(self):
        # d_2 = 1 - alpha/2 holds, but the same guess fails from rung 3 on
        ladder = solve_stepup(ModelSpec.iid_uniform_null(3), 0.05)
        assert ladder.values[2] < 1.0 - 0.05 / 3

    def test_normal_is_quantile_image_of_uniform(self):
        # coordinatewise monotone transforms preserve the ladder event, so
        # the iid-normal rungs are the normal quantiles of the uniform ones
        uni = solve_stepup(ModelSpec.iid_uniform_null(5), 0.05)
        nor = solve_stepup(ModelSpec.iid_normal(5), 0.05)
        for u, n in zip(uni.values, nor.values):
            assert n == pytest.approx(normal_quantile_hp(u), abs=1e-9)

    def test_rungs_do_not_depend_on_k(self):
        clear_constant_cache()
        big = solve_stepup(ModelSpec.iid_normal(5), 0.05)
        small = solve_stepup(ModelSpec.iid_normal(3), 0.05)
        assert big.values[:3] == small.values

    def test_defining_levels_against_oracles(self):
        uni = solve_stepup(ModelSpec.iid_uniform_null(4), 0.05)
        for j in range(1, 5):
            level = chain_orderstat_cdf([Fraction(v) for v in uni.values[:j]])
            assert float(level) == pytest.approx(0.95, abs=1e-12)
        nor = solve_stepup(ModelSpec.iid_normal(4), 0.05)
        for j in range(1, 5):
            assert iid_normal_orderstat_cdf(list(nor.values[:j])) == pytest.approx(
                0.95, abs=1e-10
            )

    def test_equicorr_against_quadrature_oracle(self):
        ladder = solve_stepup(ModelSpec.equicorr_normal(3, 0.25), 0.05)
        for j in range(1, 4):
            level = equicorr_orderstat_cdf(list(ladder.values[:j]), 0.25)
            assert level == pytest.approx(0.95, abs=2e-9)

    def test_first_rungs_agree_then_stepup_exceeds(self, normal5_ladders):
        down, up = normal5_ladders
        assert down.values[0] == pytest.approx(up.values[0], abs=1e-10)
        for f, d in zip(down.values[1:], up.values[1:]):
            assert d > f

    def test_non_monotone_solution_raises(self, monkeypatch):
        real = constants_mod.joint_orderstat_cdf

        def rigged(model, j, ladder):
            if j == 2:
                return 0.999  # far above the target at the bracket floor
            return real(model, j, ladder)

        monkeypatch.setattr(constants_mod, "joint_orderstat_cdf", rigged)
        with pytest.raises(NonMonotoneLadderError):
            solve_stepup(ModelSpec.iid_normal(2), 0.217)


class TestConstantLadderType:
    def test_rejects_decreasing_values(self):
        with pytest.raises(NonMonotoneLadderError):
            ConstantLadder(
                kind=LadderKind.STEPUP,
                alpha=0.05,
                model=ModelSpec.iid_normal(2),
                values=(1.9, 1.6),
                residuals=(0.0, 0.0),
            )

    def test_tolerates_hairline_decrease(self):
        ladder = ConstantLadder(
            kind=LadderKind.STEPDOWN,
            alpha=0.05,
            model=ModelSpec.iid_normal(2),
            values=(1.6, 1.6 - 1e-12),
            residuals=(0.0, 0.0),
        )
        assert ladder.k == 2

    def test_length_checked(self):
        with pytest.raises(ValueError):
            ConstantLadder(
                kind=LadderKind.STEPDOWN,
                alpha=0.05,
                model=ModelSpec.iid_normal(3),
                values=(1.6, 1.9),
                residuals=(0.0, 0.0),
            )

    def test_cache_returns_same_object(self):
        clear_constant_cache()
        m = ModelSpec.iid_normal(4)
        first = solve_stepdown(m, 0.05)
        second = solve_stepdown(m, 0.05)
        assert first is second
        clear_constant_cache()
        third = solve_stepdown(m, 0.05)
        assert third is not first
        assert third.values == first.values


class TestPairConstants:
    def test_symmetric_matches_ladders(self):
        m = ModelSpec.iid_normal(2)
        pc = solve_pair_constants(m, 0.05, (1.0, 1.0))
        down = solve_stepdown(m, 0.05)
        up = solve_stepup(m, 0.05)
        assert pc.marginal[0] == pytest.approx(normal_quantile_hp(0.95), abs=1e-11)
        # with equal calibration shifts both high rungs collapse onto the
        # two-coordinate ladder constants
        assert pc.high_stepdown[0] == pytest.approx(down.values[1], abs=1e-9)
        assert pc.high_stepup[0] == pytest.approx(up.values[1], abs=1e-9)
        assert pc.high_stepdown[0] == pc.high_stepdown[1]
        assert pc.high_stepup[0] == pc.high_stepup[1]

    def test_chain_ordering(self):
        pc = solve_pair_constants(ModelSpec.iid_normal(2), 0.1, (0.5, 2.0))
        for b, a, at in zip(pc.marginal, pc.high_stepdown, pc.high_stepup):
            assert b < a < at

    def test_asymmetric_offsets(self):
        eps = (0.5, 1.7)
        pc = solve_pair_constants(ModelSpec.iid_normal(2), 0.05, eps)
        gap = eps[1] - eps[0]
        assert pc.high_stepdown[1] - pc.high_stepdown[0] == pytest.approx(gap, abs=1e-12)
        assert pc.high_stepup[1] - pc.high_stepup[0] == pytest.approx(gap, abs=1e-12)

    def test_levels_against_high_precision(self):
        eps = (0.5, 1.7)
        alpha = 0.05
        pc = solve_pair_constants(ModelSpec.iid_normal(2), alpha, eps)
        a1, a2 = pc.high_stepdown
        assert 1.0 - normal_cdf_hp(a1) * normal_cdf_hp(a2) == pytest.approx(
            alpha, abs=1e-10
        )
        b1, b2 = pc.marginal
        t1, t2 = pc.high_stepup
        accept = (
            normal_cdf_hp(b1) * normal_cdf_hp(t2)
            + normal_cdf_hp(t1) * normal_cdf_hp(b2)
            - normal_cdf_hp(b1) * normal_cdf_hp(b2)
        )
        assert accept == pytest.approx(1.0 - alpha, abs=1e-10)

    def test_residuals_within_tolerance(self):
        pc = solve_pair_constants(ModelSpec.equicorr_normal(2, 0.5), 0.05, (1.0, 2.0))
        assert max(pc.residuals.values()) <= RESIDUAL_TOL

    def test_input_validation(self):
        with pytest.raises(ValueError):
            solve_pair_stepdown(ModelSpec.iid_normal(3), 0.05, (1.0, 1.0))
        with pytest.raises(UnsupportedShiftError):
            solve_pair_stepdown(ModelSpec.iid_uniform_null(2), 0.05, (1.0, 1.0))
        m = ModelSpec.iid_normal(2)
        for bad_eps in ((0.0, 1.0), (-1.0, 1.0), (math.inf, 1.0), (1.0,)):
            with pytest.raises(ValueError):
                solve_pair_stepup(m, 0.05, bad_eps)

    def test_chain_enforced_by_type(self):
        with pytest.raises(ValueError):
            PairConstants(
                model=ModelSpec.iid_normal(2),
                alpha=0.05,
                epsilon=(1.0, 1.0),
                high_stepdown=(1.5, 1.5),
                marginal=(1.64, 1.64),
                high_stepup=(1.9, 1.9),
            )
