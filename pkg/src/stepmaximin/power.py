"""Maximin power of the stepwise procedures over slab alternatives.

The alternative class of interest fixes a count j and a margin epsilon > 0:
at least j parameter components sit at or above epsilon while the rest are
unconstrained.  The minimum over that class of P(at least j rejections) is
attained in the limit where exactly j components equal epsilon and the rest
fall to -inf, so the minimax value reduces to a j-dimensional probability:

* stepdown: the ascending order statistics of the j live coordinates must
  clear the staircase built from the top j stepdown rungs,
* stepup: all j live coordinates must clear the single rung d_{k-j+1}.

For familywise error the worst configuration puts j - 1 components at +inf
and the rest at zero; both are exposed here as explicit theta builders.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .constants import (
    ConstantLadder,
    LadderKind,
    PairConstants,
    solve_stepdown,
    solve_stepup,
)
from .models import (
    ModelSpec,
    ThetaVector,
    UnsupportedShiftError,
    marginal_cdf,
    null_orthant_survival,
)
from .orderstat import joint_orderstat_survival
from .procedures import PairVariant

__all__ = [
    "CriterionKind",
    "CriterionResult",
    "least_favorable_theta",
    "null_least_favorable_theta",
    "stepdown_maximin_power",
    "stepup_maximin_power",
    "pair_criterion_values",
]


class CriterionKind(str, Enum):
    STEPDOWN_POWER = "stepdown-power"
    STEPUP_POWER = "stepup-power"
    PAIR_REJECT_ANY = "pair-reject-any"
    PAIR_REJECT_BOTH = "pair-reject-both"


@dataclass(frozen=True)
class CriterionResult:
    value: float
    kind: CriterionKind
    model: ModelSpec
    alpha: float
    k: int
    j: int
    epsilon: tuple[float, ...]


def _validate_kj(k: int, j: int) -> None:
    if not isinstance(k, int) or not isinstance(j, int):
        raise ValueError("k and j must be integers")
    if not 1 <= j <= k:
        raise ValueError(f"need 1 <= j <= k, got j={j}, k={k}")


def least_favorable_theta(k: int, j: int, epsilon: float) -> ThetaVector:
    """j components at epsilon, the remaining k - j at -inf: the
    configuration where P(reject >= j) over the slab class bottoms out."""
    _validate_kj(k, j)
    epsilon = float(epsilon)
    if not epsilon > 0.0 or math.isinf(epsilon):
        raise ValueError("epsilon must be finite and > 0")
    return ThetaVector.of([epsilon] * j + [-math.inf] * (k - j))


def null_least_favorable_theta(k: int, j: int) -> ThetaVector:
    """j - 1 components at +inf, the rest at zero: the configuration where
    the familywise error of the stepwise rules peaks."""
    _validate_kj(k, j)
    return ThetaVector.of([math.inf] * (j - 1) + [0.0] * (k - j + 1))


def _resolve_ladder(
    model: ModelSpec,
    alpha: float,
    kind: LadderKind,
    ladder: ConstantLadder | None,
) -> ConstantLadder:
    if ladder is None:
        solver = solve_stepdown if kind is LadderKind.STEPDOWN else solve_stepup
        return solver(model, alpha)
    if ladder.kind is not kind:
        raise ValueError(f"ladder kind {ladder.kind.value} does not match {kind.value}")
    if ladder.model != model or ladder.alpha != alpha:
        raise ValueError("ladder was solved for a different model or alpha")
    return ladder


def _require_shift(model: ModelSpec) -> None:
    if not model.supports_shift:
        raise UnsupportedShiftError(
            "maximin power needs a location family (the uniform scale has none)"
        )


def stepdown_maximin_power(
    model: ModelSpec,
    alpha: float,
    j: int,
    epsilon: float,
    ladder: ConstantLadder | None = None,
) -> CriterionResult:
    """Minimum of P(at least j rejections) for the exact stepdown rule over
    alternatives with at least j components >= epsilon.

    Equals the probability that the ascending order statistics of j
    coordinates shifted by epsilon clear the staircase
    (f_{k-j+1}, ..., f_k).
    """
    _require_shift(model)
    k = model.k
    _validate_kj(k, j)
    ladder = _resolve_ladder(model, alpha, LadderKind.STEPDOWN, ladder)
    staircase = ladder.values[k - j:]
    value = joint_orderstat_survival(model.with_k(j), j, staircase, shift=float(epsilon))
    return CriterionResult(
        value=value,
        kind=CriterionKind.STEPDOWN_POWER,
        model=model,
        alpha=float(alpha),
        k=k,
        j=j,
        epsilon=(float(epsilon),),
    )


def stepup_maximin_power(
    model: ModelSpec,
    alpha: float,
    j: int,
    epsilon: float,
    ladder: ConstantLadder | None = None,
) -> CriterionResult:
    """Minimum of P(at least j rejections) for the stepup rule over the same
    alternative class: all j live coordinates must exceed rung d_{k-j+1}."""
    _require_shift(model)
    k = model.k
    _validate_kj(k, j)
    ladder = _resolve_ladder(model, alpha, LadderKind.STEPUP, ladder)
    rung = ladder.values[k - j]
    eps = float(epsilon)
    value = null_orthant_survival(model.with_k(j), [rung - eps] * j)
    return CriterionResult(
        value=value,
        kind=CriterionKind.STEPUP_POWER,
        model=model,
        alpha=float(alpha),
        k=k,
        j=j,
        epsilon=(eps,),
    )


def pair_criterion_values(
    model: ModelSpec,
    constants: PairConstants,
    variant: PairVariant,
) -> tuple[CriterionResult, CriterionResult]:
    """The two optimality criteria of a two-hypothesis variant.

    First value: the minimum over alternatives with at least one component
    >= epsilon of P(reject something); for both variants it reduces to the
    single-coordinate exceedance of the variant's high rung at its
    calibration shift (the balance condition makes both coordinates agree).

    Second value: the minimum over alternatives with both components above
    their epsilons of P(reject both).
    """
    if model.k != 2:
        raise ValueError("pair criteria are defined for k = 2 models")
    _require_shift(model)
    variant = PairVariant(variant)
    e1, e2 = constants.epsilon
    b1, b2 = constants.marginal
    if variant is PairVariant.STEPDOWN_OPTIMAL:
        a1, a2 = constants.high_stepdown
        any_value = 1.0 - marginal_cdf(model, 0.0, a1 - e1)
        # P(reject both) at (e1, e2): the union of the two entry patterns
        term_a = null_orthant_survival(model, (a1 - e1, b2 - e2))
        term_b = null_orthant_survival(model, (b1 - e1, a2 - e2))
        overlap = null_orthant_survival(model, (a1 - e1, a2 - e2))
        both_value = term_a + term_b - overlap
    else:
        t1, t2 = constants.high_stepup
        any_value = 1.0 - marginal_cdf(model, 0.0, t1 - e1)
        both_value = null_orthant_survival(model, (b1 - e1, b2 - e2))
    common = dict(model=model, alpha=constants.alpha, k=2, epsilon=(e1, e2))
    return (
        CriterionResult(value=any_value, kind=CriterionKind.PAIR_REJECT_ANY, j=1, **common),
        CriterionResult(value=both_value, kind=CriterionKind.PAIR_REJECT_BOTH, j=2, **common),
    )
