"""Exact critical constants for stepdown and stepup procedures.

Stepdown constants f_1 <= ... <= f_k: f_j is the (1 - alpha) point of the
null distribution of max(X_1, ..., X_j), so a procedure that works down from
the most significant statistic controls the familywise error exactly at the
configuration where j hypotheses are null.

Stepup constants d_1 <= ... <= d_k are solved sequentially: with d_1, ...,
d_{j-1} fixed, d_j makes the joint event {X_(i) <= d_i for i <= j} have null
probability 1 - alpha on j coordinates.  Each d_j depends only on the family,
correlation and alpha, never on k, so ladders nest across dimensions.

The two-hypothesis optimal thresholds (the marginal rung b, the stepdown
entry rung a and the stepup exit rung a-tilde) are solved from the defining
level and balance equations; see solve_pair_stepdown / solve_pair_stepup.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .models import (
    Family,
    ModelSpec,
    UnsupportedShiftError,
    marginal_cdf,
    marginal_quantile,
    max_cdf_null,
    null_rect_cdf,
)
from .orderstat import joint_orderstat_cdf

__all__ = [
    "LadderKind",
    "ConstantLadder",
    "PairConstants",
    "NonMonotoneLadderError",
    "solve_stepdown",
    "solve_stepup",
    "solve_pair_stepdown",
    "solve_pair_stepup",
    "solve_pair_constants",
    "clear_constant_cache",
    "BISECT_WIDTH",
    "RESIDUAL_TOL",
]

BISECT_WIDTH = 1e-12
RESIDUAL_TOL = 1e-9
_LADDER_SLACK = 1e-9


class NonMonotoneLadderError(RuntimeError):
    """The sequential stepup solution stopped being nondecreasing.

    For the families shipped here this cannot happen; hitting it means the
    supplied null law is outside the assumptions the stepup construction
    needs (the defining equations no longer produce a usable ladder).
    """


class LadderKind(str, Enum):
    STEPDOWN = "stepdown"
    STEPUP = "stepup"


@dataclass(frozen=True)
class ConstantLadder:
    """A solved vector of critical constants, lowest rung first."""

    kind: LadderKind
    alpha: float
    model: ModelSpec
    values: tuple[float, ...]
    residuals: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", LadderKind(self.kind))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        vals = tuple(float(v) for v in self.values)
        if len(vals) != self.model.k:
            raise ValueError("ladder length must equal model.k")
        for lo, hi in zip(vals, vals[1:]):
            if hi < lo - _LADDER_SLACK:
                raise NonMonotoneLadderError(
                    f"{self.kind.value} ladder decreases: {lo} -> {hi}"
                )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "residuals", tuple(float(r) for r in self.residuals))

    @property
    def k(self) -> int:
        return self.model.k


@dataclass(frozen=True)
class PairConstants:
    """The three threshold pairs of the two-hypothesis optimal procedures.

    marginal[i] solves P0(X_i >= b) = alpha; it is the rung both optimal
    procedures share.  high_stepdown[i] is the entry threshold the stepdown
    variant demands before it rejects anything; high_stepup[i] is the larger
    exit threshold of the stepup variant's accept-everything region.  The
    chain marginal < high_stepdown < high_stepup holds coordinatewise.
    """

    model: ModelSpec
    alpha: float
    epsilon: tuple[float, float]
    high_stepdown: tuple[float, float]
    marginal: tuple[float, float]
    high_stepup: tuple[float, float]
    residuals: dict = field(compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        for b, a, at in zip(self.marginal, self.high_stepdown, self.high_stepup):
            if not b < a < at:
                raise ValueError(
                    f"threshold chain violated: marginal={b}, stepdown={a}, stepup={at}"
                )


def _validate_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def _bisect_root(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    target: float,
    increasing: bool,
) -> float:
    """Bisection on a monotone fn to |hi - lo| <= BISECT_WIDTH."""
    while hi - lo > BISECT_WIDTH:
        mid = 0.5 * (lo + hi)
        val = fn(mid)
        below = val < target if increasing else val > target
        if below:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _expand_bracket_up(
    fn: Callable[[float], float], lo: float, target: float
) -> float:
    """Smallest geometric expansion hi > lo with fn(hi) >= target (fn rising)."""
    step = 1.0
    hi = lo + step
    for _ in range(80):
        if fn(hi) >= target:
            return hi
        step *= 2.0
        hi = lo + step
    raise RuntimeError("failed to bracket the root upward")


_cache_lock = threading.Lock()
_ladder_cache: dict[tuple, ConstantLadder] = {}


def clear_constant_cache() -> None:
    with _cache_lock:
        _ladder_cache.clear()


def _cache_key(model: ModelSpec, alpha: float, kind: LadderKind) -> tuple:
    return (model.family.value, model.rho, model.k, alpha, kind.value)


def _check_residuals(kind: LadderKind, residuals: Sequence[float]) -> None:
    worst = max(residuals)
    if worst > RESIDUAL_TOL:
        raise RuntimeError(
            f"{kind.value} constants failed the residual check ({worst:.3e})"
        )


def solve_stepdown(model: ModelSpec, alpha: float) -> ConstantLadder:
    """Solve f_j from P0(max of j coordinates <= f_j) = 1 - alpha, j = 1..k."""
    alpha = _validate_alpha(alpha)
    key = _cache_key(model, alpha, LadderKind.STEPDOWN)
    with _cache_lock:
        cached = _ladder_cache.get(key)
    if cached is not None:
        return cached

    target = 1.0 - alpha
    base = marginal_quantile(model, 0.0, target)
    values: list[float] = []
    for j in range(1, model.k + 1):
        if j == 1:
            values.append(base)
            continue
        if model.family is Family.IID_UNIFORM:
            values.append(target ** (1.0 / j))
            continue
        if model.family is Family.IID_NORMAL:
            values.append(marginal_quantile(model, 0.0, target ** (1.0 / j)))
            continue
        fn = lambda t, j=j: max_cdf_null(model, j, t)
        hi = _expand_bracket_up(fn, base, target)
        values.append(_bisect_root(fn, base, hi, target, increasing=True))
    residuals = [abs(max_cdf_null(model, j, v) - target) for j, v in enumerate(values, 1)]
    _check_residuals(LadderKind.STEPDOWN, residuals)
    ladder = ConstantLadder(
        kind=LadderKind.STEPDOWN,
        alpha=alpha,
        model=model,
        values=tuple(values),
        residuals=tuple(residuals),
    )
    with _cache_lock:
        _ladder_cache[key] = ladder
    return ladder


def solve_stepup(model: ModelSpec, alpha: float) -> ConstantLadder:
    """Solve d_1, ..., d_k sequentially from the joint order-statistic level
    condition P0(X_(1) <= d_1, ..., X_(j) <= d_j) = 1 - alpha on j coordinates.

    Raises NonMonotoneLadderError if a solved rung would fall below its
    predecessor by more than the ladder slack.
    """
    alpha = _validate_alpha(alpha)
    key = _cache_key(model, alpha, LadderKind.STEPUP)
    with _cache_lock:
        cached = _ladder_cache.get(key)
    if cached is not None:
        return cached

    target = 1.0 - alpha
    values: list[float] = [marginal_quantile(model, 0.0, target)]
    for j in range(2, model.k + 1):
        prefix = values[:]

        if model.family is Family.IID_UNIFORM:
            # Above the previous rung the level condition is affine in the top
            # rung: the top order statistic contributes constant density
            # j * (prefix level), and the prefix level solved to the target.
            # One exact division beats bisection by three orders of magnitude.
            base = joint_orderstat_cdf(model, j, prefix + [prefix[-1]])
            values.append(prefix[-1] + (target - base) / (j * target))
            continue

        def fn(d: float, j=j, prefix=prefix) -> float:
            return joint_orderstat_cdf(model, j, prefix + [d])

        lo = prefix[-1]
        at_lo = fn(lo)
        if at_lo > target:
            if at_lo - target > _LADDER_SLACK:
                raise NonMonotoneLadderError(
                    f"rung {j} would fall below rung {j - 1}"
                )
            values.append(lo)
            continue
        hi = _expand_bracket_up(fn, lo, target)
        values.append(_bisect_root(fn, lo, hi, target, increasing=True))
    residuals = [
        abs(joint_orderstat_cdf(model, j, values[:j]) - target)
        for j in range(1, model.k + 1)
    ]
    _check_residuals(LadderKind.STEPUP, residuals)
    ladder = ConstantLadder(
        kind=LadderKind.STEPUP,
        alpha=alpha,
        model=model,
        values=tuple(values),
        residuals=tuple(residuals),
    )
    with _cache_lock:
        _ladder_cache[key] = ladder
    return ladder


def _validate_pair_inputs(
    model: ModelSpec, alpha: float, epsilon: Sequence[float]
) -> tuple[float, tuple[float, float]]:
    if model.k != 2:
        raise ValueError("pair constants are defined for k = 2 models")
    if not model.supports_shift:
        raise UnsupportedShiftError("pair constants need a location family")
    alpha = _validate_alpha(alpha)
    eps = tuple(float(e) for e in epsilon)
    if len(eps) != 2:
        raise ValueError("epsilon must have two components")
    if not all(math.isfinite(e) and e > 0.0 for e in eps):
        raise ValueError("epsilon components must be finite and > 0")
    return alpha, eps  # type: ignore[return-value]


def solve_pair_stepdown(
    model: ModelSpec, alpha: float, epsilon: Sequence[float]
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Entry thresholds (a_1, a_2) and marginal rungs (b_1, b_2) for k = 2.

    (a_1, a_2) solve the level condition P0(X_1 > a_1 or X_2 > a_2) = alpha
    together with the balance condition that the two single-coordinate
    rejection probabilities agree at the calibration shifts: with a location
    family the balance pins a_2 - epsilon_2 = a_1 - epsilon_1, reducing the
    system to one dimension.  b_i solves P0(X_i >= b_i) = alpha.
    """
    alpha, eps = _validate_pair_inputs(model, alpha, epsilon)
    b = marginal_quantile(model, 0.0, 1.0 - alpha)
    offset = eps[1] - eps[0]

    def union_prob(a1: float) -> float:
        return 1.0 - null_rect_cdf(model, (a1, a1 + offset))

    lo = min(b, b - offset)
    # union_prob(lo) >= P0(X_1 > b) = alpha or >= P0(X_2 > b) = alpha
    hi = _expand_bracket_up(lambda a: -union_prob(a), lo, -alpha)
    a1 = _bisect_root(union_prob, lo, hi, alpha, increasing=False)
    a2 = a1 + offset
    return (a1, a2), (b, b)


def solve_pair_stepup(
    model: ModelSpec,
    alpha: float,
    epsilon: Sequence[float],
    marginal: tuple[float, float] | None = None,
    high_stepdown: tuple[float, float] | None = None,
) -> tuple[float, float]:
    """Exit thresholds (a~_1, a~_2) of the two-hypothesis stepup optimum.

    The accept-everything region is {X_1 <= a~_1, X_2 <= a~_2} minus the
    reject-both corner {X_1 > b_1, X_2 > b_2}; its null probability is set to
    1 - alpha, with the same location-family balance reduction as the
    stepdown solve.
    """
    alpha, eps = _validate_pair_inputs(model, alpha, epsilon)
    if marginal is None:
        b = marginal_quantile(model, 0.0, 1.0 - alpha)
        marginal = (b, b)
    b1, b2 = marginal
    offset = eps[1] - eps[0]
    target = 1.0 - alpha
    corner = null_rect_cdf(model, (b1, b2))

    def accept_prob(t1: float) -> float:
        t2 = t1 + offset
        return (
            null_rect_cdf(model, (b1, t2))
            + null_rect_cdf(model, (t1, b2))
            - corner
        )

    if high_stepdown is None:
        high_stepdown, _ = solve_pair_stepdown(model, alpha, eps)
    # the stepup exit rung sits strictly above the stepdown entry rung: the
    # stepup accept region at the same corner is smaller, so its level is
    # still below 1 - alpha there
    lo = max(high_stepdown[0], high_stepdown[1] - offset)
    hi = _expand_bracket_up(accept_prob, lo, target)
    t1 = _bisect_root(accept_prob, lo, hi, target, increasing=True)
    return (t1, t1 + offset)


def solve_pair_constants(
    model: ModelSpec, alpha: float, epsilon: Sequence[float]
) -> PairConstants:
    """Solve all three threshold pairs and package them with residuals."""
    alpha, eps = _validate_pair_inputs(model, alpha, epsilon)
    high_sd, marginal = solve_pair_stepdown(model, alpha, eps)
    high_su = solve_pair_stepup(
        model, alpha, eps, marginal=marginal, high_stepdown=high_sd
    )

    def exceed(a: float, e: float) -> float:
        return 1.0 - marginal_cdf(model, 0.0, a - e)

    residuals = {
        "marginal_level": abs((1.0 - marginal_cdf(model, 0.0, marginal[0])) - alpha),
        "stepdown_level": abs(
            (1.0 - null_rect_cdf(model, high_sd)) - alpha
        ),
        "stepdown_balance": abs(
            exceed(high_sd[0], eps[0]) - exceed(high_sd[1], eps[1])
        ),
        "stepup_level": abs(
            null_rect_cdf(model, (marginal[0], high_su[1]))
            + null_rect_cdf(model, (high_su[0], marginal[1]))
            - null_rect_cdf(model, marginal)
            - (1.0 - alpha)
        ),
        "stepup_balance": abs(
            exceed(high_su[0], eps[0]) - exceed(high_su[1], eps[1])
        ),
    }
    worst = max(residuals.values())
    if worst > RESIDUAL_TOL:
        raise RuntimeError(f"pair constants failed the residual check ({worst:.3e})")
    return PairConstants(
        model=model,
        alpha=alpha,
        epsilon=eps,
        high_stepdown=high_sd,
        marginal=marginal,
        high_stepup=high_su,
        residuals=residuals,
    )
