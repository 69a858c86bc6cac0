"""Decision rules: stepdown, stepup, the p-value baseline and the
two-hypothesis optimal classifiers.

Conventions shared by every rule here:

* Large statistics are significant.
* Stepdown walks the statistics from most to least significant; step i
  compares against the ladder read from the top (rung k - i + 1) and the
  rejection run stops at the first failed comparison (weak inequality:
  a statistic equal to its rung is rejected).
* Stepup walks from least to most significant; the first rank s whose
  statistic strictly exceeds rung s triggers rejection of that statistic and
  every larger one.
* Sort ties break by original index: the lower index counts as the smaller
  observation, which makes every decision deterministic.
* +inf statistics are always rejected by both stepwise rules (any finite
  ladder); -inf statistics are never rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr

from .constants import ConstantLadder, LadderKind, PairConstants
from .models import Family, ModelSpec

__all__ = [
    "Verdict",
    "TraceStep",
    "Decision",
    "PairRegion",
    "PairVariant",
    "stepdown_decide",
    "stepup_decide",
    "holm_bonferroni",
    "pair_classify",
    "pair_classify_batch",
    "stepdown_reject_mask",
    "stepup_reject_mask",
    "holm_reject_mask",
    "statistic_to_p",
    "check_monotone",
    "MonotoneViolation",
    "MonotoneReport",
    "Procedure",
    "stepdown_procedure",
    "stepup_procedure",
    "holm_procedure",
]


class Verdict(str, Enum):
    REJECT = "reject"
    ACCEPT = "accept"


class TraceStep(NamedTuple):
    step: int
    index: int
    statistic: float
    threshold: float
    verdict: str


@dataclass(frozen=True)
class Decision:
    verdicts: tuple[Verdict, ...]
    trace: tuple[TraceStep, ...]

    @property
    def rejected(self) -> frozenset[int]:
        return frozenset(
            i for i, v in enumerate(self.verdicts) if v is Verdict.REJECT
        )

    @property
    def n_rejected(self) -> int:
        return sum(1 for v in self.verdicts if v is Verdict.REJECT)


def _check_stats(x: Sequence[float], k: int) -> list[float]:
    vals = [float(v) for v in x]
    if len(vals) != k:
        raise ValueError(f"expected {k} statistics, got {len(vals)}")
    for v in vals:
        if math.isnan(v):
            raise ValueError("statistics must not be NaN")
    return vals


def _require_kind(ladder: ConstantLadder, kind: LadderKind) -> None:
    if ladder.kind is not kind:
        raise ValueError(f"ladder kind is {ladder.kind.value}, expected {kind.value}")


def stepdown_decide(x: Sequence[float], ladder: ConstantLadder) -> Decision:
    """Most significant first; reject while statistics clear the descending
    rungs f_k, f_{k-1}, ...; stop at the first failure."""
    _require_kind(ladder, LadderKind.STEPDOWN)
    k = ladder.k
    vals = _check_stats(x, k)
    order = sorted(range(k), key=lambda i: (-vals[i], i))
    verdicts = [Verdict.ACCEPT] * k
    trace: list[TraceStep] = []
    rejecting = True
    for step, idx in enumerate(order, start=1):
        threshold = ladder.values[k - step]
        if rejecting and vals[idx] >= threshold:
            verdicts[idx] = Verdict.REJECT
            outcome = Verdict.REJECT
        else:
            rejecting = False
            outcome = Verdict.ACCEPT
        trace.append(TraceStep(step, idx, vals[idx], threshold, outcome.value))
    return Decision(verdicts=tuple(verdicts), trace=tuple(trace))


def _stepup_walk(vals: list[float], thresholds: Sequence[float]) -> Decision:
    k = len(vals)
    order = sorted(range(k), key=lambda i: (vals[i], i))
    trigger = None
    for rank, idx in enumerate(order, start=1):
        if vals[idx] > thresholds[rank - 1]:
            trigger = rank
            break
    verdicts = [Verdict.ACCEPT] * k
    trace: list[TraceStep] = []
    for rank, idx in enumerate(order, start=1):
        if trigger is not None and rank >= trigger:
            verdicts[idx] = Verdict.REJECT
        trace.append(
            TraceStep(rank, idx, vals[idx], thresholds[rank - 1], verdicts[idx].value)
        )
    return Decision(verdicts=tuple(verdicts), trace=tuple(trace))


def stepup_decide(x: Sequence[float], ladder: ConstantLadder) -> Decision:
    """Least significant first; the first rank whose statistic strictly
    exceeds its rung d_s condemns that statistic and every larger one."""
    _require_kind(ladder, LadderKind.STEPUP)
    vals = _check_stats(x, ladder.k)
    return _stepup_walk(vals, ladder.values)


def holm_bonferroni(p_values: Sequence[float], alpha: float) -> Decision:
    """Sequentially rejective p-value baseline: ascending p_(i) against
    alpha / (k - i + 1), stopping at the first failure."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    vals = [float(p) for p in p_values]
    k = len(vals)
    if k == 0:
        raise ValueError("need at least one p-value")
    for p in vals:
        if math.isnan(p) or not 0.0 <= p <= 1.0:
            raise ValueError(f"p-values must lie in [0, 1], got {p}")
    order = sorted(range(k), key=lambda i: (vals[i], i))
    verdicts = [Verdict.ACCEPT] * k
    trace: list[TraceStep] = []
    rejecting = True
    for step, idx in enumerate(order, start=1):
        threshold = alpha / (k - step + 1)
        if rejecting and vals[idx] <= threshold:
            verdicts[idx] = Verdict.REJECT
            outcome = Verdict.REJECT
        else:
            rejecting = False
            outcome = Verdict.ACCEPT
        trace.append(TraceStep(step, idx, vals[idx], threshold, outcome.value))
    return Decision(verdicts=tuple(verdicts), trace=tuple(trace))


# --- two-hypothesis optimal classifiers --------------------------------------


class PairVariant(str, Enum):
    STEPDOWN_OPTIMAL = "stepdown-optimal"
    STEPUP_OPTIMAL = "stepup-optimal"


class PairRegion(str, Enum):
    REJECT_NONE = "reject-none"
    REJECT_SECOND = "reject-second"
    REJECT_FIRST = "reject-first"
    REJECT_BOTH = "reject-both"

    @property
    def rejected(self) -> frozenset[int]:
        return _REGION_REJECTED[self]


_REGION_REJECTED = {
    PairRegion.REJECT_NONE: frozenset(),
    PairRegion.REJECT_SECOND: frozenset({1}),
    PairRegion.REJECT_FIRST: frozenset({0}),
    PairRegion.REJECT_BOTH: frozenset({0, 1}),
}

_REGION_CODES = (
    PairRegion.REJECT_NONE,
    PairRegion.REJECT_SECOND,
    PairRegion.REJECT_FIRST,
    PairRegion.REJECT_BOTH,
)


def pair_classify_batch(
    X: np.ndarray, constants: PairConstants, variant: PairVariant
) -> np.ndarray:
    """Region codes (0 none, 1 second-only, 2 first-only, 3 both) for an
    (n, 2) array of statistic pairs.

    Region membership follows the defining inequalities of each variant with
    a fixed evaluation order (single-rejection regions, then the reject-both
    region, everything else reject-none), which pins down the measure-zero
    boundary points deterministically.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("X must have shape (n, 2)")
    x1, x2 = X[:, 0], X[:, 1]
    b1, b2 = constants.marginal
    variant = PairVariant(variant)
    if variant is PairVariant.STEPDOWN_OPTIMAL:
        a1, a2 = constants.high_stepdown
        second_only = (x1 < b1) & (x2 >= a2)
        first_only = (x1 >= a1) & (x2 < b2)
        both = (x1 >= b1) & (x2 >= b2) & ((x1 > a1) | (x2 > a2))
    else:
        t1, t2 = constants.high_stepup
        both = (x1 > b1) & (x2 > b2)
        second_only = (x1 < b1) & (x2 >= t2)
        first_only = (x1 >= t1) & (x2 < b2)
    codes = np.zeros(len(X), dtype=np.int8)
    codes[second_only] = 1
    codes[first_only] = 2
    codes[both] = 3
    return codes


def pair_classify(
    x: Sequence[float], constants: PairConstants, variant: PairVariant
) -> PairRegion:
    vals = _check_stats(x, 2)
    code = pair_classify_batch(np.array([vals]), constants, variant)[0]
    return _REGION_CODES[code]


# --- vectorised batch kernels -------------------------------------------------


def _rank_matrix(order: np.ndarray) -> np.ndarray:
    n, k = order.shape
    ranks = np.empty_like(order)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(k)[None, :]
    return ranks


def stepdown_reject_mask(X: np.ndarray, ladder: ConstantLadder) -> np.ndarray:
    """Boolean (n, k) rejection mask; row semantics match stepdown_decide."""
    _require_kind(ladder, LadderKind.STEPDOWN)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if k != ladder.k:
        raise ValueError("column count must equal ladder length")
    order = np.argsort(-X, axis=1, kind="stable")
    sorted_desc = np.take_along_axis(X, order, axis=1)
    thresholds = np.asarray(ladder.values[::-1], dtype=float)
    passes = sorted_desc >= thresholds[None, :]
    counts = np.where(passes.all(axis=1), k, passes.argmin(axis=1))
    return _rank_matrix(order) < counts[:, None]


def stepup_reject_mask(X: np.ndarray, ladder: ConstantLadder) -> np.ndarray:
    """Boolean (n, k) rejection mask; row semantics match stepup_decide."""
    _require_kind(ladder, LadderKind.STEPUP)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if k != ladder.k:
        raise ValueError("column count must equal ladder length")
    order = np.argsort(X, axis=1, kind="stable")
    sorted_asc = np.take_along_axis(X, order, axis=1)
    thresholds = np.asarray(ladder.values, dtype=float)
    exceed = sorted_asc > thresholds[None, :]
    any_exceed = exceed.any(axis=1)
    first = np.where(any_exceed, exceed.argmax(axis=1), k)
    return _rank_matrix(order) >= first[:, None]


def holm_reject_mask(P: np.ndarray, alpha: float) -> np.ndarray:
    """Boolean (n, k) rejection mask on the p-value scale."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    P = np.asarray(P, dtype=float)
    n, k = P.shape
    order = np.argsort(P, axis=1, kind="stable")
    sorted_asc = np.take_along_axis(P, order, axis=1)
    thresholds = alpha / (k - np.arange(k, dtype=float))
    passes = sorted_asc <= thresholds[None, :]
    counts = np.where(passes.all(axis=1), k, passes.argmin(axis=1))
    return _rank_matrix(order) < counts[:, None]


def statistic_to_p(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """One-sided p-values 1 - F0(x) under the model's null marginal."""
    x = np.asarray(x, dtype=float)
    if model.family is Family.IID_UNIFORM:
        return 1.0 - np.clip(x, 0.0, 1.0)
    return ndtr(-x)


# --- monotonicity checking ----------------------------------------------------


class MonotoneViolation(NamedTuple):
    trial: int
    x: tuple[float, ...]
    y: tuple[float, ...]
    rejected_x: frozenset[int]
    rejected_y: frozenset[int]


@dataclass(frozen=True)
class MonotoneReport:
    trials: int
    violations: tuple[MonotoneViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_monotone(
    decide: Callable[[Sequence[float]], Decision],
    x: Sequence[float],
    trials: int,
    seed: int,
) -> MonotoneReport:
    """Probe the defining monotonicity of a decision rule at x.

    Each trial draws positive perturbation sizes, pushes every rejected
    coordinate up and every accepted coordinate strictly down, and demands
    the rejection set stays identical.  Sentinel coordinates keep their
    value (inf +- anything is inf), which cannot change a threshold rule's
    answer.  Violations are collected, not raised.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    base = [float(v) for v in x]
    rng = np.random.default_rng(seed)
    base_rejected = decide(base).rejected
    violations: list[MonotoneViolation] = []
    for t in range(trials):
        mags = rng.exponential(scale=1.0, size=len(base))
        y = [
            v + m if i in base_rejected else v - m
            for i, (v, m) in enumerate(zip(base, mags))
        ]
        got = decide(y).rejected
        if got != base_rejected:
            violations.append(
                MonotoneViolation(t, tuple(base), tuple(y), base_rejected, got)
            )
    return MonotoneReport(trials=trials, violations=tuple(violations))


# --- bound procedures for the simulation harness ------------------------------


@dataclass(frozen=True)
class Procedure:
    """A named decision rule bound to its constants, with a scalar path
    (full trace) and a batch path (rejection masks) that must agree."""

    name: str
    decide: Callable[[Sequence[float]], Decision]
    reject_mask: Callable[[np.ndarray], np.ndarray]


def stepdown_procedure(ladder: ConstantLadder) -> Procedure:
    _require_kind(ladder, LadderKind.STEPDOWN)
    return Procedure(
        name="stepdown",
        decide=lambda x: stepdown_decide(x, ladder),
        reject_mask=lambda X: stepdown_reject_mask(X, ladder),
    )


def stepup_procedure(ladder: ConstantLadder) -> Procedure:
    _require_kind(ladder, LadderKind.STEPUP)
    return Procedure(
        name="stepup",
        decide=lambda x: stepup_decide(x, ladder),
        reject_mask=lambda X: stepup_reject_mask(X, ladder),
    )


def holm_procedure(model: ModelSpec, alpha: float) -> Procedure:
    """The p-value baseline lifted onto the statistic scale of `model`."""

    def decide(x: Sequence[float]) -> Decision:
        p = statistic_to_p(model, np.asarray([float(v) for v in x]))
        return holm_bonferroni(p.tolist(), alpha)

    def mask(X: np.ndarray) -> np.ndarray:
        return holm_reject_mask(statistic_to_p(model, X), alpha)

    return Procedure(name="holm", decide=decide, reject_mask=mask)
