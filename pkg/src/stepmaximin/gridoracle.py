"""Small-grid brute-force oracle for the two-hypothesis optimality claims.

Everything here is exact finite arithmetic: coordinates take values in
{1, ..., m}, null and alternative laws are explicit pmfs, and probabilities
are plain sums.  The oracle enumerates the four-parameter threshold family
(the discrete analog of the optimal two-hypothesis rules), filters by exact
strong familywise-error control, and maximises a power criterion, so the
continuous theory can be cross-checked against an independent computation
that involves no quadrature, no root finding and no sampling.

Discrete boundary convention: every comparison against a threshold is
"value >= rung".  With both rungs of a coordinate ordered (b_i <= a_i) the
four regions below partition the grid exactly and the resulting rule is
monotone by construction:

    reject none    v1 < a1 and v2 < a2
    reject first   v1 >= a1 and v2 < b2
    reject second  v1 < b1 and v2 >= a2
    reject both    (v1 >= a1 and v2 >= b2) or (v1 >= b1 and v2 >= a2)

A rung of m + 1 means "never".
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

__all__ = [
    "GridModel",
    "GridConfig",
    "ThresholdRule",
    "GridCriterion",
    "BruteForceResult",
    "GridRegion",
    "rule_labels",
    "exact_fwer_grid",
    "grid_criterion_value",
    "brute_force_maximin",
    "monotone_enumeration_best",
    "rule_is_monotone_on_grid",
    "slice_union",
    "slice_intersection",
    "grid_region_prob",
    "random_monotone_region",
    "discretized_normal_grid_model",
    "discretize_threshold",
    "grid_model_to_doc",
    "grid_model_from_doc",
]

_PMF_TOL = 1e-12


class GridConfig(str, Enum):
    NULL = "null"
    ALT = "alt"
    ALT_TOP = "alt-top"
    ALT_BOTTOM = "alt-bottom"


class GridCriterion(str, Enum):
    REJECT_ANY = "reject-any"
    REJECT_BOTH = "reject-both"


@dataclass(frozen=True)
class GridModel:
    """Two independent coordinates on {1..m} with a null and an alternative
    pmf; the alternative must stochastically dominate the null."""

    m: int
    null_pmf: tuple[float, ...]
    alt_pmf: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError("m must be >= 2")
        null = tuple(float(p) for p in self.null_pmf)
        alt = tuple(float(p) for p in self.alt_pmf)
        if len(null) != self.m or len(alt) != self.m:
            raise ValueError("pmf length must equal m")
        for pmf, name in ((null, "null_pmf"), (alt, "alt_pmf")):
            if any(p < 0.0 for p in pmf):
                raise ValueError(f"{name} has negative mass")
            if abs(sum(pmf) - 1.0) > _PMF_TOL:
                raise ValueError(f"{name} does not sum to 1")
        null_cdf = np.cumsum(null)
        alt_cdf = np.cumsum(alt)
        if np.any(alt_cdf > null_cdf + _PMF_TOL):
            raise ValueError("alt_pmf must stochastically dominate null_pmf")
        object.__setattr__(self, "null_pmf", null)
        object.__setattr__(self, "alt_pmf", alt)

    @property
    def k(self) -> int:
        return 2

    def config_pmf(self, config: GridConfig) -> np.ndarray:
        config = GridConfig(config)
        if config is GridConfig.NULL:
            return np.asarray(self.null_pmf)
        if config is GridConfig.ALT:
            return np.asarray(self.alt_pmf)
        point = np.zeros(self.m)
        point[-1 if config is GridConfig.ALT_TOP else 0] = 1.0
        return point


@dataclass(frozen=True)
class ThresholdRule:
    """Integer rungs (a_1, a_2) and (b_1, b_2), 1 <= b_i <= a_i <= m + 1."""

    a: tuple[int, int]
    b: tuple[int, int]

    def __post_init__(self) -> None:
        a = tuple(int(v) for v in self.a)
        b = tuple(int(v) for v in self.b)
        if len(a) != 2 or len(b) != 2:
            raise ValueError("a and b must be integer pairs")
        for bi, ai in zip(b, a):
            if not 1 <= bi <= ai:
                raise ValueError(f"need 1 <= b <= a, got b={bi}, a={ai}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def sort_key(self) -> tuple[int, int, int, int]:
        return (*self.a, *self.b)


def _check_rule_fits(rule: ThresholdRule, m: int) -> None:
    if max(*rule.a, *rule.b) > m + 1:
        raise ValueError(f"rule rungs exceed m + 1 = {m + 1}")


def rule_labels(rule: ThresholdRule, m: int) -> np.ndarray:
    """(m, m) array of region codes: 0 none, 1 second-only, 2 first-only,
    3 both; entry [i, j] is the decision at values (i + 1, j + 1)."""
    _check_rule_fits(rule, m)
    v1 = np.arange(1, m + 1)[:, None]
    v2 = np.arange(1, m + 1)[None, :]
    a1, a2 = rule.a
    b1, b2 = rule.b
    labels = np.zeros((m, m), dtype=np.int8)
    labels[(v1 < b1) & (v2 >= a2)] = 1
    labels[(v1 >= a1) & (v2 < b2)] = 2
    labels[((v1 >= a1) & (v2 >= b2)) | ((v1 >= b1) & (v2 >= a2))] = 3
    return labels


_REJECTS_FIRST = np.array([False, False, True, True])
_REJECTS_SECOND = np.array([False, True, False, True])


def exact_fwer_grid(
    rule: ThresholdRule,
    model: GridModel,
    config: Sequence[GridConfig],
) -> float:
    """Exact P(some null-configured coordinate is rejected).

    Each coordinate of config is Null, AltTop or AltBottom (the point masses
    are the discrete stand-ins for parameters at +inf / -inf); only
    rejections of Null coordinates count as familywise errors.
    """
    cfg = tuple(GridConfig(c) for c in config)
    if len(cfg) != 2:
        raise ValueError("config must have two coordinates")
    if GridConfig.ALT in cfg:
        raise ValueError("error configurations use Null, AltTop or AltBottom")
    labels = rule_labels(rule, model.m)
    err = np.zeros(4, dtype=bool)
    if cfg[0] is GridConfig.NULL:
        err |= _REJECTS_FIRST
    if cfg[1] is GridConfig.NULL:
        err |= _REJECTS_SECOND
    if not err.any():
        return 0.0
    weights = np.outer(model.config_pmf(cfg[0]), model.config_pmf(cfg[1]))
    return float(weights[err[labels]].sum())


def _region_prob(
    labels: np.ndarray,
    model: GridModel,
    config: tuple[GridConfig, GridConfig],
    code_mask: np.ndarray,
) -> float:
    weights = np.outer(model.config_pmf(config[0]), model.config_pmf(config[1]))
    return float(weights[code_mask[labels]].sum())


_ANY_REJECT = np.array([False, True, True, True])
_BOTH_REJECT = np.array([False, False, False, True])


def grid_criterion_value(
    rule: ThresholdRule, model: GridModel, criterion: GridCriterion
) -> float:
    """reject-any: worst case over one live alternative coordinate (the other
    at the bottom point mass) of P(reject something).  reject-both: both
    coordinates at the alternative, P(reject both)."""
    criterion = GridCriterion(criterion)
    labels = rule_labels(rule, model.m)
    if criterion is GridCriterion.REJECT_ANY:
        return min(
            _region_prob(labels, model, (GridConfig.ALT, GridConfig.ALT_BOTTOM), _ANY_REJECT),
            _region_prob(labels, model, (GridConfig.ALT_BOTTOM, GridConfig.ALT), _ANY_REJECT),
        )
    return _region_prob(labels, model, (GridConfig.ALT, GridConfig.ALT), _BOTH_REJECT)


_ERROR_CONFIGS = tuple(
    itertools.product(
        (GridConfig.NULL, GridConfig.ALT_TOP, GridConfig.ALT_BOTTOM), repeat=2
    )
)


def rule_is_feasible(rule: ThresholdRule, model: GridModel, alpha: float) -> bool:
    """Strong control: exact FWER <= alpha at every error configuration."""
    return all(
        exact_fwer_grid(rule, model, cfg) <= alpha for cfg in _ERROR_CONFIGS
    )


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    rules: tuple[ThresholdRule, ...]
    criterion: GridCriterion
    alpha: float


def iter_threshold_rules(m: int) -> Iterable[ThresholdRule]:
    for a1 in range(1, m + 2):
        for a2 in range(1, m + 2):
            for b1 in range(1, a1 + 1):
                for b2 in range(1, a2 + 1):
                    yield ThresholdRule(a=(a1, a2), b=(b1, b2))


def brute_force_maximin(
    model: GridModel, alpha: float, criterion: GridCriterion
) -> BruteForceResult:
    """Exhaustive maximin over the threshold family under exact strong
    control; ties are all reported, in lexicographic rung order."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if model.m > 12:
        raise ValueError("brute force supports m <= 12")
    criterion = GridCriterion(criterion)
    best_value = -math.inf
    best_rules: list[ThresholdRule] = []
    for rule in iter_threshold_rules(model.m):
        if not rule_is_feasible(rule, model, alpha):
            continue
        value = grid_criterion_value(rule, model, criterion)
        if value > best_value:
            best_value = value
            best_rules = [rule]
        elif value == best_value:
            best_rules.append(rule)
    if not best_rules:
        raise RuntimeError("no feasible rule; alpha admits nothing")
    best_rules.sort(key=ThresholdRule.sort_key)
    return BruteForceResult(
        value=best_value,
        rules=tuple(best_rules),
        criterion=criterion,
        alpha=float(alpha),
    )


# --- full monotone-rule enumeration (tiny grids) ------------------------------


def _rejected_coords(label: int) -> tuple[int, ...]:
    return ((), (1,), (0,), (0, 1))[label]


def _monotone_premise(cx: tuple[int, int], cy: tuple[int, int], label: int) -> bool:
    rejected = _rejected_coords(label)
    for i in range(2):
        if i in rejected:
            if cy[i] < cx[i]:
                return False
        else:
            if cy[i] >= cx[i]:
                return False
    return True


def rule_is_monotone_on_grid(rule: ThresholdRule, m: int) -> bool:
    labels = rule_labels(rule, m).ravel()
    cells = list(itertools.product(range(1, m + 1), repeat=2))
    for ix, cx in enumerate(cells):
        for iy, cy in enumerate(cells):
            lab = int(labels[ix])
            if _monotone_premise(cx, cy, lab) and int(labels[iy]) != lab:
                return False
    return True


def monotone_enumeration_best(
    model: GridModel, alpha: float, criterion: GridCriterion
) -> float:
    """Best criterion value over every monotone decision rule on the grid
    (all label assignments, filtered by the coordinatewise monotonicity
    property and exact strong control).  m <= 3 only: the search space is
    4^(m^2)."""
    if model.m > 3:
        raise ValueError("full enumeration supports m <= 3")
    criterion = GridCriterion(criterion)
    m = model.m
    n_cells = m * m
    cells = list(itertools.product(range(1, m + 1), repeat=2))
    grids = np.array(
        list(itertools.product(range(4), repeat=n_cells)), dtype=np.int8
    )
    keep = np.ones(len(grids), dtype=bool)
    for ix, cx in enumerate(cells):
        for iy, cy in enumerate(cells):
            if ix == iy:
                continue
            for lab in range(4):
                if _monotone_premise(cx, cy, lab):
                    bad = (grids[:, ix] == lab) & (grids[:, iy] != lab)
                    keep &= ~bad
    grids = grids[keep]

    def config_weights(cfg: tuple[GridConfig, GridConfig]) -> np.ndarray:
        return np.outer(
            model.config_pmf(cfg[0]), model.config_pmf(cfg[1])
        ).ravel()

    feasible = np.ones(len(grids), dtype=bool)
    for cfg in _ERROR_CONFIGS:
        err = np.zeros(4, dtype=bool)
        if cfg[0] is GridConfig.NULL:
            err |= _REJECTS_FIRST
        if cfg[1] is GridConfig.NULL:
            err |= _REJECTS_SECOND
        if not err.any():
            continue
        w = config_weights(cfg)
        fwer = err[grids] @ w
        feasible &= fwer <= alpha
    grids = grids[feasible]
    if len(grids) == 0:
        raise RuntimeError("no feasible monotone rule")

    if criterion is GridCriterion.REJECT_ANY:
        w1 = config_weights((GridConfig.ALT, GridConfig.ALT_BOTTOM))
        w2 = config_weights((GridConfig.ALT_BOTTOM, GridConfig.ALT))
        values = np.minimum(_ANY_REJECT[grids] @ w1, _ANY_REJECT[grids] @ w2)
    else:
        w = config_weights((GridConfig.ALT, GridConfig.ALT))
        values = _BOTH_REJECT[grids] @ w
    return float(values.max())


# --- monotone regions and sentinel-slice identities ---------------------------


@dataclass(frozen=True)
class GridRegion:
    """Indicator of an upward-closed region of a finite product grid."""

    indicator: np.ndarray

    def __post_init__(self) -> None:
        ind = np.asarray(self.indicator, dtype=bool)
        if ind.ndim < 1:
            raise ValueError("indicator must have at least one axis")
        for axis in range(ind.ndim):
            stepped = np.diff(ind.astype(np.int8), axis=axis)
            if np.any(stepped < 0):
                raise ValueError(
                    f"indicator is not monotone along axis {axis}"
                )
        object.__setattr__(self, "indicator", ind)

    @property
    def ndim(self) -> int:
        return self.indicator.ndim


def slice_union(region: GridRegion, axis: int) -> GridRegion:
    """Union of the cross-sections along `axis`; for a monotone region this
    is what a +inf sentinel on that axis sees."""
    if not isinstance(region, GridRegion):
        region = GridRegion(np.asarray(region))
    return GridRegion(region.indicator.any(axis=axis))


def slice_intersection(region: GridRegion, axis: int) -> GridRegion:
    """Intersection of the cross-sections along `axis`; the -inf sentinel
    counterpart of slice_union."""
    if not isinstance(region, GridRegion):
        region = GridRegion(np.asarray(region))
    return GridRegion(region.indicator.all(axis=axis))


def grid_region_prob(region: GridRegion, pmfs: Sequence[Sequence[float]]) -> float:
    """Probability of the region under independent per-axis pmfs."""
    ind = region.indicator
    if len(pmfs) != ind.ndim:
        raise ValueError("need one pmf per axis")
    value = ind.astype(float)
    for pmf in reversed([np.asarray(p, dtype=float) for p in pmfs]):
        if pmf.ndim != 1 or pmf.shape[0] != value.shape[-1]:
            raise ValueError("pmf length must match the axis size")
        value = value @ pmf
    return float(value)


def random_monotone_region(
    shape: Sequence[int], n_orthants: int, rng: np.random.Generator
) -> GridRegion:
    """Union of random upward orthants (possibly empty or full)."""
    shape = tuple(int(s) for s in shape)
    ind = np.zeros(shape, dtype=bool)
    grids = np.indices(shape)
    for _ in range(n_orthants):
        corner = [rng.integers(0, s + 1) for s in shape]
        cell = np.ones(shape, dtype=bool)
        for axis, c in enumerate(corner):
            cell &= grids[axis] >= c
        ind |= cell
    return GridRegion(ind)


# --- continuous-to-discrete bridging -----------------------------------------


def discretized_normal_grid_model(
    m: int, epsilon: float, lo: float = -2.5, hi: float | None = None
) -> tuple[GridModel, np.ndarray]:
    """Bin a standard normal (null) and its epsilon-shift (alternative) onto
    {1..m}; the outer bins absorb the tails so both pmfs sum to one exactly
    and dominance is inherited from the continuous laws.  Returns the model
    and the m - 1 internal bin edges."""
    if m < 2:
        raise ValueError("m must be >= 2")
    epsilon = float(epsilon)
    if hi is None:
        hi = 2.5 + epsilon
    edges = np.linspace(lo, hi, m - 1)

    def binned(shift: float) -> tuple[float, ...]:
        cdf = ndtr(edges - shift)
        pmf = np.empty(m)
        pmf[0] = cdf[0]
        pmf[1:-1] = np.diff(cdf)
        pmf[-1] = 1.0 - cdf[-1]
        return tuple(pmf)

    return GridModel(m=m, null_pmf=binned(0.0), alt_pmf=binned(epsilon)), edges


def discretize_threshold(edges: np.ndarray, t: float) -> int:
    """Map a continuous threshold to the rung whose boundary edge is the
    closest edge at or below t (clipped into {1..m})."""
    edges = np.asarray(edges, dtype=float)
    q = int(np.searchsorted(edges, t, side="right")) - 1
    idx = q + 2
    m = edges.shape[0] + 1
    return max(1, min(idx, m))


# --- fixture documents --------------------------------------------------------


def grid_model_to_doc(model: GridModel) -> dict:
    return {
        "schema_version": 1,
        "kind": "grid-model",
        "m": model.m,
        "null_pmf": list(model.null_pmf),
        "alt_pmf": list(model.alt_pmf),
    }


def grid_model_from_doc(doc: dict) -> GridModel:
    if not isinstance(doc, dict) or doc.get("kind") != "grid-model":
        raise ValueError("not a grid-model document")
    if doc.get("schema_version") != 1:
        raise ValueError("unsupported schema_version")
    return GridModel(
        m=int(doc["m"]),
        null_pmf=tuple(float(p) for p in doc["null_pmf"]),
        alt_pmf=tuple(float(p) for p in doc["alt_pmf"]),
    )
