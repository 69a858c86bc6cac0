"""Self-verification suite: named checks over the analytic identities and
simulation cross-checks, runnable at two depths.

The fast level covers closed forms, ladder identities, pair orderings and
short simulations.  The slow level re-runs the simulation checks at full
replication counts and adds the grid-oracle and slice-identity checks.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass

import numpy as np

from .constants import (
    ConstantLadder,
    LadderKind,
    RESIDUAL_TOL,
    solve_pair_constants,
    solve_stepdown,
    solve_stepup,
)
from .gridoracle import (
    GridCriterion,
    GridModel,
    brute_force_maximin,
    discretize_threshold,
    discretized_normal_grid_model,
    grid_region_prob,
    monotone_enumeration_best,
    random_monotone_region,
    slice_union,
)
from .models import ModelSpec, sample
from .power import (
    least_favorable_theta,
    null_least_favorable_theta,
    pair_criterion_values,
    stepdown_maximin_power,
    stepup_maximin_power,
)
from .procedures import (
    PairVariant,
    check_monotone,
    holm_reject_mask,
    statistic_to_p,
    stepdown_decide,
    stepdown_procedure,
    stepdown_reject_mask,
    stepup_decide,
    stepup_procedure,
    stepup_reject_mask,
)
from .simulation import binomial_half_width, estimate_fwer, rejection_masks

__all__ = [
    "CheckResult",
    "available_checks",
    "format_results",
    "run_verification",
]

# Test seam: replaces every ladder a check solves, letting the suite prove
# that a corrupted constant is caught.  Production callers leave it None.
LadderTransform = Callable[[ConstantLadder], ConstantLadder]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float


def _ladder(
    kind: LadderKind,
    model: ModelSpec,
    alpha: float,
    transform: LadderTransform | None,
) -> ConstantLadder:
    solve = solve_stepdown if kind is LadderKind.STEPDOWN else solve_stepup
    ladder = solve(model, alpha)
    return ladder if transform is None else transform(ladder)


def _check_uniform_closed_forms(seed: int, transform: LadderTransform | None):
    alpha = 0.05
    model = ModelSpec.iid_uniform_null(4)
    down = _ladder(LadderKind.STEPDOWN, model, alpha, transform)
    up = _ladder(LadderKind.STEPUP, model, alpha, transform)
    worst = 0.0
    for j, value in enumerate(down.values, start=1):
        worst = max(worst, abs(value - (1 - alpha) ** (1 / j)))
    worst = max(worst, abs(up.values[1] - 0.975))
    worst = max(worst, max(abs(r) for r in down.residuals))
    worst = max(worst, max(abs(r) for r in up.residuals))
    return worst <= 1e-9, f"worst deviation {worst:.2e}"


def _check_ladder_identities(seed: int, transform: LadderTransform | None):
    alpha = 0.05
    details = []
    ok = True
    for model in (
        ModelSpec.iid_normal(8),
        ModelSpec.equicorr_normal(8, 0.25),
        ModelSpec.equicorr_normal(8, 0.5),
    ):
        down = _ladder(LadderKind.STEPDOWN, model, alpha, transform)
        up = _ladder(LadderKind.STEPUP, model, alpha, transform)
        first_gap = abs(down.values[0] - up.values[0])
        strict = all(down.values[j] < up.values[j] for j in range(1, 8))
        ok = ok and first_gap <= 1e-10 and strict
        details.append(f"{model.family.value}: first-rung gap {first_gap:.1e}")
    # ladders are k-independent, so the k-1 ladder is a prefix of the k ladder
    big = _ladder(LadderKind.STEPDOWN, ModelSpec.iid_normal(6), alpha, transform)
    small = _ladder(LadderKind.STEPDOWN, ModelSpec.iid_normal(5), alpha, transform)
    shared = all(big.values[j] == small.values[j] for j in range(5))
    ok = ok and shared
    return ok, "; ".join(details) + f"; prefix sharing {shared}"


def _check_pair_ordering(seed: int, transform: LadderTransform | None):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(4):
        rho = float(rng.uniform(0.0, 0.6))
        alpha = float(rng.uniform(0.02, 0.15))
        eps = tuple(rng.uniform(0.3, 2.0, size=2))
        model = (
            ModelSpec.iid_normal(2)
            if rho < 0.05
            else ModelSpec.equicorr_normal(2, rho)
        )
        pc = solve_pair_constants(model, alpha, eps)  # raises if chain breaks
        worst = max(worst, max(abs(v) for v in pc.residuals.values()))
    return worst <= RESIDUAL_TOL, f"worst residual {worst:.2e}"


def _check_pair_tradeoff(seed: int, transform: LadderTransform | None):
    model = ModelSpec.iid_normal(2)
    pc = solve_pair_constants(model, 0.05, (1.0, 1.0))
    any_down, both_down = pair_criterion_values(model, pc, PairVariant.STEPDOWN_OPTIMAL)
    any_up, both_up = pair_criterion_values(model, pc, PairVariant.STEPUP_OPTIMAL)
    ok = any_down.value > any_up.value and both_up.value > both_down.value
    return ok, (
        f"reject-any {any_down.value:.5f} vs {any_up.value:.5f}, "
        f"reject-both {both_down.value:.5f} vs {both_up.value:.5f}"
    )


def _fwer_sweep(reps: int, seed: int, transform: LadderTransform | None):
    alpha = 0.05
    worst = 0.0
    lines = []
    for k in (3, 5):
        model = ModelSpec.iid_normal(k)
        down = stepdown_procedure(_ladder(LadderKind.STEPDOWN, model, alpha, transform))
        up = stepup_procedure(_ladder(LadderKind.STEPUP, model, alpha, transform))
        for p in (1, k):
            theta = null_least_favorable_theta(k, k - p + 1)
            for proc in (down, up):
                rep = estimate_fwer(model, theta, proc, reps, seed)
                gap = abs(rep.estimate - alpha)
                worst = max(worst, gap - rep.half_width)
                lines.append(f"k={k} p={p} {proc.name} {rep.estimate:.4f}")
    return worst <= 0.0, f"worst overshoot {worst:.2e}; " + ", ".join(lines[:4])


def _check_fwer_fast(seed: int, transform: LadderTransform | None):
    return _fwer_sweep(100_000, seed, transform)


def _check_fwer_slow(seed: int, transform: LadderTransform | None):
    return _fwer_sweep(1_000_000, seed, transform)


def _power_sweep(reps: int, seed: int, transform: LadderTransform | None):
    alpha = 0.05
    worst = 0.0
    for k, j, eps in ((3, 2, 1.0), (5, 3, 2.0), (4, 4, 0.5)):
        model = ModelSpec.iid_normal(k)
        down_ladder = _ladder(LadderKind.STEPDOWN, model, alpha, transform)
        up_ladder = _ladder(LadderKind.STEPUP, model, alpha, transform)
        beta_down = stepdown_maximin_power(model, alpha, j, eps, down_ladder).value
        beta_up = stepup_maximin_power(model, alpha, j, eps, up_ladder).value
        theta = least_favorable_theta(k, j, eps)
        masks = rejection_masks(
            model,
            theta,
            [stepdown_procedure(down_ladder), stepup_procedure(up_ladder)],
            reps,
            seed,
        )
        for name, analytic in (("stepdown", beta_down), ("stepup", beta_up)):
            estimate = float((masks[name].sum(axis=1) >= j).mean())
            hw = binomial_half_width(estimate, reps)
            worst = max(worst, abs(estimate - analytic) - hw)
    return worst <= 0.0, f"worst overshoot beyond half-width {worst:.2e}"


def _check_power_fast(seed: int, transform: LadderTransform | None):
    return _power_sweep(100_000, seed, transform)


def _check_power_slow(seed: int, transform: LadderTransform | None):
    return _power_sweep(1_000_000, seed, transform)


def _check_monotone_rules(seed: int, transform: LadderTransform | None):
    model = ModelSpec.iid_normal(4)
    down = _ladder(LadderKind.STEPDOWN, model, 0.05, transform)
    up = _ladder(LadderKind.STEPUP, model, 0.05, transform)
    x = [2.1, 1.7, -0.3, 0.4]
    total = 0
    for decide in (
        lambda v: stepdown_decide(v, down),
        lambda v: stepup_decide(v, up),
    ):
        report = check_monotone(decide, x, trials=10_000, seed=seed)
        total += len(report.violations)
    return total == 0, f"{total} violations in 2x10000 trials"


def _rekind(ladder: ConstantLadder, kind: LadderKind) -> ConstantLadder:
    """Same rung values viewed as the other walk's ladder (for same-threshold
    structural comparisons)."""
    return ConstantLadder(
        kind=kind,
        alpha=ladder.alpha,
        model=ladder.model,
        values=ladder.values,
        residuals=ladder.residuals,
    )


def _check_dominance(seed: int, transform: LadderTransform | None):
    alpha = 0.05
    model = ModelSpec.iid_normal(4)
    down_ladder = _ladder(LadderKind.STEPDOWN, model, alpha, transform)
    up_ladder = _ladder(LadderKind.STEPUP, model, alpha, transform)
    X = sample(model, [0.5, 0.0, 1.0, -0.5], 100_000, seed).values
    exact = stepdown_reject_mask(X, down_ladder)
    holm = holm_reject_mask(statistic_to_p(model, X), alpha)
    holm_subset = bool((holm <= exact).all())
    same_ladder = True
    for ladder in (down_ladder, up_ladder):
        down_mask = stepdown_reject_mask(X, _rekind(ladder, LadderKind.STEPDOWN))
        up_mask = stepup_reject_mask(X, _rekind(ladder, LadderKind.STEPUP))
        same_ladder = same_ladder and bool((down_mask <= up_mask).all())
    ok = holm_subset and same_ladder
    return ok, f"holm-subset {holm_subset}, same-ladder stepup-superset {same_ladder}"


def _check_sentinels(seed: int, transform: LadderTransform | None):
    model = ModelSpec.iid_normal(3)
    down = _ladder(LadderKind.STEPDOWN, model, 0.05, transform)
    up = _ladder(LadderKind.STEPUP, model, 0.05, transform)
    ok = True
    for decide in (
        lambda v: stepdown_decide(v, down),
        lambda v: stepup_decide(v, up),
    ):
        d = decide([math.inf, 0.0, -math.inf])
        ok = ok and 0 in d.rejected and 2 not in d.rejected
    return ok, "plus-infinity rejected, minus-infinity accepted"


def _check_batch_agreement(seed: int, transform: LadderTransform | None):
    model = ModelSpec.iid_normal(5)
    down = _ladder(LadderKind.STEPDOWN, model, 0.05, transform)
    up = _ladder(LadderKind.STEPUP, model, 0.05, transform)
    rng = np.random.default_rng(seed)
    X = rng.normal(1.0, 1.5, size=(400, 5))
    X[::17, 0] = np.inf
    X[::23, 1] = -np.inf
    down_mask = stepdown_reject_mask(X, down)
    up_mask = stepup_reject_mask(X, up)
    for i, row in enumerate(X):
        d = stepdown_decide(row.tolist(), down)
        u = stepup_decide(row.tolist(), up)
        if set(np.flatnonzero(down_mask[i])) != d.rejected:
            return False, f"stepdown scalar/batch split at row {i}"
        if set(np.flatnonzero(up_mask[i])) != u.rejected:
            return False, f"stepup scalar/batch split at row {i}"
    return True, "scalar and vectorized walks agree on 400 rows"


def _check_grid_oracle(seed: int, transform: LadderTransform | None):
    alpha = 0.1
    ok = True
    details = []
    for eps in (0.8, 1.0, 1.3):
        grid, edges = discretized_normal_grid_model(8, eps)
        pc = solve_pair_constants(ModelSpec.iid_normal(2), alpha, (eps, eps))
        cells = {
            "a": discretize_threshold(edges, pc.high_stepdown[0]),
            "b": discretize_threshold(edges, pc.marginal[0]),
            "t": discretize_threshold(edges, pc.high_stepup[0]),
        }
        for criterion, lo, hi in (
            (GridCriterion.REJECT_ANY, cells["b"], cells["a"]),
            (GridCriterion.REJECT_BOTH, cells["b"], cells["t"]),
        ):
            best = brute_force_maximin(grid, alpha, criterion)
            rule = best.rules[0]
            near = all(
                min(abs(r - lo), abs(r - hi)) <= 1
                for r in (*rule.a, *rule.b)
            )
            ok = ok and near
            details.append(f"eps={eps} {criterion.value} rule {rule.a}/{rule.b}")
    small = GridModel(m=3, null_pmf=(0.6, 0.3, 0.1), alt_pmf=(0.2, 0.3, 0.5))
    for criterion in GridCriterion:
        family_best = brute_force_maximin(small, 0.3, criterion).value
        full_best = monotone_enumeration_best(small, 0.3, criterion)
        ok = ok and abs(family_best - full_best) <= 1e-12
    return ok, "; ".join(details[:3]) + "; 3x3 enumeration matches"


def _check_slice_identities(seed: int, transform: LadderTransform | None):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        region = random_monotone_region((4, 4, 4), n_orthants=3, rng=rng)
        pmfs = rng.dirichlet(np.ones(4), size=3)
        # last coordinate at its top point mass == union over last-axis slices
        top = np.zeros(4)
        top[-1] = 1.0
        lifted = grid_region_prob(region, [pmfs[0], pmfs[1], top])
        collapsed = grid_region_prob(
            slice_union(region, axis=2), [pmfs[0], pmfs[1]]
        )
        worst = max(worst, abs(lifted - collapsed))
    return worst <= 1e-12, f"worst gap {worst:.2e} over 100 regions"


_FAST_CHECKS: tuple[tuple[str, Callable], ...] = (
    ("uniform-closed-forms", _check_uniform_closed_forms),
    ("ladder-identities", _check_ladder_identities),
    ("pair-constant-ordering", _check_pair_ordering),
    ("pair-criterion-tradeoff", _check_pair_tradeoff),
    ("fwer-least-favorable-fast", _check_fwer_fast),
    ("power-formula-fast", _check_power_fast),
    ("monotone-rule-trials", _check_monotone_rules),
    ("rejection-dominance", _check_dominance),
    ("sentinel-verdicts", _check_sentinels),
    ("scalar-batch-agreement", _check_batch_agreement),
)

_SLOW_CHECKS: tuple[tuple[str, Callable], ...] = (
    ("fwer-least-favorable-slow", _check_fwer_slow),
    ("power-formula-slow", _check_power_slow),
    ("grid-maximin-oracle", _check_grid_oracle),
    ("slice-identities", _check_slice_identities),
)


def available_checks(level: str) -> tuple[str, ...]:
    if level not in ("fast", "slow"):
        raise ValueError("level must be 'fast' or 'slow'")
    checks = _FAST_CHECKS + (_SLOW_CHECKS if level == "slow" else ())
    return tuple(name for name, _ in checks)


def run_verification(
    level: str = "fast",
    seed: int = 20240801,
    ladder_transform: LadderTransform | None = None,
) -> list[CheckResult]:
    """Run every check at the requested level and report per-check outcomes.

    A failing check never raises; it comes back as a CheckResult with
    passed=False so the caller can render the full list.
    """
    if level not in ("fast", "slow"):
        raise ValueError("level must be 'fast' or 'slow'")
    checks: Iterable = _FAST_CHECKS + (_SLOW_CHECKS if level == "slow" else ())
    results = []
    for name, fn in checks:
        start = time.perf_counter()
        try:
            passed, detail = fn(seed, ladder_transform)
        except Exception as exc:  # noqa: BLE001 - surfaced as a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(
            CheckResult(
                name=name,
                passed=bool(passed),
                detail=detail,
                elapsed=time.perf_counter() - start,
            )
        )
    return results


def format_results(results: Iterable[CheckResult]) -> str:
    lines = []
    n_pass = 0
    total = 0
    for r in results:
        total += 1
        n_pass += r.passed
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status} {r.name} ({r.elapsed:.2f}s): {r.detail}")
    lines.append(f"{n_pass}/{total} checks passed")
    return "\n".join(lines)
