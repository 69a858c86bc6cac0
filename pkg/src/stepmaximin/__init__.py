"""Exact critical constants and maximin power analysis for stepwise
simultaneous testing (stepdown, stepup, and their two-hypothesis optimal
variants) under exchangeable one-sided models."""
from __future__ import annotations

from .models import (
    Family,
    ModelSpec,
    SampleMatrix,
    ThetaVector,
    UnsupportedShiftError,
    marginal_cdf,
    marginal_quantile,
    max_cdf_null,
    null_orthant_survival,
    null_rect_cdf,
    sample,
)
from .orderstat import joint_orderstat_cdf, joint_orderstat_survival
from .constants import (
    BISECT_WIDTH,
    ConstantLadder,
    LadderKind,
    NonMonotoneLadderError,
    PairConstants,
    RESIDUAL_TOL,
    clear_constant_cache,
    solve_pair_constants,
    solve_pair_stepdown,
    solve_pair_stepup,
    solve_stepdown,
    solve_stepup,
)
from .procedures import (
    Decision,
    MonotoneReport,
    PairRegion,
    PairVariant,
    Procedure,
    TraceStep,
    Verdict,
    check_monotone,
    holm_bonferroni,
    holm_procedure,
    pair_classify,
    stepdown_decide,
    stepdown_procedure,
    stepup_decide,
    stepup_procedure,
)
from .power import (
    CriterionKind,
    CriterionResult,
    least_favorable_theta,
    null_least_favorable_theta,
    pair_criterion_values,
    stepdown_maximin_power,
    stepup_maximin_power,
)
from .simulation import (
    ComparisonTable,
    SimulationReport,
    compare_procedures,
    estimate_fwer,
    estimate_reject_at_least,
    rejection_masks,
)
from .gridoracle import (
    BruteForceResult,
    GridConfig,
    GridCriterion,
    GridModel,
    GridRegion,
    ThresholdRule,
    brute_force_maximin,
    exact_fwer_grid,
    grid_region_prob,
    slice_intersection,
    slice_union,
)
from .verify import CheckResult, format_results, run_verification

# figure rendering lives in stepmaximin.report; importing it here would pull
# matplotlib into every library consumer
__version__ = "0.1.0"
