"""Monte Carlo harness for familywise error and power estimates.

Estimates come with a 3-sigma binomial half-width so that assertions built
on them have a known, very small false-alarm rate.  Sampling is fully
deterministic in (model, theta, reps, seed) and independent of how the
replicate range might be partitioned across workers (see models.sample).
Comparisons between procedures reuse one sample matrix per parameter point,
so paired contrasts are computed under common random numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .models import ModelSpec, ThetaVector, sample
from .procedures import Procedure

__all__ = [
    "SimulationReport",
    "ComparisonRow",
    "ComparisonTable",
    "estimate_fwer",
    "estimate_reject_at_least",
    "rejection_masks",
    "compare_procedures",
    "MIN_REPS",
]

MIN_REPS = 10_000


def binomial_half_width(estimate: float, reps: int) -> float:
    return 3.0 * math.sqrt(max(estimate * (1.0 - estimate), 0.0) / reps)


@dataclass(frozen=True)
class SimulationReport:
    estimate: float
    half_width: float
    reps: int
    seed: int
    target: dict = field(compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.estimate <= 1.0:
            raise ValueError("estimate must be a probability")


def _coerce_theta(model: ModelSpec, theta: ThetaVector | Sequence[float]) -> ThetaVector:
    return theta if isinstance(theta, ThetaVector) else ThetaVector.of(theta)


def _check_reps(reps: int) -> None:
    if reps < MIN_REPS:
        raise ValueError(f"reps must be >= {MIN_REPS} for a meaningful half-width")


def _true_null_mask(theta: ThetaVector) -> np.ndarray:
    return theta.as_array() <= 0.0


def _false_mask(theta: ThetaVector) -> np.ndarray:
    return theta.as_array() > 0.0


def estimate_fwer(
    model: ModelSpec,
    theta: ThetaVector | Sequence[float],
    procedure: Procedure,
    reps: int,
    seed: int,
) -> SimulationReport:
    """P(reject at least one component with theta_i <= 0) at theta."""
    tv = _coerce_theta(model, theta)
    _check_reps(reps)
    true_null = _true_null_mask(tv)
    if not true_null.any():
        raise ValueError("theta has no true null components; FWER is undefined")
    X = sample(model, tv, reps, seed).values
    hits = (procedure.reject_mask(X) & true_null[None, :]).any(axis=1)
    estimate = float(hits.mean())
    return SimulationReport(
        estimate=estimate,
        half_width=binomial_half_width(estimate, reps),
        reps=reps,
        seed=seed,
        target={
            "metric": "fwer",
            "procedure": procedure.name,
            "theta": list(tv.values),
            "model": {"family": model.family.value, "rho": model.rho, "k": model.k},
        },
    )


def estimate_reject_at_least(
    model: ModelSpec,
    theta: ThetaVector | Sequence[float],
    procedure: Procedure,
    j: int,
    reps: int,
    seed: int,
    false_only: bool = False,
) -> SimulationReport:
    """P(at least j rejections) at theta; with false_only, only rejections of
    components with theta_i > 0 are counted."""
    tv = _coerce_theta(model, theta)
    _check_reps(reps)
    if not 0 <= j <= model.k:
        raise ValueError(f"need 0 <= j <= k={model.k}")
    X = sample(model, tv, reps, seed).values
    mask = procedure.reject_mask(X)
    if false_only:
        mask = mask & _false_mask(tv)[None, :]
    estimate = float((mask.sum(axis=1) >= j).mean())
    return SimulationReport(
        estimate=estimate,
        half_width=binomial_half_width(estimate, reps),
        reps=reps,
        seed=seed,
        target={
            "metric": "reject-ge",
            "j": j,
            "false_only": false_only,
            "procedure": procedure.name,
            "theta": list(tv.values),
            "model": {"family": model.family.value, "rho": model.rho, "k": model.k},
        },
    )


def rejection_masks(
    model: ModelSpec,
    theta: ThetaVector | Sequence[float],
    procedures: Sequence[Procedure],
    reps: int,
    seed: int,
) -> dict[str, np.ndarray]:
    """Per-procedure rejection masks on one shared sample matrix (common
    random numbers); the building block for per-replicate comparisons."""
    tv = _coerce_theta(model, theta)
    _check_reps(reps)
    X = sample(model, tv, reps, seed).values
    return {proc.name: proc.reject_mask(X) for proc in procedures}


@dataclass(frozen=True)
class ComparisonRow:
    theta: tuple[float, ...]
    metrics: dict = field(compare=False, default_factory=dict)


@dataclass(frozen=True)
class ComparisonTable:
    model: ModelSpec
    alpha: float
    reps: int
    seed: int
    procedures: tuple[str, ...]
    rows: tuple[ComparisonRow, ...]

    def to_records(self) -> list[dict]:
        """Flat one-row-per-(theta, procedure) records for delimited output."""
        records = []
        for row in self.rows:
            for name in self.procedures:
                m = row.metrics[name]
                rec = {
                    "theta": ";".join(repr(v) for v in row.theta),
                    "procedure": name,
                    "fwer": m["fwer"],
                    "mean_rejections": m["mean_rejections"],
                }
                for j, p in enumerate(m["reject_at_least"], start=1):
                    rec[f"reject_ge_{j}"] = p
                records.append(rec)
        return records


def compare_procedures(
    model: ModelSpec,
    theta_grid: Sequence[ThetaVector | Sequence[float]],
    procedures: Sequence[Procedure],
    alpha: float,
    reps: int,
    seed: int,
) -> ComparisonTable:
    """Metrics for every procedure at every parameter point, all procedures
    sharing the same draws at each point.

    FWER entries are NaN at points with no true null component (the metric
    is undefined there, not zero).
    """
    _check_reps(reps)
    names = [p.name for p in procedures]
    if len(set(names)) != len(names):
        raise ValueError("procedure names must be unique")
    rows = []
    for theta in theta_grid:
        tv = _coerce_theta(model, theta)
        X = sample(model, tv, reps, seed).values
        true_null = _true_null_mask(tv)
        metrics: dict[str, dict] = {}
        for proc in procedures:
            mask = proc.reject_mask(X)
            counts = mask.sum(axis=1)
            if true_null.any():
                fwer = float((mask & true_null[None, :]).any(axis=1).mean())
            else:
                fwer = math.nan
            metrics[proc.name] = {
                "fwer": fwer,
                "mean_rejections": float(counts.mean()),
                "reject_at_least": [
                    float((counts >= j).mean()) for j in range(1, model.k + 1)
                ],
            }
        rows.append(ComparisonRow(theta=tv.values, metrics=metrics))
    return ComparisonTable(
        model=model,
        alpha=float(alpha),
        reps=reps,
        seed=seed,
        procedures=tuple(names),
        rows=tuple(rows),
    )
