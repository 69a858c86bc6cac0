"""Report rendering: comparison tables as CSV plus matplotlib figures
written alongside them.

Figures are built directly on matplotlib Figure objects so no interactive
backend is ever touched; everything works in headless environments.
"""

from __future__ import annotations

import csv
from pathlib import Path
from collections.abc import Sequence

import numpy as np
from matplotlib.figure import Figure

from .constants import solve_stepdown, solve_stepup
from .models import ModelSpec
from .power import stepdown_maximin_power, stepup_maximin_power
from .procedures import holm_procedure, stepdown_procedure, stepup_procedure
from .simulation import ComparisonTable, compare_procedures

__all__ = [
    "comparison_figure",
    "default_theta_grid",
    "power_curve_figure",
    "render_report",
    "write_comparison_csv",
]


def write_comparison_csv(table: ComparisonTable, path: str | Path) -> Path:
    path = Path(path)
    records = table.to_records()
    if not records:
        raise ValueError("comparison table has no rows")
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(records[0].keys()))
        writer.writeheader()
        writer.writerows(records)
    return path


def power_curve_figure(
    model: ModelSpec,
    alpha: float,
    epsilons: Sequence[float],
    js: Sequence[int] | None = None,
) -> Figure:
    """Worst-case power of both walks against the shared-shift magnitude,
    one curve pair per required rejection count j."""
    if not model.supports_shift:
        raise ValueError(f"family {model.family.value} has no shift parameter")
    js = list(js) if js is not None else list(range(1, model.k + 1))
    down = solve_stepdown(model, alpha)
    up = solve_stepup(model, alpha)
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.subplots()
    colors = [f"C{i}" for i in range(len(js))]
    for color, j in zip(colors, js):
        down_vals = [
            stepdown_maximin_power(model, alpha, j, e, down).value for e in epsilons
        ]
        up_vals = [
            stepup_maximin_power(model, alpha, j, e, up).value for e in epsilons
        ]
        ax.plot(epsilons, down_vals, color=color, label=f"stepdown, j={j}")
        ax.plot(epsilons, up_vals, color=color, linestyle="--", label=f"stepup, j={j}")
    ax.set_xlabel("shift magnitude")
    ax.set_ylabel("worst-case P(reject >= j false)")
    ax.set_title(
        f"{model.family.value} k={model.k} alpha={alpha:g}: maximin power"
    )
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def comparison_figure(table: ComparisonTable) -> Figure:
    """Two panels over the parameter grid: mean rejections per procedure and
    familywise error with the nominal level marked."""
    fig = Figure(figsize=(8.0, 4.5))
    ax_rej, ax_fwer = fig.subplots(1, 2)
    xs = np.arange(len(table.rows))
    labels = [
        ",".join("%g" % v for v in row.theta) for row in table.rows
    ]
    for name in table.procedures:
        means = [row.metrics[name]["mean_rejections"] for row in table.rows]
        fwers = [row.metrics[name]["fwer"] for row in table.rows]
        ax_rej.plot(xs, means, marker="o", label=name)
        ax_fwer.plot(xs, fwers, marker="o", label=name)
    ax_fwer.axhline(table.alpha, color="k", linestyle=":", linewidth=1,
                    label=f"alpha={table.alpha:g}")
    for ax, title in ((ax_rej, "mean rejections"), (ax_fwer, "FWER")):
        ax.set_xticks(xs)
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
        ax.set_xlabel("theta")
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
    fig.suptitle(
        f"{table.model.family.value} k={table.model.k}, "
        f"{table.reps} replicates, seed {table.seed}"
    )
    fig.tight_layout()
    return fig


def default_theta_grid(model: ModelSpec) -> list[list[float]]:
    """A small grid exercising the null, shared shifts, and mixed points.
    Families without a shift parameter get the null point only."""
    k = model.k
    null = [0.0] * k
    if not model.supports_shift:
        return [null]
    grid = [null]
    for shift in (0.5, 1.0, 1.5, 2.0):
        grid.append([shift] * k)
    half = [1.0] * (k // 2) + [0.0] * (k - k // 2)
    if 0 < k // 2 < k:
        grid.append(half)
    grid.append([2.0] + [0.0] * (k - 1))
    return grid


def render_report(
    model: ModelSpec,
    alpha: float,
    out_dir: str | Path,
    reps: int,
    seed: int,
    theta_grid: Sequence[Sequence[float]] | None = None,
    epsilons: Sequence[float] | None = None,
) -> dict[str, Path]:
    """Simulate the three procedures over a parameter grid and write the
    delimited table plus rendered figures into out_dir.

    Returns the mapping of artifact name to written path.  The power-curve
    figure is skipped for families without a shift parameter.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = (
        [list(t) for t in theta_grid]
        if theta_grid is not None
        else default_theta_grid(model)
    )
    procedures = [
        stepdown_procedure(solve_stepdown(model, alpha)),
        stepup_procedure(solve_stepup(model, alpha)),
        holm_procedure(model, alpha),
    ]
    table = compare_procedures(model, grid, procedures, alpha, reps, seed)
    paths = {
        "comparison_csv": write_comparison_csv(table, out / "comparison.csv")
    }
    fig = comparison_figure(table)
    fig.savefig(out / "comparison.png", dpi=150)
    paths["comparison_png"] = out / "comparison.png"
    if model.supports_shift:
        eps = (
            list(epsilons)
            if epsilons is not None
            else [round(x, 3) for x in np.linspace(0.0, 3.0, 25)]
        )
        # zero shift is a valid curve point (power equals the null rejection rate)
        pfig = power_curve_figure(model, alpha, eps)
        pfig.savefig(out / "power_curves.png", dpi=150)
        paths["power_curves_png"] = out / "power_curves.png"
    return paths
