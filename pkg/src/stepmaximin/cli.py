"""Command line surface.

Subcommands: constants, decide, simulate, verify, report.  CSV goes in,
JSON comes out; the report subcommand additionally renders figures.

Exit codes: 0 success, 1 verification or solver failure, 2 usage or
configuration error, 3 malformed input data.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from pathlib import Path

import click
import numpy as np
from scipy.special import ndtri

from . import __version__
from .constants import (
    BISECT_WIDTH,
    ConstantLadder,
    LadderKind,
    NonMonotoneLadderError,
    RESIDUAL_TOL,
    solve_stepdown,
    solve_stepup,
)
from .models import Family, ModelSpec, UnsupportedShiftError
from .power import least_favorable_theta
from .procedures import (
    Decision,
    holm_bonferroni,
    holm_procedure,
    statistic_to_p,
    stepdown_decide,
    stepdown_procedure,
    stepup_decide,
    stepup_procedure,
)
from .report import render_report
from .simulation import estimate_fwer, estimate_reject_at_least
from .verify import format_results, run_verification

SCHEMA_VERSION = 1

CACHE_ENV_VAR = "STEPMAXIMIN_CACHE_DIR"


class DataFileError(click.ClickException):
    """Malformed input data (bad CSV, invalid values)."""

    exit_code = 3


class SolverFailure(click.ClickException):
    """Constant solving failed (for example a non-monotone ladder)."""

    exit_code = 1


def _build_model(family: str, rho: float, k: int) -> ModelSpec:
    try:
        fam = Family(family)
        if fam is Family.EQUICORR_NORMAL:
            return ModelSpec.equicorr_normal(k, rho)
        if rho != 0.0:
            raise ValueError(f"rho only applies to {Family.EQUICORR_NORMAL.value}")
        if fam is Family.IID_NORMAL:
            return ModelSpec.iid_normal(k)
        return ModelSpec.iid_uniform_null(k)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def _model_doc(model: ModelSpec) -> dict:
    return {"family": model.family.value, "rho": model.rho, "k": model.k}


def _emit(doc: dict, output) -> None:
    output.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _parse_theta(text: str, k: int | None) -> list[float]:
    """Either a comma list with inf/-inf tokens, or 'eps:E@J' placing E on J
    coordinates and -inf on the rest (needs an explicit k)."""
    text = text.strip()
    if text.startswith("eps:"):
        body = text[len("eps:"):]
        if "@" not in body:
            raise click.UsageError("shorthand form is eps:EPSILON@COUNT")
        eps_part, count_part = body.split("@", 1)
        try:
            eps = float(eps_part)
            j = int(count_part)
        except ValueError as exc:
            raise click.UsageError(f"cannot parse theta shorthand {text!r}") from exc
        if k is None:
            raise click.UsageError("theta shorthand eps:E@J requires --k")
        if not 1 <= j <= k:
            raise click.UsageError(f"shorthand count must lie in 1..{k}")
        if not eps > 0 or math.isinf(eps):
            raise click.UsageError("shorthand epsilon must be finite and > 0")
        return list(least_favorable_theta(k, j, eps).values)
    values = []
    for token in text.split(","):
        token = token.strip()
        try:
            values.append(float(token))
        except ValueError as exc:
            raise click.UsageError(f"cannot parse theta component {token!r}") from exc
        if math.isnan(values[-1]):
            raise click.UsageError("theta components must not be NaN")
    if k is not None and len(values) != k:
        raise click.UsageError(f"theta has {len(values)} components, expected k={k}")
    return values


def _solve_ladder(model: ModelSpec, alpha: float, kind: LadderKind) -> ConstantLadder:
    try:
        if kind is LadderKind.STEPDOWN:
            return solve_stepdown(model, alpha)
        return solve_stepup(model, alpha)
    except NonMonotoneLadderError as exc:
        raise SolverFailure(str(exc)) from exc
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


# --- constants caching --------------------------------------------------------


def _cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "stepmaximin"


def _constants_doc(ladder: ConstantLadder) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": ladder.kind.value,
        "alpha": ladder.alpha,
        "model": _model_doc(ladder.model),
        "values": list(ladder.values),
        "residuals": list(ladder.residuals),
        "solver_metadata": {
            "bisect_width": BISECT_WIDTH,
            "residual_tol": RESIDUAL_TOL,
        },
    }


def _cache_key(model: ModelSpec, alpha: float, kind: LadderKind) -> str:
    return (
        f"constants-{kind.value}-{model.family.value}-rho{model.rho!r}"
        f"-k{model.k}-alpha{alpha!r}-tol{RESIDUAL_TOL!r}-v{SCHEMA_VERSION}.json"
    )


def _cache_matches(doc: dict, model: ModelSpec, alpha: float, kind: LadderKind) -> bool:
    try:
        return (
            doc["schema_version"] == SCHEMA_VERSION
            and doc["kind"] == kind.value
            and doc["alpha"] == alpha
            and doc["model"] == _model_doc(model)
            and doc["solver_metadata"]["residual_tol"] == RESIDUAL_TOL
            and doc["solver_metadata"]["bisect_width"] == BISECT_WIDTH
        )
    except (KeyError, TypeError):
        return False


def _constants_document(
    model: ModelSpec, alpha: float, kind: LadderKind, use_cache: bool
) -> dict:
    cache_path = _cache_dir() / _cache_key(model, alpha, kind)
    if use_cache and cache_path.is_file():
        try:
            doc = json.loads(cache_path.read_text())
        except (OSError, json.JSONDecodeError):
            doc = None
        if doc is not None and _cache_matches(doc, model, alpha, kind):
            return doc
    doc = _constants_doc(_solve_ladder(model, alpha, kind))
    if use_cache:
        try:
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            cache_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        except OSError:
            pass  # caching is best-effort; the answer is already in hand
    return doc


# --- command group ------------------------------------------------------------


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Exact stepdown/stepup multiple testing: constants, decisions,
    simulations, verification and reports."""


_family_option = click.option(
    "--family",
    type=click.Choice([f.value for f in Family]),
    default=Family.IID_NORMAL.value,
    show_default=True,
    help="Null model family.",
)
_rho_option = click.option(
    "--rho",
    type=float,
    default=0.0,
    show_default=True,
    help="Common correlation (equicorr-normal only).",
)
_alpha_option = click.option(
    "--alpha",
    type=float,
    default=0.05,
    show_default=True,
    help="Familywise error level.",
)


@main.command()
@_family_option
@_rho_option
@click.option("--k", type=int, required=True, help="Number of hypotheses.")
@_alpha_option
@click.option(
    "--kind",
    type=click.Choice([k.value for k in LadderKind]),
    default=LadderKind.STEPDOWN.value,
    show_default=True,
)
@click.option("--no-cache", is_flag=True, help="Skip the on-disk constants cache.")
@click.option("-o", "--output", type=click.File("w"), default="-")
def constants(family, rho, k, alpha, kind, no_cache, output):
    """Solve the critical-constant ladder and emit it as JSON."""
    model = _build_model(family, rho, k)
    doc = _constants_document(model, alpha, LadderKind(kind), use_cache=not no_cache)
    _emit(doc, output)


def _read_input_rows(fh) -> list[tuple[str, float]]:
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataFileError("input file is empty")
        fields = [name.strip() for name in reader.fieldnames]
        if fields[:2] != ["hypothesis_id", "value"]:
            raise DataFileError(
                "input must be a CSV with header columns hypothesis_id,value"
            )
        rows = []
        seen = set()
        for line_no, row in enumerate(reader, start=2):
            ident = (row.get("hypothesis_id") or "").strip()
            raw = (row.get("value") or "").strip()
            if not ident:
                raise DataFileError(f"line {line_no}: missing hypothesis_id")
            if ident in seen:
                raise DataFileError(f"line {line_no}: duplicate hypothesis_id {ident!r}")
            seen.add(ident)
            try:
                value = float(raw)
            except ValueError:
                raise DataFileError(
                    f"line {line_no}: value {raw!r} is not a number"
                ) from None
            if math.isnan(value):
                raise DataFileError(f"line {line_no}: value is NaN")
            rows.append((ident, value))
    except csv.Error as exc:
        raise DataFileError(f"CSV parse failure: {exc}") from exc
    if not rows:
        raise DataFileError("input file has no data rows")
    return rows


def _decision_verdicts(ids: list[str], decision: Decision) -> list[dict]:
    by_index = {t.index: t for t in decision.trace}
    out = []
    for i, ident in enumerate(ids):
        t = by_index[i]
        out.append(
            {
                "id": ident,
                "verdict": decision.verdicts[i].value,
                "step": t.step,
                "statistic": t.statistic,
                "threshold": t.threshold,
            }
        )
    return out


@main.command()
@click.option(
    "-i", "--input", "input_file", type=click.File("r"), required=True,
    help="CSV file with header hypothesis_id,value ('-' for stdin).",
)
@click.option(
    "--kind",
    type=click.Choice(["stepdown", "stepup", "holm"]),
    default="stepdown",
    show_default=True,
)
@click.option(
    "--input-kind",
    type=click.Choice(["statistics", "p-values"]),
    default="statistics",
    show_default=True,
)
@_family_option
@_rho_option
@_alpha_option
@click.option("--no-cache", is_flag=True, help="Skip the on-disk constants cache.")
@click.option("-o", "--output", type=click.File("w"), default="-")
def decide(input_file, kind, input_kind, family, rho, alpha, no_cache, output):
    """Run a procedure on a data file and emit per-hypothesis verdicts.

    The number of hypotheses is the number of data rows.  p-value input is
    mapped onto the iid-normal statistic scale by the inverse normal CDF of
    1 - p (recorded in the output metadata).
    """
    rows = _read_input_rows(input_file)
    ids = [r[0] for r in rows]
    values = [r[1] for r in rows]
    k = len(rows)

    transform = "identity"
    if input_kind == "p-values":
        for ident, p in rows:
            if not 0.0 <= p <= 1.0:
                raise DataFileError(f"p-value for {ident!r} outside [0, 1]: {p}")
        if kind in ("stepdown", "stepup"):
            if family != Family.IID_NORMAL.value:
                raise click.UsageError(
                    "p-value input runs on the iid-normal scale; "
                    "use --family iid-normal"
                )
            # p in {0, 1} maps to the +/- infinity sentinels
            values = [float(ndtri(1.0 - p)) for p in values]
            transform = "inverse-normal-cdf-of-1-minus-p"

    model = _build_model(family, rho, k)
    constants_used: dict | None = None
    if kind == "holm":
        if input_kind == "statistics":
            values = statistic_to_p(model, np.asarray(values)).tolist()
            transform = "statistic-to-p"
        try:
            decision = holm_bonferroni(values, alpha)
        except ValueError as exc:
            raise DataFileError(str(exc)) from exc
    else:
        ladder_kind = LadderKind(kind)
        doc = _constants_document(model, alpha, ladder_kind, use_cache=not no_cache)
        ladder = ConstantLadder(
            kind=ladder_kind,
            alpha=alpha,
            model=model,
            values=tuple(doc["values"]),
            residuals=tuple(doc["residuals"]),
        )
        decide_fn = stepdown_decide if kind == "stepdown" else stepup_decide
        decision = decide_fn(values, ladder)
        constants_used = {"kind": kind, "values": doc["values"]}

    _emit(
        {
            "schema_version": SCHEMA_VERSION,
            "kind": kind,
            "alpha": alpha,
            "model": _model_doc(model),
            "input_kind": input_kind,
            "transform": transform,
            "constants": constants_used,
            "n_rejected": decision.n_rejected,
            "verdicts": _decision_verdicts(ids, decision),
        },
        output,
    )


@main.command()
@_family_option
@_rho_option
@click.option("--k", type=int, default=None, help="Number of hypotheses.")
@_alpha_option
@click.option(
    "--procedure",
    type=click.Choice(["stepdown", "stepup", "holm"]),
    default="stepdown",
    show_default=True,
)
@click.option(
    "--metric",
    type=click.Choice(["fwer", "reject-ge"]),
    default="fwer",
    show_default=True,
)
@click.option("--j", type=int, default=None, help="Rejection count for reject-ge.")
@click.option(
    "--theta", required=True,
    help="Comma list (inf/-inf allowed) or eps:E@J shorthand.",
)
@click.option("--reps", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--false-only", is_flag=True,
    help="Count only rejections of false hypotheses (reject-ge).",
)
@click.option("-o", "--output", type=click.File("w"), default="-")
def simulate(family, rho, k, alpha, procedure, metric, j, theta, reps, seed,
             false_only, output):
    """Monte Carlo estimate of an error or power metric at a parameter point."""
    theta_values = _parse_theta(theta, k)
    model = _build_model(family, rho, len(theta_values))

    if procedure == "holm":
        proc = holm_procedure(model, alpha)
    elif procedure == "stepdown":
        proc = stepdown_procedure(_solve_ladder(model, alpha, LadderKind.STEPDOWN))
    else:
        proc = stepup_procedure(_solve_ladder(model, alpha, LadderKind.STEPUP))

    try:
        if metric == "fwer":
            if j is not None or false_only:
                raise click.UsageError("--j/--false-only only apply to reject-ge")
            report = estimate_fwer(model, theta_values, proc, reps, seed)
        else:
            if j is None:
                raise click.UsageError("--metric reject-ge requires --j")
            report = estimate_reject_at_least(
                model, theta_values, proc, j, reps, seed, false_only=false_only
            )
    except UnsupportedShiftError as exc:
        raise click.UsageError(str(exc)) from exc
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc

    doc = {
        "schema_version": SCHEMA_VERSION,
        "metric": metric,
        "procedure": procedure,
        "model": _model_doc(model),
        "alpha": alpha,
        "theta": theta_values,
        **dataclasses.asdict(report),
    }
    _emit(doc, output)


@main.command()
@click.option(
    "--level",
    type=click.Choice(["fast", "slow"]),
    default="fast",
    show_default=True,
)
@click.option("--seed", type=int, default=20240801, show_default=True)
@click.pass_context
def verify(ctx, level, seed):
    """Run the named self-checks; nonzero exit when any fail."""
    results = run_verification(level, seed=seed)
    click.echo(format_results(results))
    if not all(r.passed for r in results):
        ctx.exit(1)


@main.command()
@_family_option
@_rho_option
@click.option("--k", type=int, required=True, help="Number of hypotheses.")
@_alpha_option
@click.option("--reps", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--theta", "theta_specs", multiple=True,
    help="Parameter point to tabulate (repeatable); defaults to a built-in grid.",
)
@click.option(
    "--out-dir", type=click.Path(file_okay=False), required=True,
    help="Directory receiving comparison.csv and the rendered figures.",
)
def report(family, rho, k, alpha, reps, seed, theta_specs, out_dir):
    """Compare the procedures over a parameter grid; write CSV and figures."""
    model = _build_model(family, rho, k)
    grid = [_parse_theta(spec, k) for spec in theta_specs] or None
    try:
        paths = render_report(
            model, alpha, out_dir, reps=reps, seed=seed, theta_grid=grid
        )
    except NonMonotoneLadderError as exc:
        raise SolverFailure(str(exc)) from exc
    except (UnsupportedShiftError, ValueError) as exc:
        raise click.UsageError(str(exc)) from exc
    for name, path in sorted(paths.items()):
        click.echo(f"{name}: {path}")


if __name__ == "__main__":
    main()
