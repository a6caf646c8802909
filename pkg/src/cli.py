"""Command-line front end.

Exit codes: 0 existence verdict (or a subreport written), 1 usage or
configuration error, 2 NoConclusion, 3 hypothesis failure (positivity, (H0),
(H1), degenerate critical point), 4 incomplete critical point search.
"""

import functools
import logging
import sys
from pathlib import Path
from typing import Optional

import click
import pandas as pd

from . import __version__
from .classes.Bubble import QuadratureConfig, compute_constants
from .classes.Certificate import render_text
from .classes.CurvatureTwin import REPORT_SUFFIXES, CurvatureTwin
from .classes.ShadowFlow import dump_trajectory
from .utils.config import RunConfig, config_from_dict, load_config
from .utils.exceptions import (
    CurvatureTwinError,
    DegenerateCriticalPoint,
    HypothesisFailure,
    IncompleteSearch,
    NotPositive,
)
from .utils.utils import dumps_report, write_text

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONCLUSION = 2
EXIT_HYPOTHESIS = 3
EXIT_INCOMPLETE = 4

_VERBOSITY = {0: logging.WARNING, 1: logging.INFO}


class ExitCodeGroup(click.Group):
    """Group whose commands return their exit code; usage errors exit with 1."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            rv = super().main(*args, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        sys.exit(rv or EXIT_OK)


def _fail(e: Exception, code: int) -> int:
    click.echo(f"error: {e}", err=True)
    logger.debug("traceback", exc_info=e)
    return code


def exit_codes(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (HypothesisFailure, DegenerateCriticalPoint, NotPositive) as e:
            return _fail(e, EXIT_HYPOTHESIS)
        except IncompleteSearch as e:
            return _fail(e, EXIT_INCOMPLETE)
        except (CurvatureTwinError, OSError, ValueError, KeyError) as e:
            return _fail(e, EXIT_USAGE)

    return wrapper


def run_options(func):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON run configuration."),
        click.option("--field", help="Expression of K in x1..x5 (overrides the config file)."),
        click.option("--seed", type=click.IntRange(min=0), help="Seed of the Sobol samples."),
        click.option("--starts", type=click.IntRange(min=1), help="Multi-start count of the first search round."),
        click.option("--grad-tol", type=float, help="Gradient norm accepted as critical."),
        click.option("--merge-tol", type=float, help="Distance under which two critical points merge."),
        click.option("--max-newton-iters", type=click.IntRange(min=1), help="Newton iterations per start."),
        click.option("--n-jobs", type=int, help="joblib workers for the search."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def output_options(func):
    options = [
        click.option("--out", type=click.Path(file_okay=False), help="Directory for the output files (stdout if omitted)."),
        click.option("--format", "fmt", type=click.Choice(list(REPORT_SUFFIXES)), default="json", show_default=True),
        click.option("--overwrite", is_flag=True, help="Replace existing output files."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _run_config(ctx: click.Context, config_path: Optional[str], field: Optional[str], **overrides) -> RunConfig:
    if config_path is None and field is None:
        raise click.UsageError("Provide --config or --field.")
    overrides = dict(overrides, field=field, progress=ctx.obj.get("progress") or None)
    if config_path is not None:
        return load_config(config_path, overrides)
    return config_from_dict({"field": field}, overrides)


def _render_text(doc: dict) -> str:
    lines = []
    for key, value in doc.items():
        if isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            lines += [f"{key}:", pd.DataFrame(value).to_string(index=False)]
        elif isinstance(value, dict):
            lines.append(f"{key}:")
            lines += [f"  {k}: {v}" for k, v in value.items()]
        else:
            lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def _out_dir(out: str) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(doc: dict, name: str, out: Optional[str], fmt: str, overwrite: bool):
    text = dumps_report(doc) if fmt == "json" else _render_text(doc)
    if out is None:
        click.echo(text, nl=False)
        return
    path = write_text(_out_dir(out) / f"{name}{REPORT_SUFFIXES[fmt]}", text, overwrite=overwrite)
    click.echo(f"wrote {path}", err=True)


def _subset(names: str):
    return [n.strip() for n in names.split(",") if n.strip()]


@click.group(cls=ExitCodeGroup)
@click.version_option(__version__, prog_name="curvature_twin")
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG logging on stderr.")
@click.option("--progress", is_flag=True, help="Show progress bars.")
@click.pass_context
def cli(ctx: click.Context, verbose: int, progress: bool):
    """Existence certificates for the prescribed scalar curvature problem on S^4."""
    logging.basicConfig(
        level=_VERBOSITY.get(verbose, logging.DEBUG),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    ctx.ensure_object(dict)
    ctx.obj["progress"] = progress


@cli.command()
@run_options
@output_options
@click.pass_context
@exit_codes
def analyze(ctx, config_path, field, seed, starts, grad_tol, merge_tol, max_newton_iters, n_jobs, out, fmt, overwrite):
    """Run the full pipeline and write the report."""
    run = _run_config(
        ctx, config_path, field, seed=seed, starts=starts, grad_tol=grad_tol,
        merge_tol=merge_tol, max_newton_iters=max_newton_iters, n_jobs=n_jobs,
    )
    twin = CurvatureTwin(run)
    report = twin.analyze()
    if out is None:
        click.echo(dumps_report(report) if fmt == "json" else render_text(report), nl=False)
    else:
        path = twin.export_report(report, _out_dir(out) / f"report{REPORT_SUFFIXES[fmt]}", fmt=fmt, overwrite=overwrite)
        click.echo(f"wrote {path}", err=True)
    verdict = twin.certificate.verdict
    click.echo(f"verdict: {verdict}", err=True)
    return EXIT_OK if verdict.is_existence else EXIT_NO_CONCLUSION


@cli.command("critical-points")
@run_options
@output_options
@click.pass_context
@exit_codes
def critical_points(ctx, config_path, field, seed, starts, grad_tol, merge_tol, max_newton_iters, n_jobs, out, fmt, overwrite):
    """List the critical points of K with (H0) margins and K+."""
    run = _run_config(
        ctx, config_path, field, seed=seed, starts=starts, grad_tol=grad_tol,
        merge_tol=merge_tol, max_newton_iters=max_newton_iters, n_jobs=n_jobs,
    )
    twin = CurvatureTwin(run)
    twin.check_positivity()
    twin.find_critical_points()
    _emit(twin.provenance(), "critical_points", out, fmt, overwrite)
    return EXIT_OK


@cli.command()
@click.argument("subset")
@run_options
@output_options
@click.pass_context
@exit_codes
def matrix(ctx, subset, config_path, field, seed, starts, grad_tol, merge_tol, max_newton_iters, n_jobs, out, fmt, overwrite):
    """Interaction matrix and rho of SUBSET (comma-separated K+ names, e.g. north,y2)."""
    run = _run_config(
        ctx, config_path, field, seed=seed, starts=starts, grad_tol=grad_tol,
        merge_tol=merge_tol, max_newton_iters=max_newton_iters, n_jobs=n_jobs,
    )
    cand = CurvatureTwin(run).matrix(_subset(subset))
    _emit(cand.to_dict(), "matrix", out, fmt, overwrite)
    return EXIT_OK


@cli.command()
@run_options
@output_options
@click.pass_context
@exit_codes
def certificate(ctx, config_path, field, seed, starts, grad_tol, merge_tol, max_newton_iters, n_jobs, out, fmt, overwrite):
    """Counting sums, admissible indices and verdict."""
    run = _run_config(
        ctx, config_path, field, seed=seed, starts=starts, grad_tol=grad_tol,
        merge_tol=merge_tol, max_newton_iters=max_newton_iters, n_jobs=n_jobs,
    )
    twin = CurvatureTwin(run)
    report = twin.analyze()
    _emit({"certificate": report["certificate"], "caveats": report["caveats"]}, "certificate", out, fmt, overwrite)
    return EXIT_OK if twin.certificate.verdict.is_existence else EXIT_NO_CONCLUSION


@cli.command()
@click.option("--quad-rel-tol", type=float, help="Relative tolerance of the radial quadrature.")
@output_options
@exit_codes
def constants(quad_rel_tol, out, fmt, overwrite):
    """Bubble constants S4, c2, omega3 and c0 with their provenance."""
    cfg = QuadratureConfig() if quad_rel_tol is None else QuadratureConfig(rel_tol=quad_rel_tol)
    _emit(compute_constants(cfg).to_dict(), "constants", out, fmt, overwrite)
    return EXIT_OK


@cli.command()
@click.argument("subset")
@run_options
@click.option("--horizon", type=click.FloatRange(min=0), help="Integration time before the verdict is Undecided.")
@click.option("--trajectory", is_flag=True, help="Also write trajectory.csv (needs --out).")
@output_options
@click.pass_context
@exit_codes
def flow(ctx, subset, config_path, field, seed, starts, grad_tol, merge_tol, max_newton_iters, n_jobs, horizon, trajectory, out, fmt, overwrite):
    """Shadow flow from balanced bubbles at SUBSET (model dynamics)."""
    if trajectory and out is None:
        raise click.UsageError("--trajectory needs --out.")
    run = _run_config(
        ctx, config_path, field, seed=seed, starts=starts, grad_tol=grad_tol,
        merge_tol=merge_tol, max_newton_iters=max_newton_iters, n_jobs=n_jobs,
    )
    names = _subset(subset)
    result = CurvatureTwin(run).flow(names, horizon=horizon, record=trajectory)
    _emit({"subset": names, **result.to_dict()}, "flow", out, fmt, overwrite)
    if trajectory:
        path = dump_trajectory(result, Path(out) / "trajectory.csv", overwrite=overwrite)
        click.echo(f"wrote {path}", err=True)
    return EXIT_OK
