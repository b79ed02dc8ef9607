"""
Command-line entry point.

Commands: sample, dist, oracle, verify, stirling. Results go to --out or
stdout; diagnostics go to stderr. Exit codes: 0 success, 1 invalid input,
2 runtime failure, 3 failed verification.
"""

import functools
import logging
import sys
import time
from typing import Any, Callable, Dict, List, Optional

import click
import numpy as np
from pydantic import ValidationError

from app.core.errors import GluingError, InvalidModelParamsError
from app.core.gluing import ModelKind
from app.core.oracle import case_count, exact_joint, exact_joint_by_cycles, stirling_first
from app.core.run_config import RunConfig
from app.core.stats import (
    ExperimentPlan,
    MomentTally,
    asymptotic_targets,
    finite_size_targets,
)
from app.core.verification import run_suite
from app.config import settings
from app.monitoring import configure_logging, get_run_metrics_instance, log_run
from app.services.sampler import map_instances, sample_record, sample_summary
from app.services.writers import (
    RecordWriter,
    dumps_json,
    exact_frame,
    histogram_frame,
    marginal_counts,
    open_output,
    stirling_frame,
    write_frame,
)

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_VERIFICATION = 3


def _config(command: str, **options) -> RunConfig:
    return RunConfig(command=command, **{k: v for k, v in options.items() if v is not None})


def _tracked(command: str):
    """Build the RunConfig, time the run, write the ledger and map errors to exit codes."""

    def decorator(fn: Callable[[RunConfig], Optional[int]]):
        @functools.wraps(fn)
        def wrapper(**options):
            began = time.perf_counter()
            metrics = get_run_metrics_instance()
            config = None
            code, error = 0, None
            try:
                config = _config(command, **options)
                code = fn(config) or 0
            except (ValidationError, InvalidModelParamsError) as e:
                code, error = EXIT_VALIDATION, e
            except (GluingError, OSError) as e:
                code, error = EXIT_RUNTIME, e
            except Exception as e:
                logger.exception("Command failed - command: %s", command)
                code, error = EXIT_RUNTIME, e
            duration = time.perf_counter() - began

            if error is not None:
                click.echo(f"Error: {error}", err=True)
            metrics.record_command(
                command,
                duration,
                success=code == 0,
                error_category=type(error).__name__ if error is not None else None,
            )
            log_run(
                command,
                config.ledger_fields() if config is not None else {},
                duration,
                code == 0,
                str(error) if error is not None else None,
            )
            metrics.log_summary()
            if code:
                raise click.exceptions.Exit(code)

        return wrapper

    return decorator


def model_options(fn):
    for option in reversed([
        click.option("--model", type=click.Choice([k.value for k in ModelKind]), help="Surface model"),
        click.option("--n", type=int, help="Polygons (t, tprime) or ordinary edges (s, sprime)"),
        click.option("--m", type=int, help="Boundary edges (default 0)"),
        click.option("--t", type=int, help="Polygon size for t/tprime (default 3)"),
    ]):
        fn = option(fn)
    return fn


def run_options(fn):
    for option in reversed([
        click.option("--samples", type=int, help="Sample count (default from settings)"),
        click.option("--seed", type=int, help="Master seed (default from settings)"),
        click.option("--threads", type=str, help="Worker processes, or 'auto'"),
    ]):
        fn = option(fn)
    return fn


def output_options(fn):
    for option in reversed([
        click.option("--out", type=str, help="Output path (default stdout)"),
        click.option("--format", "format", type=click.Choice(["jsonl", "csv"]), help="Record format"),
    ]):
        fn = option(fn)
    return fn


@click.group()
def cli():
    """Random surfaces from glued polygons: sampling, exact laws and checks."""
    configure_logging(settings.LOG_LEVEL)


@cli.command()
@model_options
@run_options
@output_options
@_tracked("sample")
def sample(config: RunConfig):
    """One summary record per sample."""
    params = config.params()
    with open_output(config.out) as stream:
        writer = RecordWriter(stream, config.format)
        writer.write_all(map_instances(params, config.samples, config.seed, sample_record, config.threads))
    logger.info("Sampling finished - model: %s, records: %d", params, writer.count)


def _dist_report(plan: ExperimentPlan, b: np.ndarray, genus: np.ndarray, connected: np.ndarray) -> Dict[str, Any]:
    params = plan.params
    tally = MomentTally()
    tally.add_arrays(b, genus)
    report: Dict[str, Any] = {
        "header": plan.header(),
        "moments": tally.report().model_dump(),
        "connected_fraction": float(np.mean(connected)),
        "marginals": {
            "B": {str(k): v for k, v in marginal_counts(b).items()},
            "genus": {str(k): v for k, v in marginal_counts(genus).items()},
        },
    }
    if params.kind.primed:
        report["finite_size_targets"] = finite_size_targets(plan)._asdict()
    if plan.normalizable:
        report["asymptotic_targets"] = asymptotic_targets(plan)._asdict()
    return report


@cli.command()
@model_options
@run_options
@click.option("--out", type=str, help="Histogram CSV path; the report goes to <out>.moments.json")
@_tracked("dist")
def dist(config: RunConfig):
    """Joint (B, genus) histogram with marginals and moments."""
    params = config.params()
    summaries = list(map_instances(params, config.samples, config.seed, sample_summary, config.threads))
    b = np.fromiter((s.B for s in summaries), dtype=np.int64, count=len(summaries))
    genus = np.fromiter((s.genus for s in summaries), dtype=np.int64, count=len(summaries))
    connected = np.fromiter((s.connected for s in summaries), dtype=bool, count=len(summaries))
    plan = ExperimentPlan(params, config.samples, config.seed)
    frame = histogram_frame(b, genus, plan)
    report = _dist_report(plan, b, genus, connected)

    with open_output(config.out) as stream:
        write_frame(frame, stream)
        if config.out is None or config.out == "-":
            stream.write(dumps_json(report) + "\n")
    if config.out is not None and config.out != "-":
        with open_output(f"{config.out}.moments.json") as stream:
            stream.write(dumps_json(report) + "\n")


@cli.command()
@model_options
@click.option("--out", type=str, help="Output path (default stdout)")
@_tracked("oracle")
def oracle(config: RunConfig):
    """Exact law of (B, genus, connected) as a rational table."""
    params = config.params()
    if params.kind.primed and case_count(params) > settings.EXACT_CASE_LIMIT:
        distribution = exact_joint_by_cycles(params)
    else:
        distribution = exact_joint(params)
    with open_output(config.out) as stream:
        write_frame(exact_frame(distribution), stream)


@cli.command()
@click.option("--only", type=str, help="Run a single criterion")
@click.option("--quick", is_flag=True, help="Reduced samples, widened tolerances")
@click.option("--seed", type=int, help="Master seed (default from settings)")
@click.option("--threads", type=str, help="Worker processes, or 'auto'")
@output_options
@_tracked("verify")
def verify(config: RunConfig):
    """Run the acceptance suite; exit 3 if any criterion fails."""
    verdicts = run_suite(
        only=[config.only] if config.only else None,
        quick=config.quick,
        seed=config.seed,
        threads=config.threads,
    )
    with open_output(config.out) as stream:
        writer = RecordWriter(stream, config.format)
        for verdict in verdicts:
            record = verdict.as_record()
            if config.format == "csv":
                record["detail"] = dumps_json(record["detail"])
            writer.write(record)
    failed = [v.id for v in verdicts if not v.passed]
    if failed:
        click.echo(f"Failed criteria: {', '.join(failed)}", err=True)
        return EXIT_VERIFICATION
    return 0


@cli.command()
@click.option("--m", type=int, required=True, help="Row index")
@click.option("--out", type=str, help="Output path (default stdout)")
@_tracked("stirling")
def stirling(config: RunConfig):
    """Stirling numbers of the first kind [m b] and the law [m b]/m!."""
    try:
        row = stirling_first(config.m)
    except GluingError as e:
        raise InvalidModelParamsError(str(e)) from e
    with open_output(config.out) as stream:
        write_frame(stirling_frame(row), stream)


def main(argv: Optional[List[str]] = None) -> int:
    """Console entry point; returns the process exit code."""
    try:
        result = cli.main(args=argv, prog_name="gluing", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_VALIDATION
    except click.Abort:
        click.echo("Aborted", err=True)
        return EXIT_VALIDATION
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
