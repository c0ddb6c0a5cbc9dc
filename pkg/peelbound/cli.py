"""
Command-line front end

    peelbound gen --n 10 --seed 42 --out inst.csv
    peelbound eval --instance inst.csv --tour 0,3,1,2
    peelbound solve --n 10 --seed 42 --time-limit 60 --trace-out trace.jsonl
    peelbound serve --port 8000

Exit codes: 0 solved to optimality (or command succeeded), 1 error, 2 time limit.
"""

from pathlib import Path
from typing import Optional
import logging
import math
import sys

import click
import orjson

from peelbound.core.config import get_settings
from peelbound.core.errors import PeelBoundError
from peelbound.schemas.solver import PeelStrategy, QueueOrder, SolverConfig, TraceRecord
from peelbound.services.instance import evaluate_tour, generate, load_csv, parse_tour, write_csv
from peelbound.services.memo import BoundMemo
from peelbound.services.solver import peel_and_bound, summarize
from peelbound.services.transfer import LambertTransferModel


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LIMIT = 2


class ExitCodeGroup(click.Group):
    """Group whose commands return their exit code; every failure exits with 1"""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            rv = super().main(*args, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_ERROR)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_ERROR)
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def _load_instance(instance_path: Optional[str], n: Optional[int], seed: Optional[int]):
    if instance_path is not None:
        try:
            return load_csv(instance_path)
        except OSError as e:
            raise click.ClickException(f"cannot read {instance_path}: {e}")
    if n is None or seed is None:
        raise click.UsageError("give --instance or both --n and --seed")
    return generate(n, seed)


@click.group(cls=ExitCodeGroup)
@click.option("--log-level", default=None, help="Logging level (default from LOG_LEVEL)")
def cli(log_level: Optional[str]):
    """Peel-and-Bound solver for the Asteroid Routing Problem"""
    level = (log_level or get_settings().LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


@cli.command("gen")
@click.option("--n", "n", type=click.IntRange(min=1), required=True, help="Number of asteroids")
@click.option("--seed", type=click.IntRange(min=0), required=True, help="Generator seed")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="CSV file (stdout if omitted)")
@click.option("--force", is_flag=True, help="Overwrite an existing file")
def cmd_gen(n: int, seed: int, out_path: Optional[str], force: bool) -> int:
    """Write a synthetic instance as CSV"""
    if out_path is not None and Path(out_path).exists() and not force:
        raise click.ClickException(f"{out_path} exists; pass --force to overwrite")
    text = write_csv(generate(n, seed), out_path)
    if out_path is None:
        click.echo(text, nl=False)
    else:
        logger.info(f"Wrote instance n={n} seed={seed} to {out_path}")
    return EXIT_OK


@cli.command("eval")
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--tour", required=True, help="Comma-separated body indices starting with 0")
@click.option("--multi", type=click.IntRange(min=1), default=None, help="Optimizer starts per leg")
def cmd_eval(instance_path: str, tour: str, multi: Optional[int]) -> int:
    """Print the cost of a tour"""
    try:
        instance = load_csv(instance_path)
        memo = BoundMemo(LambertTransferModel(instance, multi=multi))
        cost = evaluate_tour(instance, parse_tour(tour), memo)
    except PeelBoundError as e:
        raise click.ClickException(str(e))
    click.echo(repr(cost) if math.isfinite(cost) else "inf")
    return EXIT_OK


@cli.command("solve")
@click.option("--instance", "instance_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--n", "n", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=click.IntRange(min=0), default=None)
@click.option("--dd-width", type=click.IntRange(min=1), default=None)
@click.option("--search-width", type=click.IntRange(min=1), default=None)
@click.option("--multi", type=click.IntRange(min=1), default=None)
@click.option("--peel", type=click.Choice([s.value for s in PeelStrategy]), default=None)
@click.option("--queue", type=click.Choice([q.value for q in QueueOrder]), default=None)
@click.option("--time-limit", type=click.FloatRange(min=0, min_open=True), default=None, help="Seconds")
@click.option("--est-eat", is_flag=True, help="Run the est/eat refinement after construction")
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None, help="Line-delimited trace file")
@click.option("--memo-load", type=click.Path(exists=True, dir_okay=False), default=None, help="Memo snapshot to start from")
@click.option("--memo-save", type=click.Path(dir_okay=False), default=None, help="Write the memo snapshot after solving")
@click.option("--format", "output_format", type=click.Choice(["text", "records"]), default="text")
def cmd_solve(
    instance_path, n, seed, dd_width, search_width, multi, peel, queue, time_limit,
    est_eat, trace_out, memo_load, memo_save, output_format,
) -> int:
    """Solve an instance with Peel-and-Bound"""
    overrides = {
        "dd_width": dd_width,
        "search_width": search_width,
        "multi": multi,
        "peel_strategy": peel,
        "queue_order": queue,
        "time_limit": time_limit,
    }
    config = SolverConfig(enable_est_eat=est_eat, **{k: v for k, v in overrides.items() if v is not None})

    flush = get_settings().TRACE_FLUSH
    trace_file = open(trace_out, "wb") if trace_out else None

    def write_record(record: TraceRecord):
        if trace_file is None:
            return
        trace_file.write(orjson.dumps(record.model_dump()) + b"\n")
        if flush:
            trace_file.flush()

    try:
        instance = _load_instance(instance_path, n, seed)
        memo = BoundMemo(LambertTransferModel(instance, multi=config.multi))
        if memo_load:
            memo.load_snapshot(memo_load)
        result = peel_and_bound(instance, config, memo=memo, on_trace=write_record)
        if memo_save:
            memo.save_snapshot(memo_save)
    except PeelBoundError as e:
        raise click.ClickException(str(e))
    finally:
        if trace_file is not None:
            trace_file.close()

    summary = summarize(result, config)
    if output_format == "records":
        click.echo(orjson.dumps(summary.model_dump(mode="json")).decode())
    else:
        click.echo(f"tour:           {','.join(str(b) for b in summary.tour)}")
        click.echo(f"lb:             {summary.lb:.6f}")
        click.echo(f"ub:             {summary.ub:.6f}")
        click.echo(f"gap (%):        {summary.gap_percent:.4f}")
        click.echo(f"time (s):       {summary.wall_seconds:.2f}")
        click.echo(f"queue:          {summary.queue_remaining}")
        click.echo(f"proven optimal: {summary.proven_optimal}")
        click.echo(f"evaluations:    {summary.counters}")
    return EXIT_OK if summary.proven_optimal else EXIT_LIMIT


@cli.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def cmd_serve(host: str, port: int) -> int:
    """Run the HTTP API"""
    import uvicorn

    uvicorn.run("peelbound.main:app", host=host, port=port)
    return EXIT_OK


def main():
    cli()


if __name__ == "__main__":
    main()
