"""Command line entry points: serve the HTTP API, drive a session from
the terminal, generate training data, score backends, and benchmark the
collision kernels.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click

from . import datasetgen, evalharness
from .backends import RemoteBackend, RemoteConfig
from .world import bundled_world_path, load_world


def _backend_factory(
    backend: str, remote_url: str | None, remote_config: str | None, world_name: str
):
    if backend == "remote":
        try:
            config = RemoteConfig.load(remote_config, endpoint=remote_url)
        except ValueError as exc:
            raise click.UsageError(
                "--backend remote needs --remote-url, --remote-config, "
                "or PLANLOOP_REMOTE_URL"
            ) from exc
        return lambda: RemoteBackend.from_config(config)
    return evalharness.rule_backend_factory(world_name)


@click.group()
@click.version_option(package_name="planloop")
def main():
    """Interactive task planning engine with failure recovery."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
def serve(host: str, port: int):
    """Run the HTTP and WebSocket service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command()
@click.option("--world", "world_name", default="apartment", show_default=True)
@click.option(
    "--backend",
    type=click.Choice(["rule", "remote"]),
    default="rule",
    show_default=True,
)
@click.option("--remote-url", default=None, help="planner endpoint for --backend remote")
@click.option(
    "--remote-config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="TOML file with remote planner settings",
)
@click.option("--max-rounds", default=2, show_default=True, type=int)
@click.option("--time-out", default=120.0, show_default=True, type=float)
def repl(world_name, backend, remote_url, remote_config, max_rounds, time_out):
    """Talk to a session from the terminal. Ctrl-D or 'quit' leaves."""
    from .orchestrator import Session

    world = load_world(bundled_world_path(world_name))
    factory = _backend_factory(backend, remote_url, remote_config, world_name)
    session = Session(
        world, factory(), max_recovery_rounds=max_rounds, time_out=time_out
    )
    click.echo(f"world {world_name!r} loaded; the robot is listening.")
    while True:
        try:
            text = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.Abort):
            click.echo()
            return
        if text.strip().lower() in ("quit", "exit"):
            return
        before = len(session.events)
        try:
            session.handle_user(text)
        except Exception as exc:
            click.echo(f"! {exc}")
            continue
        for event in session.events[before:]:
            etype, data = event["type"], event["data"]
            if etype == "vision_feedback":
                click.echo(f"  vision: {data['text'] or '(nothing requested)'}")
            elif etype == "feasibility_feedback":
                click.echo(f"  feasibility: {data['score']}")
            elif etype == "backend_reply":
                click.echo(f"robot: {data['text']}")
            elif etype == "step":
                click.echo(f"  step {data['step']}: {data['outcome']}")
        click.echo(f"  [{session.state}]")
        if session.state in ("exhausted", "timed_out"):
            return


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="generation recipe; defaults to the bundled one",
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False),
    default="dataset.jsonl",
    show_default=True,
)
@click.option(
    "--check/--no-check",
    default=True,
    show_default=True,
    help="re-validate the written file",
)
def dataset(config_path, out, check):
    """Generate the training pair file."""
    config = datasetgen.load_config(config_path)
    records = datasetgen.generate(config)
    datasetgen.write_jsonl(records, out)
    summary = datasetgen.summarize(records)
    click.echo(f"wrote {summary['records']} records to {out}")
    for kind, n in summary["by_failure_kind"].items():
        click.echo(f"  {kind}: {n}")
    if check:
        world = load_world(bundled_world_path(config.world))
        problems = datasetgen.validate_records(datasetgen.read_jsonl(out), world)
        if problems:
            for p in problems:
                click.echo(f"violation: {p}", err=True)
            sys.exit(1)
        click.echo("validation: clean")


@main.command(name="eval")
@click.option("--suite", default=None, help="bundled suite name or a TOML path")
@click.option(
    "--instructions",
    "instructions_path",
    is_flag=False,
    flag_value="",
    default=None,
    help="instruction fixture path; bare flag uses the bundled 101 lines",
)
@click.option(
    "--backend",
    type=click.Choice(["rule", "remote"]),
    default="rule",
    show_default=True,
)
@click.option("--remote-url", default=None)
@click.option(
    "--remote-config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
)
@click.option(
    "--report",
    "report_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="write the report here as well as printing it",
)
@click.option(
    "--golden",
    "golden_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="compare against a known-good report; mismatch exits nonzero",
)
@click.option("--timing", is_flag=True, help="append the query timing breakdown")
def eval_cmd(
    suite,
    instructions_path,
    backend,
    remote_url,
    remote_config,
    report_path,
    golden_path,
    timing,
):
    """Score a backend against a scenario suite or instruction fixture."""
    if (suite is None) == (instructions_path is None):
        raise click.UsageError("pass exactly one of --suite or --instructions")
    if suite is not None:
        path = Path(suite)
        if not path.exists():
            path = evalharness.bundled_suite_path(suite)
        name, scenarios = evalharness.load_suite(path)
    else:
        name = "instructions"
        scenarios = evalharness.load_instructions(instructions_path or None)
    factory = _backend_factory(backend, remote_url, remote_config, "apartment")
    result = evalharness.run_suite(name, scenarios, factory)
    text = result.report(include_timing=timing)
    click.echo(text, nl=False)
    if report_path:
        Path(report_path).write_text(text)
    if golden_path:
        expected = Path(golden_path).read_text()
        actual = result.report(include_timing=False)
        if actual != expected:
            for got, want in zip(actual.splitlines(), expected.splitlines()):
                if got != want:
                    click.echo(f"golden mismatch: {got!r} != {want!r}", err=True)
                    break
            else:
                click.echo("golden mismatch: reports differ in length", err=True)
            sys.exit(1)
        click.echo("golden: match")
    if result.metrics()["failed"]:
        sys.exit(1)


@main.group()
def feasibility():
    """Reachability toolkit."""


@feasibility.command()
@click.option(
    "--kernel",
    type=click.Choice(["both", "compiled", "pure"]),
    default="both",
    show_default=True,
)
@click.option("--world", "world_name", default="apartment", show_default=True)
@click.option("--samples", default=600, show_default=True, type=int)
@click.option("--queries", default=200, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def bench(kernel, world_name, samples, queries, seed):
    """Time the collision kernels and cross-check their answers."""
    import numpy as np

    from .feasibility import KERNEL_BACKEND, FeasibilityChecker, RoadmapParams

    world = load_world(bundled_world_path(world_name))
    params = RoadmapParams(n_samples=samples, seed=seed)
    rng = np.random.default_rng(seed)
    lo = np.asarray(world.bounds.lo)
    hi = np.asarray(world.bounds.hi)
    starts = rng.uniform(lo, hi, size=(queries, 3))
    targets = rng.uniform(lo, hi, size=(queries, 3))

    wanted = ["pure", "compiled"] if kernel == "both" else [kernel]
    available = []
    for k in wanted:
        if k == "compiled" and KERNEL_BACKEND != "compiled":
            msg = "compiled kernels are not available in this install"
            if kernel == "compiled":
                raise click.ClickException(msg)
            click.echo(f"note: {msg}; timing the pure path only")
            continue
        available.append(k)

    click.echo(f"active default backend: {KERNEL_BACKEND}")
    scores: dict[str, list[int]] = {}
    for k in available:
        t0 = time.perf_counter()
        checker = FeasibilityChecker.from_world(world, params, kernel=k)
        build_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        scores[k] = [
            checker.query(tuple(s), tuple(t)) for s, t in zip(starts, targets)
        ]
        query_s = time.perf_counter() - t0
        click.echo(
            f"{k:>8}: roadmap {build_s * 1e3:8.1f} ms, "
            f"{queries} queries {query_s * 1e3:8.1f} ms "
            f"({query_s / queries * 1e6:7.1f} us each)"
        )
    if len(scores) == 2:
        a, b = scores["pure"], scores["compiled"]
        agree = sum(x == y for x, y in zip(a, b))
        click.echo(f"agreement: {agree}/{queries}")
        if agree != queries:
            raise click.ClickException("kernel backends disagree")


if __name__ == "__main__":
    main()
