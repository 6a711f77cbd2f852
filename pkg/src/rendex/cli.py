"""Command-line interface.

Verbs: ``run`` (one seeded mission), ``benchmark`` (scenario x strategy x
seed sweep with aggregation), ``oracle`` (exact-vs-heuristic check on a
small orienteering instance), ``solve`` / ``verify`` (heuristic solve and
tour validation for instance files), ``validate-scenario``, and
``export-scenario``.  Set ``RX_LOG_LEVEL`` for logging verbosity.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from .mission import STRATEGIES

log = logging.getLogger("rendex")


def _setup_logging():
    level = os.environ.get("RX_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _parse_overrides(params: tuple[str, ...]) -> dict[str, str]:
    out = {}
    for p in params:
        if "=" not in p:
            raise click.UsageError(f"--param expects key=value, got {p!r}")
        key, value = p.split("=", 1)
        out[key] = value
    return out


@click.group()
@click.version_option(package_name="rendex")
def main():
    """Energy-aware collaborative air-ground exploration, desk scale."""
    _setup_logging()


@main.command()
@click.option("--scenario", required=True,
              help="Shipped scenario name or path to a bundle file.")
@click.option("--strategy", default="proposed", show_default=True,
              type=click.Choice(STRATEGIES))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default="out/run", show_default=True,
              type=click.Path(path_type=Path))
@click.option("--param", "params", multiple=True, metavar="KEY=VALUE",
              help="Mission parameter override (repeatable).")
@click.option("--figures/--no-figures", default=True, show_default=True)
def run(scenario, strategy, seed, out, params, figures):
    """Run one mission and write its artifact set."""
    from .harness import run_single
    try:
        summary = run_single(scenario, strategy, seed, out,
                             overrides=_parse_overrides(params),
                             figures=figures)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps(summary, indent=1))
    target = summary.get("final_coverage")
    click.echo(f"done: {summary['n_tours']} tours, "
               f"final coverage {target:.3f} -> {out}")


@main.command()
@click.option("--scenario", "scenarios", multiple=True, required=True)
@click.option("--strategy", "strategies", multiple=True,
              type=click.Choice(STRATEGIES), default=STRATEGIES,
              show_default=True)
@click.option("--seeds", default="0,1,2,3,4", show_default=True,
              help="Comma-separated seed list.")
@click.option("--out", default="out/benchmark", show_default=True,
              type=click.Path(path_type=Path))
@click.option("--jobs", default=None, type=int,
              help="Worker processes (default: CPU count).")
@click.option("--param", "params", multiple=True, metavar="KEY=VALUE")
@click.option("--figures/--no-figures", default=True, show_default=True)
def benchmark(scenarios, strategies, seeds, out, jobs, params, figures):
    """Run the scenario x strategy x seed cross product and aggregate."""
    from .harness import BenchmarkSpec, render_table, run_benchmark
    try:
        seed_list = tuple(int(s) for s in seeds.split(",") if s.strip())
        spec = BenchmarkSpec(tuple(scenarios), tuple(strategies), seed_list, out)
        rows, failures = run_benchmark(spec, jobs=jobs,
                                       overrides=_parse_overrides(params),
                                       figures=figures)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    click.echo(render_table(rows), nl=False)
    for f in failures:
        click.echo(f"FAILED {f}", err=True)
    if failures:
        sys.exit(1)
    click.echo(f"aggregate written to {out}")


@main.command()
@click.argument("instance", type=click.Path(exists=True, path_type=Path))
def oracle(instance):
    """Exact optimum vs heuristic on a small instance file."""
    from .harness import oracle_report
    from .op_solver import TooLarge
    try:
        report = oracle_report(instance)
    except TooLarge as exc:
        raise click.ClickException(
            f"instance too large for exact enumeration: {exc}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps(report, indent=1))


@main.command()
@click.argument("instance", type=click.Path(exists=True, path_type=Path))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(path_type=Path),
              help="Write the tour as JSON instead of stdout only.")
def solve(instance, seed, out):
    """Heuristic tour for an orienteering instance file."""
    from .harness import solve_instance
    from .op_solver import Infeasible
    try:
        doc = solve_instance(instance, seed)
    except Infeasible as exc:
        raise click.ClickException(f"infeasible: {exc}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    text = json.dumps(doc, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    click.echo(text)


@main.command()
@click.argument("instance", type=click.Path(exists=True, path_type=Path))
@click.argument("tour", type=click.Path(exists=True, path_type=Path))
def verify(instance, tour):
    """Check a stored tour against its instance's invariants."""
    from .harness import verify_instance_tour
    try:
        verify_instance_tour(instance, tour)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"invalid tour: {exc}")
    click.echo("tour ok")


@main.command("validate-scenario")
@click.argument("scenario")
def validate_scenario(scenario):
    """Structural checks on a scenario bundle (name or path)."""
    from .harness import validate_scenario_report
    try:
        report = validate_scenario_report(scenario)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"invalid scenario: {exc}")
    click.echo(json.dumps(report, indent=1))
    click.echo("scenario ok")


@main.command("export-scenario")
@click.argument("name")
@click.argument("dest", type=click.Path(path_type=Path))
def export_scenario(name, dest):
    """Write a shipped scenario out as an editable bundle file."""
    from .scenarios import resolve_scenario, save_scenario
    try:
        sc = resolve_scenario(name)
    except (OSError, ValueError, KeyError) as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}")
    save_scenario(sc, dest)
    click.echo(f"wrote {dest}")


if __name__ == "__main__":
    main()
