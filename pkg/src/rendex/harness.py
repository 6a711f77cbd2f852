"""Run orchestration: single seeded missions, benchmark sweeps over
strategies and seeds, metric aggregation, and artifact emission.

Every run writes a fixed artifact set under its output directory:

* ``log.csv``              per-tour log (deterministic bytes for a given
                           scenario/strategy/seed)
* ``summary.json``         headline metrics plus non-deterministic wall
                           time measurements
* ``coverage_series.csv``  coverage vs total mission time
* ``final_map.json``       occupancy snapshot (run-length encoded)
* ``roadmap.json``         final graph (nodes/edges)
* ``plans.json``           per-tour waypoint plans
* ``figures/*.png``        rendered coverage curve and top-down map

Benchmarks run the scenario x strategy x seed cross product in a process
pool, then write ``aggregate.csv`` (mean +- std per cell, recomputable
from the per-run files) and an aligned-text rendering of the same table,
plus per-scenario comparison figures.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .grid_map import map_to_dict
from .mission import STRATEGIES, MissionLog, run_strategy
from .op_solver import (Infeasible, TooLarge, brute_force_op,
                        instance_from_dict, solve_op, tour_to_dict,
                        verify_tour)
from .scenarios import (Scenario, apply_overrides, resolve_scenario,
                        with_run_settings)

AGGREGATE_FIELDS = ("t80", "t95", "n_tours", "final_coverage")


@dataclass(frozen=True)
class BenchmarkSpec:
    scenarios: tuple[str, ...]
    strategies: tuple[str, ...]
    seeds: tuple[int, ...]
    out_dir: Path

    def __post_init__(self):
        if not (self.scenarios and self.strategies and self.seeds):
            raise ValueError("scenarios, strategies and seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")


# ---------------------------------------------------------------------------
# deterministic CSV
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, rows: list[list]) -> None:
    text = "\n".join(",".join(_fmt(v) for v in row) for row in rows) + "\n"
    Path(path).write_text(text)


def load_csv(path: Path) -> list[list]:
    """Typed load: ints stay ints, floats parse exactly (repr round-trip)."""
    out = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if i == 0:
                out.append(row)
                continue
            typed = []
            for cell in row:
                try:
                    typed.append(int(cell))
                except ValueError:
                    try:
                        typed.append(float(cell))
                    except ValueError:
                        typed.append(cell)
            out.append(typed)
    return out


# ---------------------------------------------------------------------------
# single run
# ---------------------------------------------------------------------------

def run_single(scenario: str, strategy: str, seed: int, out_dir,
               overrides: dict[str, str] | None = None,
               figures: bool = True) -> dict:
    """Execute one mission and write the full artifact set."""
    sc = resolve_scenario(scenario)
    config = sc.config
    if overrides:
        config = apply_overrides(config, overrides)
    config = with_run_settings(config, strategy=strategy, seed=seed)

    vmap, log = run_strategy(config, sc.world)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "log.csv", log.csv_rows())
    write_csv(out / "coverage_series.csv",
              [["t_total", "coverage"]] +
              [[t, c] for t, c in log.coverage_series()])

    summary = log.summary()
    summary["scenario"] = sc.name
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    (out / "final_map.json").write_text(json.dumps(map_to_dict(vmap)) + "\n")
    (out / "roadmap.json").write_text(
        json.dumps(log.context.G.to_dict(), indent=1) + "\n")
    plans = [{"tour": rec.index, **(rec.plan_doc or {})} for rec in log.records]
    (out / "plans.json").write_text(json.dumps(plans, indent=1) + "\n")

    if figures:
        from . import plots
        figdir = out / "figures"
        figdir.mkdir(exist_ok=True)
        plots.save_coverage_figure(
            log.coverage_series(), figdir / "coverage.png",
            title=f"{sc.name} / {strategy} / seed {seed}",
            target=config.coverage_target)
        plots.save_topdown_figure(sc.world, vmap, log.context.G,
                                  figdir / "map_topdown.png",
                                  title=f"{sc.name} final map ({strategy})")
    return summary


# ---------------------------------------------------------------------------
# benchmark sweep
# ---------------------------------------------------------------------------

def _cell_dir(out_dir: Path, scenario: str, strategy: str, seed: int) -> Path:
    return Path(out_dir) / scenario / strategy / f"seed_{seed}"


def _run_cell(args) -> tuple[str, str, int, dict | None, str]:
    scenario, strategy, seed, out_dir, overrides, figures = args
    try:
        summary = run_single(scenario, strategy, seed,
                             _cell_dir(out_dir, scenario, strategy, seed),
                             overrides=overrides, figures=figures)
        return scenario, strategy, seed, summary, ""
    except Exception as exc:  # recorded; aggregate proceeds for the rest
        return scenario, strategy, seed, None, f"{type(exc).__name__}: {exc}"


def run_benchmark(spec: BenchmarkSpec, jobs: int | None = None,
                  overrides: dict[str, str] | None = None,
                  figures: bool = True) -> tuple[list[list], list[str]]:
    """Run the cross product and aggregate.  Returns (aggregate rows,
    failure messages)."""
    cells = [(sc, st, seed, spec.out_dir, overrides, figures)
             for sc in spec.scenarios for st in spec.strategies
             for seed in spec.seeds]
    jobs = jobs or min(len(cells), os.cpu_count() or 1)
    if jobs > 1 and len(cells) > 1:
        with get_context("spawn").Pool(jobs) as pool:
            results = pool.map(_run_cell, cells)
    else:
        results = [_run_cell(c) for c in cells]

    failures = [f"{sc}/{st}/seed {seed}: {err}"
                for sc, st, seed, summary, err in results if summary is None]
    summaries: dict[tuple[str, str], list[dict]] = {}
    for sc, st, seed, summary, _ in results:
        if summary is not None:
            summaries.setdefault((sc, st), []).append(summary)

    rows = aggregate_rows(summaries)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "aggregate.csv", rows)
    (out / "aggregate.txt").write_text(render_table(rows))
    if figures:
        from . import plots
        for sc_name in spec.scenarios:
            series = {}
            for st in spec.strategies:
                per_seed = []
                for seed in spec.seeds:
                    p = _cell_dir(out, sc_name, st, seed) / "coverage_series.csv"
                    if p.exists():
                        data = load_csv(p)[1:]
                        per_seed.append([(r[0], r[1]) for r in data])
                if per_seed:
                    series[st] = per_seed
            if series:
                plots.save_benchmark_figure(
                    series, out / f"compare_{sc_name}.png",
                    title=f"{sc_name}: coverage vs total mission time")
    return rows, failures


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())  # population std: 1 seed -> 0


def aggregate_rows(summaries: dict[tuple[str, str], list[dict]]) -> list[list]:
    """Per (scenario, strategy): mean +- std of the headline metrics.

    Pure function of the per-run summaries, so the table can always be
    recomputed offline from the run artifacts.  ``t80``/``t95`` means are
    taken over the runs that reached the threshold; ``*_n`` columns count
    them.
    """
    header = ["scenario", "strategy", "runs"]
    for f in AGGREGATE_FIELDS:
        header += [f"{f}_mean", f"{f}_std"]
        if f in ("t80", "t95"):
            header.append(f"{f}_n")
    rows = [header]
    for (sc, st) in sorted(summaries):
        runs = summaries[(sc, st)]
        row: list = [sc, st, len(runs)]
        for f in AGGREGATE_FIELDS:
            vals = [r[f] for r in runs if r[f] is not None]
            if vals:
                m, s = _mean_std(vals)
                row += [m, s]
            else:
                row += ["", ""]
            if f in ("t80", "t95"):
                row.append(len(vals))
        rows.append(row)
    return rows


def render_table(rows: list[list]) -> str:
    """Aligned fixed-width text rendering of the aggregate table."""
    def disp(v):
        if isinstance(v, float):
            return f"{v:.2f}"
        return str(v)

    cells = [[disp(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(rows[0]))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) for c, w in zip(row, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# orienteering file commands
# ---------------------------------------------------------------------------

def oracle_report(instance_path) -> dict:
    """Exact vs heuristic comparison for a small instance file."""
    doc = json.loads(Path(instance_path).read_text())
    inst = instance_from_dict(doc)
    report: dict = {}
    try:
        exact = brute_force_op(inst)
        report["exact"] = tour_to_dict(exact)
    except Infeasible:
        report["exact"] = "infeasible"
    try:
        heur = solve_op(inst, np.random.default_rng(0))
        report["heuristic"] = tour_to_dict(heur)
    except Infeasible:
        report["heuristic"] = "infeasible"
    if isinstance(report["exact"], dict) and isinstance(report["heuristic"], dict):
        opt = report["exact"]["total_reward"]
        got = report["heuristic"]["total_reward"]
        report["gap"] = 0.0 if opt == 0 else (opt - got) / opt
    return report


def solve_instance(instance_path, seed: int = 0) -> dict:
    doc = json.loads(Path(instance_path).read_text())
    inst = instance_from_dict(doc)
    tour = solve_op(inst, np.random.default_rng(seed))
    return tour_to_dict(tour)


def verify_instance_tour(instance_path, tour_path) -> None:
    """Raises ValueError when the stored tour violates any invariant."""
    from .op_solver import Tour
    inst = instance_from_dict(json.loads(Path(instance_path).read_text()))
    doc = json.loads(Path(tour_path).read_text())
    tour = Tour(tuple(doc["nodes"]), doc["total_length"], doc["total_reward"])
    verify_tour(inst, tour)


# ---------------------------------------------------------------------------
# scenario validation
# ---------------------------------------------------------------------------

def validate_scenario_report(scenario: str) -> dict:
    """Structural checks on a scenario bundle; raises on hard errors."""
    sc = resolve_scenario(scenario)
    world, config = sc.world, sc.config
    from .mission import _bootstrap
    ctx, release = _bootstrap(config, world, None)  # raises InvalidScenario
    reach = int(world.reachable_mask.sum())
    return {
        "name": sc.name,
        "dims": list(world.dims),
        "resolution": world.resolution,
        "extent_m": [round(v, 3) for v in world.extent()],
        "reachable_voxels": reach,
        "residual_voxels": int(np.prod(world.dims)) - reach,
        "start": list(config.start_xy),
        "strategies": list(STRATEGIES),
        "budget_uav_m": config.budget_uav,
        "budget_ugv_m": config.budget_ugv,
        "initial_coverage": ctx and float(
            np.count_nonzero((ctx.vmap.state != 0) & world.reachable_mask) / reach),
    }
