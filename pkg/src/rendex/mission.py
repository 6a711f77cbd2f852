"""Integrated exploration missions: tour loop, simulated execution,
recharging, release handoff, termination, and the two baseline strategies.

Simulated time model
--------------------
Robots traverse tour edges at constant average speeds.  In the proposed
strategy both robots move concurrently, so a tour's exploration (travel)
time is ``max(tau_a, tau_g)``; the sequential baseline adds the two legs
instead.  Total mission time stacks exploration time, the recharge dwell
after each flight, and planning compute time.  To keep logs
bit-reproducible the logged per-tour compute time is the modeled value
0.0; measured planning wall time is reported separately in the
(non-deterministic) summary field ``measured_planning_wall_s`` and never
enters simulated time.

Scans fire at every visited roadmap node and every ``scan_interval``
metres along traversed edges.  Each newly mapped voxel is attributed to
the robot whose scan first mapped it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .coordination import (GainCache, RendezvousPair, TourPlan, _layer_instance,
                           candidate_set, pair_utility, plan_to_dict,
                           plan_tour_pair, refresh_layer_rewards)
from .grid_map import (FREE, UNKNOWN, Config, SensorModel, VoxelMap,
                       WorldModel, coverage_fraction, evenly_spaced_yaws,
                       integrate_scan)
from .op_solver import Tour, solve_op
from .roadmap import (Roadmap, SamplingParams, body_voxel_indices, config_free,
                      expand_roadmap, segment_free, shortest_path,
                      single_source_distances, validate_rendezvous_edge)

STRATEGIES = ("proposed", "uav_only", "terra_seq")

UAV_CODE = 1
UGV_CODE = 2


class InvalidScenario(ValueError):
    """Initial deployment is in collision or outside the world."""


class StalePlan(ValueError):
    """Plan references roadmap nodes that no longer exist."""


@dataclass(frozen=True)
class MissionConfig:
    """All mission knobs; defaults are the desk-scale parameter set."""

    tau_a_max: float = 60.0        # max continuous flight time, s
    v_uav: float = 0.5             # average aerial speed, m/s
    v_ugv: float = 0.34            # average ground speed, m/s
    tau_c: float = 5.0             # recharge dwell between flights, s
    lam: float = 0.001             # utility distance weight, 1/m
    sampling: SamplingParams = field(default_factory=SamplingParams)
    uav_sensor: SensorModel = field(default_factory=lambda: SensorModel(
        2.0, 90.0, 90.0, evenly_spaced_yaws(4), "aerial"))
    ugv_sensor: SensorModel = field(default_factory=lambda: SensorModel(
        5.0, 360.0, 30.0, (), "ground"))
    coverage_target: float = 0.95
    wall_time_cap: float = 2400.0  # simulated seconds
    strategy: str = "proposed"
    seed: int = 0
    start_xy: tuple[float, float] = (2.0, 2.0)
    takeoff_z: float = 1.1
    scan_interval: float = 1.0     # metres between in-motion scans
    cand_cap: int = 25
    max_tours: int = 500           # hard safety stop

    def __post_init__(self):
        if self.v_uav <= 0 or self.v_ugv <= 0:
            raise ValueError("speeds must be positive")
        if self.tau_a_max <= 0:
            raise ValueError("tau_a_max must be positive")
        if not (0 < self.coverage_target <= 1):
            raise ValueError("coverage_target must be in (0, 1]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")

    @property
    def budget_uav(self) -> float:
        return self.tau_a_max * self.v_uav

    @property
    def budget_ugv(self) -> float:
        return self.tau_a_max * self.v_ugv


@dataclass
class TourRecord:
    index: int
    tau_a: float
    tau_g: float
    fallback: bool
    compute_ms: float
    coverage_after: float
    exploration_cum: float
    total_cum: float
    newly_uav: int
    newly_ugv: int
    uav_length: float
    ugv_length: float
    plan_doc: dict | None = None


@dataclass
class MissionLog:
    strategy: str
    seed: int
    initial_coverage: float = 0.0
    records: list[TourRecord] = field(default_factory=list)
    final_coverage: float = 0.0
    stop_reason: str = ""
    measured_planning_wall_s: float = 0.0
    attribution_uav: int = 0
    attribution_ugv: int = 0
    context: "ExecutionContext | None" = None

    @property
    def n_tours(self) -> int:
        return len(self.records)

    def time_to_coverage(self, threshold: float) -> float | None:
        """Cumulative pure exploration time at the end of the first tour
        whose coverage reaches ``threshold`` (0.0 when the initial scan
        already suffices; None when never reached)."""
        if self.initial_coverage >= threshold:
            return 0.0
        for rec in self.records:
            if rec.coverage_after >= threshold:
                return rec.exploration_cum
        return None

    def summary(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "n_tours": self.n_tours,
            "t80": self.time_to_coverage(0.80),
            "t95": self.time_to_coverage(0.95),
            "initial_coverage": self.initial_coverage,
            "final_coverage": self.final_coverage,
            "exploration_time": self.records[-1].exploration_cum if self.records else 0.0,
            "total_time": self.records[-1].total_cum if self.records else 0.0,
            "stop_reason": self.stop_reason,
            "attribution": {"uav": self.attribution_uav, "ugv": self.attribution_ugv},
            "measured_planning_wall_s": self.measured_planning_wall_s,
        }

    def csv_rows(self) -> list[list]:
        rows = [["tour", "t_exploration_cum", "t_total_cum", "coverage",
                 "tau_a", "tau_g", "fallback", "compute_ms"]]
        for r in self.records:
            rows.append([r.index, r.exploration_cum, r.total_cum,
                         r.coverage_after, r.tau_a, r.tau_g,
                         int(r.fallback), r.compute_ms])
        return rows

    def coverage_series(self) -> list[tuple[float, float]]:
        pts = [(0.0, self.initial_coverage)]
        pts += [(r.total_cum, r.coverage_after) for r in self.records]
        return pts


class ExecutionContext:
    """Mutable mission state shared by planning and execution."""

    def __init__(self, config: MissionConfig, world: WorldModel,
                 vmap: VoxelMap, G: Roadmap, rng: np.random.Generator):
        self.config = config
        self.world = world
        self.vmap = vmap
        self.G = G
        self.rng = rng
        self.cache = GainCache()
        self.attribution = np.zeros(world.dims, dtype=np.int8)
        self._fresh_points: list[np.ndarray] = []

    def scan(self, position, yaw: float, sensor: SensorModel, robot: int) -> int:
        rec: list[np.ndarray] = []
        cfg = Config(tuple(position), yaw,
                     "uav" if robot == UAV_CODE else "ugv")
        n = integrate_scan(self.vmap, self.world, cfg, sensor, record=rec)
        for arr in rec:
            ix, iy, iz = arr[:, 0], arr[:, 1], arr[:, 2]
            self.attribution[ix, iy, iz] = robot
            self._fresh_points.append((arr + 0.5) * self.vmap.resolution)
        return n

    def flush_cache_invalidation(self) -> None:
        if not self._fresh_points:
            return
        pts = np.concatenate(self._fresh_points)
        r = self.vmap.resolution
        self.cache.invalidate_near(self.G, pts, {
            "uav": self.config.uav_sensor.range_m + r,
            "ugv": self.config.ugv_sensor.range_m + r,
        })
        self._fresh_points.clear()


@dataclass(frozen=True)
class ExecResult:
    tau_a: float
    tau_g: float
    newly_uav: int
    newly_ugv: int


@dataclass(frozen=True)
class StepResult:
    release: RendezvousPair
    exploration: float
    recharge: float
    tau_a: float
    tau_g: float
    fallback: bool
    newly_uav: int
    newly_ugv: int
    plan_doc: dict | None
    plan_wall_s: float


def _tour_scan_events(ctx: ExecutionContext, tour: Tour, speed: float,
                      robot: int) -> list[tuple[float, int, tuple, float]]:
    """(time, robot, position, yaw) scan events along a tour: one at every
    node (heading = the node's refreshed best yaw, when directional) plus
    one every ``scan_interval`` metres inside each edge (heading = travel
    direction)."""
    G = ctx.G
    interval = ctx.config.scan_interval
    events = []
    first = G.nodes[tour.nodes[0]]
    yaw0 = first.best_yaw if first.best_yaw is not None else first.config.yaw
    events.append((0.0, robot, tuple(first.position()), yaw0))
    t = 0.0
    for a, b in zip(tour.nodes, tour.nodes[1:]):
        pa, pb = G.nodes[a].position(), G.nodes[b].position()
        seg = pb - pa
        seg_len = float(np.linalg.norm(seg))
        heading = math.atan2(seg[1], seg[0])
        k = 1
        while k * interval < seg_len:
            frac = k * interval / seg_len
            pos = pa + frac * seg
            events.append((t + k * interval / speed, robot, tuple(pos), heading))
            k += 1
        t += seg_len / speed
        nb = G.nodes[b]
        yaw = nb.best_yaw if nb.best_yaw is not None else nb.config.yaw
        events.append((t, robot, tuple(nb.position()), yaw))
    return events


def _check_plan_nodes(ctx, plan: TourPlan) -> None:
    for tour in (plan.sigma_uav, plan.sigma_ugv):
        if tour is None:
            continue
        for nid in tour.nodes:
            if nid not in ctx.G.nodes:
                raise StalePlan(f"plan references unknown node {nid}")


def execute_paths(ctx: ExecutionContext, plan: TourPlan,
                  sequential: bool = False) -> ExecResult:
    """Traverse both tours, firing scans as the robots move.

    Concurrent execution interleaves the two robots' scan events by
    simulated time (aerial first on exact ties); ``sequential`` runs the
    ground leg entirely before the aerial leg instead.  Returns per-robot
    travel times and newly-mapped voxel counts.
    """
    _check_plan_nodes(ctx, plan)
    cfg = ctx.config
    events = []
    tau_g = 0.0
    if plan.sigma_ugv is not None:
        tau_g = plan.sigma_ugv.total_length / cfg.v_ugv
        events += _tour_scan_events(ctx, plan.sigma_ugv, cfg.v_ugv, UGV_CODE)
    tau_a = 0.0
    if plan.sigma_uav is not None:
        tau_a = plan.sigma_uav.total_length / cfg.v_uav
        offset = tau_g if sequential else 0.0
        events += [(t + offset, robot, pos, yaw) for t, robot, pos, yaw
                   in _tour_scan_events(ctx, plan.sigma_uav, cfg.v_uav, UAV_CODE)]
    events.sort(key=lambda e: (e[0], e[1]))
    newly = {UAV_CODE: 0, UGV_CODE: 0}
    for _, robot, pos, yaw in events:
        sensor = cfg.uav_sensor if robot == UAV_CODE else cfg.ugv_sensor
        newly[robot] += ctx.scan(pos, yaw, sensor, robot)
    ctx.flush_cache_invalidation()
    return ExecResult(tau_a, tau_g, newly[UAV_CODE], newly[UGV_CODE])


# ---------------------------------------------------------------------------
# mission bootstrap
# ---------------------------------------------------------------------------

def _bootstrap(config: MissionConfig, world: WorldModel,
               initial_map: VoxelMap | None,
               ugv_sensing: bool = True) -> tuple[ExecutionContext, RendezvousPair]:
    """Validate the deployment against ground truth, run the initial
    360-degree aerial scan, and seed the roadmap with the physical
    release pair.  The seed rendezvous edge reflects the actual docking,
    so it is checked against truth rather than the still-empty map."""
    x, y = config.start_xy
    gz = world.ground_z
    ground_pos = (x, y, gz)
    air_pos = (x, y, config.takeoff_z)
    truth_map = VoxelMap(world.dims, world.resolution, state=world.truth.copy())
    if not (truth_map.in_bounds(ground_pos) and truth_map.in_bounds(air_pos)):
        raise InvalidScenario("start pose outside the world")
    if not config_free(truth_map, ground_pos, "ugv", config.sampling):
        raise InvalidScenario("ground start pose is in collision")
    if not config_free(truth_map, air_pos, "uav", config.sampling,
                       z_band=config.sampling.z_band(truth_map)):
        raise InvalidScenario("aerial start pose is in collision")
    if not validate_rendezvous_edge(truth_map, Config(air_pos, 0.0, "uav"),
                                    Config(ground_pos, 0.0, "ugv")):
        raise InvalidScenario("takeoff corridor at the start pose is blocked")

    vmap = initial_map.copy() if initial_map is not None else VoxelMap.blank_like(world)
    rng = np.random.default_rng(config.seed)
    G = Roadmap()
    ctx = ExecutionContext(config, world, vmap, G, rng)

    yaws = evenly_spaced_yaws(4) if config.uav_sensor.yaw_set else (0.0,)
    for yaw in yaws:
        ctx.scan(air_pos, yaw, config.uav_sensor, UAV_CODE)
    if ugv_sensing:
        # the ground robot's sensor is also live at deployment; one static
        # scan seeds the traversable neighbourhood the first tour plans over
        ctx.scan(ground_pos, 0.0, config.ugv_sensor, UGV_CODE)

    # The sensors' vertical FOV leaves a blind cone around the robots
    # themselves, but the space a robot occupies (and the column the
    # takeoff traversed) is known free by physical evidence; fold that in
    # so the seed pair is usable by planning.  A parked charging station
    # (ugv_sensing off) contributes nothing.
    if ugv_sensing:
        _mark_known_free(ctx, ground_pos, "ugv", UGV_CODE)
    _mark_known_free(ctx, air_pos, "uav", UAV_CODE)
    r = world.resolution
    ix, iy = int(x / r), int(y / r)
    k0, k1 = int(gz / r), int(config.takeoff_z / r)
    col = np.array([[ix, iy, k] for k in range(min(k0, k1), max(k0, k1) + 1)])
    _claim_free_voxels(ctx, col, UAV_CODE)
    ctx.flush_cache_invalidation()

    gid = G.add_node(Config(ground_pos, 0.0, "ugv"), stage="seed")
    aid = G.add_node(Config(air_pos, 0.0, "uav"), stage="seed")
    G.add_edge(aid, gid, "rendezvous")
    return ctx, RendezvousPair(gid, aid)


def _claim_free_voxels(ctx: ExecutionContext, idx: np.ndarray, robot: int) -> None:
    """Mark truth-free voxels as mapped free (occupancy evidence)."""
    if idx.size == 0:
        return
    dims = np.asarray(ctx.world.dims)
    idx = idx[np.all((idx >= 0) & (idx < dims), axis=1)]
    ix, iy, iz = idx[:, 0], idx[:, 1], idx[:, 2]
    fresh = (ctx.world.truth[ix, iy, iz] == FREE) & (ctx.vmap.state[ix, iy, iz] == UNKNOWN)
    idx = idx[fresh]
    if idx.size:
        ix, iy, iz = idx[:, 0], idx[:, 1], idx[:, 2]
        ctx.vmap.state[ix, iy, iz] = FREE
        ctx.attribution[ix, iy, iz] = robot
        ctx._fresh_points.append((idx + 0.5) * ctx.vmap.resolution)


def _mark_known_free(ctx: ExecutionContext, position, layer: str, robot: int) -> None:
    s = ctx.config.sampling
    if layer == "uav":
        idx = body_voxel_indices(ctx.vmap.resolution, position, s.uav_radius)
    else:
        idx = body_voxel_indices(ctx.vmap.resolution, position, s.ugv_radius,
                                 half_height=s.ugv_clearance)
    _claim_free_voxels(ctx, idx, robot)


def _release_configs(ctx: ExecutionContext, release: RendezvousPair
                     ) -> tuple[Config, Config]:
    gnd = ctx.G.nodes[release.ground].config
    if release.aerial is not None:
        air = ctx.G.nodes[release.aerial].config
    else:
        air = Config((gnd.position[0], gnd.position[1], ctx.config.takeoff_z),
                     gnd.yaw, "uav")
    return air, gnd


def _aerial_release_for(ctx: ExecutionContext, ground_id: int) -> int | None:
    """Aerial node docked above a ground node: reuse its rendezvous
    partner, else synthesize one at takeoff height when the map now
    supports it.  May legitimately fail (e.g. inside a tunnel); the next
    tour then starts without an aerial release and plans a fallback."""
    G = ctx.G
    airs = G.airs_of_ground.get(ground_id)
    if airs:
        return airs[0]
    cfg = ctx.config
    p = G.nodes[ground_id].position()
    air_pos = (float(p[0]), float(p[1]), cfg.takeoff_z)
    band = cfg.sampling.z_band(ctx.vmap)
    if not config_free(ctx.vmap, air_pos, "uav", cfg.sampling, z_band=band):
        return None
    air_cfg = Config(air_pos, G.nodes[ground_id].config.yaw, "uav")
    if not validate_rendezvous_edge(ctx.vmap, air_cfg, G.nodes[ground_id].config):
        return None
    aid = G.add_node(air_cfg, stage="projection")
    G.add_edge(aid, ground_id, "rendezvous")
    for other in G.ids_within("uav", np.asarray(air_pos), cfg.sampling.d_max):
        if other != aid and not G.has_edge(aid, other) and segment_free(
                ctx.vmap, np.asarray(air_pos), G.nodes[other].position(),
                "uav", cfg.sampling):
            G.add_edge(aid, other, "uav")
    return aid


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------

def _loop(config: MissionConfig, world: WorldModel, initial_map: VoxelMap | None,
          step_fn, ugv_sensing: bool = True) -> tuple[VoxelMap, MissionLog]:
    """Common tour loop: termination checks, time bookkeeping, logging.

    ``step_fn(ctx, release)`` runs one tour and returns a StepResult, or
    None when the strategy has nothing left to try.  The loop stops on
    coverage target, simulated time cap, two consecutive zero-progress
    tours (no travel and nothing newly mapped), or the hard tour cap.
    """
    ctx, release = _bootstrap(config, world, initial_map, ugv_sensing)
    log = MissionLog(config.strategy, config.seed)
    log.initial_coverage = coverage_fraction(ctx.vmap, world)
    cov = log.initial_coverage
    exploration_cum = 0.0
    total_cum = 0.0
    zero_progress = 0

    while True:
        if cov >= config.coverage_target:
            log.stop_reason = "coverage_target"
            break
        if total_cum >= config.wall_time_cap:
            log.stop_reason = "time_cap"
            break
        if zero_progress >= 2:
            log.stop_reason = "stagnation"
            break
        if len(log.records) >= config.max_tours:
            log.stop_reason = "max_tours"
            break

        step = step_fn(ctx, release)
        if step is None:
            log.stop_reason = "exhausted"
            break
        release = step.release
        log.measured_planning_wall_s += step.plan_wall_s

        exploration_cum += step.exploration
        total_cum += step.exploration + step.recharge  # + modeled compute (0.0)
        cov = coverage_fraction(ctx.vmap, world)
        log.records.append(TourRecord(
            index=len(log.records) + 1, tau_a=step.tau_a, tau_g=step.tau_g,
            fallback=step.fallback, compute_ms=0.0, coverage_after=cov,
            exploration_cum=exploration_cum, total_cum=total_cum,
            newly_uav=step.newly_uav, newly_ugv=step.newly_ugv,
            uav_length=step.tau_a * config.v_uav,
            ugv_length=step.tau_g * config.v_ugv,
            plan_doc=step.plan_doc))
        if step.newly_uav + step.newly_ugv == 0 and step.exploration == 0.0:
            zero_progress += 1
        else:
            zero_progress = 0

    log.final_coverage = cov
    log.attribution_uav = int(np.count_nonzero(ctx.attribution == UAV_CODE))
    log.attribution_ugv = int(np.count_nonzero(ctx.attribution == UGV_CODE))
    log.context = ctx
    return ctx.vmap, log


def run_mission(config: MissionConfig, world: WorldModel,
                initial_map: VoxelMap | None = None) -> tuple[VoxelMap, MissionLog]:
    """Concurrent air-ground exploration with per-tour rendezvous."""

    def step(ctx: ExecutionContext, release: RendezvousPair) -> StepResult:
        cfg = ctx.config
        t0 = time.perf_counter()
        cfg_air, cfg_gnd = _release_configs(ctx, release)
        expand_roadmap(ctx.G, ctx.vmap, ctx.world, cfg_air, cfg_gnd,
                       cfg.sampling, ctx.rng)
        cands = candidate_set(ctx.G, ctx.vmap, cfg.uav_sensor,
                              cand_cap=cfg.cand_cap, cache=ctx.cache)
        refresh_layer_rewards(ctx.G, ctx.vmap, "ugv", cfg.ugv_sensor,
                              cache=ctx.cache)
        plan = plan_tour_pair(ctx.G, release, cands, cfg.budget_uav,
                              cfg.budget_ugv, cfg.lam, ctx.rng)
        plan_doc = plan_to_dict(ctx.G, plan)
        plan_wall = time.perf_counter() - t0

        res = execute_paths(ctx, plan)
        recharge = cfg.tau_c if plan.sigma_uav is not None else 0.0
        exploration = max(res.tau_a, res.tau_g)

        new_ground = plan.sigma_ugv.nodes[-1]
        if plan.sigma_uav is not None:
            new_air = plan.sigma_uav.nodes[-1]
        else:
            new_air = _aerial_release_for(ctx, new_ground)
        return StepResult(RendezvousPair(new_ground, new_air), exploration,
                          recharge, res.tau_a, res.tau_g, plan.fallback,
                          res.newly_uav, res.newly_ugv, plan_doc, plan_wall)

    return _loop(config, world, initial_map, step)


def run_uav_only(config: MissionConfig, world: WorldModel,
                 initial_map: VoxelMap | None = None) -> tuple[VoxelMap, MissionLog]:
    """Baseline: the aerial robot explores alone and must return to the
    static charging station at the origin after every tour; the ground
    robot stays parked and never senses."""

    def step(ctx: ExecutionContext, release: RendezvousPair) -> StepResult:
        cfg = ctx.config
        t0 = time.perf_counter()
        cfg_air, cfg_gnd = _release_configs(ctx, release)
        expand_roadmap(ctx.G, ctx.vmap, ctx.world, cfg_air, cfg_gnd,
                       cfg.sampling, ctx.rng, layers=("uav",))
        refresh_layer_rewards(ctx.G, ctx.vmap, "uav", cfg.uav_sensor,
                              cache=ctx.cache)
        origin_air = release.aerial
        inst = _layer_instance(ctx.G, "uav", origin_air, origin_air,
                               cfg.budget_uav)
        flight = solve_op(inst, ctx.rng)
        plan_wall = time.perf_counter() - t0
        if len(flight.nodes) <= 1 and flight.total_reward <= 0:
            # nothing reachable is worth a flight: a no-op tour lets the
            # zero-progress guard end the mission
            return StepResult(release, 0.0, 0.0, 0.0, 0.0, True, 0, 0,
                              {"sigma_uav": None, "sigma_ugv": None,
                               "collect": None, "fallback": True}, plan_wall)
        plan = TourPlan(flight, None,
                        RendezvousPair(release.ground, origin_air), False)
        res = execute_paths(ctx, plan)
        return StepResult(release, res.tau_a, cfg.tau_c, res.tau_a, 0.0,
                          False, res.newly_uav, 0,
                          plan_to_dict(ctx.G, plan), plan_wall)

    return _loop(config, world, initial_map, step, ugv_sensing=False)


def run_terra_seq(config: MissionConfig, world: WorldModel,
                  initial_map: VoxelMap | None = None) -> tuple[VoxelMap, MissionLog]:
    """Baseline: the ground robot carries the aerial one between release
    points (chosen by raw gain, no travel penalty or budget), waits while
    it flies a closed tour, and only senses while driving.  The two
    robots never explore concurrently."""

    def step(ctx: ExecutionContext, release: RendezvousPair) -> StepResult | None:
        cfg = ctx.config
        t0 = time.perf_counter()
        cfg_air, cfg_gnd = _release_configs(ctx, release)
        expand_roadmap(ctx.G, ctx.vmap, ctx.world, cfg_air, cfg_gnd,
                       cfg.sampling, ctx.rng)
        cands = candidate_set(ctx.G, ctx.vmap, cfg.uav_sensor,
                              cand_cap=cfg.cand_cap, cache=ctx.cache)
        refresh_layer_rewards(ctx.G, ctx.vmap, "ugv", cfg.ugv_sensor,
                              cache=ctx.cache)
        dist_g = single_source_distances(ctx.G, "ugv", release.ground)
        best = None
        for air_id in cands:
            gnd_id = ctx.G.partner_of_air.get(air_id)
            if gnd_id is None or gnd_id not in dist_g:
                continue
            gain = ctx.G.nodes[air_id].reward
            util = pair_utility(gain, dist_g[gnd_id], 0.0)
            key = (-util, -gain, dist_g[gnd_id], air_id)
            if best is None or key < best[0]:
                best = (key, air_id, gnd_id)
        if best is None:
            return None
        _, air_id, gnd_id = best
        path, length = shortest_path(ctx.G, "ugv", release.ground, gnd_id)
        drive = Tour(tuple(path), length,
                     sum(ctx.G.nodes[n].reward for n in set(path)))
        inst = _layer_instance(ctx.G, "uav", air_id, air_id, cfg.budget_uav)
        flight = solve_op(inst, ctx.rng)
        flew = len(flight.nodes) > 1 or flight.total_reward > 0
        plan = TourPlan(flight if flew else None, drive,
                        RendezvousPair(gnd_id, air_id) if flew else None,
                        not flew)
        plan_wall = time.perf_counter() - t0
        res = execute_paths(ctx, plan, sequential=True)
        exploration = res.tau_a + res.tau_g  # strictly sequential legs
        recharge = cfg.tau_c if flew else 0.0
        return StepResult(RendezvousPair(gnd_id, air_id), exploration,
                          recharge, res.tau_a, res.tau_g, plan.fallback,
                          res.newly_uav, res.newly_ugv,
                          plan_to_dict(ctx.G, plan), plan_wall)

    return _loop(config, world, initial_map, step)


def run_strategy(config: MissionConfig, world: WorldModel,
                 initial_map: VoxelMap | None = None) -> tuple[VoxelMap, MissionLog]:
    runner = {"proposed": run_mission, "uav_only": run_uav_only,
              "terra_seq": run_terra_seq}[config.strategy]
    return runner(config, world, initial_map)
