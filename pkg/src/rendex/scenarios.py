"""Shipped desk-scale scenarios and the scenario bundle file format.

A scenario bundle is a JSON document with a ``world`` section (grid
dimensions, resolution, ground height, primitive solids, explicit
unreachable regions) and a ``mission`` section naming every mission knob
(tau_a_max, v_uav, v_ugv, tau_c, lambda, d_min, d_max, n_max_uav,
n_max_ugv, sensor blocks, ...).  Three environments ship with the
package:

* ``env1_tunnel_scaffold`` — a dead-end tunnel only the ground robot can
  enter plus a walled scaffold bay whose inside is visible only from the
  air: neither robot alone can finish the map.
* ``env2_cluttered`` — walls with doorways and assorted pillars.
* ``env3_open`` — a mostly open hall with sparse obstacles, start at the
  centre.

Worlds are compiled once: residual space (voxels no sensor placement can
ever map) is removed from the coverage denominator by flood-filling free
space from the start pose and keeping only that component plus its
occupied surface shell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from .grid_map import (OCCUPIED, SensorModel, WorldModel,
                       compute_reachable_mask, evenly_spaced_yaws,
                       world_from_dict, world_to_dict)
from .mission import MissionConfig
from .roadmap import SamplingParams

SHIPPED_SCENARIOS = ("env1_tunnel_scaffold", "env2_cluttered", "env3_open")


@dataclass(frozen=True)
class Scenario:
    name: str
    world: WorldModel
    config: MissionConfig
    regions: dict | None = None   # named boxes of interest, for analysis


def _finalize(world: WorldModel, config: MissionConfig) -> WorldModel:
    start = (config.start_xy[0], config.start_xy[1], world.ground_z)
    world.reachable_mask = compute_reachable_mask(world, start)
    return world


def _desk_config(start_xy, takeoff_z=1.1, slice_heights=(0.3, 1.1, 1.9, 2.3),
                 **kw) -> MissionConfig:
    sampling = SamplingParams(slice_heights=tuple(slice_heights))
    return MissionConfig(start_xy=start_xy, takeoff_z=takeoff_z,
                         sampling=sampling, **kw)


def build_env1_tunnel_scaffold() -> Scenario:
    """12 x 12 x 3.2 m: dead-end tunnel (ground-only) along the north
    wall, walled scaffold bay (air-only interior) in the north-west,
    plus pillar clutter."""
    world = WorldModel((60, 60, 14), 0.2, ground_z=0.3)

    # tunnel: interior x in [7.0, 11.4], y in [10.2, 11.4], z < 0.6;
    # mouth faces west, east end capped
    world.add_box((7.0, 9.8, 0.0), (11.6, 10.2, 0.6))     # south wall
    world.add_box((7.0, 11.4, 0.0), (11.6, 11.8, 0.6))    # north wall
    world.add_box((11.4, 10.2, 0.0), (11.6, 11.4, 0.6))   # east cap
    world.add_box((7.0, 9.8, 0.6), (11.6, 11.8, 0.8))     # roof

    # scaffold bay: walls to z=1.4 around a solid pedestal to z=1.0;
    # the shell above the pedestal is only visible from above
    world.add_box((0.8, 8.0, 0.0), (4.0, 8.4, 1.4))       # south wall
    world.add_box((0.8, 10.8, 0.0), (4.0, 11.2, 1.4))     # north wall
    world.add_box((0.8, 8.4, 0.0), (1.2, 10.8, 1.4))      # west wall
    world.add_box((3.6, 8.4, 0.0), (4.0, 10.8, 1.4))      # east wall
    world.add_box((1.2, 8.4, 0.0), (3.6, 10.8, 1.0))      # pedestal (deck)

    world.add_cylinder((8.0, 4.0), 0.5, 0.0, 2.0)
    world.add_box((4.6, 6.2, 0.0), (5.4, 7.0, 1.2))

    config = _desk_config(start_xy=(2.0, 2.0))
    world = _finalize(world, config)
    regions = {
        "tunnel_deep": {"min": [9.4, 10.2, 0.0], "max": [11.4, 11.4, 0.6]},
        "scaffold_shell": {"min": [1.2, 8.4, 1.0], "max": [3.6, 10.8, 1.4]},
    }
    return Scenario("env1_tunnel_scaffold", world, config, regions)


def build_env2_cluttered() -> Scenario:
    """12 x 12 x 3.2 m: two dividing walls with doorways, a low wall the
    aerial robot can overfly, and mixed pillar clutter."""
    world = WorldModel((60, 60, 14), 0.2, ground_z=0.3)
    world.add_box((5.8, 0.0, 0.0), (6.2, 3.0, 2.2))
    world.add_box((5.8, 4.2, 0.0), (6.2, 8.0, 2.2))
    world.add_box((5.8, 8.0, 0.0), (6.2, 12.0, 1.0))      # low wall section
    world.add_box((8.0, 5.8, 0.0), (9.4, 6.2, 2.2))
    world.add_box((10.6, 5.8, 0.0), (12.0, 6.2, 2.2))
    world.add_cylinder((3.0, 8.0), 0.6, 0.0, 2.6)
    world.add_cylinder((9.5, 9.5), 0.5, 0.0, 1.6)
    world.add_box((2.0, 4.6, 0.0), (3.2, 5.4, 0.8))

    config = _desk_config(start_xy=(2.0, 2.0))
    world = _finalize(world, config)
    return Scenario("env2_cluttered", world, config, None)


def build_env3_open() -> Scenario:
    """10 x 10 x 2.8 m open hall, sparse obstacles, start at the centre."""
    world = WorldModel((50, 50, 14), 0.2, ground_z=0.3)
    world.add_cylinder((2.5, 7.5), 0.5, 0.0, 1.8)
    world.add_box((7.0, 2.4, 0.0), (8.0, 3.2, 1.2))
    world.add_box((7.6, 7.6, 0.0), (8.4, 8.4, 2.0))

    config = _desk_config(start_xy=(5.0, 5.0))
    world = _finalize(world, config)
    return Scenario("env3_open", world, config, None)


_BUILDERS = {
    "env1_tunnel_scaffold": build_env1_tunnel_scaffold,
    "env2_cluttered": build_env2_cluttered,
    "env3_open": build_env3_open,
}


# ---------------------------------------------------------------------------
# bundle serialization
# ---------------------------------------------------------------------------

def _sensor_to_dict(s: SensorModel) -> dict:
    return {"range": s.range_m, "h_fov": s.h_fov, "v_fov": s.v_fov,
            "yaw_count": len(s.yaw_set), "mount_kind": s.mount_kind}


def _sensor_from_dict(doc: dict, mount: str) -> SensorModel:
    yaws = evenly_spaced_yaws(doc["yaw_count"]) if doc.get("yaw_count") else ()
    return SensorModel(doc["range"], doc["h_fov"], doc["v_fov"], yaws,
                       doc.get("mount_kind", mount))


def mission_config_to_dict(c: MissionConfig) -> dict:
    s = c.sampling
    return {
        "tau_a_max": c.tau_a_max, "v_uav": c.v_uav, "v_ugv": c.v_ugv,
        "tau_c": c.tau_c, "lambda": c.lam,
        "d_min": s.d_min, "d_max": s.d_max,
        "n_max_uav": s.n_max_uav, "n_max_ugv": s.n_max_ugv,
        "k_neighbors": s.k_neighbors, "local_radius": s.local_radius,
        "local_attempts": s.local_attempts, "global_attempts": s.global_attempts,
        "slice_heights": list(s.slice_heights),
        "min_blob_cells": s.min_blob_cells,
        "uav_radius": s.uav_radius, "ugv_radius": s.ugv_radius,
        "ugv_clearance": s.ugv_clearance,
        "z_min": s.z_min, "z_max": s.z_max,
        "uav_sensor": _sensor_to_dict(c.uav_sensor),
        "ugv_sensor": _sensor_to_dict(c.ugv_sensor),
        "coverage_target": c.coverage_target,
        "wall_time_cap": c.wall_time_cap,
        "start": list(c.start_xy), "takeoff_z": c.takeoff_z,
        "scan_interval": c.scan_interval, "cand_cap": c.cand_cap,
        "max_tours": c.max_tours,
    }


def mission_config_from_dict(doc: dict) -> MissionConfig:
    sampling = SamplingParams(
        d_min=doc["d_min"], d_max=doc["d_max"],
        n_max_uav=doc["n_max_uav"], n_max_ugv=doc["n_max_ugv"],
        k_neighbors=doc.get("k_neighbors", 5),
        local_radius=doc.get("local_radius", 2 * doc["d_max"]),
        local_attempts=doc.get("local_attempts", 20),
        global_attempts=doc.get("global_attempts", 20),
        slice_heights=tuple(doc.get("slice_heights", (0.3, 0.7, 1.1))),
        min_blob_cells=doc.get("min_blob_cells", 3),
        uav_radius=doc.get("uav_radius", 0.3),
        ugv_radius=doc.get("ugv_radius", 0.3),
        ugv_clearance=doc.get("ugv_clearance", 0.2),
        z_min=doc.get("z_min", 0.5), z_max=doc.get("z_max"))
    return MissionConfig(
        tau_a_max=doc["tau_a_max"], v_uav=doc["v_uav"], v_ugv=doc["v_ugv"],
        tau_c=doc["tau_c"], lam=doc["lambda"], sampling=sampling,
        uav_sensor=_sensor_from_dict(doc["uav_sensor"], "aerial"),
        ugv_sensor=_sensor_from_dict(doc["ugv_sensor"], "ground"),
        coverage_target=doc.get("coverage_target", 0.95),
        wall_time_cap=doc.get("wall_time_cap", 1800.0),
        start_xy=tuple(doc["start"]), takeoff_z=doc.get("takeoff_z", 1.1),
        scan_interval=doc.get("scan_interval", 1.0),
        cand_cap=doc.get("cand_cap", 25),
        max_tours=doc.get("max_tours", 500))


def scenario_to_dict(sc: Scenario, include_rle: bool = False) -> dict:
    wd = world_to_dict(sc.world)
    if not include_rle:
        wd.pop("occupied_rle", None)
        wd.pop("reachable_rle", None)
    doc = {"name": sc.name, "world": wd,
           "mission": mission_config_to_dict(sc.config)}
    if sc.regions:
        doc["regions"] = sc.regions
    return doc


def scenario_from_dict(doc: dict) -> Scenario:
    config = mission_config_from_dict(doc["mission"])
    world = world_from_dict(doc["world"])
    if "reachable_rle" not in doc["world"]:
        world = _finalize(world, config)
    return Scenario(doc.get("name", "scenario"), world, config,
                    doc.get("regions"))


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=1)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def resolve_scenario(name_or_path: str) -> Scenario:
    """Shipped scenario name, or a path to a bundle file."""
    if name_or_path in _BUILDERS:
        return _BUILDERS[name_or_path]()
    return load_scenario(name_or_path)


def apply_overrides(config: MissionConfig, overrides: dict[str, str]) -> MissionConfig:
    """Apply CLI ``key=value`` overrides onto a mission config.

    Keys use the bundle names (e.g. ``tau_a_max``, ``lambda``, ``d_min``);
    values are parsed as JSON scalars when possible.
    """
    doc = mission_config_to_dict(config)
    for key, raw in overrides.items():
        if key not in doc:
            raise KeyError(f"unknown mission parameter {key!r}")
        try:
            doc[key] = json.loads(raw)
        except json.JSONDecodeError:
            doc[key] = raw
    return mission_config_from_dict(doc)


def with_run_settings(config: MissionConfig, strategy: str | None = None,
                      seed: int | None = None) -> MissionConfig:
    kw = {}
    if strategy is not None:
        kw["strategy"] = strategy
    if seed is not None:
        kw["seed"] = seed
    return replace(config, **kw) if kw else config
