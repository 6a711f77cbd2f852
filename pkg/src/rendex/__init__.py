"""rendex: energy-aware collaborative air-ground exploration, desk scale.

A library and CLI that simulate a two-robot team — an energy-limited
aerial vehicle recharged by its ground partner — exploring an unknown
voxel world through budgeted rendezvous tours planned over a layered
probabilistic roadmap with coupled orienteering tours.
"""

__version__ = "0.1.0"

from .grid_map import (Config, SensorModel, VoxelMap, WorldModel,
                       best_yaw_gain, coverage_fraction, info_gain,
                       integrate_scan)
from .mission import (MissionConfig, MissionLog, run_mission, run_strategy,
                      run_terra_seq, run_uav_only)
from .op_solver import OpInstance, Tour, brute_force_op, solve_op
from .roadmap import Roadmap, SamplingParams, expand_roadmap, shortest_path
from .scenarios import Scenario, load_scenario, resolve_scenario, save_scenario

__all__ = [
    "Config", "SensorModel", "VoxelMap", "WorldModel",
    "best_yaw_gain", "coverage_fraction", "info_gain", "integrate_scan",
    "MissionConfig", "MissionLog", "run_mission", "run_strategy",
    "run_terra_seq", "run_uav_only",
    "OpInstance", "Tour", "brute_force_op", "solve_op",
    "Roadmap", "SamplingParams", "expand_roadmap", "shortest_path",
    "Scenario", "load_scenario", "resolve_scenario", "save_scenario",
    "__version__",
]
