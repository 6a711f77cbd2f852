import itertools
import math

import numpy as np
import pytest

from rendex.grid_map import (FREE, OCCUPIED, UNKNOWN, Config, InvalidConfig,
                             NotDirectional, SensorModel, ShapeError, VoxelMap,
                             WorldModel, best_yaw_gain, coverage_fraction,
                             evenly_spaced_yaws, info_gain, integrate_scan,
                             map_from_dict, map_to_dict, world_from_dict,
                             world_to_dict)
from oracles import gain_oracle, scan_oracle

R = 0.2
POSE = (0.5, 1.3, 0.7)   # centre of voxel (2, 6, 3)


def scan_cfg(layer="uav"):
    return Config(POSE, 0.0, layer)


# ---------------------------------------------------------------------------
# integrate_scan
# ---------------------------------------------------------------------------

def test_scan_idempotent(small_world, uav_sensor):
    vmap = VoxelMap.blank_like(small_world)
    first = integrate_scan(vmap, small_world, scan_cfg(), uav_sensor)
    assert first > 0
    assert integrate_scan(vmap, small_world, scan_cfg(), uav_sensor) == 0


def test_scan_facing_wall_matches_ray_march_oracle(small_world, uav_sensor):
    vmap = VoxelMap.blank_like(small_world)
    newly = integrate_scan(vmap, small_world, scan_cfg(), uav_sensor)

    expect = scan_oracle(small_world.truth, R, POSE, 0.0, 1.0, 90.0, 90.0)
    assert newly == len(expect) == 19  # frozen from the oracle
    got = {tuple(i): int(vmap.state[tuple(i)])
           for i in np.argwhere(vmap.state != UNKNOWN)}
    assert got == expect
    occupied = [i for i, lab in got.items() if lab == OCCUPIED]
    assert len(occupied) == 9 and all(i[0] == 4 for i in occupied)
    free = [i for i, lab in got.items() if lab == FREE]
    assert len(free) == 10 and max(i[0] for i in free) <= 3  # nothing past the wall


def test_scan_omnidirectional_range_equals_membership_set(ugv_sensor):
    # open world, 5.0 m range, 30 deg vertical aperture: the mapped set is
    # exactly the voxels whose centre passes the range/elevation test
    world = WorldModel((60, 60, 20), 0.2, ground_z=0.3)
    vmap = VoxelMap.blank_like(world)
    origin = (6.1, 6.1, 2.1)
    newly = integrate_scan(vmap, world, Config(origin, 0.0, "ugv"), ugv_sensor)
    assert newly == 16887  # frozen membership count from the oracle

    mapped = vmap.state != UNKNOWN
    idx = np.indices(world.dims)
    centers = (idx + 0.5) * 0.2
    d = centers - np.asarray(origin).reshape(3, 1, 1, 1)
    dist_sq = (d ** 2).sum(axis=0)
    elev = np.arctan2(d[2], np.hypot(d[0], d[1]))
    member = (dist_sq <= 25.0) & (np.abs(elev) <= math.radians(15.0))
    member[30, 30, 10] = True  # sensor's own voxel
    assert np.array_equal(mapped, member)


def test_scan_rejects_out_of_bounds(small_world, uav_sensor):
    vmap = VoxelMap.blank_like(small_world)
    with pytest.raises(InvalidConfig):
        integrate_scan(vmap, small_world, Config((-1.0, 0.5, 0.5)), uav_sensor)


def test_scan_record_buffer(small_world, uav_sensor):
    vmap = VoxelMap.blank_like(small_world)
    rec = []
    newly = integrate_scan(vmap, small_world, scan_cfg(), uav_sensor, record=rec)
    assert sum(len(a) for a in rec) == newly


# ---------------------------------------------------------------------------
# info_gain
# ---------------------------------------------------------------------------

def test_gain_zero_on_fully_mapped(small_world, uav_sensor):
    vmap = VoxelMap.fully_mapped(small_world)
    for pos in [(0.5, 0.5, 0.5), (1.3, 1.3, 0.7), (2.1, 2.1, 1.1)]:
        assert info_gain(vmap, Config(pos), uav_sensor) == 0


def test_gain_open_frustum_count(open_world, uav_sensor):
    vmap = VoxelMap.blank_like(open_world)
    g = info_gain(vmap, scan_cfg(), uav_sensor)
    assert g == 102  # frozen brute-force frustum enumeration
    assert g == gain_oracle(vmap.state, R, POSE, 0.0, 1.0, 90.0, 90.0)


def test_gain_occluding_plane_counts_near_side_only(open_world, uav_sensor):
    vmap = VoxelMap.blank_like(open_world)
    vmap.state[4, :, :] = OCCUPIED  # known wall bisecting the frustum
    g = info_gain(vmap, scan_cfg(), uav_sensor)
    assert g == 10  # frozen from the occlusion oracle
    assert g == gain_oracle(vmap.state, R, POSE, 0.0, 1.0, 90.0, 90.0)


def test_gain_is_pure(open_world, uav_sensor):
    vmap = VoxelMap.blank_like(open_world)
    vmap.state[4, :, :] = OCCUPIED
    before = vmap.state.copy()
    info_gain(vmap, scan_cfg(), uav_sensor)
    best_yaw_gain(vmap, POSE, uav_sensor)
    assert np.array_equal(vmap.state, before)


# ---------------------------------------------------------------------------
# best_yaw_gain
# ---------------------------------------------------------------------------

def test_best_yaw_symmetric_field_takes_first_yaw():
    # binary-exact resolution plus apertures that keep every voxel centre
    # away from the angular boundaries, so the four quarter-turn views of a
    # symmetric unknown field count exactly equal
    world = WorldModel((13, 13, 7), 0.25, ground_z=0.3)
    vmap = VoxelMap.blank_like(world)
    sensor = SensorModel(1.03, 100.0, 120.0, evenly_spaced_yaws(4), "aerial")
    pos = (1.625, 1.625, 0.875)  # exact grid centre
    gains = [info_gain(vmap, Config(pos, yaw), sensor) for yaw in sensor.yaw_set]
    assert len(set(gains)) == 1
    yaw, gain = best_yaw_gain(vmap, pos, sensor)
    assert yaw == sensor.yaw_set[0] and gain == gains[0]


def test_best_yaw_tie_goes_to_lowest_index():
    world = WorldModel((9, 9, 5), 0.2, ground_z=0.3)
    vmap = VoxelMap.blank_like(world)
    # a 360-degree aperture makes every yaw identical by construction
    sensor = SensorModel(1.0, 360.0, 90.0, evenly_spaced_yaws(4), "aerial")
    yaw, gain = best_yaw_gain(vmap, (0.9, 0.9, 0.5), sensor)
    assert yaw == sensor.yaw_set[0] and gain > 0


def test_best_yaw_prefers_unknown_region(open_world, uav_sensor):
    vmap = VoxelMap.fully_mapped(open_world)
    vmap.state[8:, :, :] = UNKNOWN  # unknown only to the east
    expected = max(
        ((info_gain(vmap, Config(POSE, yaw), uav_sensor), -i)
         for i, yaw in enumerate(uav_sensor.yaw_set)))
    yaw, gain = best_yaw_gain(vmap, POSE, uav_sensor)
    assert gain == expected[0]
    assert yaw == uav_sensor.yaw_set[-expected[1]]
    assert yaw == 0.0  # east-facing yaw wins


def test_best_yaw_fully_mapped_returns_first_zero(small_world, uav_sensor):
    vmap = VoxelMap.fully_mapped(small_world)
    assert best_yaw_gain(vmap, POSE, uav_sensor) == (uav_sensor.yaw_set[0], 0)


def test_best_yaw_rejects_omnidirectional(small_world, ugv_sensor):
    vmap = VoxelMap.blank_like(small_world)
    with pytest.raises(NotDirectional):
        best_yaw_gain(vmap, POSE, ugv_sensor)


# ---------------------------------------------------------------------------
# coverage_fraction
# ---------------------------------------------------------------------------

def test_coverage_endpoints_and_half():
    world = WorldModel((10, 10, 2), 0.2, ground_z=0.1)
    assert coverage_fraction(VoxelMap.blank_like(world), world) == 0.0
    assert coverage_fraction(VoxelMap.fully_mapped(world), world) == 1.0
    half = VoxelMap.blank_like(world)
    half.state[:5, :, :] = world.truth[:5, :, :]
    assert half.state[:5].min() != UNKNOWN
    assert coverage_fraction(half, world) == 0.5


def test_coverage_respects_reachable_mask():
    world = WorldModel((10, 10, 2), 0.2, ground_z=0.1)
    world.reachable_mask[5:, :, :] = False
    vmap = VoxelMap.blank_like(world)
    vmap.state[:5, :, :] = FREE
    assert coverage_fraction(vmap, world) == 1.0


def test_coverage_shape_mismatch():
    world = WorldModel((10, 10, 2), 0.2, ground_z=0.1)
    with pytest.raises(ShapeError):
        coverage_fraction(VoxelMap((9, 10, 2), 0.2), world)


# ---------------------------------------------------------------------------
# property suite: monotone coverage, truthfulness, optimism bound, purity
# ---------------------------------------------------------------------------

def test_scan_properties_randomized(ugv_sensor):
    from conftest import make_random_world
    rng = np.random.default_rng(7)
    sensor = SensorModel(2.0, 90.0, 90.0, evenly_spaced_yaws(4), "aerial")
    for case in range(25):
        world = make_random_world(rng)
        vmap = VoxelMap.blank_like(world)
        prev_cov = 0.0
        for _ in range(6):
            while True:
                idx = tuple(rng.integers(0, d) for d in world.dims)
                if world.truth[idx] == FREE:
                    break
            pos = tuple((i + 0.5) * 0.2 for i in idx)
            yaw = float(rng.uniform(0, 2 * math.pi))
            cfg = Config(pos, yaw)
            g = info_gain(vmap, cfg, sensor)
            newly = integrate_scan(vmap, world, cfg, sensor)
            assert newly <= g  # optimistic gain never undercounts
            cov = coverage_fraction(vmap, world)
            assert cov >= prev_cov
            prev_cov = cov
            mapped = vmap.state != UNKNOWN
            assert np.array_equal(vmap.state[mapped], world.truth[mapped])


# ---------------------------------------------------------------------------
# serialization round-trips
# ---------------------------------------------------------------------------

def test_world_round_trip(small_world):
    doc = world_to_dict(small_world)
    back = world_from_dict(doc)
    assert np.array_equal(back.truth, small_world.truth)
    assert np.array_equal(back.reachable_mask, small_world.reachable_mask)
    assert back.resolution == small_world.resolution
    assert back.ground_z == small_world.ground_z


def test_map_round_trip(small_world, uav_sensor):
    vmap = VoxelMap.blank_like(small_world)
    integrate_scan(vmap, small_world, scan_cfg(), uav_sensor)
    back = map_from_dict(map_to_dict(vmap))
    assert np.array_equal(back.state, vmap.state)
