import itertools
import math

import numpy as np
import pytest

from rendex.grid_map import (FREE, OCCUPIED, UNKNOWN, Config, VoxelMap,
                             WorldModel)
from rendex.roadmap import (Roadmap, SamplingParams, config_free,
                            expand_roadmap, project_config, segment_free,
                            shortest_path, single_source_distances,
                            validate_rendezvous_edge)

from oracles import best_path

R = 0.2


def open_mapped_world(dims=(24, 24, 8)):
    world = WorldModel(dims, R, ground_z=0.3)
    vmap = VoxelMap.fully_mapped(world)
    return world, vmap


def small_params(**kw):
    defaults = dict(d_min=0.6, d_max=1.5, n_max_uav=30, n_max_ugv=30,
                    local_radius=3.0, slice_heights=(0.3, 0.9),
                    z_min=0.5, z_max=1.1)
    defaults.update(kw)
    return SamplingParams(**defaults)


def ground_graph(positions, edges):
    """Hand-built single-layer roadmap from 2-D points."""
    G = Roadmap()
    ids = []
    for x, y in positions:
        ids.append(G.add_node(Config((x, y, 0.3), 0.0, "ugv")))
    for a, b in edges:
        G.add_edge(ids[a], ids[b], "ugv")
    return G, ids


# ---------------------------------------------------------------------------
# expand_roadmap
# ---------------------------------------------------------------------------

def test_expand_grows_both_layers_with_valid_spacing():
    world, vmap = open_mapped_world()
    params = small_params()
    G = Roadmap()
    rng = np.random.default_rng(0)
    cfg_uav = Config((2.4, 2.4, 0.7), 0.0, "uav")
    cfg_ugv = Config((2.4, 2.4, 0.3), 0.0, "ugv")
    expand_roadmap(G, vmap, world, cfg_uav, cfg_ugv, params, rng)
    assert len(G.layer_ids("uav")) >= 1
    assert len(G.layer_ids("ugv")) >= 1
    for node in G.nodes.values():
        # sampled nodes obey the acceptance window at insertion; the first
        # node of an empty graph and ground projections (pinned to their
        # aerial partner's (x, y)) are the two exempt classes
        if node.stage in ("frontier", "local", "global") and \
                node.nn_dist_at_insert is not None:
            assert params.d_min <= node.nn_dist_at_insert <= params.d_max


def test_expand_no_free_voxels_leaves_graph_unchanged():
    world = WorldModel((10, 10, 6), R, ground_z=0.3)
    vmap = VoxelMap.blank_like(world)  # all unknown: nothing samplable
    params = small_params()
    G = Roadmap()
    expand_roadmap(G, vmap, world, Config((1.0, 1.0, 0.7), 0.0, "uav"),
                   Config((1.0, 1.0, 0.3), 0.0, "ugv"), params,
                   np.random.default_rng(1))
    assert len(G.nodes) == 0 and len(G.edges) == 0


def test_expand_terminates_with_reference_thresholds():
    world, vmap = open_mapped_world()
    params = small_params(n_max_uav=100, n_max_ugv=100)
    G = Roadmap()
    expand_roadmap(G, vmap, world, Config((2.4, 2.4, 0.7), 0.0, "uav"),
                   Config((2.4, 2.4, 0.3), 0.0, "ugv"), params,
                   np.random.default_rng(2))
    assert len(G.nodes) > 0  # bounded failure counters let the call return


def test_expand_is_superset_monotone():
    world, vmap = open_mapped_world()
    params = small_params()
    G = Roadmap()
    rng = np.random.default_rng(3)
    cfg_uav = Config((2.4, 2.4, 0.7), 0.0, "uav")
    cfg_ugv = Config((2.4, 2.4, 0.3), 0.0, "ugv")
    seen_nodes, seen_edges = set(), set()
    for _ in range(3):
        expand_roadmap(G, vmap, world, cfg_uav, cfg_ugv, params, rng)
        nodes = set(G.nodes)
        edges = {(e.a, e.b) for e in G.edges}
        assert seen_nodes <= nodes and seen_edges <= edges
        seen_nodes, seen_edges = nodes, edges


def test_expand_rendezvous_edges_validate_on_final_map():
    world, vmap = open_mapped_world()
    params = small_params()
    G = Roadmap()
    expand_roadmap(G, vmap, world, Config((2.4, 2.4, 0.7), 0.0, "uav"),
                   Config((2.4, 2.4, 0.3), 0.0, "ugv"), params,
                   np.random.default_rng(4))
    rnd = [e for e in G.edges if e.kind == "rendezvous"]
    assert rnd
    for e in rnd:
        na, nb = G.nodes[e.a], G.nodes[e.b]
        air, gnd = (na, nb) if na.layer == "uav" else (nb, na)
        assert air.position()[0] == gnd.position()[0]
        assert air.position()[1] == gnd.position()[1]
        assert validate_rendezvous_edge(vmap, air.config, gnd.config)


def test_layer_purity_enforced():
    G = Roadmap()
    a = G.add_node(Config((1.0, 1.0, 0.9), 0.0, "uav"))
    g = G.add_node(Config((2.0, 2.0, 0.3), 0.0, "ugv"))
    with pytest.raises(ValueError):
        G.add_edge(a, g, "uav")
    with pytest.raises(ValueError):
        G.add_edge(a, g, "rendezvous")  # (x, y) mismatch


# ---------------------------------------------------------------------------
# projection / rendezvous validation
# ---------------------------------------------------------------------------

def test_project_over_open_ground():
    world, vmap = open_mapped_world()
    params = small_params()
    cfg = Config((2.1, 2.1, 0.9), 1.0, "uav")
    ground = project_config(cfg, vmap, world, params)
    assert ground is not None
    assert ground.position == (2.1, 2.1, 0.3)
    assert ground.yaw == 1.0 and ground.layer == "ugv"


def test_project_over_obstacle_is_invalid():
    world = WorldModel((24, 24, 8), R, ground_z=0.3)
    world.add_box((1.6, 1.6, 0.0), (2.8, 2.8, 0.8))
    vmap = VoxelMap.fully_mapped(world)
    params = small_params()
    assert project_config(Config((2.1, 2.1, 1.1), 0.0, "uav"), vmap, world,
                          params) is None


def test_project_over_unknown_ground_is_invalid():
    world, vmap = open_mapped_world()
    vmap.state[8:14, 8:14, :3] = UNKNOWN  # unmapped terrain is not feasible
    params = small_params()
    assert project_config(Config((1.1, 1.1, 1.1), 0.0, "uav"), vmap, world,
                          params) is not None  # clear of the unknown patch
    assert project_config(Config((2.1, 2.1, 1.1), 0.0, "uav"), vmap, world,
                          params) is None  # directly above unmapped ground


def test_rendezvous_column_rules():
    world, vmap = open_mapped_world()
    air = Config((2.1, 2.1, 1.1), 0.0, "uav")
    gnd = Config((2.1, 2.1, 0.3), 0.0, "ugv")
    assert validate_rendezvous_edge(vmap, air, gnd) is True
    occluded = vmap.copy()
    occluded.state[10, 10, 3] = OCCUPIED  # hits the column mid-way
    assert validate_rendezvous_edge(occluded, air, gnd) is False
    foggy = vmap.copy()
    foggy.state[10, 10, 4] = UNKNOWN
    assert validate_rendezvous_edge(foggy, air, gnd) is False
    with pytest.raises(ValueError):
        validate_rendezvous_edge(vmap, Config((2.3, 2.1, 1.1), 0.0, "uav"), gnd)


# ---------------------------------------------------------------------------
# shortest_path
# ---------------------------------------------------------------------------

def test_shortest_path_same_node():
    G, ids = ground_graph([(1.0, 1.0)], [])
    assert shortest_path(G, "ugv", ids[0], ids[0]) == ([ids[0]], 0.0)


def test_shortest_path_two_hops_when_no_direct_edge():
    G, ids = ground_graph([(0.5, 0.5), (1.5, 0.5), (2.5, 0.5)],
                          [(0, 1), (1, 2)])
    path, length = shortest_path(G, "ugv", ids[0], ids[2])
    assert path == [ids[0], ids[1], ids[2]]
    assert length == pytest.approx(2.0)


def test_shortest_path_lexicographic_tie():
    # symmetric diamond: two equal-length routes; the smaller middle id wins
    G, ids = ground_graph([(0.0, 1.0), (1.0, 2.0), (1.0, 0.0), (2.0, 1.0)],
                          [(0, 1), (0, 2), (1, 3), (2, 3)])
    path, length = shortest_path(G, "ugv", ids[0], ids[3])
    assert path == [ids[0], ids[1], ids[3]]


def test_shortest_path_disconnected_returns_none():
    G, ids = ground_graph([(0.5, 0.5), (3.0, 3.0)], [])
    assert shortest_path(G, "ugv", ids[0], ids[1]) is None


def test_shortest_path_matches_enumeration_oracle():
    rng = np.random.default_rng(8)
    pts = rng.uniform(0.5, 5.5, size=(12, 2))
    edges = [(i, j) for i in range(12) for j in range(i + 1, 12)
             if np.hypot(*(pts[i] - pts[j])) <= 2.2]
    G, ids = ground_graph([tuple(p) for p in pts], edges)
    adj = {i: [] for i in range(12)}
    for i, j in edges:
        w = float(np.linalg.norm(pts[i] - pts[j]))
        adj[i].append((j, w))
        adj[j].append((i, w))
    for src, dst in [(0, 11), (3, 7), (5, 2)]:
        got = shortest_path(G, "ugv", ids[src], ids[dst])
        want = best_path(adj, src, dst)
        if want is None:
            assert got is None
            continue
        assert [ids.index(n) for n in got[0]] == want[0]
        assert got[1] == pytest.approx(want[1])


def test_shortest_path_triangle_quality():
    world, vmap = open_mapped_world()
    params = small_params()
    G = Roadmap()
    expand_roadmap(G, vmap, world, Config((2.4, 2.4, 0.7), 0.0, "uav"),
                   Config((2.4, 2.4, 0.3), 0.0, "ugv"), params,
                   np.random.default_rng(5))
    ids = G.layer_ids("ugv")[:6]
    for a, b, c in itertools.permutations(ids, 3):
        ab = shortest_path(G, "ugv", a, b)
        bc = shortest_path(G, "ugv", b, c)
        ac = shortest_path(G, "ugv", a, c)
        if ab and bc and ac:
            assert ac[1] <= ab[1] + bc[1] + 1e-9


def test_single_source_matches_shortest_path():
    world, vmap = open_mapped_world()
    params = small_params()
    G = Roadmap()
    expand_roadmap(G, vmap, world, Config((2.4, 2.4, 0.7), 0.0, "uav"),
                   Config((2.4, 2.4, 0.3), 0.0, "ugv"), params,
                   np.random.default_rng(6))
    ids = G.layer_ids("uav")
    src = ids[0]
    dist = single_source_distances(G, "uav", src)
    for nid in ids[:8]:
        hit = shortest_path(G, "uav", src, nid)
        if hit is None:
            assert nid not in dist
        else:
            assert dist[nid] == pytest.approx(hit[1])


# ---------------------------------------------------------------------------
# collision checks
# ---------------------------------------------------------------------------

def test_config_free_respects_unknown_and_band():
    world, vmap = open_mapped_world()
    params = small_params()
    assert config_free(vmap, (2.0, 2.0, 0.7), "uav", params, z_band=(0.5, 1.1))
    assert not config_free(vmap, (2.0, 2.0, 1.5), "uav", params,
                           z_band=(0.5, 1.1))  # above the band
    foggy = vmap.copy()
    foggy.state[9:12, 9:12, :] = UNKNOWN
    assert not config_free(foggy, (2.0, 2.0, 0.7), "uav", params,
                           z_band=(0.5, 1.1))


def test_segment_free_detects_wall():
    world = WorldModel((24, 24, 8), R, ground_z=0.3)
    world.add_box((2.2, 0.0, 0.0), (2.6, 4.8, 1.6))
    vmap = VoxelMap.fully_mapped(world)
    params = small_params()
    assert not segment_free(vmap, (1.0, 1.0, 0.7), (4.0, 1.0, 0.7), "uav", params)
    assert segment_free(vmap, (1.0, 1.0, 0.7), (1.0, 4.0, 0.7), "uav", params)
