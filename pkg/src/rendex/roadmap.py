"""Incremental dual-layer probabilistic roadmap over the occupancy map.

Two intra-layer subgraphs (aerial and ground) grow through three sampling
stages per layer — frontier-guided extension, local sampling around the
robot, and global sampling over mapped free space — and are coupled only
by vertical rendezvous edges joining an aerial node to the ground node at
exactly the same (x, y).  Nodes and edges are never removed; every
intra-layer edge was straight-line collision-free in the map at insertion
time, and map knowledge is monotone, so validity persists.

Collision checking is conservative and map-based: a configuration is free
iff every voxel whose centre lies inside the robot body volume (sphere for
the aerial robot, vertical cylinder for the ground robot) is mapped free.
Unknown space is not free.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .frontier import detect_frontiers, weighted_sample_frontier
from .grid_map import FREE, Config, VoxelMap, WorldModel


@dataclass
class SamplingParams:
    """Knobs for roadmap growth and the robot body/altitude geometry."""

    d_min: float = 1.2
    d_max: float = 3.0
    n_max_uav: int = 100
    n_max_ugv: int = 100
    k_neighbors: int = 5
    local_radius: float = 6.0       # sampling ball/disc around the robot
    local_attempts: int = 20
    global_attempts: int = 20
    slice_heights: tuple = (0.3, 0.7, 1.1)
    min_blob_cells: int = 3
    uav_radius: float = 0.3         # body sphere
    ugv_radius: float = 0.3         # body cylinder radius
    ugv_clearance: float = 0.1      # body cylinder half-height
    z_min: float = 0.5              # aerial altitude band floor
    z_max: float | None = None      # None: grid ceiling - 0.5

    def __post_init__(self):
        if not (0 < self.d_min < self.d_max):
            raise ValueError("require 0 < d_min < d_max")
        if self.n_max_uav < 1 or self.n_max_ugv < 1:
            raise ValueError("failure thresholds must be >= 1")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")

    def z_band(self, vmap: VoxelMap) -> tuple[float, float]:
        hi = self.z_max
        if hi is None:
            hi = vmap.dims[2] * vmap.resolution - 0.5
        return (self.z_min, hi)


@dataclass
class RoadmapNode:
    id: int
    config: Config
    reward: float = 0.0
    best_yaw: float | None = None
    stage: str = ""                      # seed|frontier|local|global|projection
    nn_dist_at_insert: float | None = None

    @property
    def layer(self) -> str:
        return self.config.layer

    def position(self) -> np.ndarray:
        return self.config.as_array()


class RoadmapEdge(NamedTuple):
    a: int
    b: int
    kind: str      # uav | ugv | rendezvous
    length: float


class Roadmap:
    """Layered graph with deterministic, insertion-ordered bookkeeping."""

    def __init__(self):
        self.nodes: dict[int, RoadmapNode] = {}
        self.edges: list[RoadmapEdge] = []
        self.adj: dict[int, list[tuple[int, float]]] = {}
        self.partner_of_air: dict[int, int] = {}
        self.airs_of_ground: dict[int, list[int]] = {}
        self._layer_ids: dict[str, list[int]] = {"uav": [], "ugv": []}
        self._pos_cache: dict[str, np.ndarray | None] = {"uav": None, "ugv": None}
        self._edge_keys: set[tuple[int, int]] = set()
        self._next_id = 0

    # -- mutation -------------------------------------------------------

    def add_node(self, config: Config, stage: str = "",
                 nn_dist: float | None = None) -> int:
        nid = self._next_id
        self._next_id += 1
        self.nodes[nid] = RoadmapNode(nid, config, stage=stage,
                                      nn_dist_at_insert=nn_dist)
        self.adj[nid] = []
        self._layer_ids[config.layer].append(nid)
        self._pos_cache[config.layer] = None
        return nid

    def add_edge(self, a: int, b: int, kind: str) -> RoadmapEdge:
        na, nb = self.nodes[a], self.nodes[b]
        if kind == "rendezvous":
            air, gnd = (a, b) if na.layer == "uav" else (b, a)
            if self.nodes[air].layer != "uav" or self.nodes[gnd].layer != "ugv":
                raise ValueError("rendezvous edge must join one node per layer")
            pa, pg = self.nodes[air].position(), self.nodes[gnd].position()
            if abs(pa[0] - pg[0]) > 1e-9 or abs(pa[1] - pg[1]) > 1e-9:
                raise ValueError("rendezvous endpoints must share (x, y)")
        else:
            if na.layer != kind or nb.layer != kind:
                raise ValueError(f"{kind} edge endpoints must both be {kind} nodes")
        key = (min(a, b), max(a, b))
        if key in self._edge_keys:
            raise ValueError(f"duplicate edge {key}")
        length = float(np.linalg.norm(na.position() - nb.position()))
        edge = RoadmapEdge(a, b, kind, length)
        self.edges.append(edge)
        self._edge_keys.add(key)
        if kind == "rendezvous":
            air, gnd = (a, b) if na.layer == "uav" else (b, a)
            self.partner_of_air[air] = gnd
            self.airs_of_ground.setdefault(gnd, []).append(air)
        else:
            self.adj[a].append((b, length))
            self.adj[b].append((a, length))
        return edge

    # -- queries --------------------------------------------------------

    def layer_ids(self, layer: str) -> list[int]:
        return self._layer_ids[layer]

    def positions(self, layer: str) -> np.ndarray:
        if self._pos_cache[layer] is None:
            ids = self._layer_ids[layer]
            if ids:
                self._pos_cache[layer] = np.array(
                    [self.nodes[i].position() for i in ids])
            else:
                self._pos_cache[layer] = np.zeros((0, 3))
        return self._pos_cache[layer]

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self._edge_keys

    def nearest_node_dist(self, point) -> float | None:
        """Distance to the nearest node over both layers (None if empty)."""
        best = None
        p = np.asarray(point, dtype=float)
        for layer in ("uav", "ugv"):
            pos = self.positions(layer)
            if len(pos):
                d = float(np.min(np.linalg.norm(pos - p, axis=1)))
                best = d if best is None else min(best, d)
        return best

    def knn(self, layer: str, point, k: int) -> list[int]:
        """ids of the k nearest nodes in a layer (ties by lower id)."""
        ids = self._layer_ids[layer]
        if not ids:
            return []
        pos = self.positions(layer)
        d = np.linalg.norm(pos - np.asarray(point, dtype=float), axis=1)
        order = np.lexsort((np.asarray(ids), d))
        return [ids[i] for i in order[:k]]

    def ids_within(self, layer: str, point, radius: float) -> list[int]:
        ids = self._layer_ids[layer]
        if not ids:
            return []
        pos = self.positions(layer)
        d = np.linalg.norm(pos - np.asarray(point, dtype=float), axis=1)
        hits = [(d[i], ids[i]) for i in np.nonzero(d <= radius)[0]]
        hits.sort()
        return [i for _, i in hits]

    def ground_at_xy(self, x: float, y: float) -> int | None:
        """Exact-(x, y) ground node, if one exists (reused by projections)."""
        for gid in self._layer_ids["ugv"]:
            p = self.nodes[gid].position()
            if abs(p[0] - x) <= 1e-9 and abs(p[1] - y) <= 1e-9:
                return gid
        return None

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "layer": n.layer,
                       "x": n.position()[0], "y": n.position()[1],
                       "z": n.position()[2], "yaw": n.config.yaw,
                       "reward": n.reward}
                      for n in (self.nodes[i] for i in sorted(self.nodes))],
            "edges": [{"a": e.a, "b": e.b, "kind": e.kind, "length": e.length}
                      for e in self.edges],
        }


# ---------------------------------------------------------------------------
# collision / feasibility checks
# ---------------------------------------------------------------------------

def body_voxel_indices(resolution: float, points, radius: float,
                       half_height: float | None = None) -> np.ndarray:
    """Voxel indices whose centre lies inside the body volume around each
    query point: sphere of ``radius`` when half_height is None, else a
    vertical cylinder (radius, +-half_height).  May include out-of-grid
    indices; callers decide how to treat those."""
    r = resolution
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    reach = radius if half_height is None else math.hypot(radius, half_height)
    k = int(math.floor(2 * reach / r)) + 2
    offs = np.stack(np.meshgrid(*([np.arange(k)] * 3), indexing="ij"),
                    axis=-1).reshape(-1, 3)
    base = np.floor((pts - reach) / r).astype(np.int64)
    idx = base[:, None, :] + offs[None, :, :]
    centers = (idx + 0.5) * r
    delta = centers - pts[:, None, :]
    if half_height is None:
        inside = np.einsum("ijk,ijk->ij", delta, delta) <= radius * radius
    else:
        horiz = delta[:, :, 0] ** 2 + delta[:, :, 1] ** 2 <= radius * radius
        inside = horiz & (np.abs(delta[:, :, 2]) <= half_height)
    return idx[inside]


def _body_points_free(vmap: VoxelMap, points: np.ndarray, radius: float,
                      half_height: float | None = None) -> bool:
    """True iff for every query point the body volume around it is mapped
    free.  Bodies poking outside the grid are not free."""
    flat_idx = body_voxel_indices(vmap.resolution, points, radius, half_height)
    if flat_idx.size == 0:
        return True
    dims = np.asarray(vmap.dims)
    if np.any(flat_idx < 0) or np.any(flat_idx >= dims):
        return False
    return bool(np.all(vmap.state[flat_idx[:, 0], flat_idx[:, 1], flat_idx[:, 2]] == FREE))


def config_free(vmap: VoxelMap, position, layer: str, params: SamplingParams,
                z_band: tuple[float, float] | None = None) -> bool:
    """Body-volume collision check against the known map."""
    pos = np.asarray(position, dtype=float)
    if not vmap.in_bounds(pos):
        return False
    if layer == "uav":
        if z_band is not None and not (z_band[0] <= pos[2] <= z_band[1]):
            return False
        return _body_points_free(vmap, pos, params.uav_radius)
    return _body_points_free(vmap, pos, params.ugv_radius,
                             half_height=params.ugv_clearance)


def segment_free(vmap: VoxelMap, a, b, layer: str, params: SamplingParams) -> bool:
    """Straight-segment sweep of the body volume at half-voxel steps."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    n = max(2, int(math.ceil(length / (vmap.resolution / 2))) + 1)
    ts = np.linspace(0.0, 1.0, n)
    pts = a[None, :] + ts[:, None] * (b - a)[None, :]
    if not all(vmap.in_bounds(p) for p in pts[[0, -1]]):
        return False
    if layer == "uav":
        return _body_points_free(vmap, pts, params.uav_radius)
    return _body_points_free(vmap, pts, params.ugv_radius,
                             half_height=params.ugv_clearance)


# ---------------------------------------------------------------------------
# projection and rendezvous validation
# ---------------------------------------------------------------------------

def project_config(cfg_uav: Config, vmap: VoxelMap, world: WorldModel,
                   params: SamplingParams) -> Config | None:
    """Ground configuration directly beneath an aerial one, or None.

    Valid iff (x, y) is in bounds and the ground body volume there is
    mapped free; unknown terrain is not feasible.
    """
    x, y, _ = cfg_uav.position
    gz = world.ground_height(x, y)
    cand = Config((x, y, gz), cfg_uav.yaw, "ugv")
    if not vmap.in_bounds(cand.position):
        return None
    if not config_free(vmap, cand.position, "ugv", params):
        return None
    return cand


def validate_rendezvous_edge(vmap: VoxelMap, cfg_uav: Config, cfg_ugv: Config) -> bool:
    """True iff the vertical voxel column between the two heights is mapped
    free (clear takeoff/landing corridor)."""
    pa, pg = cfg_uav.position, cfg_ugv.position
    if abs(pa[0] - pg[0]) > 1e-9 or abs(pa[1] - pg[1]) > 1e-9:
        raise ValueError("configurations must share (x, y)")
    r = vmap.resolution
    ix = int(math.floor(pa[0] / r))
    iy = int(math.floor(pa[1] / r))
    z0, z1 = sorted((pa[2], pg[2]))
    k0 = int(math.floor(z0 / r))
    k1 = int(math.floor(z1 / r))
    if ix < 0 or iy < 0 or ix >= vmap.dims[0] or iy >= vmap.dims[1]:
        return False
    if k0 < 0 or k1 >= vmap.dims[2]:
        return False
    return bool(np.all(vmap.state[ix, iy, k0:k1 + 1] == FREE))


# ---------------------------------------------------------------------------
# shortest paths
# ---------------------------------------------------------------------------

def shortest_path(G: Roadmap, layer: str, src: int, dst: int
                  ) -> tuple[list[int], float] | None:
    """Minimal-length path over one layer's edges only.

    Equal-length ties resolve to the lexicographically smallest node-id
    sequence.  Returns None when disconnected.
    """
    for nid in (src, dst):
        if nid not in G.nodes or G.nodes[nid].layer != layer:
            raise ValueError(f"node {nid} not in layer {layer!r}")
    if src == dst:
        return [src], 0.0
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (src,))]
    settled: set[int] = set()
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node in settled:
            continue
        settled.add(node)
        if node == dst:
            return list(path), dist
        for nbr, w in G.adj[node]:
            if nbr not in settled:
                heapq.heappush(heap, (dist + w, path + (nbr,)))
    return None


def single_source_distances(G: Roadmap, layer: str, src: int) -> dict[int, float]:
    """Dijkstra distances from ``src`` over one layer's edges."""
    if src not in G.nodes or G.nodes[src].layer != layer:
        raise ValueError(f"node {src} not in layer {layer!r}")
    dist: dict[int, float] = {src: 0.0}
    heap = [(0.0, src)]
    settled: set[int] = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        for nbr, w in G.adj[node]:
            nd = d + w
            if nbr not in dist or nd < dist[nbr]:
                dist[nbr] = nd
                heapq.heappush(heap, (nd, nbr))
    return dist


# ---------------------------------------------------------------------------
# Alg. growth: frontier-guided + local + global sampling per layer,
# projection-based rendezvous edges, intra-layer connection
# ---------------------------------------------------------------------------

def _try_insert(G: Roadmap, vmap: VoxelMap, pos: np.ndarray, layer: str,
                stage: str, params: SamplingParams,
                z_band: tuple[float, float] | None) -> int | None:
    """Shared validation: collision check then nearest-node spacing rule.

    Returns the new node id, or None (caller decides whether that counts
    toward a failure budget).  A node inserted into an empty graph skips
    the spacing rule — there is nothing to be spaced from.
    """
    if not config_free(vmap, pos, layer, params, z_band=z_band):
        return None
    nn = G.nearest_node_dist(pos)
    if nn is not None and not (params.d_min <= nn <= params.d_max):
        return None
    return G.add_node(Config(tuple(float(v) for v in pos), 0.0, layer),
                      stage=stage, nn_dist=nn)


def _frontier_stage(G: Roadmap, vmap: VoxelMap, layer: str, frontiers,
                    params: SamplingParams, rng: np.random.Generator,
                    z_band: tuple[float, float], ground_z: float,
                    n_max: int) -> list[int]:
    """Extend existing layer nodes toward weighted-sampled frontier circles.

    Every rejected extension (collision or spacing) raises the failure
    count; the stage ends once it reaches ``n_max`` or when there are no
    frontiers / no layer nodes to extend from.
    """
    added: list[int] = []
    n_fail = 0
    while n_fail < n_max and frontiers:
        circle = weighted_sample_frontier(frontiers, rng)
        if layer == "uav":
            target = np.array(circle.target_point())
        else:
            target = np.array([circle.center[0], circle.center[1], ground_z])
        nbrs = G.knn(layer, target, params.k_neighbors)
        if not nbrs:
            break  # bootstrap: nothing to extend, later stages seed the layer
        for nid in nbrs:
            if n_fail >= n_max:
                break
            src = G.nodes[nid].position()
            vec = target - src
            norm = float(np.linalg.norm(vec))
            if norm < 1e-9:
                n_fail += 1
                continue
            step = rng.uniform(params.d_min, params.d_max)
            pos = src + vec / norm * step
            if layer == "uav":
                pos[2] = min(max(pos[2], z_band[0]), z_band[1])
            else:
                pos[2] = ground_z
            new_id = _try_insert(G, vmap, pos, layer, "frontier", params,
                                 z_band if layer == "uav" else None)
            if new_id is None:
                n_fail += 1
            else:
                added.append(new_id)
    return added


def _local_stage(G: Roadmap, vmap: VoxelMap, layer: str, center: np.ndarray,
                 params: SamplingParams, rng: np.random.Generator,
                 z_band: tuple[float, float], ground_z: float) -> list[int]:
    """Uniform samples in a ball (aerial) / disc (ground) around the robot."""
    added: list[int] = []
    for _ in range(params.local_attempts):
        if layer == "uav":
            direction = rng.normal(size=3)
            norm = float(np.linalg.norm(direction))
            if norm < 1e-12:
                continue
            radius = params.local_radius * rng.uniform() ** (1 / 3)
            pos = center + direction / norm * radius
            pos[2] = min(max(pos[2], z_band[0]), z_band[1])
        else:
            ang = rng.uniform(0, 2 * math.pi)
            radius = params.local_radius * math.sqrt(rng.uniform())
            pos = center + np.array([math.cos(ang), math.sin(ang), 0.0]) * radius
            pos[2] = ground_z
        new_id = _try_insert(G, vmap, pos, layer, "local", params,
                             z_band if layer == "uav" else None)
        if new_id is not None:
            added.append(new_id)
    return added


def _global_stage(G: Roadmap, vmap: VoxelMap, layer: str,
                  params: SamplingParams, rng: np.random.Generator,
                  z_band: tuple[float, float], ground_z: float) -> list[int]:
    """Uniform samples over the currently mapped free space of the layer."""
    r = vmap.resolution
    if layer == "uav":
        k0 = int(math.floor(z_band[0] / r))
        k1 = int(math.floor(z_band[1] / r))
        sub = vmap.state[:, :, k0:k1 + 1] == FREE
        cells = np.argwhere(sub)
        if len(cells) == 0:
            return []
        cells[:, 2] += k0
    else:
        iz = int(math.floor(ground_z / r))
        sub = vmap.state[:, :, iz] == FREE
        flat = np.argwhere(sub)
        if len(flat) == 0:
            return []
        cells = np.concatenate([flat, np.full((len(flat), 1), iz)], axis=1)
    added: list[int] = []
    for _ in range(params.global_attempts):
        cell = cells[int(rng.integers(len(cells)))]
        jitter = rng.uniform(size=3)
        pos = (cell + jitter) * r
        if layer == "ugv":
            pos[2] = ground_z
        new_id = _try_insert(G, vmap, pos, layer, "global", params,
                             z_band if layer == "uav" else None)
        if new_id is not None:
            added.append(new_id)
    return added


def _connect_new_nodes(G: Roadmap, vmap: VoxelMap, new_ids: list[int],
                       layer: str, params: SamplingParams) -> None:
    """Join each new node to same-layer nodes within d_max by
    collision-free straight segments."""
    for nid in new_ids:
        pos = G.nodes[nid].position()
        for other in G.ids_within(layer, pos, params.d_max):
            if other == nid or G.has_edge(nid, other):
                continue
            if segment_free(vmap, pos, G.nodes[other].position(), layer, params):
                G.add_edge(nid, other, layer)


def _projection_stage(G: Roadmap, vmap: VoxelMap, world: WorldModel,
                      params: SamplingParams) -> list[int]:
    """Give every aerial node lacking a rendezvous edge a chance to gain
    one: project to the ground, validate the landing column, reuse an
    exact-(x, y) ground node if present, else create one."""
    added: list[int] = []
    for air_id in sorted(G.layer_ids("uav")):
        if air_id in G.partner_of_air:
            continue
        cfg_air = G.nodes[air_id].config
        cfg_gnd = project_config(cfg_air, vmap, world, params)
        if cfg_gnd is None:
            continue
        if not validate_rendezvous_edge(vmap, cfg_air, cfg_gnd):
            continue
        gid = G.ground_at_xy(cfg_gnd.position[0], cfg_gnd.position[1])
        if gid is None:
            nn = G.nearest_node_dist(cfg_gnd.position)
            gid = G.add_node(cfg_gnd, stage="projection", nn_dist=nn)
            added.append(gid)
        G.add_edge(air_id, gid, "rendezvous")
    return added


def expand_roadmap(G: Roadmap, vmap: VoxelMap, world: WorldModel,
                   cfg_uav: Config, cfg_ugv: Config, params: SamplingParams,
                   rng: np.random.Generator,
                   layers: tuple[str, ...] = ("uav", "ugv")) -> Roadmap:
    """One incremental growth pass over the roadmap.

    Aerial stages run first (frontier-guided, local around ``cfg_uav``,
    global), new aerial nodes are connected, every unpaired aerial node is
    projected toward a rendezvous edge, then the mirrored ground stages run
    and new ground nodes (projections included) are connected.  Existing
    structure is never removed; a saturated map yields zero additions.
    """
    frontiers = detect_frontiers(vmap, params.slice_heights, params.min_blob_cells)
    z_band = params.z_band(vmap)
    gz = world.ground_z

    new_ugv: list[int] = []
    if "uav" in layers:
        new_uav = _frontier_stage(G, vmap, "uav", frontiers, params, rng,
                                  z_band, gz, params.n_max_uav)
        new_uav += _local_stage(G, vmap, "uav", cfg_uav.as_array(), params, rng,
                                z_band, gz)
        new_uav += _global_stage(G, vmap, "uav", params, rng, z_band, gz)
        _connect_new_nodes(G, vmap, new_uav, "uav", params)
        new_ugv += _projection_stage(G, vmap, world, params)

    if "ugv" in layers:
        new_ugv += _frontier_stage(G, vmap, "ugv", frontiers, params, rng,
                                   z_band, gz, params.n_max_ugv)
        new_ugv += _local_stage(G, vmap, "ugv", cfg_ugv.as_array(), params, rng,
                                z_band, gz)
        new_ugv += _global_stage(G, vmap, "ugv", params, rng, z_band, gz)
    if new_ugv:
        _connect_new_nodes(G, vmap, new_ugv, "ugv", params)
    return G
