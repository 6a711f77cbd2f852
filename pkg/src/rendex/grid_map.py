"""3-D voxel world model, occupancy map, and sensor/visibility engine.

The world is an axis-aligned grid of cubical voxels with edge length
``resolution`` metres, anchored at the origin: voxel (i, j, k) spans
``[i*r, (i+1)*r) x [j*r, (j+1)*r) x [k*r, (k+1)*r)`` and its centre is at
``((i+0.5)*r, (j+0.5)*r, (k+0.5)*r)``.

Visibility semantics (shared by scanning and gain queries): a voxel is
observed from a sensor pose iff its *centre* satisfies the range and
field-of-view predicates and the straight segment from the sensor origin
to that centre crosses no blocking voxel first.  Segment/voxel visitation
is exact integer voxel traversal with fixed axis priority x < y < z on
ties, so results are bit-reproducible.  The voxel containing the sensor
origin is always observed.

Scans label voxels with the ground-truth state (noise-free sensing) and a
label never changes once set, so knowledge is monotone.  Gain queries
treat unknown voxels as transparent and only let *known-occupied* voxels
block, which makes the gain an optimistic upper bound on what a scan at
the same pose can newly map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

LABEL_NAMES = {UNKNOWN: "unknown", FREE: "free", OCCUPIED: "occupied"}
LABEL_CODES = {v: k for k, v in LABEL_NAMES.items()}

# 6-connectivity structure used for flood fill / surface dilation
_FACE_STRUCT = ndimage.generate_binary_structure(3, 1)


class InvalidConfig(ValueError):
    """Configuration outside the grid or otherwise unusable."""


class ShapeError(ValueError):
    """Map and world dimensions do not match."""


class NotDirectional(ValueError):
    """Operation requires a sensor with a non-empty yaw set."""


@dataclass(frozen=True)
class Config:
    """A robot configuration: position in metres, yaw in radians, layer tag."""

    position: tuple[float, float, float]
    yaw: float = 0.0
    layer: str = "uav"  # "uav" | "ugv"

    def as_array(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class SensorModel:
    """Idealized frustum sensor.

    ``h_fov``/``v_fov`` are full opening angles in degrees; the boresight is
    horizontal at the given yaw.  ``yaw_set`` lists the discrete headings a
    directional sensor may adopt; an empty tuple means omnidirectional in
    the sense that gain queries ignore yaw (h_fov may still be < 360).
    """

    range_m: float
    h_fov: float
    v_fov: float
    yaw_set: tuple[float, ...] = ()
    mount_kind: str = "aerial"  # "aerial" | "ground"

    def __post_init__(self):
        if self.range_m <= 0:
            raise ValueError("sensor range must be positive")
        if not (0 < self.h_fov <= 360):
            raise ValueError("h_fov must be in (0, 360]")
        if not (0 < self.v_fov <= 180):
            raise ValueError("v_fov must be in (0, 180]")
        if len(set(self.yaw_set)) != len(self.yaw_set):
            raise ValueError("yaw_set angles must be distinct")
        for a in self.yaw_set:
            if not (0.0 <= a < 2 * math.pi):
                raise ValueError("yaw_set angles must lie in [0, 2*pi)")


def evenly_spaced_yaws(k: int) -> tuple[float, ...]:
    """k headings evenly spaced over [0, 2*pi), starting at 0."""
    return tuple(2 * math.pi * i / k for i in range(k))


class WorldModel:
    """Ground-truth world: per-voxel free/occupied labels plus metadata.

    ``ground_z`` is the height (metres) at which a ground robot's reference
    point rides over the flat traversable surface.  ``reachable_mask`` marks
    the voxels that count toward coverage; it is fixed for the life of a
    scenario (see :func:`compute_reachable_mask`).
    """

    def __init__(self, dims, resolution: float, ground_z: float):
        self.dims = tuple(int(d) for d in dims)
        if any(d <= 0 for d in self.dims):
            raise ValueError("dims must be positive")
        self.resolution = float(resolution)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        self.ground_z = float(ground_z)
        if not (0.0 <= self.ground_z <= self.dims[2] * self.resolution):
            raise ValueError("ground height must lie inside the grid")
        self.truth = np.full(self.dims, FREE, dtype=np.uint8)
        self.reachable_mask = np.ones(self.dims, dtype=bool)
        self.solids: list[dict] = []  # primitive records, kept for export
        self.unreachable_regions: list[dict] = []

    # -- geometry ------------------------------------------------------

    def extent(self) -> tuple[float, float, float]:
        return tuple(d * self.resolution for d in self.dims)

    def ground_height(self, x: float, y: float) -> float:
        return self.ground_z

    def in_bounds(self, position) -> bool:
        ext = self.extent()
        return all(0.0 <= position[i] < ext[i] for i in range(3))

    def voxel_index(self, position) -> tuple[int, int, int]:
        r = self.resolution
        return tuple(int(math.floor(position[i] / r)) for i in range(3))

    def voxel_center(self, idx) -> tuple[float, float, float]:
        r = self.resolution
        return tuple((idx[i] + 0.5) * r for i in range(3))

    # -- construction ---------------------------------------------------

    def add_box(self, lo, hi, label: int = OCCUPIED) -> None:
        """Mark voxels whose centre falls inside [lo, hi) as ``label``."""
        self.solids.append({"kind": "box", "min": list(map(float, lo)),
                            "max": list(map(float, hi)), "label": int(label)})
        self.truth[self._box_mask(lo, hi)] = label

    def add_cylinder(self, center_xy, radius: float, z0: float, z1: float,
                     label: int = OCCUPIED) -> None:
        """Mark voxels whose centre lies inside the vertical cylinder."""
        self.solids.append({"kind": "cylinder", "center": list(map(float, center_xy)),
                            "radius": float(radius), "z": [float(z0), float(z1)],
                            "label": int(label)})
        r = self.resolution
        cx = (np.arange(self.dims[0]) + 0.5) * r - center_xy[0]
        cy = (np.arange(self.dims[1]) + 0.5) * r - center_xy[1]
        cz = (np.arange(self.dims[2]) + 0.5) * r
        inside_xy = (cx[:, None] ** 2 + cy[None, :] ** 2) <= radius ** 2
        inside_z = (cz >= z0) & (cz < z1)
        mask = inside_xy[:, :, None] & inside_z[None, None, :]
        self.truth[mask] = label

    def mark_unreachable_box(self, lo, hi) -> None:
        self.unreachable_regions.append({"kind": "box", "min": list(map(float, lo)),
                                         "max": list(map(float, hi))})
        self.reachable_mask[self._box_mask(lo, hi)] = False

    def _box_mask(self, lo, hi) -> tuple:
        r = self.resolution
        sl = []
        for ax in range(3):
            centers = (np.arange(self.dims[ax]) + 0.5) * r
            sel = np.nonzero((centers >= lo[ax]) & (centers < hi[ax]))[0]
            if sel.size == 0:
                return (np.zeros(0, dtype=int),) * 3
            sl.append(slice(sel[0], sel[-1] + 1))
        return tuple(sl)


def compute_reachable_mask(world: WorldModel, start_position) -> np.ndarray:
    """Reachable set: free voxels flood-connected (6-conn) to the start,
    plus occupied voxels face-adjacent to that free set, minus any
    explicitly marked unreachable regions.  Everything else is residual
    space and excluded from the coverage denominator."""
    free = world.truth == FREE
    labels, _ = ndimage.label(free, structure=_FACE_STRUCT)
    start = world.voxel_index(start_position)
    start_label = labels[start]
    if start_label == 0:
        raise InvalidConfig("start position is not in free space")
    core = labels == start_label
    surface = ndimage.binary_dilation(core, structure=_FACE_STRUCT) & (world.truth == OCCUPIED)
    mask = core | surface
    mask &= world.reachable_mask  # explicit unreachable boxes already cleared
    return mask


class VoxelMap:
    """Occupancy map maintained from scans: unknown / free / occupied.

    Values are cheap to copy and safe to hand between threads; concurrent
    read-only queries are fine but callers must serialize writes.
    """

    def __init__(self, dims, resolution: float, state: np.ndarray | None = None):
        self.dims = tuple(int(d) for d in dims)
        self.resolution = float(resolution)
        if state is None:
            self.state = np.full(self.dims, UNKNOWN, dtype=np.uint8)
        else:
            if tuple(state.shape) != self.dims:
                raise ShapeError("state shape does not match dims")
            self.state = state.astype(np.uint8)

    @classmethod
    def blank_like(cls, world: WorldModel) -> "VoxelMap":
        return cls(world.dims, world.resolution)

    @classmethod
    def fully_mapped(cls, world: WorldModel) -> "VoxelMap":
        return cls(world.dims, world.resolution, state=world.truth.copy())

    def copy(self) -> "VoxelMap":
        return VoxelMap(self.dims, self.resolution, state=self.state.copy())

    def mapped_count(self) -> int:
        return int(np.count_nonzero(self.state != UNKNOWN))

    def in_bounds(self, position) -> bool:
        ext = tuple(d * self.resolution for d in self.dims)
        return all(0.0 <= position[i] < ext[i] for i in range(3))

    def voxel_index(self, position) -> tuple[int, int, int]:
        r = self.resolution
        return tuple(int(math.floor(position[i] / r)) for i in range(3))


# ---------------------------------------------------------------------------
# frustum candidate enumeration and exact batched voxel traversal
# ---------------------------------------------------------------------------

def _wrap_angle(a):
    """Wrap to (-pi, pi]: single modulo, then shift — no cancellation."""
    d = np.mod(a, 2 * np.pi)
    return np.where(d > np.pi, d - 2 * np.pi, d)


def frustum_candidates(dims, resolution: float, origin, yaw: float,
                       sensor: SensorModel,
                       only_state: np.ndarray | None = None,
                       state_value: int = UNKNOWN) -> np.ndarray:
    """Indices (N, 3) of voxels whose centre passes the range/FOV predicates.

    When ``only_state`` is given, restrict to voxels whose current label in
    that array equals ``state_value`` (the voxel holding the origin is kept
    regardless of FOV, matching the always-observed convention).
    """
    r = resolution
    o = np.asarray(origin, dtype=float)
    rng = sensor.range_m
    lo = np.maximum(np.floor((o - rng) / r).astype(int), 0)
    hi = np.minimum(np.floor((o + rng) / r).astype(int), np.asarray(dims) - 1)
    if np.any(hi < lo):
        return np.zeros((0, 3), dtype=np.int64)
    ax = [np.arange(lo[i], hi[i] + 1) for i in range(3)]
    gx, gy, gz = np.meshgrid(*ax, indexing="ij")
    idx = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    centers = (idx + 0.5) * r
    delta = centers - o
    dist_sq = np.einsum("ij,ij->i", delta, delta)
    mask = dist_sq <= rng * rng

    origin_idx = np.floor(o / r).astype(int)
    is_origin = np.all(idx == origin_idx, axis=1)

    if sensor.h_fov < 360.0:
        half = math.radians(sensor.h_fov) / 2.0
        az = np.arctan2(delta[:, 1], delta[:, 0])
        mask &= np.abs(_wrap_angle(az - yaw)) <= half
    if sensor.v_fov < 180.0:
        half_v = math.radians(sensor.v_fov) / 2.0
        horiz = np.hypot(delta[:, 0], delta[:, 1])
        elev = np.arctan2(delta[:, 2], horiz)
        mask &= np.abs(elev) <= half_v
    mask |= is_origin

    if only_state is not None:
        sub = only_state[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1]
        mask &= (sub.ravel() == state_value)
    return idx[mask]


def visible_targets(origin, targets: np.ndarray, resolution: float,
                    blocking: np.ndarray) -> np.ndarray:
    """Boolean mask: which target voxels are visible from ``origin``.

    Exact voxel-by-voxel traversal of the segment origin -> target centre;
    a target is visible iff no voxel strictly before it along the segment
    is True in ``blocking``.  Ties in the traversal parameter advance the
    lowest axis first (x < y < z).
    """
    n = len(targets)
    if n == 0:
        return np.zeros(0, dtype=bool)
    r = resolution
    p = np.asarray(origin, dtype=float) / r
    start = np.floor(p).astype(np.int64)
    tgt = targets.astype(np.int64)

    visible = np.zeros(n, dtype=bool)
    at_start = np.all(tgt == start, axis=1)
    visible[at_start] = True

    active = ~at_start
    if not np.any(active):
        return visible

    d = (tgt + 0.5) - p  # direction in voxel units
    step = np.sign(d).astype(np.int64)
    with np.errstate(divide="ignore"):
        inv = 1.0 / d
    t_delta = np.abs(inv)
    t_delta[step == 0] = np.inf
    # parameter value at which each ray first crosses a voxel boundary
    bound = np.where(step > 0, start + 1.0, start.astype(float))
    t_max = (bound - p) * inv
    t_max[step == 0] = np.inf

    cur = np.repeat(start[None, :], n, axis=0)
    act_idx = np.nonzero(active)[0]
    cur_a = cur[act_idx]
    t_max_a = t_max[act_idx]
    t_delta_a = t_delta[act_idx]
    step_a = step[act_idx]
    tgt_a = tgt[act_idx]

    dims = blocking.shape
    while act_idx.size:
        axis = np.argmin(t_max_a, axis=1)
        rows = np.arange(act_idx.size)
        cur_a[rows, axis] += step_a[rows, axis]
        t_max_a[rows, axis] += t_delta_a[rows, axis]

        oob = ((cur_a < 0) | (cur_a >= np.asarray(dims))).any(axis=1)
        reached = np.all(cur_a == tgt_a, axis=1)
        blocked = np.zeros(act_idx.size, dtype=bool)
        inb = ~oob & ~reached  # only voxels strictly before the target block
        if np.any(inb):
            blocked[inb] = blocking[cur_a[inb, 0], cur_a[inb, 1], cur_a[inb, 2]]
        visible[act_idx[reached & ~oob]] = True

        done = reached | blocked | oob
        keep = ~done
        act_idx = act_idx[keep]
        cur_a = cur_a[keep]
        t_max_a = t_max_a[keep]
        t_delta_a = t_delta_a[keep]
        step_a = step_a[keep]
        tgt_a = tgt_a[keep]
    return visible


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _check_cfg(grid, cfg: Config) -> None:
    if not grid.in_bounds(cfg.position):
        raise InvalidConfig(f"configuration {cfg.position} outside the grid")


def integrate_scan(vmap: VoxelMap, world: WorldModel, cfg: Config,
                   sensor: SensorModel, record: list | None = None) -> int:
    """Simulate one scan at ``cfg`` and fold it into the map.

    Returns the number of voxels that left the unknown state.  Already
    mapped voxels never change (labels are truth and monotone), so
    repeating a scan returns 0.  When ``record`` is a list, the (N, 3)
    index array of newly mapped voxels is appended to it.
    """
    if tuple(vmap.dims) != tuple(world.dims):
        raise ShapeError("map and world dims differ")
    _check_cfg(world, cfg)
    cand = frustum_candidates(vmap.dims, vmap.resolution, cfg.position, cfg.yaw,
                              sensor, only_state=vmap.state, state_value=UNKNOWN)
    if cand.size == 0:
        return 0
    vis = visible_targets(cfg.position, cand, vmap.resolution,
                          blocking=world.truth == OCCUPIED)
    newly = cand[vis]
    if newly.size:
        ix, iy, iz = newly[:, 0], newly[:, 1], newly[:, 2]
        vmap.state[ix, iy, iz] = world.truth[ix, iy, iz]
        if record is not None:
            record.append(newly)
    return int(len(newly))


def info_gain(vmap: VoxelMap, cfg: Config, sensor: SensorModel) -> int:
    """Count unknown voxels observable from ``cfg``.

    Known-occupied voxels block; unknown voxels are transparent, so the
    result never undercounts what a real scan at this pose would map.
    Pure: the map is not touched.
    """
    _check_cfg(vmap, cfg)
    cand = frustum_candidates(vmap.dims, vmap.resolution, cfg.position, cfg.yaw,
                              sensor, only_state=vmap.state, state_value=UNKNOWN)
    if cand.size == 0:
        return 0
    vis = visible_targets(cfg.position, cand, vmap.resolution,
                          blocking=vmap.state == OCCUPIED)
    return int(np.count_nonzero(vis))


def best_yaw_gain(vmap: VoxelMap, position, sensor: SensorModel,
                  layer: str = "uav") -> tuple[float, int]:
    """Best (yaw, gain) over the sensor's discrete yaw set.

    Ties go to the lowest yaw index.  Rejects omnidirectional sensors:
    call :func:`info_gain` directly for those.
    """
    if not sensor.yaw_set:
        raise NotDirectional("sensor has an empty yaw set")
    best_yaw = sensor.yaw_set[0]
    best = -1
    for yaw in sensor.yaw_set:
        g = info_gain(vmap, Config(tuple(position), yaw, layer), sensor)
        if g > best:
            best = g
            best_yaw = yaw
    return best_yaw, best


def coverage_fraction(vmap: VoxelMap, world: WorldModel) -> float:
    """|mapped ∩ reachable| / |reachable|."""
    if tuple(vmap.dims) != tuple(world.dims):
        raise ShapeError("map and world dims differ")
    reach = world.reachable_mask
    denom = int(np.count_nonzero(reach))
    if denom == 0:
        return 1.0
    num = int(np.count_nonzero((vmap.state != UNKNOWN) & reach))
    return num / denom


# ---------------------------------------------------------------------------
# serialization: world files and map snapshots
# ---------------------------------------------------------------------------

def _rle_encode(flat: np.ndarray) -> list[list]:
    runs = []
    if flat.size == 0:
        return runs
    change = np.nonzero(np.diff(flat))[0]
    starts = np.concatenate([[0], change + 1])
    ends = np.concatenate([change + 1, [flat.size]])
    for s, e in zip(starts, ends):
        runs.append([LABEL_NAMES[int(flat[s])], int(e - s)])
    return runs


def _rle_decode(runs, size: int) -> np.ndarray:
    out = np.empty(size, dtype=np.uint8)
    pos = 0
    for name, count in runs:
        out[pos:pos + count] = LABEL_CODES[name]
        pos += count
    if pos != size:
        raise ValueError("run-length data does not cover the grid")
    return out


def _bool_rle_encode(flat: np.ndarray) -> list[list]:
    runs = []
    if flat.size == 0:
        return runs
    flat = flat.astype(np.uint8)
    change = np.nonzero(np.diff(flat))[0]
    starts = np.concatenate([[0], change + 1])
    ends = np.concatenate([change + 1, [flat.size]])
    for s, e in zip(starts, ends):
        runs.append([int(flat[s]), int(e - s)])
    return runs


def _bool_rle_decode(runs, size: int) -> np.ndarray:
    out = np.empty(size, dtype=bool)
    pos = 0
    for value, count in runs:
        out[pos:pos + count] = bool(value)
        pos += count
    if pos != size:
        raise ValueError("run-length data does not cover the grid")
    return out


def world_to_dict(world: WorldModel) -> dict:
    return {
        "dims": list(world.dims),
        "resolution": world.resolution,
        "ground_height": world.ground_z,
        "solids": world.solids,
        "unreachable": world.unreachable_regions,
        "occupied_rle": _rle_encode(world.truth.ravel(order="C")),
        "reachable_rle": _bool_rle_encode(world.reachable_mask.ravel(order="C")),
    }


def world_from_dict(doc: dict) -> WorldModel:
    world = WorldModel(doc["dims"], doc["resolution"], doc["ground_height"])
    if "occupied_rle" in doc:
        size = int(np.prod(world.dims))
        world.truth = _rle_decode(doc["occupied_rle"], size).reshape(world.dims)
        if "reachable_rle" in doc:
            world.reachable_mask = _bool_rle_decode(
                doc["reachable_rle"], size).reshape(world.dims)
        world.solids = list(doc.get("solids", []))
        world.unreachable_regions = list(doc.get("unreachable", []))
    else:
        for s in doc.get("solids", []):
            if s["kind"] == "box":
                world.add_box(s["min"], s["max"], s.get("label", OCCUPIED))
            elif s["kind"] == "cylinder":
                world.add_cylinder(s["center"], s["radius"], s["z"][0], s["z"][1],
                                   s.get("label", OCCUPIED))
            else:
                raise ValueError(f"unknown solid kind {s['kind']!r}")
        for region in doc.get("unreachable", []):
            world.mark_unreachable_box(region["min"], region["max"])
    return world


def map_to_dict(vmap: VoxelMap) -> dict:
    return {
        "dims": list(vmap.dims),
        "resolution": vmap.resolution,
        "state_rle": _rle_encode(vmap.state.ravel(order="C")),
    }


def map_from_dict(doc: dict) -> VoxelMap:
    dims = tuple(doc["dims"])
    state = _rle_decode(doc["state_rle"], int(np.prod(dims))).reshape(dims)
    return VoxelMap(dims, doc["resolution"], state=state)
