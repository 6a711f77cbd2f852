"""Heuristic frontier extraction from horizontal map slices.

Each configured slice height gives a 2-D view of the occupancy map.  A
cell is frontier-eligible iff it is unknown and 4-adjacent to a free cell
in the same slice; eligible cells are grouped into 8-connected blobs and
each blob of at least ``min_blob_cells`` cells is summarized as a circle
(centroid, equivalent-area radius, cell-count weight).  The circles steer
roadmap growth toward unexplored space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid_map import FREE, UNKNOWN, VoxelMap

_EIGHT_CONN = np.ones((3, 3), dtype=int)


class NoFrontiers(ValueError):
    """Sampling requested from an empty frontier list."""


@dataclass(frozen=True)
class FrontierCircle:
    center: tuple[float, float]  # metres
    radius: float                # metres
    z: float                     # slice height, metres
    area_weight: int             # eligible-cell count of the source blob

    def target_point(self) -> tuple[float, float, float]:
        return (self.center[0], self.center[1], self.z)


def eligible_cells(slice_state: np.ndarray) -> np.ndarray:
    """Boolean mask of unknown cells 4-adjacent to at least one free cell."""
    free = slice_state == FREE
    near_free = np.zeros_like(free)
    near_free[1:, :] |= free[:-1, :]
    near_free[:-1, :] |= free[1:, :]
    near_free[:, 1:] |= free[:, :-1]
    near_free[:, :-1] |= free[:, 1:]
    return (slice_state == UNKNOWN) & near_free


def detect_frontiers(vmap: VoxelMap, slice_heights, min_blob_cells: int = 3
                     ) -> list[FrontierCircle]:
    """Extract frontier circles from the given slice heights.

    Returns circles sorted by descending weight (ties: ascending slice
    height, then centroid).  A fully mapped slice contributes nothing.
    """
    r = vmap.resolution
    circles: list[FrontierCircle] = []
    for z in slice_heights:
        iz = int(math.floor(z / r))
        if not (0 <= iz < vmap.dims[2]):
            raise ValueError(f"slice height {z} outside the grid")
        sl = vmap.state[:, :, iz]
        mask = eligible_cells(sl)
        if not mask.any():
            continue
        labels, n = ndimage.label(mask, structure=_EIGHT_CONN)
        for lab in range(1, n + 1):
            cells = np.nonzero(labels == lab)
            count = len(cells[0])
            if count < min_blob_cells:
                continue
            cx = (float(np.mean(cells[0])) + 0.5) * r
            cy = (float(np.mean(cells[1])) + 0.5) * r
            radius = math.sqrt(count * r * r / math.pi)
            circles.append(FrontierCircle((cx, cy), radius, z, count))
    circles.sort(key=lambda c: (-c.area_weight, c.z, c.center))
    return circles


def total_weight(frontiers: list[FrontierCircle]) -> int:
    return sum(c.area_weight for c in frontiers)


def weighted_sample_frontier(frontiers: list[FrontierCircle],
                             rng: np.random.Generator) -> FrontierCircle:
    """Pick one circle with probability proportional to its area weight."""
    if not frontiers:
        raise NoFrontiers("no frontier circles to sample")
    weights = np.array([c.area_weight for c in frontiers], dtype=float)
    probs = weights / weights.sum()
    i = int(rng.choice(len(frontiers), p=probs))
    return frontiers[i]


def frontiers_to_dicts(frontiers: list[FrontierCircle]) -> list[dict]:
    return [{"center": [c.center[0], c.center[1]], "radius": c.radius,
             "z": c.z, "area_weight": c.area_weight} for c in frontiers]
