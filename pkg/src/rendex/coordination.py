"""Per-tour coupled planning over the layered roadmap.

Each tour starts from a shared release pair (a ground node and the aerial
node vertically above it).  Candidate aerial viewpoints with positive
information gain and a rendezvous edge are ranked by a utility that
discounts gain with the ground robot's shortest-path travel cost; the
best pair that BOTH robots can reach within their distance budgets
becomes the collect pair, and one orienteering instance per layer routes
each robot from release to collect while harvesting extra gain along the
way.  When no candidate is reachable by both robots, the aerial robot
stays docked and the ground robot simply relocates toward the highest
gain node (no rendezvous needed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .grid_map import SensorModel, VoxelMap, best_yaw_gain, info_gain
from .op_solver import Infeasible, OpInstance, Tour, solve_op
from .roadmap import Roadmap, shortest_path, single_source_distances


class InvalidRelease(ValueError):
    """Release pair references nodes missing from the roadmap."""


@dataclass(frozen=True)
class RendezvousPair:
    ground: int
    aerial: int | None
    utility: float = 0.0


@dataclass(frozen=True)
class TourPlan:
    sigma_uav: Tour | None
    sigma_ugv: Tour
    collect: RendezvousPair | None
    fallback: bool


# ---------------------------------------------------------------------------
# reward refresh with change-aware caching
# ---------------------------------------------------------------------------

class GainCache:
    """Tracks which node rewards are still valid.

    A node's gain can only change when the map changes within its sensing
    range, so after each batch of scans we drop exactly the nodes within
    (range + one voxel) of any newly mapped voxel; everything else keeps
    its cached reward.
    """

    def __init__(self):
        self._valid: set[int] = set()

    def is_valid(self, nid: int) -> bool:
        return nid in self._valid

    def mark(self, nid: int) -> None:
        self._valid.add(nid)

    def clear(self) -> None:
        self._valid.clear()

    def invalidate_near(self, G: Roadmap, points_m: np.ndarray,
                        reach_by_layer: dict[str, float]) -> None:
        if points_m.size == 0 or not self._valid:
            return
        tree = cKDTree(points_m)
        for layer, reach in reach_by_layer.items():
            ids = [nid for nid in G.layer_ids(layer) if nid in self._valid]
            if not ids:
                continue
            pos = np.array([G.nodes[i].position() for i in ids])
            dist, _ = tree.query(pos, k=1)
            for nid, d in zip(ids, dist):
                if d <= reach:
                    self._valid.discard(nid)


def refresh_layer_rewards(G: Roadmap, vmap: VoxelMap, layer: str,
                          sensor: SensorModel,
                          cache: GainCache | None = None) -> None:
    """Recompute stale node rewards for one layer (best yaw for
    directional sensors, plain gain otherwise)."""
    for nid in G.layer_ids(layer):
        if cache is not None and cache.is_valid(nid):
            continue
        node = G.nodes[nid]
        if sensor.yaw_set:
            yaw, gain = best_yaw_gain(vmap, node.position(), sensor, layer=layer)
            node.best_yaw = yaw
        else:
            gain = info_gain(vmap, node.config, sensor)
            node.best_yaw = None
        node.reward = float(gain)
        if cache is not None:
            cache.mark(nid)


def candidate_set(G: Roadmap, vmap: VoxelMap, uav_sensor: SensorModel,
                  cand_cap: int = 25,
                  cache: GainCache | None = None) -> list[int]:
    """Aerial nodes worth flying to: refreshed reward > 0 and an existing
    rendezvous edge, sorted by descending reward (ties by id), capped."""
    refresh_layer_rewards(G, vmap, "uav", uav_sensor, cache=cache)
    cands = [nid for nid in G.layer_ids("uav")
             if G.nodes[nid].reward > 0 and nid in G.partner_of_air]
    cands.sort(key=lambda nid: (-G.nodes[nid].reward, nid))
    return cands[:cand_cap]


# ---------------------------------------------------------------------------
# utility and coupled tour generation
# ---------------------------------------------------------------------------

def pair_utility(gain: float, dist_ugv: float, lam: float) -> float:
    """gain * exp(-lam * ground-travel distance); lam = 0 reduces to the
    raw gain."""
    if gain < 0 or dist_ugv < 0 or lam < 0:
        raise ValueError("gain, distance and lambda must be non-negative")
    return gain * math.exp(-lam * dist_ugv)


def _layer_instance(G: Roadmap, layer: str, start: int, end: int,
                    budget: float) -> OpInstance:
    rewards = {nid: G.nodes[nid].reward for nid in G.layer_ids(layer)}
    edges = [(e.a, e.b, e.length) for e in G.edges if e.kind == layer]
    return OpInstance(rewards, edges, start, end, budget)


def _relocation_tour(G: Roadmap, path: list[int], length: float) -> Tour:
    reward = sum(G.nodes[n].reward for n in set(path))
    return Tour(tuple(path), length, float(reward))


def _nearest_ground_xy(G: Roadmap, x: float, y: float) -> int | None:
    best = None
    for gid in G.layer_ids("ugv"):
        p = G.nodes[gid].position()
        d = math.hypot(p[0] - x, p[1] - y)
        if best is None or (d, gid) < best:
            best = (d, gid)
    return best[1] if best else None


def plan_tour_pair(G: Roadmap, release: RendezvousPair, candidates: list[int],
                   budget_uav: float, budget_ugv: float,
                   lam: float, rng: np.random.Generator) -> TourPlan:
    """Select the collect pair and build both tours (one per layer).

    A candidate pair is dual-feasible iff each robot's shortest-path
    distance from its release node fits its budget.  Utility argmax picks
    the collect (ties: larger gain, shorter ground distance, lower id);
    the ground instance is solved first, then the aerial one.  With no
    dual-feasible candidate the plan falls back to a ground relocation
    toward the highest-gain node, or staying put when nothing has gain.
    """
    if release.ground not in G.nodes:
        raise InvalidRelease(f"ground release node {release.ground} missing")
    if release.aerial is not None and release.aerial not in G.nodes:
        raise InvalidRelease(f"aerial release node {release.aerial} missing")

    dist_g = single_source_distances(G, "ugv", release.ground)
    dist_a = (single_source_distances(G, "uav", release.aerial)
              if release.aerial is not None else {})

    feasible: list[tuple[float, float, float, int, int]] = []
    for air_id in candidates:
        gnd_id = G.partner_of_air.get(air_id)
        if gnd_id is None:
            continue
        da = dist_a.get(air_id)
        dg = dist_g.get(gnd_id)
        if da is None or dg is None:
            continue
        if da <= budget_uav and dg <= budget_ugv:
            gain = G.nodes[air_id].reward
            feasible.append((pair_utility(gain, dg, lam), gain, dg, air_id, gnd_id))

    feasible.sort(key=lambda t: (-t[0], -t[1], t[2], t[3]))
    for util, _, _, air_id, gnd_id in feasible:
        try:
            sigma_ugv = solve_op(_layer_instance(G, "ugv", release.ground,
                                                 gnd_id, budget_ugv), rng)
            sigma_uav = solve_op(_layer_instance(G, "uav", release.aerial,
                                                 air_id, budget_uav), rng)
        except Infeasible:
            continue  # distance-filter/solver float disagreement; next pair
        collect = RendezvousPair(gnd_id, air_id, util)
        return TourPlan(sigma_uav, sigma_ugv, collect, False)

    # fallback: aerial robot stays docked, ground robot repositions freely
    scored = [(G.nodes[nid].reward, -nid) for nid in sorted(G.nodes)
              if G.nodes[nid].reward > 0]
    scored.sort(reverse=True)
    for reward, neg_id in scored:
        nid = -neg_id
        node = G.nodes[nid]
        if node.layer == "ugv":
            target = nid
        else:
            p = node.position()
            target = _nearest_ground_xy(G, p[0], p[1])
            if target is None:
                continue
        hit = shortest_path(G, "ugv", release.ground, target)
        if hit is None:
            continue
        path, length = hit
        return TourPlan(None, _relocation_tour(G, path, length), None, True)

    stay = _relocation_tour(G, [release.ground], 0.0)
    return TourPlan(None, stay, None, True)


def validate_plan(G: Roadmap, plan: TourPlan, budget_uav: float,
                  budget_ugv: float) -> None:
    """Raise unless the plan honours the coupling invariants."""
    if plan.fallback:
        if plan.sigma_uav is not None:
            raise ValueError("fallback plans must not contain an aerial tour")
        return
    if plan.collect is None or plan.sigma_uav is None:
        raise ValueError("non-fallback plans need a collect pair and both tours")
    if plan.sigma_uav.nodes[-1] != plan.collect.aerial:
        raise ValueError("aerial tour does not end at the collect pair")
    if plan.sigma_ugv.nodes[-1] != plan.collect.ground:
        raise ValueError("ground tour does not end at the collect pair")
    if not G.has_edge(plan.collect.aerial, plan.collect.ground):
        raise ValueError("collect pair is not joined by a rendezvous edge")
    if plan.sigma_uav.total_length > budget_uav:
        raise ValueError("aerial tour exceeds its budget")
    if plan.sigma_ugv.total_length > budget_ugv:
        raise ValueError("ground tour exceeds its budget")


def plan_to_dict(G: Roadmap, plan: TourPlan) -> dict:
    def tour_doc(tour: Tour | None) -> dict | None:
        if tour is None:
            return None
        legs = [{"from": a, "to": b,
                 "length": float(np.linalg.norm(G.nodes[a].position()
                                                - G.nodes[b].position()))}
                for a, b in zip(tour.nodes, tour.nodes[1:])]
        return {"waypoints": [{"id": n,
                               "x": G.nodes[n].position()[0],
                               "y": G.nodes[n].position()[1],
                               "z": G.nodes[n].position()[2]}
                              for n in tour.nodes],
                "legs": legs,
                "total_length": tour.total_length,
                "total_reward": tour.total_reward}

    return {
        "sigma_uav": tour_doc(plan.sigma_uav),
        "sigma_ugv": tour_doc(plan.sigma_ugv),
        "collect": None if plan.collect is None else
            {"ground": plan.collect.ground, "aerial": plan.collect.aerial,
             "utility": plan.collect.utility},
        "fallback": plan.fallback,
    }
