"""Budget-constrained orienteering on an undirected weighted graph.

An instance fixes a start vertex, an end vertex, and a travel budget; every
vertex carries a non-negative reward that is collected at most once.  A
tour is a simple path from start to end (a closed loop is allowed only when
start == end) whose sequential edge-length sum stays within budget; the
goal is maximum collected reward.

``solve_op`` is a deterministic heuristic: it seeds with the shortest
start-end path, grows it by greedy reward-per-detour insertion (detours
routed over graph shortest paths), then polishes with segment reversal and
single-node relocation/swap moves, alternating insertion and improvement
until neither helps.  ``brute_force_op`` enumerates all feasible simple
paths for small instances and serves as the exact reference.

Lengths are always recomputed by summing edge weights in tour order, so a
stored total matches recomputation bit-for-bit and budget checks are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra


class Infeasible(Exception):
    """No tour can reach the end vertex within budget."""


class MalformedInstance(ValueError):
    """Instance is structurally invalid (missing start/end, bad edge...)."""


class TooLarge(ValueError):
    """Instance exceeds the exact solver's node-count guard."""


BRUTE_FORCE_MAX_NODES = 12


@dataclass(frozen=True)
class Tour:
    nodes: tuple[int, ...]
    total_length: float
    total_reward: float


class OpInstance:
    """Reward-weighted graph with pinned endpoints and a length budget."""

    def __init__(self, rewards: dict[int, float], edges, start: int, end: int,
                 budget: float):
        if start not in rewards:
            raise MalformedInstance(f"start vertex {start} not in instance")
        if end not in rewards:
            raise MalformedInstance(f"end vertex {end} not in instance")
        if budget < 0:
            raise MalformedInstance("budget must be non-negative")
        self.rewards = {int(k): float(v) for k, v in rewards.items()}
        for nid, rew in self.rewards.items():
            if rew < 0:
                raise MalformedInstance(f"negative reward at vertex {nid}")
        self.start = int(start)
        self.end = int(end)
        self.budget = float(budget)
        self.adj: dict[int, list[tuple[int, float]]] = {n: [] for n in self.rewards}
        self.edge_len: dict[tuple[int, int], float] = {}
        self.edges: list[tuple[int, int, float]] = []
        for a, b, w in edges:
            a, b, w = int(a), int(b), float(w)
            if a not in self.rewards or b not in self.rewards:
                raise MalformedInstance(f"edge ({a},{b}) references unknown vertex")
            if a == b or w <= 0:
                raise MalformedInstance(f"edge ({a},{b}) must join distinct "
                                        "vertices with positive length")
            key = (min(a, b), max(a, b))
            if key in self.edge_len:
                continue
            self.edge_len[key] = w
            self.edges.append((a, b, w))
            self.adj[a].append((b, w))
            self.adj[b].append((a, w))
        self._ids = sorted(self.rewards)
        self._index = {n: i for i, n in enumerate(self._ids)}
        self._dist = None
        self._pred = None

    def length(self, a: int, b: int) -> float:
        return self.edge_len[(min(a, b), max(a, b))]

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edge_len

    # -- all-pairs shortest paths (lazy) --------------------------------

    def _ensure_paths(self):
        if self._dist is not None:
            return
        n = len(self._ids)
        rows, cols, vals = [], [], []
        for a, b, w in self.edges:
            ia, ib = self._index[a], self._index[b]
            rows += [ia, ib]
            cols += [ib, ia]
            vals += [w, w]
        mat = csr_matrix((vals, (rows, cols)), shape=(n, n))
        dist, pred = _csgraph_dijkstra(mat, directed=False,
                                       return_predecessors=True)
        self._dist = dist
        self._pred = pred

    def sp_dist(self, a: int, b: int) -> float:
        self._ensure_paths()
        return float(self._dist[self._index[a], self._index[b]])

    def sp_path(self, a: int, b: int) -> list[int] | None:
        """Shortest-path vertex sequence a..b, or None if disconnected."""
        self._ensure_paths()
        ia, ib = self._index[a], self._index[b]
        if a == b:
            return [a]
        if not math.isfinite(self._dist[ia, ib]):
            return None
        seq = [ib]
        while seq[-1] != ia:
            p = self._pred[ia, seq[-1]]
            if p < 0:
                return None
            seq.append(int(p))
        return [self._ids[i] for i in reversed(seq)]


def walk_length(instance: OpInstance, nodes) -> float:
    """Sequential edge-length sum along a vertex walk (exact, in order)."""
    total = 0.0
    for a, b in zip(nodes, nodes[1:]):
        total += instance.length(a, b)
    return total


def walk_reward(instance: OpInstance, nodes) -> float:
    return sum(instance.rewards[n] for n in set(nodes))


def make_tour(instance: OpInstance, nodes) -> Tour:
    nodes = tuple(int(n) for n in nodes)
    return Tour(nodes, walk_length(instance, nodes), walk_reward(instance, nodes))


def verify_tour(instance: OpInstance, tour: Tour) -> None:
    """Raise ValueError unless the tour satisfies every invariant."""
    nodes = tour.nodes
    if not nodes or nodes[0] != instance.start or nodes[-1] != instance.end:
        raise ValueError("tour endpoints do not match the instance")
    for a, b in zip(nodes, nodes[1:]):
        if not instance.has_edge(a, b):
            raise ValueError(f"consecutive vertices ({a},{b}) are not adjacent")
    inner = nodes if instance.start != instance.end or len(nodes) == 1 else nodes[:-1]
    if len(set(inner)) != len(inner):
        raise ValueError("tour revisits a vertex")
    length = walk_length(instance, nodes)
    if length != tour.total_length:
        raise ValueError("stored length differs from recomputation")
    if walk_reward(instance, nodes) != tour.total_reward:
        raise ValueError("stored reward differs from recomputation")
    if length > instance.budget:
        raise ValueError("tour exceeds the budget")


def _is_simple(nodes, closed: bool) -> bool:
    inner = nodes[:-1] if closed and len(nodes) > 1 else nodes
    return len(set(inner)) == len(inner)


def _splice(instance: OpInstance, anchors) -> tuple[list[int], float] | None:
    """Expand an anchor sequence into the full walk via shortest paths.

    Returns (walk, exact length) or None when a hop is disconnected or the
    walk would revisit a vertex.
    """
    walk = [anchors[0]]
    for a, b in zip(anchors, anchors[1:]):
        seg = instance.sp_path(a, b)
        if seg is None:
            return None
        walk.extend(seg[1:])
    closed = instance.start == instance.end
    if not _is_simple(walk, closed):
        return None
    return walk, walk_length(instance, walk)


def _insertion_round(instance: OpInstance, anchors, walk, length,
                     rng: np.random.Generator) -> tuple[list, list, float, bool]:
    """Insert, if possible, the unvisited vertex with the best
    reward-per-detour ratio; rng only shuffles equal-ratio ties."""
    visited = set(walk)
    cands = [n for n in instance._ids
             if n not in visited and instance.rewards[n] > 0]
    if not cands:
        return anchors, walk, length, False
    options = []
    for u in cands:
        best = None
        for i in range(len(anchors) - 1):
            a, b = anchors[i], anchors[i + 1]
            da, db = instance.sp_dist(a, u), instance.sp_dist(u, b)
            if not (math.isfinite(da) and math.isfinite(db)):
                continue
            detour = da + db - instance.sp_dist(a, b)
            if length + detour > instance.budget + 1e-9:
                continue
            if best is None or detour < best[0]:
                best = (detour, i)
        if best is not None:
            detour, i = best
            ratio = instance.rewards[u] / detour if detour > 1e-12 else math.inf
            options.append((ratio, u, i))
    if not options:
        return anchors, walk, length, False
    tie = rng.permutation(len(options))
    order = sorted(range(len(options)),
                   key=lambda k: (-options[k][0], tie[k]))
    for k in order[:20]:  # bounded retries when splices collide
        _, u, i = options[k]
        trial = anchors[:i + 1] + [u] + anchors[i + 1:]
        out = _splice(instance, trial)
        if out is None:
            continue
        new_walk, new_len = out
        if new_len <= instance.budget:
            return trial, new_walk, new_len, True
    return anchors, walk, length, False


def _improvement_round(instance: OpInstance, anchors, walk, length
                       ) -> tuple[list, list, float, bool]:
    """First-improvement local search over (reward, -length).

    Moves: reversal of an interior anchor segment, relocation of one
    interior anchor, and swap of two interior anchors.
    """
    score = (walk_reward(instance, walk), -length)
    m = len(anchors)

    def try_anchors(trial):
        out = _splice(instance, trial)
        if out is None:
            return None
        w, ln = out
        if ln > instance.budget:
            return None
        sc = (walk_reward(instance, w), -ln)
        if sc > score:
            return trial, w, ln
        return None

    for i in range(1, m - 1):           # segment reversal
        for j in range(i + 1, m - 1):
            hit = try_anchors(anchors[:i] + anchors[i:j + 1][::-1] + anchors[j + 1:])
            if hit:
                return (*hit, True)
    for i in range(1, m - 1):           # relocation
        base = anchors[:i] + anchors[i + 1:]
        for pos in range(1, len(base)):
            if pos == i:
                continue
            hit = try_anchors(base[:pos] + [anchors[i]] + base[pos:])
            if hit:
                return (*hit, True)
    for i in range(1, m - 1):           # pairwise swap
        for j in range(i + 1, m - 1):
            trial = list(anchors)
            trial[i], trial[j] = trial[j], trial[i]
            hit = try_anchors(trial)
            if hit:
                return (*hit, True)
    return anchors, walk, length, False


def _construct(instance: OpInstance, rng: np.random.Generator,
               seed_walk, seed_len) -> tuple[list[int], float]:
    anchors = [instance.start, instance.end]
    walk, length = list(seed_walk), seed_len
    move_cap = 10 * len(instance._ids)
    moves = 0
    changed = True
    while changed and moves <= move_cap:
        changed = False
        while moves <= move_cap:
            anchors, walk, length, ok = _insertion_round(
                instance, anchors, walk, length, rng)
            if not ok:
                break
            moves += 1
            changed = True
        while moves <= move_cap:
            anchors, walk, length, ok = _improvement_round(
                instance, anchors, walk, length)
            if not ok:
                break
            moves += 1
            changed = True
    return walk, length


def solve_op(instance: OpInstance, rng: np.random.Generator | None = None) -> Tour:
    """Heuristic tour for an instance; raises Infeasible when even the
    shortest start-end path exceeds the budget.  Deterministic for a given
    seeded generator; the returned reward never falls below the seed
    path's."""
    if rng is None:
        rng = np.random.default_rng(0)
    if instance.start == instance.end:
        seed_walk, seed_len = [instance.start], 0.0
    else:
        seed = instance.sp_path(instance.start, instance.end)
        if seed is None:
            raise Infeasible("start and end are disconnected")
        seed_len = walk_length(instance, seed)
        if seed_len > instance.budget:
            raise Infeasible("shortest start-end path exceeds the budget")
        seed_walk = seed
    walk, length = _construct(instance, rng, seed_walk, seed_len)
    tour = make_tour(instance, walk)
    verify_tour(instance, tour)
    return tour


def brute_force_op(instance: OpInstance) -> Tour:
    """Exact optimum by exhaustive enumeration of budget-feasible simple
    paths (closed loops allowed when start == end).  Ties: higher reward,
    then shorter length, then lexicographically smallest node sequence."""
    n = len(instance._ids)
    if n > BRUTE_FORCE_MAX_NODES:
        raise TooLarge(f"{n} nodes exceeds the {BRUTE_FORCE_MAX_NODES}-node guard")
    start, end, budget = instance.start, instance.end, instance.budget
    instance._ensure_paths()
    best: tuple[float, float, tuple[int, ...]] | None = None  # (-reward, length, seq)
    closed = start == end

    def consider(seq: list[int], length: float):
        nonlocal best
        reward = walk_reward(instance, seq)
        key = (-reward, length, tuple(seq))
        if best is None or key < best:
            best = key

    def remaining(n_id: int) -> float:
        return instance.sp_dist(n_id, end)

    def extend(seq: list[int], length: float, seen: set[int]):
        node = seq[-1]
        for nbr, w in sorted(instance.adj[node]):
            nl = length + w  # same left-to-right summation as walk_length
            if nl > budget:
                continue
            if nbr == end and (not closed or len(seq) >= 2):
                consider(seq + [nbr], nl)
                if closed:
                    continue
            if nbr in seen or nbr == end:
                continue
            rem = remaining(nbr)
            if not math.isfinite(rem) or nl + rem > budget + 1e-9:
                continue
            seen.add(nbr)
            extend(seq + [nbr], nl, seen)
            seen.remove(nbr)

    if closed:
        consider([start], 0.0)
        extend([start], 0.0, {start})
    else:
        if instance.sp_path(start, end) is None:
            raise Infeasible("start and end are disconnected")
        extend([start], 0.0, {start})
        if best is None:
            raise Infeasible("no start-end path fits the budget")
    reward = -best[0]
    return Tour(best[2], walk_length(instance, list(best[2])), reward)


# ---------------------------------------------------------------------------
# instance / tour files
# ---------------------------------------------------------------------------

def instance_to_dict(instance: OpInstance) -> dict:
    return {
        "nodes": [{"id": n, "reward": instance.rewards[n]} for n in instance._ids],
        "edges": [{"a": a, "b": b, "length": w} for a, b, w in instance.edges],
        "start": instance.start,
        "end": instance.end,
        "budget": instance.budget,
    }


def instance_from_dict(doc: dict) -> OpInstance:
    rewards = {int(n["id"]): float(n["reward"]) for n in doc["nodes"]}
    edges = [(e["a"], e["b"], e["length"]) for e in doc["edges"]]
    return OpInstance(rewards, edges, doc["start"], doc["end"], doc["budget"])


def tour_to_dict(tour: Tour) -> dict:
    return {"nodes": list(tour.nodes), "total_length": tour.total_length,
            "total_reward": tour.total_reward}
