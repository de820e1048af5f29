"""Route and geometry services used by allocation and fitness.

* :class:`PathCache` runs Dijkstra from a candidate towards the OLT root on
  demand and keeps the result.
* :class:`DropTable` lists, per client, the candidates reachable by a drop
  cable sorted by straight-line distance.
* :func:`segments_intersect` is an exact orientation-based crossing test.
"""

from __future__ import annotations

import heapq
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import InfeasibilityError
from .model import BusinessRules, NetworkMap, RouteKind, node_positions


@dataclass(frozen=True)
class RoutePath:
    """Shortest route from a candidate to the root.

    ``edges`` holds edge indices ordered from the source towards the root,
    so ``edges[-1]`` is the edge leaving the root (the branch edge).
    """

    source: int
    length_m: float
    weighted_m: float
    edges: tuple[int, ...]


class PathCache:
    """Shortest-path trees towards the OLT root, filled on demand.

    Edges are weighted by length, with buried edges multiplied by
    ``buried_multiplier`` so routing avoids them when an aerial detour is
    cheaper. With a multiplier of 1 paths are plain minimum-length paths.
    """

    def __init__(self, net: NetworkMap, buried_multiplier: float = 1.0):
        self.net = net
        self.buried_multiplier = float(buried_multiplier)
        self._adj = net.neighbours()
        self._weights = [
            e.length_m * (self.buried_multiplier if e.route is RouteKind.BURIED else 1.0)
            for e in net.edges
        ]
        self._paths: dict[int, RoutePath] = {}
        self._lock = threading.Lock()

    def __contains__(self, source: int) -> bool:
        return source in self._paths

    def __len__(self) -> int:
        return len(self._paths)

    def shortest_path(self, source: int) -> RoutePath:
        path = self._paths.get(source)
        if path is None:
            path = self._dijkstra(source)
            with self._lock:
                path = self._paths.setdefault(source, path)
        return path

    def prefill(self, sources: Iterable[int] | None = None) -> None:
        for s in self.net.candidate_ids.tolist() if sources is None else sources:
            self.shortest_path(int(s))

    def _dijkstra(self, source: int) -> RoutePath:
        target = self.net.root.id
        if source not in self._adj:
            raise InfeasibilityError(f"node {source} is not a route node of this map")
        dist = {source: 0.0}
        pred: dict[int, tuple[int, int]] = {}
        done: set[int] = set()
        heap = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            if u == target:
                break
            for v, k in self._adj[u]:
                nd = d + self._weights[k]
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    pred[v] = (u, k)
                    heapq.heappush(heap, (nd, v))
        if target not in done:
            raise InfeasibilityError(f"node {source} cannot reach the OLT root {target}")
        edges = []
        node = target
        while node != source:
            node, k = pred[node]
            edges.append(k)
        edges.reverse()
        length = float(sum(self.net.edges[k].length_m for k in edges))
        return RoutePath(source, length, dist[target], tuple(edges))


def shortest_path(net: NetworkMap, cache: PathCache, source: int) -> tuple[float, tuple[int, ...]]:
    if cache.net is not net:
        raise ValueError("cache was built for a different map")
    path = cache.shortest_path(source)
    return path.length_m, path.edges


def distribution_union(net: NetworkMap, paths: Iterable[Sequence[int]]) -> tuple[float, frozenset[int]]:
    """Total length of the union of edge sets; shared edges count once."""
    used: set[int] = set()
    for p in paths:
        used.update(p)
    return float(sum(net.edges[k].length_m for k in used)), frozenset(used)


@dataclass(frozen=True)
class DropTable:
    """Per-client candidate lists within drop reach.

    ``entries[i]`` is a pair of arrays ``(candidate positions, distances)``
    for client ``i`` sorted by distance then candidate id; ``pairs[i]`` is
    the same as a list of tuples. ``lookup[i]`` maps candidate position to
    distance for the same client.
    """

    entries: tuple[tuple[np.ndarray, np.ndarray], ...]
    lookup: tuple[dict[int, float], ...]
    limit_m: float
    pairs: tuple[list[tuple[int, float]], ...] = ()

    def __post_init__(self) -> None:
        if not self.pairs:
            pairs = tuple(list(zip(c.tolist(), d.tolist())) for c, d in self.entries)
            object.__setattr__(self, "pairs", pairs)

    @property
    def unservable(self) -> list[int]:
        return [i for i, (cands, _) in enumerate(self.entries) if len(cands) == 0]


def build_drop_table(net: NetworkMap, rules: BusinessRules) -> DropTable:
    cand_xy = node_positions(net.candidates)
    client_xy = node_positions(net.clients)
    cand_ids = net.candidate_ids
    entries = []
    lookups = []
    if len(cand_xy) and len(client_xy):
        tree = cKDTree(cand_xy)
        neighbours = tree.query_ball_point(client_xy, r=rules.drop_limit_m)
    else:
        neighbours = [[] for _ in range(len(client_xy))]
    for i, near in enumerate(neighbours):
        near = np.asarray(near, dtype=np.int64)
        d = np.hypot(*(cand_xy[near] - client_xy[i]).T) if len(near) else np.empty(0)
        keep = d <= rules.drop_limit_m
        near, d = near[keep], d[keep]
        order = np.lexsort((cand_ids[near], d))
        near, d = near[order], d[order]
        entries.append((near, d))
        lookups.append(dict(zip(near.tolist(), d.tolist())))
    return DropTable(tuple(entries), tuple(lookups), float(rules.drop_limit_m))


# -- segment predicates ------------------------------------------------------

_EPS = 8 * np.finfo(float).eps


def orientation(p: Sequence[float], q: Sequence[float], r: Sequence[float]) -> int:
    """Sign of the signed area of triangle (p, q, r): +1 left turn, -1 right, 0 collinear.

    A floating-point estimate is accepted when it clears a relative error
    bound; otherwise the determinant is recomputed in exact rationals.
    """
    ax, ay = q[0] - p[0], q[1] - p[1]
    bx, by = r[0] - p[0], r[1] - p[1]
    left, right = ax * by, ay * bx
    det = left - right
    if abs(det) > _EPS * (abs(left) + abs(right)) + 1e-300:
        return 1 if det > 0 else -1
    P = [Fraction(v) for v in p]
    Q = [Fraction(v) for v in q]
    R = [Fraction(v) for v in r]
    exact = (Q[0] - P[0]) * (R[1] - P[1]) - (Q[1] - P[1]) * (R[0] - P[0])
    return (exact > 0) - (exact < 0)


def _on_segment(p, q, r) -> bool:
    """r collinear with pq lies within the bounding box of pq."""
    return min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])


def segments_intersect(s1, s2, touching: bool = False) -> bool:
    """True iff the segments cross at a point interior to both.

    Shared endpoints, T-junctions and collinear overlaps are not crossings
    unless ``touching`` is set, in which case any common point counts.
    """
    (p1, q1), (p2, q2) = s1, s2
    if tuple(p1) == tuple(q1) or tuple(p2) == tuple(q2):
        raise ValueError("degenerate zero-length segment")
    o1 = orientation(p1, q1, p2)
    o2 = orientation(p1, q1, q2)
    o3 = orientation(p2, q2, p1)
    o4 = orientation(p2, q2, q1)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    if not touching:
        return False
    return (
        (o1 == 0 and _on_segment(p1, q1, p2))
        or (o2 == 0 and _on_segment(p1, q1, q2))
        or (o3 == 0 and _on_segment(p2, q2, p1))
        or (o4 == 0 and _on_segment(p2, q2, q1))
    )
