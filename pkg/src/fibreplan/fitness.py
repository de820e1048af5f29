"""Material cost and penalised fitness of a decoded design."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .allocation import UNASSIGNED, drop_weights
from .model import BusinessRules, NetworkMap, RouteKind
from .paths import DropTable, PathCache, build_drop_table


class Caches:
    """Precomputed lookups shared by every evaluation on one map.

    Holds the Dijkstra path cache, the drop table and, per candidate
    position, the edge indices of its route to the root.
    """

    def __init__(self, net: NetworkMap, rules: BusinessRules):
        self.net = net
        self.rules = rules
        self.paths = PathCache(net, rules.buried_cost_multiplier)
        self.drops: DropTable = build_drop_table(net, rules)
        self.edge_length = np.array([e.length_m for e in net.edges], dtype=float)
        self.edge_cost_length = np.array(
            [e.length_m * (rules.buried_cost_multiplier if e.route is RouteKind.BURIED else 1.0) for e in net.edges],
            dtype=float,
        )
        self.drop_weight = drop_weights(net, rules)

    @cached_property
    def route_edges(self) -> list[np.ndarray]:
        return [
            np.array(self.paths.shortest_path(int(c)).edges, dtype=np.int64)
            for c in self.net.candidate_ids
        ]

    @cached_property
    def route_length(self) -> np.ndarray:
        return np.array([self.paths.shortest_path(int(c)).length_m for c in self.net.candidate_ids])

    def used_edges(self, mask: np.ndarray) -> np.ndarray:
        used = np.zeros(len(self.edge_length), dtype=bool)
        routes = self.route_edges
        for c in np.flatnonzero(mask):
            used[routes[c]] = True
        return used


@dataclass(frozen=True)
class CostBreakdown:
    """Resources and cost of one design.

    ``drop_m`` and ``dist_m`` are physical metres. ``drop_cost_m`` scales MDU
    drops by the MDU factor and ``dist_cost_m`` scales buried edges by the
    buried multiplier; those scaled figures are what enter the cost.
    """

    drop_m: float
    drop_cost_m: float
    dist_m: float
    dist_cost_m: float
    n_pdo: int
    c_mat: float
    h_missing: int
    n_intersections: int
    fitness: float

    def as_dict(self) -> dict[str, float]:
        return {
            "n_pdo": self.n_pdo,
            "drop_m": self.drop_m,
            "dist_m": self.dist_m,
            "drop_cost_m": self.drop_cost_m,
            "dist_cost_m": self.dist_cost_m,
            "c_mat": self.c_mat,
            "h_missing": self.h_missing,
            "n_intersections": self.n_intersections,
            "fitness": self.fitness,
        }


def compose_cost(
    rules: BusinessRules,
    *,
    n_pdo: int,
    drop_m: float,
    dist_m: float,
    drop_cost_m: float | None = None,
    dist_cost_m: float | None = None,
    h_missing: int = 0,
    n_intersections: int = 0,
) -> CostBreakdown:
    """Material cost plus penalties from resource totals."""
    drop_m, dist_m = float(drop_m), float(dist_m)
    drop_cost_m = drop_m if drop_cost_m is None else float(drop_cost_m)
    dist_cost_m = dist_m if dist_cost_m is None else float(dist_cost_m)
    n_pdo, h_missing, n_intersections = int(n_pdo), int(h_missing), int(n_intersections)
    c_mat = (
        rules.cost_drop_per_m * drop_cost_m
        + rules.cost_dist_per_m * dist_cost_m
        + rules.cost_pdo * n_pdo
    )
    fitness = c_mat + h_missing * rules.penalty + n_intersections * rules.intersection_penalty
    return CostBreakdown(
        drop_m=drop_m,
        drop_cost_m=drop_cost_m,
        dist_m=dist_m,
        dist_cost_m=dist_cost_m,
        n_pdo=n_pdo,
        c_mat=c_mat,
        h_missing=h_missing,
        n_intersections=n_intersections,
        fitness=fitness,
    )


def material_cost(genotype, net: NetworkMap, rules: BusinessRules, caches: Caches) -> CostBreakdown:
    """Cost breakdown of a repaired genotype, without the missing-client penalty."""
    full = evaluate_cost(genotype, net, rules, caches, count_intersections=False)
    return compose_cost(
        rules, n_pdo=full.n_pdo, drop_m=full.drop_m, dist_m=full.dist_m,
        drop_cost_m=full.drop_cost_m, dist_cost_m=full.dist_cost_m,
    )


def evaluate_cost(
    genotype, net: NetworkMap, rules: BusinessRules, caches: Caches, count_intersections: bool | None = None
) -> CostBreakdown:
    """Full fitness: material cost plus penalties for missing clients.

    Intersections between drops and used distribution edges are counted only
    when they carry a penalty (or when explicitly requested).
    """
    mask = np.asarray(genotype.pdo_mask, dtype=bool)
    assignment = np.asarray(genotype.assignment)
    pos = net.candidate_index
    lookup = caches.drops.lookup
    weight = caches.drop_weight
    drop_m = drop_cost_m = 0.0
    missing = 0
    for i, pdo in enumerate(assignment.tolist()):
        if pdo == UNASSIGNED:
            missing += 1
            continue
        d = lookup[i].get(pos[pdo])
        if d is None:
            # out-of-reach drop in an external design; the validator flags it
            d = math.dist(net.clients[i].position, net.by_id[pdo].position)
        drop_m += d
        drop_cost_m += d * weight[i]
    used = caches.used_edges(mask)
    dist_m = float(caches.edge_length[used].sum())
    dist_cost_m = float(caches.edge_cost_length[used].sum())
    if count_intersections is None:
        count_intersections = rules.intersection_penalty > 0
    n_cross = 0
    if count_intersections:
        from .validator import count_crossings

        n_cross = count_crossings(assignment, used, net, rules)
    return compose_cost(
        rules,
        n_pdo=int(mask.sum()),
        drop_m=drop_m,
        dist_m=dist_m,
        drop_cost_m=drop_cost_m,
        dist_cost_m=dist_cost_m,
        h_missing=missing,
        n_intersections=n_cross,
    )


def hard_violations(genotype, net: NetworkMap, rules: BusinessRules, caches: Caches) -> int:
    """Number of served clients breaking capacity, drop, range or budget limits.

    A vectorised twin of the validator checks used inside the GA loop.
    """
    mask = np.asarray(genotype.pdo_mask, dtype=bool)
    assignment = np.asarray(genotype.assignment)
    served = np.flatnonzero(assignment != UNASSIGNED)
    if not len(served):
        return 0
    pos = np.array([net.candidate_index.get(int(p), -1) for p in assignment[served]])
    bad = int(np.sum(pos < 0))
    served, pos = served[pos >= 0], pos[pos >= 0]
    bad += int(np.sum(~mask[pos]))
    drop = np.array([caches.drops.lookup[i].get(c, np.inf) for i, c in zip(served.tolist(), pos.tolist())])
    bad += int(np.sum(drop > rules.drop_limit_m))
    drop = np.where(np.isfinite(drop), drop, 0.0)
    total = caches.route_length[pos] + drop
    bad += int(np.sum(total > rules.network_range_m))
    splitter = float(rules.splitter_loss_db.get(rules.splitter_ratio, 0.0))
    loss = rules.fiber_loss_db_per_km * total / 1000.0 + splitter
    bad += int(np.sum(loss > rules.budget_db))
    load = np.bincount(pos, weights=net.client_demands[served], minlength=len(mask))
    bad += int(np.sum(load > rules.usable))
    return bad


def evaluate(genotype, net: NetworkMap, rules: BusinessRules, caches: Caches):
    """Score a repaired genotype as an :class:`Individual`."""
    from .genotype import Individual

    cost = evaluate_cost(genotype, net, rules, caches)
    feasible = cost.h_missing == 0 and hard_violations(genotype, net, rules, caches) == 0
    if rules.intersection_penalty > 0:
        feasible = feasible and cost.n_intersections == 0
    return Individual(genotype, cost, feasible)
