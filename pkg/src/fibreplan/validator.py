"""Hard-constraint checks for decoded designs.

Every check returns a list of :class:`Finding` (empty on pass) and never
raises for a violated constraint. :func:`validate` aggregates them into a
:class:`FeasibilityReport`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import numpy as np

from .allocation import UNASSIGNED
from .errors import MapIntegrityError
from .model import BusinessRules, NetworkMap
from .paths import segments_intersect


@dataclass(frozen=True)
class DesignSolution:
    """A design as PDO node ids plus a client -> PDO map (-1 when unserved)."""

    pdos: tuple[int, ...]
    assignments: Mapping[int, int]

    @classmethod
    def from_genotype(cls, genotype, net: NetworkMap) -> "DesignSolution":
        mask = np.asarray(genotype.pdo_mask, dtype=bool)
        pdos = tuple(int(v) for v in net.candidate_ids[mask])
        assignments = {c.id: int(p) for c, p in zip(net.clients, np.asarray(genotype.assignment).tolist())}
        return cls(pdos, assignments)

    def to_genotype(self, net: NetworkMap):
        from .genotype import Genotype

        self.check_references(net)
        mask = np.zeros(len(net.candidates), dtype=np.int8)
        for p in self.pdos:
            mask[net.candidate_index[p]] = 1
        assignment = np.array([self.assignments.get(c.id, UNASSIGNED) for c in net.clients], dtype=np.int64)
        return Genotype(mask, assignment)

    def check_references(self, net: NetworkMap) -> None:
        for p in self.pdos:
            if p not in net.candidate_index:
                raise MapIntegrityError(f"PDO {p} is not a candidate node of the map")
        for c, p in self.assignments.items():
            if c not in net.client_index:
                raise MapIntegrityError(f"assignment references unknown client {c}")
            if p != UNASSIGNED and p not in net.candidate_index:
                raise MapIntegrityError(f"client {c} is assigned to unknown PDO {p}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "pdos": sorted(self.pdos),
            "assignments": [{"client": c, "pdo": p} for c, p in sorted(self.assignments.items())],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "DesignSolution":
        from .errors import MapParseError

        try:
            pdos = tuple(int(p) for p in doc["pdos"])
            assignments = {int(a["client"]): int(a["pdo"]) for a in doc["assignments"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise MapParseError(f"solution document: {exc!r}") from exc
        return cls(pdos, assignments)


@dataclass(frozen=True)
class Finding:
    check: str
    node: int
    value: float
    limit: float
    detail: str = ""
    hard: bool = True


@dataclass(frozen=True)
class OpticalMargin:
    client: int
    total_km: float
    cable_loss_db: float
    splitter_loss_db: float
    margin_db: float


@dataclass
class FeasibilityReport:
    findings: list[Finding] = field(default_factory=list)
    margins: list[OpticalMargin] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not any(f.hard for f in self.findings)

    def by_check(self, check: str) -> list[Finding]:
        return [f for f in self.findings if f.check == check]

    def to_dict(self) -> dict[str, Any]:
        worst = min((m.margin_db for m in self.margins), default=None)
        return {
            "feasible": self.feasible,
            "n_findings": len(self.findings),
            "findings": [asdict(f) for f in self.findings],
            "min_optical_margin_db": worst,
        }


def _drop_length(net: NetworkMap, client: int, pdo: int) -> float:
    c, p = net.by_id[client], net.by_id[pdo]
    return math.hypot(c.x - p.x, c.y - p.y)


def _served(solution: DesignSolution):
    for c, p in sorted(solution.assignments.items()):
        if p != UNASSIGNED:
            yield c, p


def check_capacity(solution: DesignSolution, net: NetworkMap, rules: BusinessRules) -> list[Finding]:
    load: dict[int, int] = {}
    for c, p in _served(solution):
        load[p] = load.get(p, 0) + net.by_id[c].demand
    usable = rules.usable
    return [
        Finding("capacity", p, used, usable, f"PDO {p} uses {used} of {usable} ports")
        for p, used in sorted(load.items())
        if used > usable
    ]


def check_drop_range(solution: DesignSolution, net: NetworkMap, rules: BusinessRules) -> list[Finding]:
    out = []
    for c, p in _served(solution):
        d = _drop_length(net, c, p)
        if d > rules.drop_limit_m:
            out.append(Finding("drop_range", c, d, rules.drop_limit_m, f"drop {c}->{p} is {d:.1f} m"))
    return out


def check_network_range(solution: DesignSolution, net: NetworkMap, rules: BusinessRules, caches) -> list[Finding]:
    out = []
    for c, p in _served(solution):
        total = caches.paths.shortest_path(p).length_m + _drop_length(net, c, p)
        if total > rules.network_range_m:
            out.append(Finding("network_range", c, total, rules.network_range_m,
                               f"client {c} is {total:.0f} m from the OLT"))
    return out


def optical_margins(solution: DesignSolution, net: NetworkMap, rules: BusinessRules, caches) -> list[OpticalMargin]:
    splitter = float(rules.splitter_loss_db.get(rules.splitter_ratio, 0.0))
    out = []
    for c, p in _served(solution):
        km = (caches.paths.shortest_path(p).length_m + _drop_length(net, c, p)) / 1000.0
        cable = rules.fiber_loss_db_per_km * km
        out.append(OpticalMargin(c, km, cable, splitter, rules.budget_db - cable - splitter))
    return out


def check_optical_budget(solution: DesignSolution, net: NetworkMap, rules: BusinessRules, caches) -> list[OpticalMargin]:
    """Per-client loss budget: cable loss at the fibre attenuation plus the splitter loss."""
    return optical_margins(solution, net, rules, caches)


def _used_edge_indices(solution: DesignSolution, caches) -> set[int]:
    used: set[int] = set()
    for p in solution.pdos:
        used.update(caches.paths.shortest_path(p).edges)
    return used


def _crossing_pairs(drops: list[tuple[int, tuple, tuple]], edge_ids, net: NetworkMap, touching: bool):
    if not drops or not edge_ids:
        return []
    # a zero-length route edge has no segment to cross
    edge_ids = [k for k in sorted(edge_ids) if net.by_id[net.edges[k].a].position != net.by_id[net.edges[k].b].position]
    if not edge_ids:
        return []
    seg_a = np.array([net.by_id[net.edges[k].a].position for k in edge_ids])
    seg_b = np.array([net.by_id[net.edges[k].b].position for k in edge_ids])
    e_lo, e_hi = np.minimum(seg_a, seg_b), np.maximum(seg_a, seg_b)
    pairs = []
    for client, p, q in drops:
        lo, hi = np.minimum(p, q), np.maximum(p, q)
        near = np.flatnonzero(np.all(e_lo <= hi, axis=1) & np.all(e_hi >= lo, axis=1))
        for j in near.tolist():
            if segments_intersect((p, q), (tuple(seg_a[j]), tuple(seg_b[j])), touching=touching):
                pairs.append((client, edge_ids[j]))
    return pairs


def check_intersections(solution: DesignSolution, net: NetworkMap, caches, touching: bool = False) -> list[Finding]:
    drops = [
        (c, net.by_id[c].position, net.by_id[p].position)
        for c, p in _served(solution)
        if net.by_id[c].position != net.by_id[p].position
    ]
    pairs = _crossing_pairs(drops, _used_edge_indices(solution, caches), net, touching)
    hard = caches.rules.intersection_penalty > 0
    return [
        Finding("intersection", c, k, 0, f"drop of client {c} crosses distribution edge {k}", hard=hard)
        for c, k in pairs
    ]


def count_crossings(assignment: np.ndarray, used: np.ndarray, net: NetworkMap, rules: BusinessRules) -> int:
    drops = []
    for client, pdo in zip(net.clients, np.asarray(assignment).tolist()):
        if pdo == UNASSIGNED:
            continue
        q = net.by_id[pdo].position
        if client.position != q:
            drops.append((client.id, client.position, q))
    return len(_crossing_pairs(drops, np.flatnonzero(used).tolist(), net, rules.strict_intersections))


def check_coverage(solution: DesignSolution, net: NetworkMap) -> list[Finding]:
    return [
        Finding("coverage", c.id, 0, c.demand, f"client {c.id} is not connected")
        for c in net.clients
        if solution.assignments.get(c.id, UNASSIGNED) == UNASSIGNED
    ]


def check_placement(solution: DesignSolution, net: NetworkMap) -> list[Finding]:
    active = set(solution.pdos)
    return [
        Finding("placement", c, p, 0, f"client {c} is assigned to inactive node {p}")
        for c, p in _served(solution)
        if p not in active
    ]


def validate(
    solution: DesignSolution, net: NetworkMap, rules: BusinessRules, caches, intersections: bool = True
) -> FeasibilityReport:
    solution.check_references(net)
    report = FeasibilityReport()
    report.findings += check_coverage(solution, net)
    report.findings += check_placement(solution, net)
    report.findings += check_capacity(solution, net, rules)
    report.findings += check_drop_range(solution, net, rules)
    report.findings += check_network_range(solution, net, rules, caches)
    report.margins = check_optical_budget(solution, net, rules, caches)
    report.findings += [
        Finding("optical_budget", m.client, m.margin_db, 0.0, f"optical margin {m.margin_db:.2f} dB")
        for m in report.margins
        if m.margin_db < 0
    ]
    if intersections:
        report.findings += check_intersections(solution, net, caches, touching=rules.strict_intersections)
    return report
