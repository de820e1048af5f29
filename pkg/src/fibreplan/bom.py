"""Post-hoc equipment sizing: splitters and distribution cables per branch."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .allocation import UNASSIGNED
from .errors import ConfigurationError, InfeasibilityError
from .model import BusinessRules, NetworkMap

ROOT_BRANCH = "olt"


@dataclass
class EquipmentBill:
    splitters: dict[int, int] = field(default_factory=dict)
    cables: dict[int, int] = field(default_factory=dict)
    branch_demand: dict[str, int] = field(default_factory=dict)
    branch_spare: dict[str, int] = field(default_factory=dict)

    @property
    def total_demand(self) -> int:
        return sum(self.branch_demand.values())

    def to_dict(self) -> dict:
        return {
            "splitters": {f"1:{r}": n for r, n in sorted(self.splitters.items())},
            "cables": {f"{c}FO": n for c, n in sorted(self.cables.items())},
            "branches": [
                {"branch": b, "demand": d, "spare_fibres": self.branch_spare[b]}
                for b, d in self.branch_demand.items()
            ],
            "total_demand": self.total_demand,
        }


def branch_key(net: NetworkMap, edge_index: int) -> str:
    e = net.edges[edge_index]
    return f"{e.a}-{e.b}"


def branch_demands(solution, net: NetworkMap, caches) -> dict[str, int]:
    """Fibre demand per branch leaving the OLT.

    A branch is identified by the first route edge out of the root; clients
    on a PDO placed at the root itself are grouped under ``"olt"``.
    """
    active = set(solution.pdos)
    out: dict[str, int] = {}
    for client, pdo in sorted(solution.assignments.items()):
        if pdo == UNASSIGNED:
            continue
        if pdo not in active:
            raise InfeasibilityError(f"client {client} is served by inactive node {pdo}")
        edges = caches.paths.shortest_path(pdo).edges
        key = branch_key(net, edges[-1]) if edges else ROOT_BRANCH
        out[key] = out.get(key, 0) + net.by_id[client].demand
    return out


def select_cables(demand: int, available: Sequence[int]) -> Counter:
    """Cables covering ``demand`` fibres: as many of the largest size as fit
    whole, then the smallest single cable that covers the remainder."""
    if not available:
        raise ConfigurationError("no cable capacities configured")
    sizes = sorted(available)
    largest = sizes[-1]
    chosen: Counter = Counter()
    if demand <= 0:
        return chosen
    full, rest = divmod(demand, largest)
    if full:
        chosen[largest] = full
    if rest:
        chosen[next(s for s in sizes if s >= rest)] += 1
    return chosen


def cable_waste(demand: int, cables: Counter) -> int:
    return sum(size * n for size, n in cables.items()) - demand


def select_splitters(total_demand: int, ratio: int) -> int:
    if ratio <= 0:
        raise ValueError("splitter ratio must be positive")
    return math.ceil(total_demand / ratio) if total_demand > 0 else 0


def build_bill(solution, net: NetworkMap, rules: BusinessRules, caches) -> EquipmentBill:
    demands = branch_demands(solution, net, caches)
    bill = EquipmentBill(branch_demand=demands)
    cables: Counter = Counter()
    for branch, demand in demands.items():
        chosen = select_cables(demand, rules.cable_capacities)
        cables.update(chosen)
        bill.branch_spare[branch] = cable_waste(demand, chosen)
    bill.cables = dict(sorted(cables.items()))
    n_split = select_splitters(sum(demands.values()), rules.splitter_ratio)
    if n_split:
        bill.splitters = {rules.splitter_ratio: n_split}
    return bill
