"""Client-to-PDO allocation (the integer level of the genotype).

Allocation runs closest-first; when some client could not get its nearest
active PDO, a hill-climbing pass swaps drop links between clients to cut
drop cost.
"""

from __future__ import annotations

from bisect import insort
from collections import deque

import numpy as np

from .model import BusinessRules, NetworkMap
from .paths import DropTable

UNASSIGNED = -1
_TOL = 1e-9


def allocate(
    mask: np.ndarray, net: NetworkMap, rules: BusinessRules, drops: DropTable
) -> tuple[np.ndarray, list[int]]:
    """Closest-PDO allocation under port capacity.

    Returns the assignment (PDO node id per client, ``-1`` when unserved)
    and the client positions that ended up on something other than their
    nearest active PDO.
    """
    on = np.asarray(mask, dtype=bool).tolist()
    cand_ids = net.candidate_ids.tolist()
    demands = net.client_demands.tolist()
    free = [rules.usable] * len(cand_ids)
    assignment = [UNASSIGNED] * len(demands)
    misplaced = []
    for i, pairs in enumerate(drops.pairs):
        need = demands[i]
        first = True
        for c, _ in pairs:
            if not on[c]:
                continue
            if free[c] >= need:
                free[c] -= need
                assignment[i] = cand_ids[c]
                if not first:
                    misplaced.append(i)
                break
            first = False
    return np.array(assignment, dtype=np.int64), misplaced


def drop_weights(net: NetworkMap, rules: BusinessRules) -> np.ndarray:
    """Per-client multiplier applied to drop cost (MDU factor)."""
    return np.where(net.client_is_mdu, rules.mdu_drop_factor, 1.0)


def drop_totals(assignment: np.ndarray, net: NetworkMap, rules: BusinessRules, drops: DropTable) -> tuple[float, float]:
    """(physical drop metres, MDU-weighted drop metres) of an assignment."""
    pos = net.candidate_index
    weights = drop_weights(net, rules)
    raw = weighted = 0.0
    for i, pdo in enumerate(assignment.tolist()):
        if pdo == UNASSIGNED:
            continue
        d = drops.lookup[i][pos[pdo]]
        raw += d
        weighted += d * weights[i]
    return raw, weighted


def local_search(
    assignment: np.ndarray,
    misplaced: list[int],
    mask: np.ndarray,
    net: NetworkMap,
    rules: BusinessRules,
    drops: DropTable,
) -> np.ndarray:
    """Hill-climb drop links starting from the misplaced clients.

    Each inspected client ``h`` on PDO ``a`` looks at the other active PDOs
    within its drop reach, nearest first. It moves to PDO ``p`` outright when
    ``p`` has the ports, or swaps links with a client ``g`` already on ``p``
    when both new drops are in range and both PDOs stay within capacity. A
    move is kept only if the weighted drop cost strictly decreases and the
    physical drop length does not grow. Clients touched by an accepted move
    are queued for re-inspection; the search stops when the queue empties.
    """
    if not misplaced:
        return assignment
    on = np.asarray(mask, dtype=bool).tolist()
    out = assignment.copy()
    pos = net.candidate_index
    cand_ids = net.candidate_ids.tolist()
    demands = net.client_demands.tolist()
    weights = drop_weights(net, rules).tolist()
    usable = rules.usable

    where = [pos[p] if p != UNASSIGNED else UNASSIGNED for p in out.tolist()]
    members: dict[int, list[int]] = {}
    load = [0] * len(cand_ids)
    for i, c in enumerate(where):
        if c != UNASSIGNED:
            members.setdefault(c, []).append(i)
            load[c] += demands[i]

    def move(i: int, src: int, dst: int) -> None:
        members[src].remove(i)
        insort(members.setdefault(dst, []), i)
        load[src] -= demands[i]
        load[dst] += demands[i]
        where[i] = dst

    queue = deque(misplaced)
    queued = set(misplaced)
    while queue:
        h = queue.popleft()
        queued.discard(h)
        a = where[h]
        if a == UNASSIGNED:
            continue
        d_ha = drops.lookup[h][a]
        touched = None
        for p, d_hp in drops.pairs[h]:
            if p == a or not on[p]:
                continue
            if load[p] + demands[h] <= usable:
                gain_w = (d_hp - d_ha) * weights[h]
                if gain_w < -_TOL and d_hp - d_ha <= _TOL:
                    move(h, a, p)
                    touched = [h]
                    break
            for g in members.get(p, ()):
                d_ga = drops.lookup[g].get(a)
                if d_ga is None:
                    continue
                if load[p] - demands[g] + demands[h] > usable:
                    continue
                if load[a] - demands[h] + demands[g] > usable:
                    continue
                d_gp = drops.lookup[g][p]
                delta_raw = d_hp + d_ga - d_ha - d_gp
                delta_w = (d_hp - d_ha) * weights[h] + (d_ga - d_gp) * weights[g]
                if delta_w < -_TOL and delta_raw <= _TOL:
                    move(h, a, p)
                    move(g, p, a)
                    touched = [h, g]
                    break
            if touched:
                break
        for i in touched or ():
            if i not in queued:
                queue.append(i)
                queued.add(i)

    for i, c in enumerate(where):
        out[i] = cand_ids[c] if c != UNASSIGNED else UNASSIGNED
    return out


def assign(mask: np.ndarray, net: NetworkMap, rules: BusinessRules, drops: DropTable) -> np.ndarray:
    """Allocation followed by local search when any client is misplaced."""
    assignment, misplaced = allocate(mask, net, rules, drops)
    return local_search(assignment, misplaced, mask, net, rules, drops)
