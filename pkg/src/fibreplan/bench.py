"""Synthetic instances, baselines, exact oracles and multi-run statistics."""

from __future__ import annotations

import csv
import itertools
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.sparse import coo_matrix

from .allocation import UNASSIGNED
from .errors import ConfigurationError, GenerationError, InstanceTooLargeError
from .fitness import Caches, compose_cost
from .ga import Evaluator, GAConfig, RunStats, evolve
from .genotype import Genotype, Individual
from .model import BusinessRules, MapEdge, MapNode, NetworkMap, NodeKind, RouteKind

# -- synthetic instances -----------------------------------------------------


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for :func:`synth_instance`.

    ``n_candidates`` counts every route node including the OLT root.
    ``n_edges`` defaults to a spanning tree for ``tree`` and a tree plus a
    quarter more lattice edges for ``grid``.
    """

    n_candidates: int
    n_sdu: int
    n_mdu: int
    area_m2: float
    topology: str = "tree"
    seed: int = 0
    n_edges: int | None = None
    buried_fraction: float = 0.1
    mdu_demand: tuple[int, int] = (4, 11)
    client_offset_m: tuple[float, float] = (5.0, 35.0)
    mdu_offset_m: float = 6.0

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "InstanceSpec":
        doc = dict(doc)
        for key in ("mdu_demand", "client_offset_m"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)


def map1_like(seed: int = 0) -> InstanceSpec:
    """Instance sized like the first field map: 188 nodes, 81 routes, ~2.1 km."""
    return InstanceSpec(n_candidates=80, n_sdu=103, n_mdu=5, area_m2=56_000.0, topology="tree", seed=seed, n_edges=81)


def tiny_spec(seed: int) -> InstanceSpec:
    rng = np.random.default_rng(10_000 + seed)
    n_cand = int(rng.integers(5, 11))
    n_mdu = int(rng.integers(0, 2))
    n_sdu = int(rng.integers(3, 9 - n_mdu))
    return InstanceSpec(
        n_candidates=n_cand, n_sdu=n_sdu, n_mdu=n_mdu, area_m2=n_cand * 45.0 ** 2,
        topology="grid", seed=seed, client_offset_m=(5.0, 45.0),
    )


def _grid_routes(spec: InstanceSpec, rng: np.random.Generator) -> tuple[np.ndarray, list[tuple[int, int]]]:
    n = spec.n_candidates
    step = math.sqrt(spec.area_m2 / n)
    cols = math.ceil(math.sqrt(n))
    cells = [(k // cols, k % cols) for k in range(n)]
    xy = np.array([(c * step, r * step) for r, c in cells], dtype=float)
    xy += rng.uniform(-0.15, 0.15, size=xy.shape) * step
    index = {cell: k for k, cell in enumerate(cells)}
    lattice = []
    for k, (r, c) in enumerate(cells):
        for dr, dc in ((0, 1), (1, 0)):
            j = index.get((r + dr, c + dc))
            if j is not None:
                lattice.append((k, j))
    if not lattice:
        return xy, []
    w = rng.uniform(1.0, 2.0, size=len(lattice))
    rows, cols_ = zip(*lattice)
    tree = minimum_spanning_tree(coo_matrix((w, (rows, cols_)), shape=(n, n))).tocoo()
    tree_edges = {tuple(sorted(e)) for e in zip(tree.row.tolist(), tree.col.tolist())}
    extra = [e for e in lattice if tuple(sorted(e)) not in tree_edges]
    target = spec.n_edges if spec.n_edges is not None else (n - 1) + round(0.25 * (n - 1))
    if target < n - 1 or target > len(lattice):
        raise GenerationError(f"grid of {n} nodes supports {n - 1}..{len(lattice)} edges, asked {target}")
    rng.shuffle(extra)
    return xy, sorted(tree_edges) + [tuple(sorted(e)) for e in extra[: target - (n - 1)]]


def _tree_routes(spec: InstanceSpec, rng: np.random.Generator) -> tuple[np.ndarray, list[tuple[int, int]]]:
    n = spec.n_candidates
    side = math.sqrt(spec.area_m2)
    step = math.sqrt(spec.area_m2 / n)
    xy = np.zeros((n, 2))
    xy[0] = (side / 2, side / 2)
    edges = []
    for k in range(1, n):
        for _ in range(200):
            parent = int(rng.integers(0, k))
            angle = rng.uniform(0, 2 * math.pi)
            r = step * rng.uniform(0.8, 1.2)
            p = xy[parent] + r * np.array([math.cos(angle), math.sin(angle)])
            if not (0 <= p[0] <= side and 0 <= p[1] <= side):
                continue
            if np.min(np.hypot(*(xy[:k] - p).T)) < 0.5 * step:
                continue
            xy[k] = p
            edges.append((parent, k))
            break
        else:
            raise GenerationError(f"no room to place route node {k} in {spec.area_m2} m2")
    target = spec.n_edges if spec.n_edges is not None else n - 1
    if target < n - 1:
        raise GenerationError("a connected route graph needs at least n_candidates - 1 edges")
    existing = set(edges)
    pairs = [
        (float(np.hypot(*(xy[i] - xy[j]))), i, j)
        for i, j in itertools.combinations(range(n), 2)
        if (i, j) not in existing
    ]
    pairs.sort()
    chords = [(i, j) for _, i, j in pairs[: target - (n - 1)]]
    if len(chords) < target - (n - 1):
        raise GenerationError(f"cannot place {target} edges on {n} nodes")
    return xy, edges + chords


def synth_instance(spec: InstanceSpec) -> NetworkMap:
    """Random route graph with clients scattered beside its edges.

    Deterministic for a given spec (including its seed).
    """
    if spec.n_candidates < 1:
        raise GenerationError("an instance needs at least the OLT root")
    if spec.n_sdu < 0 or spec.n_mdu < 0:
        raise GenerationError("client counts must be >= 0")
    if spec.area_m2 <= 0:
        raise GenerationError("area must be positive")
    lo, hi = spec.mdu_demand
    if lo < 1 or hi < lo:
        raise GenerationError(f"invalid MDU demand range {spec.mdu_demand}")
    rng = np.random.default_rng(spec.seed)
    if spec.topology == "grid":
        xy, pairs = _grid_routes(spec, rng)
    elif spec.topology == "tree":
        xy, pairs = _tree_routes(spec, rng)
    else:
        raise GenerationError(f"unknown topology {spec.topology!r}")

    root = int(rng.integers(0, spec.n_candidates)) if spec.topology == "grid" else 0
    nodes = [
        MapNode(k, round(float(x), 3), round(float(y), 3), NodeKind.OLT if k == root else NodeKind.CANDIDATE)
        for k, (x, y) in enumerate(xy)
    ]
    rounded = np.array([(nd.x, nd.y) for nd in nodes])
    edges = []
    for a, b in pairs:
        length = float(np.hypot(*(rounded[a] - rounded[b])))
        route = RouteKind.BURIED if rng.random() < spec.buried_fraction else RouteKind.AERIAL
        edges.append(MapEdge(int(a), int(b), max(round(length, 3), 0.001), route))

    next_id = spec.n_candidates
    kinds = [NodeKind.SDU] * spec.n_sdu + [NodeKind.MDU] * spec.n_mdu
    for kind in kinds:
        off_lo, off_hi = spec.client_offset_m
        offset = rng.uniform(off_lo, off_hi)
        if kind is NodeKind.MDU:
            # buildings sit on-site next to an equipment node
            angle = rng.uniform(0, 2 * math.pi)
            p = rounded[int(rng.integers(0, len(rounded)))] + rng.uniform(1.0, spec.mdu_offset_m) * np.array(
                [math.cos(angle), math.sin(angle)]
            )
        elif edges:
            e = edges[int(rng.integers(0, len(edges)))]
            a, b = rounded[e.a], rounded[e.b]
            base = a + rng.uniform(0, 1) * (b - a)
            direction = (b - a) / max(np.hypot(*(b - a)), 1e-9)
            normal = np.array([-direction[1], direction[0]]) * rng.choice((-1.0, 1.0))
            p = base + offset * normal
        else:
            angle = rng.uniform(0, 2 * math.pi)
            p = rounded[int(rng.integers(0, len(rounded)))] + offset * np.array([math.cos(angle), math.sin(angle)])
        demand = 1 if kind is NodeKind.SDU else int(rng.integers(lo, hi + 1))
        nodes.append(MapNode(next_id, round(float(p[0]), 3), round(float(p[1]), 3), kind, demand))
        next_id += 1
    return NetworkMap(tuple(nodes), tuple(edges))


# -- greedy baseline ---------------------------------------------------------


def greedy_baseline(net: NetworkMap, rules: BusinessRules, caches: Caches | None = None) -> Individual:
    """Open PDOs one at a time where they cover the most unserved demand.

    Coverage of a candidate is the demand of unserved in-range clients it can
    take nearest first within its usable ports. Ties go to the shorter total
    drop, then the lower node id. Stops when everyone is served or no
    candidate adds coverage, then allocates clients as the GA does.
    """
    caches = caches or Caches(net, rules)
    reach: dict[int, list[tuple[float, int]]] = {}
    for i, (cands, dists) in enumerate(caches.drops.entries):
        for c, d in zip(cands.tolist(), dists.tolist()):
            reach.setdefault(c, []).append((d, i))
    for lst in reach.values():
        lst.sort()
    demands = net.client_demands.tolist()
    usable = rules.usable
    unserved = {i for i in range(len(demands)) if len(caches.drops.entries[i][0])}
    mask = np.zeros(len(net.candidates), dtype=np.int8)
    while unserved:
        best = None
        for c in sorted(reach):
            if mask[c]:
                continue
            free, covered, length, taken = usable, 0, 0.0, []
            for d, i in reach[c]:
                if i in unserved and demands[i] <= free:
                    free -= demands[i]
                    covered += demands[i]
                    length += d
                    taken.append(i)
            if covered and (best is None or (covered, -length) > (best[0], -best[1])):
                best = (covered, length, c, taken)
        if best is None:
            break
        mask[best[2]] = 1
        unserved.difference_update(best[3])
    genotype = Genotype(mask, np.full(len(net.clients), UNASSIGNED, dtype=np.int64), stale=True)
    return Evaluator(net, rules, caches)(genotype)


# -- exact oracle ------------------------------------------------------------


def min_cost_assignment(
    active: Sequence[int], net: NetworkMap, rules: BusinessRules, caches: Caches, serve_all: bool = True
) -> tuple[float, np.ndarray]:
    """Exact capacitated assignment of clients to a fixed PDO set.

    With ``serve_all`` the assignment first serves as many clients as the
    ports and drop reach allow, then minimises drop cost among those
    (the space the allocation heuristic searches). Without it, any client
    may be left out whenever the missing-client penalty is cheaper.

    Unit-demand clients are matched to port slots with a rectangular
    assignment solve (a min-cost flow on unit capacities). Clients with
    demand above one must take their ports on a single PDO, so their
    choices are enumerated and the unit clients solved for each.
    Returns ``(drop cost + penalties, assignment by candidate position or -1)``.
    """
    active = sorted(int(c) for c in active)
    demands = net.client_demands
    weight = caches.drop_weight
    usable = rules.usable
    lookup = caches.drops.lookup
    penalty = rules.penalty
    unit = [i for i in range(len(demands)) if demands[i] == 1]
    multi = [i for i in range(len(demands)) if demands[i] > 1]

    def arc(i: int, c: int) -> float | None:
        d = lookup[i].get(c)
        return None if d is None else rules.cost_drop_per_m * d * weight[i]

    # a leave-out price above any possible drop total makes coverage come first
    worst = max((arc(i, c) for i in unit for c in active if c in lookup[i]), default=0.0)
    leave_out = (1.0 + worst) * (len(unit) + 1) + penalty if serve_all else penalty

    options = []
    for i in multi:
        opts = [c for c in active if c in lookup[i] and demands[i] <= usable]
        options.append(opts + [UNASSIGNED])

    best_key, best_cost, best_assign = None, math.inf, None
    for choice in itertools.product(*options):
        free = {c: usable for c in active}
        cost = 0.0
        missing = 0
        ok = True
        for i, c in zip(multi, choice):
            if c == UNASSIGNED:
                missing += 1
                continue
            free[c] -= demands[i]
            if free[c] < 0:
                ok = False
                break
            cost += arc(i, c)
        if not ok:
            continue
        slots = [c for c in active for _ in range(min(free[c], len(unit)))]
        assign = {i: c for i, c in zip(multi, choice)}
        if unit:
            matrix = np.full((len(unit), len(slots) + len(unit)), math.inf)
            matrix[:, len(slots):] = leave_out
            for r, i in enumerate(unit):
                for s, c in enumerate(slots):
                    a = arc(i, c)
                    if a is not None:
                        matrix[r, s] = a
            rows, cols = linear_sum_assignment(matrix)
            for r, s in zip(rows.tolist(), cols.tolist()):
                if s < len(slots):
                    assign[unit[r]] = slots[s]
                    cost += float(matrix[r, s])
                else:
                    assign[unit[r]] = UNASSIGNED
                    missing += 1
        total = cost + missing * penalty
        key = (missing, cost) if serve_all else (total,)
        if best_key is None or key < best_key:
            best_key, best_cost = key, total
            best_assign = np.array([assign[i] for i in range(len(demands))], dtype=np.int64)
    if best_assign is None:
        best_assign = np.full(len(demands), UNASSIGNED, dtype=np.int64)
    return best_cost, best_assign


@dataclass(frozen=True)
class OracleResult:
    fitness: float
    mask: np.ndarray
    assignment: np.ndarray


def brute_force_oracle(
    net: NetworkMap, rules: BusinessRules, caches: Caches | None = None,
    max_candidates: int = 12, max_clients: int = 10, serve_all: bool = True,
) -> OracleResult:
    """Optimal penalised cost by enumerating every PDO mask.

    Each mask is scored with the exact assignment from
    ``min_cost_assignment`` (``serve_all`` is passed through).
    """
    if len(net.candidates) > max_candidates or len(net.clients) > max_clients:
        raise InstanceTooLargeError(
            f"oracle limited to {max_candidates} candidates and {max_clients} clients, "
            f"got {len(net.candidates)} and {len(net.clients)}"
        )
    if rules.intersection_penalty > 0:
        raise ConfigurationError("the oracle does not model intersection penalties")
    caches = caches or Caches(net, rules)
    n = len(net.candidates)
    best = None
    for bits in itertools.product((0, 1), repeat=n):
        mask = np.array(bits, dtype=np.int8)
        active = np.flatnonzero(mask).tolist()
        used = caches.used_edges(mask)
        fixed = compose_cost(
            rules, n_pdo=len(active), drop_m=0.0,
            dist_m=float(caches.edge_length[used].sum()),
            dist_cost_m=float(caches.edge_cost_length[used].sum()),
        ).c_mat
        if best is not None and fixed >= best.fitness:
            continue
        assign_cost, assign_pos = min_cost_assignment(active, net, rules, caches, serve_all)
        total = fixed + assign_cost
        if best is None or total < best.fitness:
            ids = np.where(assign_pos >= 0, net.candidate_ids[np.maximum(assign_pos, 0)], UNASSIGNED)
            best = OracleResult(total, mask, ids)
    return best


# -- multi-run statistics ----------------------------------------------------

METRICS = ("n_pdo", "drop_km", "dist_km", "fitness")


@dataclass
class RunRecord:
    run: int
    seed: int
    n_pdo: int
    drop_km: float
    dist_km: float
    fitness: float
    h_missing: int
    feasible: bool


@dataclass
class BenchSummary:
    records: list[RunRecord]
    traces: list[RunStats]
    best: list[Individual] = field(repr=False, default_factory=list)
    runtimes_s: list[float] = field(default_factory=list)

    def ranked(self) -> list[RunRecord]:
        return sorted(self.records, key=lambda r: (r.fitness, r.run))

    def table(self) -> dict[str, dict[str, float]]:
        """Per metric: the best, worst and median run (by fitness) plus mean and sample std."""
        return summarise(self.records)

    def mean_trace(self, which: str = "best") -> np.ndarray:
        return np.mean([getattr(t, which) for t in self.traces], axis=0)

    @property
    def best_individual(self) -> Individual:
        k = min(range(len(self.best)), key=lambda i: (self.best[i].fitness, i))
        return self.best[k]


def summarise(records: Sequence[RunRecord]) -> dict[str, dict[str, float]]:
    ranked = sorted(records, key=lambda r: (r.fitness, r.run))
    best, worst = ranked[0], ranked[-1]
    median = ranked[(len(ranked) - 1) // 2]
    out = {}
    for m in METRICS:
        values = [float(getattr(r, m)) for r in records]
        out[m] = {
            "best": float(getattr(best, m)),
            "worst": float(getattr(worst, m)),
            "median": float(getattr(median, m)),
            "mean": statistics.fmean(values),
            "std": statistics.stdev(values) if len(values) > 1 else 0.0,
        }
    return out


def record_of(run: int, seed: int, ind: Individual) -> RunRecord:
    return RunRecord(
        run=run, seed=seed, n_pdo=ind.cost.n_pdo,
        drop_km=ind.cost.drop_m / 1000.0, dist_km=ind.cost.dist_m / 1000.0,
        fitness=ind.fitness, h_missing=ind.cost.h_missing, feasible=ind.feasible,
    )


def run_stats(
    net: NetworkMap, rules: BusinessRules, config: GAConfig, n_runs: int = 10, caches: Caches | None = None
) -> BenchSummary:
    """Run ``evolve`` with seeds ``rng_seed .. rng_seed + n_runs - 1``."""
    if n_runs < 1:
        raise ConfigurationError("n_runs must be >= 1")
    caches = caches or Caches(net, rules)
    summary = BenchSummary(records=[], traces=[])
    for run in range(n_runs):
        seed = config.rng_seed + run
        t0 = time.perf_counter()
        best, stats = evolve(net, rules, config, np.random.default_rng(seed), caches)
        summary.runtimes_s.append(time.perf_counter() - t0)
        summary.records.append(record_of(run, seed, best))
        summary.traces.append(stats)
        summary.best.append(best)
    return summary


def improvement_share(trace: Sequence[float], upto: int) -> float:
    """Fraction of the total decrease of ``trace`` achieved by index ``upto``."""
    total = trace[0] - trace[-1]
    if total <= 0:
        return 1.0
    return (trace[0] - trace[min(upto, len(trace) - 1)]) / total


# -- CSV ---------------------------------------------------------------------


def _fmt(value: Any) -> Any:
    return f"{value:.6f}" if isinstance(value, float) else value


def write_records_csv(records: Iterable[RunRecord], path: Path) -> None:
    rows = [asdict(r) for r in records]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(RunRecord.__dataclass_fields__))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def write_summary_csv(table: dict[str, dict[str, float]], path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "best", "worst", "median", "mean", "std"])
        for m, row in table.items():
            writer.writerow([m] + [_fmt(row[k]) for k in ("best", "worst", "median", "mean", "std")])


def write_traces_csv(traces: Sequence[RunStats], path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "generation", "best", "mean"])
        for run, t in enumerate(traces):
            for gen, (b, m) in enumerate(zip(t.best_ever, t.mean)):
                writer.writerow([run, gen, _fmt(b), _fmt(m)])
