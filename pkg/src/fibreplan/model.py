"""Map data model, document ingestion and preprocessing.

A map is a route graph (OLT root plus equipment candidates joined by aerial
or buried edges) and a set of off-graph client points (SDUs and MDUs) that
attach to a PDO by a straight drop cable.
"""

from __future__ import annotations

import configparser
import enum
import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, MapIntegrityError, MapParseError, UnusableMapError

logger = logging.getLogger(__name__)


class NodeKind(enum.Enum):
    CANDIDATE = "candidate"
    SDU = "sdu"
    MDU = "mdu"
    OLT = "olt"

    @property
    def is_client(self) -> bool:
        return self in (NodeKind.SDU, NodeKind.MDU)


class RouteKind(enum.Enum):
    AERIAL = "aerial"
    BURIED = "buried"


@dataclass(frozen=True)
class MapNode:
    id: int
    x: float
    y: float
    kind: NodeKind
    demand: int = 0

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class MapEdge:
    a: int
    b: int
    length_m: float
    route: RouteKind = RouteKind.AERIAL


@dataclass(frozen=True, eq=False)
class NetworkMap:
    """Immutable route graph plus client points.

    ``candidates`` lists every node a PDO may be placed on (equipment
    candidates and the OLT root), sorted by id; genotype mask positions
    index into it. ``clients`` is sorted by id the same way.
    """

    nodes: tuple[MapNode, ...]
    edges: tuple[MapEdge, ...]
    filtered_ids: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        _check_integrity(self.nodes, self.edges)

    @cached_property
    def by_id(self) -> dict[int, MapNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def root(self) -> MapNode:
        return next(n for n in self.nodes if n.kind is NodeKind.OLT)

    @cached_property
    def candidates(self) -> tuple[MapNode, ...]:
        return tuple(sorted((n for n in self.nodes if not n.kind.is_client), key=lambda n: n.id))

    @cached_property
    def clients(self) -> tuple[MapNode, ...]:
        return tuple(sorted((n for n in self.nodes if n.kind.is_client), key=lambda n: n.id))

    @cached_property
    def candidate_index(self) -> dict[int, int]:
        return {n.id: i for i, n in enumerate(self.candidates)}

    @cached_property
    def client_index(self) -> dict[int, int]:
        return {n.id: i for i, n in enumerate(self.clients)}

    @cached_property
    def candidate_ids(self) -> np.ndarray:
        return np.array([n.id for n in self.candidates], dtype=np.int64)

    @cached_property
    def client_demands(self) -> np.ndarray:
        return np.array([n.demand for n in self.clients], dtype=np.int64)

    @cached_property
    def client_is_mdu(self) -> np.ndarray:
        return np.array([n.kind is NodeKind.MDU for n in self.clients], dtype=bool)

    @property
    def total_demand(self) -> int:
        return int(sum(n.demand for n in self.clients))

    @property
    def total_route_length_m(self) -> float:
        return float(sum(e.length_m for e in self.edges))

    def neighbours(self) -> dict[int, list[tuple[int, int]]]:
        """Adjacency as ``node -> [(neighbour, edge index)]`` sorted by neighbour id."""
        adj: dict[int, list[tuple[int, int]]] = {n.id: [] for n in self.candidates}
        for k, e in enumerate(self.edges):
            adj[e.a].append((e.b, k))
            adj[e.b].append((e.a, k))
        for lst in adj.values():
            lst.sort()
        return adj


def _check_integrity(nodes: tuple[MapNode, ...], edges: tuple[MapEdge, ...]) -> None:
    seen: set[int] = set()
    n_root = 0
    for n in nodes:
        if n.id < 0:
            raise MapIntegrityError(f"node id {n.id} is negative")
        if n.id in seen:
            raise MapIntegrityError(f"duplicate node id {n.id}")
        seen.add(n.id)
        if n.kind is NodeKind.OLT:
            n_root += 1
        if n.kind is NodeKind.SDU and n.demand != 1:
            raise MapIntegrityError(f"node {n.id}: SDU demand must be 1, got {n.demand}")
        if n.kind is NodeKind.MDU and n.demand < 1:
            raise MapIntegrityError(f"node {n.id}: MDU demand must be >= 1, got {n.demand}")
        if not n.kind.is_client and n.demand != 0:
            raise MapIntegrityError(f"node {n.id}: {n.kind.value} demand must be 0")
    if n_root != 1:
        raise MapIntegrityError(f"map must have exactly one OLT root, found {n_root}")
    kinds = {n.id: n.kind for n in nodes}
    for k, e in enumerate(edges):
        for end in (e.a, e.b):
            if end not in kinds:
                raise MapIntegrityError(f"edge {k} references unknown node {end}")
            if kinds[end].is_client:
                raise MapIntegrityError(f"edge {k} touches client node {end}")
        if e.a == e.b:
            raise MapIntegrityError(f"edge {k} is a self-loop on node {e.a}")
        if not e.length_m > 0:
            raise MapIntegrityError(f"edge {k} has non-positive length {e.length_m}")


# -- documents ---------------------------------------------------------------

def _field(obj: Mapping[str, Any], key: str, where: str, cast):
    if key not in obj:
        raise MapParseError(f"{where}: missing field '{key}'")
    try:
        return cast(obj[key])
    except (TypeError, ValueError) as exc:
        raise MapParseError(f"{where}.{key}: invalid value {obj[key]!r}") from exc


def _int(value: Any) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ValueError(value)
    return int(value)


def _float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError(value)
    out = float(value)
    if not math.isfinite(out):
        raise ValueError(value)
    return out


def map_from_dict(doc: Mapping[str, Any]) -> NetworkMap:
    """Build a map from a parsed map document (no preprocessing)."""
    if not isinstance(doc, Mapping):
        raise MapParseError("map document must be an object with 'nodes' and 'edges'")
    for key in ("nodes", "edges"):
        if not isinstance(doc.get(key), list):
            raise MapParseError(f"map document: '{key}' must be a list")
    nodes = []
    for i, raw in enumerate(doc["nodes"]):
        where = f"nodes[{i}]"
        if not isinstance(raw, Mapping):
            raise MapParseError(f"{where}: must be an object")
        kind = _field(raw, "kind", where, NodeKind)
        default_demand = 1 if kind is NodeKind.SDU else 0
        demand = _field(raw, "demand", where, _int) if "demand" in raw else default_demand
        nodes.append(MapNode(
            id=_field(raw, "id", where, _int),
            x=_field(raw, "x_m", where, _float),
            y=_field(raw, "y_m", where, _float),
            kind=kind,
            demand=demand,
        ))
    edges = []
    for i, raw in enumerate(doc["edges"]):
        where = f"edges[{i}]"
        if not isinstance(raw, Mapping):
            raise MapParseError(f"{where}: must be an object")
        route = _field(raw, "route", where, RouteKind) if "route" in raw else RouteKind.AERIAL
        edges.append(MapEdge(
            a=_field(raw, "a", where, _int),
            b=_field(raw, "b", where, _int),
            length_m=_field(raw, "length_m", where, _float),
            route=route,
        ))
    return NetworkMap(tuple(nodes), tuple(edges))


def map_to_dict(net: NetworkMap) -> dict[str, Any]:
    return {
        "nodes": [
            {"id": n.id, "x_m": n.x, "y_m": n.y, "kind": n.kind.value, "demand": n.demand}
            for n in net.nodes
        ],
        "edges": [
            {"a": e.a, "b": e.b, "length_m": e.length_m, "route": e.route.value}
            for e in net.edges
        ],
    }


def load_map(source: str | Path) -> NetworkMap:
    """Read a JSON map document from ``source``."""
    path = Path(source)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MapParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return map_from_dict(doc)
    except MapParseError as exc:
        raise MapParseError(f"{path}: {exc}") from exc


def save_map(net: NetworkMap, target: str | Path) -> None:
    Path(target).write_text(json.dumps(map_to_dict(net), indent=1) + "\n", encoding="utf-8")


# -- preprocessing -----------------------------------------------------------

def reachable_from_root(net: NetworkMap) -> set[int]:
    adj = net.neighbours()
    start = net.root.id
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v, _ in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def preprocess(net: NetworkMap) -> NetworkMap:
    """Drop equipment candidates outside the root's connected component.

    Clients are always kept. The ids of removed nodes are recorded on the
    returned map as ``filtered_ids``.
    """
    keep = reachable_from_root(net)
    n_equipment = sum(1 for n in net.nodes if n.kind is NodeKind.CANDIDATE)
    if n_equipment and len(keep) == 1:
        raise UnusableMapError(f"OLT root {net.root.id} is isolated from all candidates")
    removed = tuple(sorted(n.id for n in net.nodes if not n.kind.is_client and n.id not in keep))
    if removed:
        logger.info("preprocess removed %d isolated candidate(s)", len(removed))
    nodes = tuple(n for n in net.nodes if n.kind.is_client or n.id in keep)
    edges = tuple(e for e in net.edges if e.a in keep)
    return NetworkMap(nodes, edges, filtered_ids=net.filtered_ids + removed)


# -- business rules ----------------------------------------------------------

DEFAULT_SPLITTER_LOSS_DB = {2: 3.7, 4: 7.3, 8: 10.5, 16: 13.7, 32: 17.1, 64: 20.5}


@dataclass(frozen=True)
class BusinessRules:
    """Material weights and design constraints.

    Defaults are the experimental configuration: PDO 300/unit, drop 2/m,
    distribution 5/m, 12 ports with a 10% margin, 85 m drops and a 20 km
    network range. The optical-budget and splitter-loss figures are
    engineering defaults and should be overridden per deployment.
    ``penalty_per_missing`` falls back to ``cost_pdo`` when left as None.
    """

    cost_pdo: float = 300.0
    cost_drop_per_m: float = 2.0
    cost_dist_per_m: float = 5.0
    port_limit: int = 12
    port_margin: float = 0.10
    drop_limit_m: float = 85.0
    network_range_m: float = 20_000.0
    penalty_per_missing: float | None = None
    mdu_drop_factor: float = 10.0
    buried_cost_multiplier: float = 2.0
    fiber_loss_db_per_km: float = 0.35
    budget_db: float = 28.0
    splitter_ratio: int = 64
    splitter_loss_db: Mapping[int, float] = field(default_factory=lambda: dict(DEFAULT_SPLITTER_LOSS_DB))
    cable_capacities: tuple[int, ...] = (16, 32)
    intersection_penalty: float = 0.0
    strict_intersections: bool = False

    def __post_init__(self) -> None:
        for name in ("cost_pdo", "cost_drop_per_m", "cost_dist_per_m", "intersection_penalty"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if self.penalty_per_missing is not None and self.penalty_per_missing < 0:
            raise ConfigurationError("penalty_per_missing must be >= 0")
        if self.port_limit < 1:
            raise ConfigurationError("port_limit must be >= 1")
        if not 0 <= self.port_margin < 1:
            raise ConfigurationError("port_margin must lie in [0, 1)")
        if self.drop_limit_m <= 0:
            raise ConfigurationError("drop_limit_m must be > 0")
        if self.network_range_m <= 0:
            raise ConfigurationError("network_range_m must be > 0")
        if self.buried_cost_multiplier < 1:
            raise ConfigurationError("buried_cost_multiplier must be >= 1")
        if self.mdu_drop_factor < 0:
            raise ConfigurationError("mdu_drop_factor must be >= 0")
        if not self.cable_capacities or min(self.cable_capacities) < 1:
            raise ConfigurationError("cable_capacities must be a non-empty list of positive sizes")
        usable_ports(self)

    @property
    def penalty(self) -> float:
        return self.cost_pdo if self.penalty_per_missing is None else self.penalty_per_missing

    @property
    def usable(self) -> int:
        return usable_ports(self)


def usable_ports(rules: BusinessRules) -> int:
    """Ports left operational after reserving the expansion margin."""
    if rules.port_limit < 1:
        raise ConfigurationError("port_limit must be >= 1")
    # epsilon guards against products such as 100 * 0.29 = 28.999...
    reserved = math.floor(rules.port_limit * rules.port_margin + 1e-9)
    usable = rules.port_limit - reserved
    if usable < 1:
        raise ConfigurationError(
            f"port margin {rules.port_margin} leaves no usable port out of {rules.port_limit}"
        )
    return usable


_RULE_TYPES = {f.name: f.type for f in fields(BusinessRules)}


def _parse_rule(name: str, raw: str) -> Any:
    kind = _RULE_TYPES[name]
    raw = raw.strip()
    if name == "penalty_per_missing":
        return None if raw.lower() in ("", "none") else float(raw)
    if name == "splitter_loss_db":
        out = {}
        for item in raw.split(","):
            ratio, loss = item.split(":")
            out[int(ratio)] = float(loss)
        return out
    if name == "cable_capacities":
        return tuple(sorted(int(v) for v in raw.split(",")))
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)
    if kind == "int":
        return int(raw)
    return float(raw)


def rules_from_mapping(values: Mapping[str, str], where: str = "rules") -> BusinessRules:
    kwargs = {}
    for key, raw in values.items():
        if key not in _RULE_TYPES:
            raise MapParseError(f"{where}: unknown rule '{key}'")
        try:
            kwargs[key] = _parse_rule(key, raw)
        except ValueError as exc:
            raise MapParseError(f"{where}.{key}: invalid value {raw!r}") from exc
    return BusinessRules(**kwargs)


def load_rules(source: str | Path | None) -> tuple[BusinessRules, dict[str, str]]:
    """Read an INI-style rules document.

    Keys in ``[rules]`` override :class:`BusinessRules` defaults; the ``[ga]``
    section is returned raw for :meth:`GAConfig.from_mapping`. ``None``
    yields the defaults.
    """
    if source is None:
        return BusinessRules(), {}
    path = Path(source)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise MapParseError(f"{path}: {exc}") from exc
    unknown = set(parser.sections()) - {"rules", "ga"}
    if unknown:
        raise MapParseError(f"{path}: unknown section(s) {sorted(unknown)}")
    rules_section = dict(parser["rules"]) if parser.has_section("rules") else {}
    ga_section = dict(parser["ga"]) if parser.has_section("ga") else {}
    return rules_from_mapping(rules_section, where=f"{path}[rules]"), ga_section


def rules_to_text(rules: BusinessRules, ga: Mapping[str, Any] | None = None) -> str:
    lines = ["[rules]"]
    for f in fields(BusinessRules):
        value = getattr(rules, f.name)
        if f.name == "splitter_loss_db":
            value = ", ".join(f"{k}:{v}" for k, v in sorted(value.items()))
        elif f.name == "cable_capacities":
            value = ", ".join(str(v) for v in value)
        elif value is None:
            value = "none"
        lines.append(f"{f.name} = {value}")
    if ga:
        lines += ["", "[ga]"] + [f"{k} = {v}" for k, v in ga.items()]
    return "\n".join(lines) + "\n"


def with_rules(rules: BusinessRules, **changes: Any) -> BusinessRules:
    return replace(rules, **changes)


def node_positions(nodes: Iterable[MapNode]) -> np.ndarray:
    return np.array([(n.x, n.y) for n in nodes], dtype=float).reshape(-1, 2)
