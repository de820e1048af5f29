from __future__ import annotations

import numpy as np
import pytest

from fibreplan.model import BusinessRules, MapEdge, MapNode, NetworkMap, NodeKind, RouteKind


def make_map(route_nodes, edges, clients=(), root=0):
    """Build a map from terse tuples.

    ``route_nodes``: ``[(id, x, y), ...]`` where ``root`` becomes the OLT;
    ``edges``: ``[(a, b)]`` or ``[(a, b, length)]`` or ``[(a, b, length, "buried")]``;
    ``clients``: ``[(id, x, y)]`` for SDUs or ``[(id, x, y, demand)]`` for MDUs.
    """
    nodes = []
    xy = {}
    for nid, x, y in route_nodes:
        kind = NodeKind.OLT if nid == root else NodeKind.CANDIDATE
        nodes.append(MapNode(nid, float(x), float(y), kind))
        xy[nid] = (x, y)
    out_edges = []
    for e in edges:
        a, b = e[0], e[1]
        length = e[2] if len(e) > 2 else float(np.hypot(xy[a][0] - xy[b][0], xy[a][1] - xy[b][1]))
        route = RouteKind(e[3]) if len(e) > 3 else RouteKind.AERIAL
        out_edges.append(MapEdge(a, b, float(length), route))
    for c in clients:
        if len(c) == 3:
            nodes.append(MapNode(c[0], float(c[1]), float(c[2]), NodeKind.SDU, 1))
        else:
            nodes.append(MapNode(c[0], float(c[1]), float(c[2]), NodeKind.MDU, int(c[3])))
    return NetworkMap(tuple(nodes), tuple(out_edges))


@pytest.fixture
def rules() -> BusinessRules:
    return BusinessRules()


@pytest.fixture
def line_map():
    """Root at the origin, candidates every 50 m along the x axis, 4 SDUs beside them."""
    route = [(0, 0, 0), (1, 50, 0), (2, 100, 0), (3, 150, 0)]
    edges = [(0, 1), (1, 2), (2, 3)]
    clients = [(10, 50, 10), (11, 100, 20), (12, 150, 5), (13, 0, 30)]
    return make_map(route, edges, clients)


def anchor_instance(n_pdo: int = 62, drop_total_m: float = 2750.0, dist_total_m: float = 2080.0):
    """Star of ``n_pdo`` candidates, each with one SDU, sized to given totals.

    Every candidate hangs off the root on its own edge of length
    ``dist_total_m / n_pdo`` and serves one SDU ``drop_total_m / n_pdo`` metres
    away. Candidates sit on a wide circle so each SDU reaches only its own PDO.
    Returns the map and the genotype with every candidate but the root active.
    """
    from fibreplan.genotype import Genotype

    edge = dist_total_m / n_pdo
    drop = drop_total_m / n_pdo
    radius = 400.0 * n_pdo / (2 * np.pi)
    route = [(0, 0.0, 0.0)]
    clients = []
    for k in range(1, n_pdo + 1):
        a = 2 * np.pi * k / n_pdo
        x, y = radius * np.cos(a), radius * np.sin(a)
        route.append((k, x, y))
        clients.append((1000 + k, x + drop * np.cos(a), y + drop * np.sin(a)))
    net = make_map(route, [(0, k, edge) for k in range(1, n_pdo + 1)], clients)
    mask = np.ones(n_pdo + 1, dtype=np.int8)
    mask[0] = 0
    genotype = Genotype(mask, np.arange(1, n_pdo + 1, dtype=np.int64))
    return net, genotype
