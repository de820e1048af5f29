"""Solution documents and static renderings (GeoJSON, SVG)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any
from xml.sax.saxutils import escape

from .allocation import UNASSIGNED
from .errors import MapParseError
from .model import NetworkMap, NodeKind, RouteKind
from .validator import DesignSolution


def write_json(doc: Any, path: Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=False) + "\n", encoding="utf-8")


def write_solution(solution: DesignSolution, path: Path, cost: dict | None = None) -> None:
    doc = solution.to_dict()
    if cost is not None:
        doc["cost"] = cost
    write_json(doc, path)


def load_solution(path: str | Path) -> DesignSolution:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MapParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return DesignSolution.from_dict(doc)


def _used_edges(solution: DesignSolution, caches) -> set[int]:
    used: set[int] = set()
    for p in solution.pdos:
        used.update(caches.paths.shortest_path(p).edges)
    return used


def to_geojson(solution: DesignSolution, net: NetworkMap, caches) -> dict[str, Any]:
    """Feature collection in the map's planar metre coordinates."""
    used = _used_edges(solution, caches)
    active = set(solution.pdos)
    features = []

    def feature(geometry_type: str, coords, **props) -> None:
        features.append({
            "type": "Feature",
            "geometry": {"type": geometry_type, "coordinates": coords},
            "properties": props,
        })

    for k, e in enumerate(net.edges):
        a, b = net.by_id[e.a], net.by_id[e.b]
        feature("LineString", [[a.x, a.y], [b.x, b.y]], layer="distribution" if k in used else "route",
                edge=k, route=e.route.value, length_m=e.length_m)
    for c, p in sorted(solution.assignments.items()):
        if p == UNASSIGNED:
            continue
        cn, pn = net.by_id[c], net.by_id[p]
        feature("LineString", [[cn.x, cn.y], [pn.x, pn.y]], layer="drop", client=c, pdo=p)
    for n in net.clients:
        feature("Point", [n.x, n.y], layer="client", id=n.id, kind=n.kind.value, demand=n.demand,
                pdo=solution.assignments.get(n.id, UNASSIGNED))
    for n in net.candidates:
        if n.id in active:
            feature("Point", [n.x, n.y], layer="pdo", id=n.id)
    root = net.root
    feature("Point", [root.x, root.y], layer="olt", id=root.id)
    return {"type": "FeatureCollection", "properties": {"units": "m", "crs": "planar"}, "features": features}


def to_svg(solution: DesignSolution, net: NetworkMap, caches, width: int = 1000) -> str:
    """Static picture: routes, distribution cable, drops, clients, PDOs, OLT."""
    xs = [n.x for n in net.nodes]
    ys = [n.y for n in net.nodes]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1.0)
    pad = 20
    scale = (width - 2 * pad) / span
    height = int((y1 - y0) * scale) + 2 * pad

    def pt(x: float, y: float) -> tuple[float, float]:
        return round(pad + (x - x0) * scale, 2), round(height - pad - (y - y0) * scale, 2)

    used = _used_edges(solution, caches)
    active = set(solution.pdos)
    routes, dist, drops, marks = [], [], [], []
    for k, e in enumerate(net.edges):
        (ax, ay), (bx, by) = pt(net.by_id[e.a].x, net.by_id[e.a].y), pt(net.by_id[e.b].x, net.by_id[e.b].y)
        dash = ' stroke-dasharray="6 3"' if e.route is RouteKind.BURIED else ""
        line = f'<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}"{dash}/>'
        (dist if k in used else routes).append(line)
    for c, p in sorted(solution.assignments.items()):
        if p == UNASSIGNED:
            continue
        (ax, ay), (bx, by) = pt(net.by_id[c].x, net.by_id[c].y), pt(net.by_id[p].x, net.by_id[p].y)
        drops.append(f'<line x1="{ax}" y1="{ay}" x2="{bx}" y2="{by}"/>')
    for n in net.clients:
        x, y = pt(n.x, n.y)
        served = solution.assignments.get(n.id, UNASSIGNED) != UNASSIGNED
        fill = "#444" if served else "#d00"
        if n.kind is NodeKind.MDU:
            marks.append(f'<rect x="{x - 4}" y="{y - 4}" width="8" height="8" fill="{fill}"><title>MDU {n.id} ({n.demand})</title></rect>')
        else:
            marks.append(f'<circle cx="{x}" cy="{y}" r="2.5" fill="{fill}"><title>SDU {n.id}</title></circle>')
    for n in net.candidates:
        if n.id in active:
            x, y = pt(n.x, n.y)
            marks.append(f'<circle cx="{x}" cy="{y}" r="6" fill="#2a2" stroke="#000"><title>PDO {n.id}</title></circle>')
    rx, ry = pt(net.root.x, net.root.y)
    marks.append(f'<rect x="{rx - 8}" y="{ry - 8}" width="16" height="16" fill="#c00" stroke="#000"><title>OLT {net.root.id}</title></rect>')

    title = escape(f"{len(active)} PDOs, {sum(1 for p in solution.assignments.values() if p != UNASSIGNED)} clients served")
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f"<title>{title}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
        '<g id="routes" stroke="#ccc" stroke-width="1.5">', *routes, "</g>",
        '<g id="distribution" stroke="#1f5fbf" stroke-width="3.5">', *dist, "</g>",
        '<g id="drops" stroke="#e08a00" stroke-width="1">', *drops, "</g>",
        '<g id="nodes">', *marks, "</g>",
        "</svg>",
    ]) + "\n"
