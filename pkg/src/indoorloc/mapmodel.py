"""Indoor map model.

Parses an annotated OSM-style XML file into a validated graph: nodes
(turning points, doors, room labels, indicators) and ways (corridors,
walls, door corridors) with local metric coordinates. The tag vocabulary
is a single "indoor" key:

    nodes: turning_point | door | room | lobby | indicator
    ways:  corridor | wall | door_corridor | wall_corridor

Indicator nodes additionally carry a "router" tag with the router id.
Coordinates are projected onto a local tangent plane whose origin is the
first node in document order.
"""

from __future__ import annotations

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum

from . import geometry
from .errors import MapParseError, MapValidationError
from .geometry import Point

logger = logging.getLogger(__name__)

# recognized "indoor" tag values
NODE_TAGS = ("turning_point", "door", "room", "lobby", "indicator")
WAY_TAGS = ("corridor", "wall", "door_corridor", "wall_corridor")


class NodeKind(Enum):
    TURNING_POINT = "turning_point"
    DOOR = "door"
    ROOM = "room"
    LOBBY = "lobby"
    INDICATOR = "indicator"


class WayKind(Enum):
    CORRIDOR = "corridor"
    WALL = "wall"
    DOOR_CORRIDOR = "door_corridor"
    WALL_CORRIDOR = "wall_corridor"


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0):
            raise MapValidationError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise MapValidationError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class MapNode:
    id: int
    geo: GeoPoint
    pos: Point
    kind: NodeKind | None = None
    router: str | None = None
    indoor_value: str | None = None  # raw tag value, kept for round-tripping


@dataclass(frozen=True)
class MapWay:
    id: int
    node_ids: tuple[int, ...]
    kind: WayKind | None = None
    indoor_value: str | None = None


@dataclass(frozen=True)
class Corridor:
    """A straight 1D passage between two endpoint nodes.

    Polyline ways are reduced to their endpoint-to-endpoint axis; the
    forward bearing runs from node_a to node_b.
    """

    way_id: int
    node_a: int
    node_b: int
    a: Point
    b: Point
    bearing_fwd: Point
    length: float
    is_door_corridor: bool = False

    def bearing(self, direction: str) -> Point:
        if direction == "fwd":
            return self.bearing_fwd
        if direction == "rev":
            return (-self.bearing_fwd[0], -self.bearing_fwd[1])
        raise ValueError(f"direction must be 'fwd' or 'rev', got {direction!r}")

    def point_at(self, along: float) -> Point:
        """Point at arc length `along` from node_a, measured along the axis."""
        return (self.a[0] + along * self.bearing_fwd[0], self.a[1] + along * self.bearing_fwd[1])

    def project_along(self, p: Point) -> float:
        """Arc-length coordinate of p projected onto the axis, clamped to [0, length]."""
        t = geometry.dot(geometry.sub(p, self.a), self.bearing_fwd)
        return min(self.length, max(0.0, t))

    def endpoint_toward(self, direction: str) -> int:
        """Node id the walker is heading at when travelling `direction`."""
        return self.node_b if direction == "fwd" else self.node_a


@dataclass(frozen=True)
class WallSegment:
    way_id: int
    a: Point
    b: Point


@dataclass(frozen=True)
class Room:
    node_id: int
    kind: NodeKind  # ROOM or LOBBY
    wall_way_ids: tuple[int, ...]
    rings: tuple[tuple[Point, ...], ...]
    door_node_ids: tuple[int, ...] = ()

    def contains(self, p: Point) -> bool:
        if not self.rings:
            return True  # wall-bounded but not closed: no containment test possible
        return any(geometry.point_in_polygon(p, list(ring)) for ring in self.rings)


@dataclass
class IndoorMap:
    """Validated, immutable-by-convention map shared across replays."""

    origin: GeoPoint
    nodes: dict[int, MapNode]
    ways: dict[int, MapWay]
    corridors: dict[int, Corridor]
    walls: list[WallSegment]
    turning_points: dict[int, tuple[int, ...]]  # node id -> incident corridor way ids
    rooms: dict[int, Room]
    indicators: dict[str, Point]
    warnings: tuple[str, ...] = ()
    _incident: dict[int, tuple[int, ...]] = field(default_factory=dict, repr=False)

    def incident_corridors(self, node_id: int) -> tuple[int, ...]:
        """Way ids of corridors (incl. door corridors) with this node as endpoint."""
        return self._incident.get(node_id, ())

    def is_intersection(self, node_id: int) -> bool:
        """Turning points with two or more incident corridors are intersections."""
        return len(self.incident_corridors(node_id)) >= 2

    def outward_direction(self, way_id: int, node_id: int) -> str:
        c = self.corridors[way_id]
        if c.node_a == node_id:
            return "fwd"
        if c.node_b == node_id:
            return "rev"
        raise ValueError(f"node {node_id} is not an endpoint of corridor {way_id}")

    def outward_bearing(self, way_id: int, node_id: int) -> Point:
        return self.corridors[way_id].bearing(self.outward_direction(way_id, node_id))

    def bounds(self, pad: float = 0.0) -> tuple[float, float, float, float]:
        xs = [n.pos[0] for n in self.nodes.values()]
        ys = [n.pos[1] for n in self.nodes.values()]
        return (min(xs) - pad, min(ys) - pad, max(xs) + pad, max(ys) + pad)

    def room_for_door(self, door_node_id: int) -> int | None:
        """Room label node reached from this door through a door corridor."""
        for room in sorted(self.rooms.values(), key=lambda r: r.node_id):
            if door_node_id in room.door_node_ids:
                return room.node_id
        return None


def corridor_bearing(corridor: Corridor, direction: str) -> Point:
    """Unit bearing of a corridor for the given travel direction."""
    return corridor.bearing(direction)


def nearest_turning_point(
    indoor_map: IndoorMap, p: Point, radius: float
) -> MapNode | None:
    """Closest turning point within radius, ties broken by lowest node id."""
    return _nearest_of_kinds(indoor_map, p, radius, (NodeKind.TURNING_POINT,))


def nearest_decision_node(
    indoor_map: IndoorMap, p: Point, radius: float
) -> MapNode | None:
    """Closest turning point or door within radius; doors anchor turns too."""
    return _nearest_of_kinds(indoor_map, p, radius, (NodeKind.TURNING_POINT, NodeKind.DOOR))


def _nearest_of_kinds(
    indoor_map: IndoorMap, p: Point, radius: float, kinds: tuple[NodeKind, ...]
) -> MapNode | None:
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    best: tuple[float, int] | None = None
    for node in indoor_map.nodes.values():
        if node.kind not in kinds:
            continue
        d = geometry.dist(p, node.pos)
        if d <= radius and (best is None or (d, node.id) < best):
            best = (d, node.id)
    return indoor_map.nodes[best[1]] if best is not None else None


def segment_crosses_wall(
    indoor_map: IndoorMap, a: Point, b: Point
) -> tuple[WallSegment, Point] | None:
    """First wall strictly crossed by a->b (smallest parameter t), or None.

    Touching a wall or sliding along it does not count; the segment has to
    pass to the other side.
    """
    if a == b:
        return None
    best: tuple[float, int, WallSegment, Point] | None = None
    for i, wall in enumerate(indoor_map.walls):
        if not geometry.strictly_crosses(a, b, wall.a, wall.b):
            continue
        hit = geometry.segment_intersection(a, b, wall.a, wall.b)
        if hit is None:
            continue
        t, _, point = hit
        if best is None or (t, i) < (best[0], best[1]):
            best = (t, i, wall, point)
    if best is None:
        return None
    return (best[2], best[3])


def parse_osm(xml_text: str) -> IndoorMap:
    """Parse annotated OSM XML into an IndoorMap.

    Unknown "indoor" tag values are kept as plain geometry and reported in
    the map's warning list. Structural problems (dangling references,
    untagged ways, degenerate corridors, disconnected corridor graph)
    raise MapValidationError.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MapParseError(f"malformed XML: {exc}") from None

    warnings: list[str] = []
    nodes: dict[int, MapNode] = {}
    origin: GeoPoint | None = None

    for el in root.iter("node"):
        node_id = _int_attr(el, "id", "node")
        if node_id in nodes:
            raise MapValidationError(f"duplicate node id {node_id}")
        geo = GeoPoint(_float_attr(el, "lat", f"node {node_id}"),
                       _float_attr(el, "lon", f"node {node_id}"))
        if origin is None:
            origin = geo
        tags = _tags(el)
        indoor = tags.get("indoor")
        kind: NodeKind | None = None
        if indoor is not None:
            if indoor in NODE_TAGS:
                kind = NodeKind(indoor)
            else:
                warnings.append(f"node {node_id}: unknown indoor tag value {indoor!r}")
        router = tags.get("router")
        if kind is NodeKind.INDICATOR and router is None:
            raise MapValidationError(f"indicator node {node_id} has no router tag")
        if kind is not NodeKind.INDICATOR and router is not None:
            warnings.append(f"node {node_id}: router tag on non-indicator node ignored")
            router = None
        pos = geometry.project(origin.lat, origin.lon, geo.lat, geo.lon)
        nodes[node_id] = MapNode(node_id, geo, pos, kind, router, indoor)

    if origin is None:
        raise MapValidationError("map has no nodes")

    ways: dict[int, MapWay] = {}
    for el in root.iter("way"):
        way_id = _int_attr(el, "id", "way")
        if way_id in ways:
            raise MapValidationError(f"duplicate way id {way_id}")
        refs = tuple(_int_attr(nd, "ref", f"way {way_id} nd") for nd in el.iter("nd"))
        if len(refs) < 2:
            raise MapValidationError(f"way {way_id} has fewer than 2 nodes")
        for ref in refs:
            if ref not in nodes:
                raise MapValidationError(f"way {way_id} references unknown node {ref}")
        tags = _tags(el)
        indoor = tags.get("indoor")
        if indoor is None:
            raise MapValidationError(f"way {way_id} has no indoor tag")
        kind: WayKind | None = None
        if indoor in WAY_TAGS:
            kind = WayKind(indoor)
        else:
            warnings.append(f"way {way_id}: unknown indoor tag value {indoor!r}")
        ways[way_id] = MapWay(way_id, refs, kind, indoor)

    corridors = _build_corridors(nodes, ways)
    walls = _build_walls(nodes, ways)
    incident = _incidence(corridors)
    _check_corridor_endpoints(nodes, corridors)
    _check_connected(corridors)

    turning_points = {
        nid: incident.get(nid, ())
        for nid, n in nodes.items()
        if n.kind is NodeKind.TURNING_POINT
    }
    rooms = _build_rooms(nodes, ways, corridors)
    indicators = {
        n.router: n.pos
        for n in sorted(nodes.values(), key=lambda n: n.id)
        if n.kind is NodeKind.INDICATOR and n.router is not None
    }

    for message in warnings:
        logger.warning("%s", message)

    return IndoorMap(
        origin=origin,
        nodes=nodes,
        ways=ways,
        corridors=corridors,
        walls=walls,
        turning_points=turning_points,
        rooms=rooms,
        indicators=indicators,
        warnings=tuple(warnings),
        _incident=incident,
    )


def serialize(indoor_map: IndoorMap) -> str:
    """Emit the map back as OSM XML (inverse of parse_osm for known tags)."""
    out = ['<?xml version="1.0" encoding="UTF-8"?>', '<osm version="0.6">']
    for node in indoor_map.nodes.values():
        head = f'  <node id="{node.id}" lat="{node.geo.lat!r}" lon="{node.geo.lon!r}"'
        tags = []
        if node.indoor_value is not None:
            tags.append(f'    <tag k="indoor" v="{node.indoor_value}"/>')
        if node.router is not None:
            tags.append(f'    <tag k="router" v="{node.router}"/>')
        if tags:
            out.append(head + ">")
            out.extend(tags)
            out.append("  </node>")
        else:
            out.append(head + "/>")
    for way in indoor_map.ways.values():
        out.append(f'  <way id="{way.id}">')
        out.extend(f'    <nd ref="{ref}"/>' for ref in way.node_ids)
        if way.indoor_value is not None:
            out.append(f'    <tag k="indoor" v="{way.indoor_value}"/>')
        out.append("  </way>")
    out.append("</osm>")
    return "\n".join(out) + "\n"


def _tags(el: ET.Element) -> dict[str, str]:
    tags: dict[str, str] = {}
    for tag in el.iter("tag"):
        k = tag.get("k")
        v = tag.get("v")
        if k is not None and v is not None and k not in tags:
            tags[k] = v
    return tags


def _int_attr(el: ET.Element, name: str, context: str) -> int:
    raw = el.get(name)
    if raw is None:
        raise MapValidationError(f"{context}: missing attribute {name!r}")
    try:
        return int(raw)
    except ValueError:
        raise MapValidationError(f"{context}: attribute {name!r} is not an integer: {raw!r}") from None


def _float_attr(el: ET.Element, name: str, context: str) -> float:
    raw = el.get(name)
    if raw is None:
        raise MapValidationError(f"{context}: missing attribute {name!r}")
    try:
        value = float(raw)
    except ValueError:
        raise MapValidationError(f"{context}: attribute {name!r} is not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise MapValidationError(f"{context}: attribute {name!r} is not finite")
    return value


def _build_corridors(nodes: dict[int, MapNode], ways: dict[int, MapWay]) -> dict[int, Corridor]:
    corridors: dict[int, Corridor] = {}
    for way in ways.values():
        if way.kind not in (WayKind.CORRIDOR, WayKind.DOOR_CORRIDOR):
            continue
        na, nb = way.node_ids[0], way.node_ids[-1]
        a, b = nodes[na].pos, nodes[nb].pos
        length = geometry.dist(a, b)
        if length <= 1e-9:
            raise MapValidationError(
                f"corridor way {way.id} is degenerate (coincident endpoints)"
            )
        bearing = geometry.unit(geometry.sub(b, a))
        corridors[way.id] = Corridor(
            way_id=way.id,
            node_a=na,
            node_b=nb,
            a=a,
            b=b,
            bearing_fwd=bearing,
            length=length,
            is_door_corridor=way.kind is WayKind.DOOR_CORRIDOR,
        )
    return corridors


def _build_walls(nodes: dict[int, MapNode], ways: dict[int, MapWay]) -> list[WallSegment]:
    walls: list[WallSegment] = []
    for way in ways.values():
        if way.kind is not WayKind.WALL:
            continue
        for na, nb in zip(way.node_ids, way.node_ids[1:]):
            a, b = nodes[na].pos, nodes[nb].pos
            if geometry.dist(a, b) <= 1e-9:
                raise MapValidationError(f"wall way {way.id} has a zero-length segment")
            walls.append(WallSegment(way.id, a, b))
    return walls


def _incidence(corridors: dict[int, Corridor]) -> dict[int, tuple[int, ...]]:
    incident: dict[int, list[int]] = {}
    for c in corridors.values():
        incident.setdefault(c.node_a, []).append(c.way_id)
        incident.setdefault(c.node_b, []).append(c.way_id)
    return {nid: tuple(sorted(ids)) for nid, ids in incident.items()}


def _check_corridor_endpoints(nodes: dict[int, MapNode], corridors: dict[int, Corridor]) -> None:
    for c in sorted(corridors.values(), key=lambda c: c.way_id):
        kinds = {nodes[c.node_a].kind, nodes[c.node_b].kind}
        if c.is_door_corridor:
            if NodeKind.DOOR not in kinds:
                raise MapValidationError(f"door corridor way {c.way_id} has no door endpoint")
        else:
            if not kinds & {NodeKind.TURNING_POINT, NodeKind.DOOR}:
                raise MapValidationError(
                    f"corridor way {c.way_id} has no turning point or door endpoint"
                )


def _check_connected(corridors: dict[int, Corridor]) -> None:
    """Corridor + door-corridor endpoints must form one connected graph."""
    if not corridors:
        return
    adjacency: dict[int, set[int]] = {}
    for c in corridors.values():
        adjacency.setdefault(c.node_a, set()).add(c.node_b)
        adjacency.setdefault(c.node_b, set()).add(c.node_a)
    start = min(adjacency)
    seen = {start}
    stack = [start]
    while stack:
        for neighbor in adjacency[stack.pop()]:
            if neighbor not in seen:
                seen.add(neighbor)
                stack.append(neighbor)
    if len(seen) != len(adjacency):
        raise MapValidationError("map graph is disconnected over corridor ways")


def _build_rooms(
    nodes: dict[int, MapNode], ways: dict[int, MapWay], corridors: dict[int, Corridor]
) -> dict[int, Room]:
    # wall ways become candidate rings for room containment; open polylines
    # (door gaps) are closed virtually for the test, the gap stays passable
    rings: list[tuple[int, tuple[Point, ...]]] = []
    for way in ways.values():
        if way.kind is not WayKind.WALL:
            continue
        if way.node_ids[0] == way.node_ids[-1] and len(way.node_ids) >= 4:
            rings.append((way.id, tuple(nodes[r].pos for r in way.node_ids[:-1])))
        elif len(set(way.node_ids)) >= 3:
            rings.append((way.id, tuple(nodes[r].pos for r in way.node_ids)))

    rooms: dict[int, Room] = {}
    for node in sorted(nodes.values(), key=lambda n: n.id):
        if node.kind not in (NodeKind.ROOM, NodeKind.LOBBY):
            continue
        bounding = [
            (way_id, ring)
            for way_id, ring in rings
            if geometry.point_in_polygon(node.pos, list(ring))
        ]
        doors = sorted(
            other
            for c in corridors.values()
            if c.is_door_corridor
            for other, label in ((c.node_a, c.node_b), (c.node_b, c.node_a))
            if label == node.id and nodes[other].kind is NodeKind.DOOR
        )
        rooms[node.id] = Room(
            node_id=node.id,
            kind=node.kind,
            wall_way_ids=tuple(sorted(w for w, _ in bounding)),
            rings=tuple(ring for _, ring in bounding),
            door_node_ids=tuple(doors),
        )
    return rooms
