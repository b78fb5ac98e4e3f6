"""Shared fixtures: parsed golden maps and programmatic map builders."""

import math
from pathlib import Path

import pytest

from indoorloc import geometry, parse_osm

FIXTURES = Path(__file__).parent / "fixtures"

ORIGIN_LAT, ORIGIN_LON = 42.3617, -71.0921


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def node_xml(nid: int, x: float, y: float, indoor: str | None = None,
             router: str | None = None) -> str:
    lat, lon = geometry.unproject(ORIGIN_LAT, ORIGIN_LON, x, y)
    tags = []
    if indoor:
        tags.append(f'<tag k="indoor" v="{indoor}"/>')
    if router:
        tags.append(f'<tag k="router" v="{router}"/>')
    if tags:
        return f'<node id="{nid}" lat="{lat!r}" lon="{lon!r}">{"".join(tags)}</node>'
    return f'<node id="{nid}" lat="{lat!r}" lon="{lon!r}"/>'


def way_xml(wid: int, refs, indoor: str | None = None) -> str:
    nds = "".join(f'<nd ref="{r}"/>' for r in refs)
    tag = f'<tag k="indoor" v="{indoor}"/>' if indoor else ""
    return f'<way id="{wid}">{nds}{tag}</way>'


def osm_xml(*parts: str) -> str:
    return '<osm version="0.6">' + "".join(parts) + "</osm>"


def cross_junction_xml(arm: float = 10.5) -> str:
    """Four corridors meeting at the origin, axis-aligned."""
    return osm_xml(
        node_xml(1, 0.0, 0.0, "turning_point"),
        node_xml(2, arm, 0.0, "turning_point"),
        node_xml(3, 0.0, arm, "turning_point"),
        node_xml(4, -arm, 0.0, "turning_point"),
        node_xml(5, 0.0, -arm, "turning_point"),
        way_xml(101, [1, 2], "corridor"),
        way_xml(102, [1, 3], "corridor"),
        way_xml(103, [1, 4], "corridor"),
        way_xml(104, [1, 5], "corridor"),
    )


def room_map_xml() -> str:
    """A 12 x 8 room behind a door on a straight corridor, with one inner wall.

    Corridor runs along y=0 from (0,0) to (14,0); door at (7,0); room spans
    x in [1,13], y in [1,9] with a 1.4 m doorway gap centered at x=7 on the
    near wall, and a free-standing wall segment inside. The first node sits
    at the origin because the parser anchors the local frame there.
    """
    return osm_xml(
        node_xml(1, 0.0, 0.0, "turning_point"),
        node_xml(2, 14.0, 0.0, "turning_point"),
        node_xml(3, 7.0, 0.0, "door"),
        node_xml(4, 7.0, 5.0, "room"),
        # outer shell, open at the doorway
        node_xml(10, 7.7, 1.0),
        node_xml(11, 13.0, 1.0),
        node_xml(12, 13.0, 9.0),
        node_xml(13, 1.0, 9.0),
        node_xml(14, 1.0, 1.0),
        node_xml(15, 6.3, 1.0),
        # free-standing interior wall
        node_xml(16, 5.0, 4.0),
        node_xml(17, 9.0, 4.0),
        way_xml(101, [1, 3], "corridor"),
        way_xml(102, [3, 2], "corridor"),
        way_xml(103, [3, 4], "door_corridor"),
        way_xml(104, [10, 11, 12, 13, 14, 15], "wall"),
        way_xml(105, [16, 17], "wall"),
    )


@pytest.fixture(scope="session")
def rect_loop():
    return parse_osm(fixture_text("rect_loop.osm"))


@pytest.fixture(scope="session")
def tjunction():
    return parse_osm(fixture_text("tjunction.osm"))


@pytest.fixture(scope="session")
def stata_like():
    return parse_osm(fixture_text("stata_like.osm"))


@pytest.fixture(scope="session")
def cross_junction():
    return parse_osm(cross_junction_xml())


@pytest.fixture(scope="session")
def room_map():
    return parse_osm(room_map_xml())


def heading(theta_deg: float) -> tuple[float, float]:
    t = math.radians(theta_deg)
    return (math.cos(t), math.sin(t))
