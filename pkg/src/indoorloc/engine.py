"""Joint positional/area state engine.

Tracks x_k = (p_x, p_y, h, area) one step at a time. The area state picks
the motion model: 1D pinned motion inside corridors, argmax corridor
selection with MAP verification at turns, and wall-constrained free
motion in open areas. Everything is deterministic given (map, config,
observation sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

from . import geometry, mapmodel
from .errors import EngineInitError
from .geometry import Point
from .mapmodel import Corridor, IndoorMap
from .validation import check_int_at_least, check_positive

# provenance flags on joint states
FLAG_SNAPPED = "snapped_turning_point"
FLAG_CALIBRATED = "rssi_calibrated"
FLAG_COMPENSATED = "compensated"

# heading reversal beyond which the arrival corridor re-enters the
# hypothesis set (a U-turn at the junction)
U_TURN_THRESHOLD = math.radians(150.0)

# wedge corners: how many wall slides a single step may chain
_MAX_SLIDES = 3


@dataclass(frozen=True)
class PositionalState:
    x: float
    y: float
    h: tuple[float, float]
    theta: float

    @property
    def pos(self) -> Point:
        return (self.x, self.y)

    @classmethod
    def from_theta(cls, x: float, y: float, theta: float) -> "PositionalState":
        return cls(x, y, (math.cos(theta), math.sin(theta)), theta)

    @classmethod
    def from_vector(cls, x: float, y: float, h: Point) -> "PositionalState":
        return cls(x, y, geometry.unit(h), geometry.angle_of(h))


@dataclass(frozen=True)
class CorridorArea:
    way_id: int
    direction: str  # "fwd" or "rev"


@dataclass(frozen=True)
class IntersectionArea:
    node_id: int


@dataclass(frozen=True)
class OpenArea:
    room_id: int


AreaState = Union[CorridorArea, IntersectionArea, OpenArea]


def area_label(area: AreaState) -> str:
    if isinstance(area, CorridorArea):
        return f"corridor:{area.way_id}"
    if isinstance(area, IntersectionArea):
        return f"intersection:{area.node_id}"
    return f"open:{area.room_id}"


@dataclass(frozen=True)
class Observation:
    k: int
    h_o: tuple[float, float]
    displacement: tuple[float, float]

    @classmethod
    def of(cls, k: int, h_o: Point, step_length: float) -> "Observation":
        h_o = geometry.unit(h_o)
        return cls(k, h_o, (step_length * h_o[0], step_length * h_o[1]))

    @property
    def theta(self) -> float:
        return geometry.angle_of(self.h_o)


@dataclass(frozen=True)
class JointState:
    k: int
    positional: PositionalState
    area: AreaState
    flags: frozenset = frozenset()


@dataclass(frozen=True)
class EngineConfig:
    step_length: float = 0.7
    eta_str: float = math.radians(30.0)
    turn_snap_radius: float = 3.0
    k_win: int = 5
    sigma_h: float = math.radians(15.0)

    def __post_init__(self) -> None:
        check_positive("step_length", self.step_length)
        check_positive("eta_str", self.eta_str)
        check_positive("turn_snap_radius", self.turn_snap_radius)
        check_int_at_least("k_win", self.k_win, 1)
        check_positive("sigma_h", self.sigma_h)
        if self.eta_str >= math.pi / 2:
            raise ValueError(f"eta_str must be below pi/2, got {self.eta_str}")


@dataclass
class Hypothesis:
    way_id: int
    direction: str
    bearing: Point
    log_likelihood: float = 0.0


@dataclass
class VerificationState:
    """Likelihood bookkeeping for one k-step turn verification window."""

    node_id: int
    candidate: int
    hypotheses: dict[int, Hypothesis]
    k_win: int
    elapsed: int = 0
    start_steps: int = 0  # steps already walked since the turn node (re-armed windows)


@dataclass(frozen=True)
class Confirm:
    way_id: int


@dataclass(frozen=True)
class Switch:
    way_id: int


@dataclass(frozen=True)
class Continue:
    pass


Decision = Union[Confirm, Switch, Continue]


def likelihood_update(v: VerificationState, obs: Observation, cfg: EngineConfig) -> VerificationState:
    """Accumulate one step's heading likelihood for every hypothesis.

    Per-step model: signed angular deviation of h_o from the hypothesis
    bearing, Gaussian with spread sigma_h and mean zero.
    """
    log_norm = -math.log(cfg.sigma_h * math.sqrt(2.0 * math.pi))
    for hyp in v.hypotheses.values():
        ang = geometry.signed_angle(obs.h_o, hyp.bearing)
        hyp.log_likelihood += log_norm - 0.5 * (ang / cfg.sigma_h) ** 2
    v.elapsed += 1
    return v


def verify_turn(v: VerificationState) -> Decision:
    """MAP decision once the window is full; equal priors, ties to lowest id."""
    if v.elapsed < v.k_win:
        return Continue()
    best = min(v.hypotheses.values(), key=lambda h: (-h.log_likelihood, h.way_id))
    if best.way_id == v.candidate:
        return Confirm(best.way_id)
    return Switch(best.way_id)


class Engine:
    """One engine instance per trace; step() must be called sequentially."""

    def __init__(
        self,
        indoor_map: IndoorMap,
        start: PositionalState,
        start_area: AreaState,
        cfg: EngineConfig | None = None,
    ) -> None:
        self.map = indoor_map
        self.cfg = cfg or EngineConfig()
        self.verification: VerificationState | None = None
        self.diagnostics = {"verification_rounds": 0, "switches": 0, "noise_turns": 0}
        positional = self._check_start(start, start_area)
        self.k = 0
        # correction applied to every incoming heading; updated whenever the
        # heading is calibrated to a corridor bearing, so gyro drift only
        # accumulates since the last calibration instead of since the start
        self._heading_offset = 0.0
        self.current = JointState(0, positional, start_area)
        self.history: list[JointState] = [self.current]

    def _check_start(self, start: PositionalState, area: AreaState) -> PositionalState:
        if isinstance(area, CorridorArea):
            c = self.map.corridors.get(area.way_id)
            if c is None:
                raise EngineInitError(f"start area names unknown corridor {area.way_id}")
            if geometry.point_segment_distance(start.pos, c.a, c.b) > 0.5:
                raise EngineInitError(
                    f"start position {start.pos} is not on corridor {area.way_id}"
                )
            along = c.project_along(start.pos)
            x, y = c.point_at(along)  # pin onto the axis
            return replace(start, x=x, y=y)
        if isinstance(area, IntersectionArea):
            node = self.map.nodes.get(area.node_id)
            if node is None:
                raise EngineInitError(f"start area names unknown node {area.node_id}")
            if geometry.dist(start.pos, node.pos) > self.cfg.turn_snap_radius:
                raise EngineInitError(f"start position {start.pos} is not at node {area.node_id}")
            return replace(start, x=node.pos[0], y=node.pos[1])
        room = self.map.rooms.get(area.room_id)
        if room is None:
            raise EngineInitError(f"start area names unknown room {area.room_id}")
        if not room.contains(start.pos):
            raise EngineInitError(f"start position {start.pos} is outside room {area.room_id}")
        return start

    # ------------------------------------------------------------------ step

    def step(self, obs: Observation) -> JointState:
        if obs.k != self.k + 1:
            raise ValueError(f"expected observation k={self.k + 1}, got {obs.k}")
        if self._heading_offset != 0.0:
            h = geometry.unit(geometry.rotate(obs.h_o, self._heading_offset))
            obs = Observation(obs.k, h, geometry.scale(h, geometry.norm(obs.displacement)))
        if self.verification is not None:
            state = self._verification_step(obs)
        elif isinstance(self.current.area, CorridorArea):
            state = self._corridor_step(obs)
        elif isinstance(self.current.area, OpenArea):
            state = self._open_area_step(obs)
        else:
            state = self._leave_intersection(obs)
        self.k += 1
        self.current = state
        self.history.append(state)
        return state

    def apply_calibration(self, router_pos: Point) -> JointState:
        """Snap the current position to a router location (vicinity fired).

        Heading is untouched. Inside a corridor the point is pinned back
        onto the axis so corridor confinement survives. During an active
        verification window the calibration is skipped: the window owns
        the trajectory until it resolves.
        """
        if self.verification is not None:
            return self.current
        x, y = router_pos
        area = self.current.area
        if isinstance(area, CorridorArea):
            c = self.map.corridors[area.way_id]
            x, y = c.point_at(c.project_along((x, y)))
        positional = replace(self.current.positional, x=x, y=y)
        state = JointState(
            self.current.k, positional, area, self.current.flags | {FLAG_CALIBRATED}
        )
        self.current = state
        self.history[-1] = state
        return state

    # ------------------------------------------------------- corridor motion

    def _corridor_step(self, obs: Observation) -> JointState:
        area = self.current.area
        corridor = self.map.corridors[area.way_id]
        bearing = corridor.bearing(area.direction)
        deviation = geometry.angle_between(obs.h_o, bearing)
        if deviation <= self.cfg.eta_str:
            return self._advance_in_corridor(obs, corridor, area.direction)
        node = mapmodel.nearest_decision_node(self.map, self.current.positional.pos,
                                              self.cfg.turn_snap_radius)
        if node is None:
            # heading noise far from any decision node: hold the corridor,
            # keep the pinned position, pass the raw heading through
            self.diagnostics["noise_turns"] += 1
            p = self.current.positional
            return JointState(obs.k, PositionalState.from_vector(p.x, p.y, obs.h_o), area)
        return self._turn_at_node(node.id, obs, arrival=area)

    def _align_heading(self, h_eff: Point, bearing: Point) -> None:
        """Fold the current deviation from `bearing` into the heading offset."""
        total = self._heading_offset + geometry.signed_angle(h_eff, bearing)
        self._heading_offset = math.atan2(math.sin(total), math.cos(total))

    def _advance_in_corridor(self, obs: Observation, corridor: Corridor, direction: str) -> JointState:
        s = self.cfg.step_length
        along = corridor.project_along(self.current.positional.pos)
        target = along + s if direction == "fwd" else along - s
        if target > corridor.length:
            return self._corridor_end(obs, corridor, direction, target - corridor.length)
        if target < 0.0:
            return self._corridor_end(obs, corridor, direction, -target)
        x, y = corridor.point_at(target)
        bearing = corridor.bearing(direction)
        self._align_heading(obs.h_o, bearing)
        positional = PositionalState.from_vector(x, y, bearing)
        return JointState(obs.k, positional, CorridorArea(corridor.way_id, direction))

    def _corridor_end(
        self, obs: Observation, corridor: Corridor, direction: str, overshoot: float
    ) -> JointState:
        """Walked past the corridor endpoint with heading still straight.

        Continue into the best-aligned onward corridor (or through a door
        corridor into its room), spending the residual step length there.
        A dead end clamps at the endpoint.
        """
        node_id = corridor.endpoint_toward(direction)
        node_pos = self.map.nodes[node_id].pos
        best: tuple[float, int, str] | None = None
        for way_id in self.map.incident_corridors(node_id):
            if way_id == corridor.way_id:
                continue
            out_dir = self.map.outward_direction(way_id, node_id)
            out_bearing = self.map.corridors[way_id].bearing(out_dir)
            if geometry.angle_between(obs.h_o, out_bearing) > self.cfg.eta_str:
                continue
            score = geometry.dot(obs.h_o, out_bearing)
            if best is None or (-score, way_id) < (-best[0], best[1]):
                best = (score, way_id, out_dir)
        if best is None:
            bearing = corridor.bearing(direction)
            self._align_heading(obs.h_o, bearing)
            positional = PositionalState.from_vector(node_pos[0], node_pos[1], bearing)
            return JointState(obs.k, positional, CorridorArea(corridor.way_id, direction))
        _, next_id, next_dir = best
        next_c = self.map.corridors[next_id]
        if next_c.is_door_corridor:
            return self._enter_open_area(obs, node_id, residual=overshoot)
        along = overshoot if next_dir == "fwd" else next_c.length - overshoot
        x, y = next_c.point_at(min(next_c.length, max(0.0, along)))
        self._align_heading(obs.h_o, next_c.bearing(next_dir))
        positional = PositionalState.from_vector(x, y, next_c.bearing(next_dir))
        return JointState(obs.k, positional, CorridorArea(next_id, next_dir))

    # ---------------------------------------------------------------- turning

    def _turn_at_node(self, node_id: int, obs: Observation, arrival: CorridorArea | None) -> JointState:
        """Heading broke eta_str near a decision node: snap and choose a way."""
        node_pos = self.map.nodes[node_id].pos
        hypotheses = self._hypotheses_at(node_id, obs, arrival)
        if not hypotheses:
            self.diagnostics["noise_turns"] += 1
            p = self.current.positional
            area = arrival if arrival is not None else self.current.area
            return JointState(obs.k, PositionalState.from_vector(p.x, p.y, obs.h_o), area)

        best = min(
            hypotheses.values(),
            key=lambda h: (-geometry.dot(obs.h_o, h.bearing), h.way_id),
        )
        if self.map.corridors[best.way_id].is_door_corridor:
            return self._enter_open_area(
                obs, node_id, residual=self.cfg.step_length, flags=frozenset({FLAG_SNAPPED})
            )

        corridor_hypotheses = {
            way_id: hyp
            for way_id, hyp in hypotheses.items()
            if not self.map.corridors[way_id].is_door_corridor
        }
        self.verification = VerificationState(
            node_id=node_id,
            candidate=best.way_id,
            hypotheses=corridor_hypotheses,
            k_win=self.cfg.k_win,
        )
        likelihood_update(self.verification, obs, self.cfg)
        state = self._provisional_state(obs, flags=frozenset({FLAG_SNAPPED}))
        return self._maybe_resolve_window(obs, state)

    def _hypotheses_at(
        self, node_id: int, obs: Observation, arrival: CorridorArea | None
    ) -> dict[int, Hypothesis]:
        """Outward hypotheses at a junction, arrival way excluded unless U-turn."""
        hypotheses: dict[int, Hypothesis] = {}
        for way_id in self.map.incident_corridors(node_id):
            out_dir = self.map.outward_direction(way_id, node_id)
            if arrival is not None and way_id == arrival.way_id:
                travel_bearing = self.map.corridors[way_id].bearing(arrival.direction)
                if geometry.angle_between(obs.h_o, travel_bearing) <= U_TURN_THRESHOLD:
                    continue
            bearing = self.map.corridors[way_id].bearing(out_dir)
            hypotheses[way_id] = Hypothesis(way_id, out_dir, bearing)
        return hypotheses

    def _provisional_state(self, obs: Observation, flags: frozenset = frozenset()) -> JointState:
        """Advance one step along the verification candidate, heading raw."""
        v = self.verification
        assert v is not None
        hyp = v.hypotheses[v.candidate]
        c = self.map.corridors[v.candidate]
        node_pos = self.map.nodes[v.node_id].pos
        start_along = c.project_along(node_pos)
        offset = (v.start_steps + v.elapsed) * self.cfg.step_length
        along = start_along + offset if hyp.direction == "fwd" else start_along - offset
        x, y = c.point_at(min(c.length, max(0.0, along)))
        positional = PositionalState.from_vector(x, y, obs.h_o)
        return JointState(obs.k, positional, CorridorArea(v.candidate, hyp.direction), flags)

    def _verification_step(self, obs: Observation) -> JointState:
        v = self.verification
        assert v is not None
        likelihood_update(v, obs, self.cfg)
        state = self._provisional_state(obs)
        return self._maybe_resolve_window(obs, state)

    def _maybe_resolve_window(self, obs: Observation, state: JointState) -> JointState:
        v = self.verification
        assert v is not None
        if v.elapsed < v.k_win:
            return state
        decision = verify_turn(v)
        self.diagnostics["verification_rounds"] += 1
        if isinstance(decision, Confirm):
            self.verification = None
            bearing = self.map.corridors[decision.way_id].bearing(
                v.hypotheses[decision.way_id].direction
            )
            self._align_heading(obs.h_o, bearing)
            calibrated = PositionalState.from_vector(
                state.positional.x, state.positional.y, bearing
            )
            return JointState(state.k, calibrated, state.area, state.flags)
        assert isinstance(decision, Switch)
        self.diagnostics["switches"] += 1
        return self._switch_corridor(obs, v, decision.way_id)

    def _switch_corridor(self, obs: Observation, v: VerificationState, new_way: int) -> JointState:
        """Rewrite every position since the turn along the corrected corridor.

        All steps walked since the turn node (not just the current window)
        land on the new corridor at spacing s from the node, marked
        Compensated, and the window re-arms for another k steps that
        continue the march instead of restarting it.
        """
        hyp = v.hypotheses[new_way]
        c = self.map.corridors[new_way]
        node_pos = self.map.nodes[v.node_id].pos
        start_along = c.project_along(node_pos)
        s = self.cfg.step_length
        sign = 1.0 if hyp.direction == "fwd" else -1.0
        total = v.start_steps + v.k_win

        def at(i: int) -> Point:
            return c.point_at(min(c.length, max(0.0, start_along + sign * i * s)))

        turn_k = obs.k - total + 1
        for i in range(1, total):  # steps turn_k .. obs.k - 1 live in history
            state = self.history[turn_k + i - 1]
            x, y = at(i)
            positional = replace(state.positional, x=x, y=y)
            self.history[turn_k + i - 1] = JointState(
                state.k,
                positional,
                CorridorArea(new_way, hyp.direction),
                state.flags | {FLAG_COMPENSATED},
            )
        x, y = at(total)
        positional = PositionalState.from_vector(x, y, obs.h_o)
        rewritten = JointState(
            obs.k,
            positional,
            CorridorArea(new_way, hyp.direction),
            frozenset({FLAG_COMPENSATED}),
        )

        self.verification = VerificationState(
            node_id=v.node_id,
            candidate=new_way,
            hypotheses={
                way_id: Hypothesis(h.way_id, h.direction, h.bearing)
                for way_id, h in v.hypotheses.items()
            },
            k_win=v.k_win,
            start_steps=total,
        )
        return rewritten

    # ------------------------------------------------------- open-area motion

    def _leave_intersection(self, obs: Observation) -> JointState:
        """Initialized at a junction: first observation picks the way out."""
        area = self.current.area
        assert isinstance(area, IntersectionArea)
        return self._turn_at_node(area.node_id, obs, arrival=None)

    def _open_area_step(self, obs: Observation) -> JointState:
        area = self.current.area
        assert isinstance(area, OpenArea)
        room = self.map.rooms[area.room_id]
        exit_state = self._try_door_exit(obs, room)
        if exit_state is not None:
            return exit_state
        pos = self.current.positional.pos
        x, y = self._constrained_move(pos, obs.displacement)
        return JointState(obs.k, PositionalState.from_vector(x, y, obs.h_o), area)

    def _try_door_exit(self, obs: Observation, room: mapmodel.Room) -> JointState | None:
        """Near a door of this room and heading out through it: enter the corridor.

        When the step would carry through the doorway but no corridor accepts
        the heading, the walker stands in the doorway instead of walking out
        through the gap into unmapped space (the corridor's far wall).
        """
        pos = self.current.positional.pos
        doors = sorted(
            (geometry.dist(pos, self.map.nodes[d].pos), d)
            for d in room.door_node_ids
            if geometry.dist(pos, self.map.nodes[d].pos) <= self.cfg.turn_snap_radius
        )
        for door_dist, door_id in doors:
            door_pos = self.map.nodes[door_id].pos
            if mapmodel.segment_crosses_wall(self.map, pos, door_pos) is not None:
                continue  # a wall stands between here and that door
            toward = geometry.sub(door_pos, pos)
            # must actually be walking at the door, not just passing nearby
            if door_dist > self.cfg.step_length / 2.0:
                if geometry.angle_between(obs.h_o, toward) > self.cfg.eta_str:
                    continue
            best: tuple[float, int, str] | None = None
            for way_id in self.map.incident_corridors(door_id):
                if self.map.corridors[way_id].is_door_corridor:
                    continue
                out_dir = self.map.outward_direction(way_id, door_id)
                bearing = self.map.corridors[way_id].bearing(out_dir)
                if geometry.angle_between(obs.h_o, bearing) > self.cfg.eta_str:
                    continue
                score = geometry.dot(obs.h_o, bearing)
                if best is None or (-score, way_id) < (-best[0], best[1]):
                    best = (score, way_id, out_dir)
            if best is not None:
                _, way_id, out_dir = best
                c = self.map.corridors[way_id]
                start_along = c.project_along(door_pos)
                s = self.cfg.step_length
                along = start_along + s if out_dir == "fwd" else start_along - s
                x, y = c.point_at(min(c.length, max(0.0, along)))
                if mapmodel.segment_crosses_wall(self.map, pos, (x, y)) is not None:
                    continue  # the shortcut would clip a wall corner: walk it
                self._align_heading(obs.h_o, c.bearing(out_dir))
                positional = PositionalState.from_vector(x, y, c.bearing(out_dir))
                return JointState(obs.k, positional, CorridorArea(way_id, out_dir))
            if door_dist <= self.cfg.step_length and (
                door_dist <= 1e-12 or geometry.dot(obs.h_o, toward) > 0.0
            ):
                inward = geometry.sub(self.map.nodes[room.node_id].pos, door_pos)
                if geometry.dot(obs.h_o, inward) > 0.0:
                    continue  # heading back into the room: free motion
                positional = PositionalState.from_vector(door_pos[0], door_pos[1], obs.h_o)
                return JointState(obs.k, positional, self.current.area)
        return None

    def _enter_open_area(
        self, obs: Observation, door_node_id: int, residual: float,
        flags: frozenset = frozenset(),
    ) -> JointState:
        room_id = self.map.room_for_door(door_node_id)
        if room_id is None:
            # door corridor without a room label behind it: hold position
            p = self.current.positional
            return JointState(obs.k, PositionalState.from_vector(p.x, p.y, obs.h_o),
                              self.current.area, flags)
        door_pos = self.map.nodes[door_node_id].pos
        disp = geometry.scale(obs.h_o, residual)
        x, y = self._constrained_move(door_pos, disp)
        positional = PositionalState.from_vector(x, y, obs.h_o)
        return JointState(obs.k, positional, OpenArea(room_id), flags)

    def _constrained_move(self, pos: Point, disp: Point) -> Point:
        """Free 2D motion that cannot pass through walls.

        On contact the remaining length slides along the wall tangent,
        signed by the heading's tangential component; a corner can chain
        a few slides before the step gives up.
        """
        for _ in range(_MAX_SLIDES):
            length = geometry.norm(disp)
            if length <= 0.0:
                return pos
            target = geometry.add(pos, disp)
            hit = mapmodel.segment_crosses_wall(self.map, pos, target)
            if hit is None:
                return target
            wall, point = hit
            tangent = geometry.unit(geometry.sub(wall.b, wall.a))
            normal = (-tangent[1], tangent[0])
            if geometry.dot(normal, geometry.sub(pos, point)) < 0.0:
                normal = (-normal[0], -normal[1])
            # hold an epsilon off the wall so the contact stays on our side
            contact = geometry.add(point, geometry.scale(normal, 1e-9))
            residual = length - geometry.dist(pos, point)
            tangential = geometry.dot(disp, tangent)
            if abs(tangential) <= 1e-12 or residual <= 0.0:
                return contact
            slide = tangent if tangential > 0.0 else (-tangent[0], -tangent[1])
            pos = contact
            disp = geometry.scale(slide, residual)
        return pos
