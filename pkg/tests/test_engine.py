import math

import numpy as np
import pytest

from indoorloc import parse_osm
from indoorloc.engine import (
    FLAG_CALIBRATED,
    FLAG_COMPENSATED,
    FLAG_SNAPPED,
    Confirm,
    Continue,
    CorridorArea,
    Engine,
    EngineConfig,
    Hypothesis,
    IntersectionArea,
    JointState,
    Observation,
    OpenArea,
    PositionalState,
    Switch,
    VerificationState,
    area_label,
    likelihood_update,
    verify_turn,
)
from indoorloc.errors import ConfigError, EngineInitError

from conftest import heading, node_xml, osm_xml, way_xml

S = 0.7


def obs(k, theta_deg, s=S):
    return Observation.of(k, heading(theta_deg), s)


def walk(engine, theta_degs, start_k=1):
    return [engine.step(obs(start_k + i, d)) for i, d in enumerate(theta_degs)]


def corridor_engine(indoor_map, way_id, x, y, theta_deg, direction="fwd", cfg=None):
    start = PositionalState.from_theta(x, y, math.radians(theta_deg))
    return Engine(indoor_map, start, CorridorArea(way_id, direction), cfg)


def long_corridor_map(length=70.0):
    return parse_osm(osm_xml(
        node_xml(1, 0.0, 0.0, "turning_point"),
        node_xml(2, length, 0.0, "turning_point"),
        way_xml(101, [1, 2], "corridor"),
    ))


class TestCorridorMotion:
    def test_straight_advance_is_exact(self, rect_loop):
        eng = corridor_engine(rect_loop, 101, 0.0, 0.0, 0.0)
        states = walk(eng, [0.0] * 5)
        for k, st in enumerate(states, start=1):
            assert st.positional.pos == pytest.approx((S * k, 0.0), abs=1e-12)
            assert st.area == CorridorArea(101, "fwd")
            assert st.positional.h == pytest.approx((1.0, 0.0), abs=1e-12)

    def test_confinement_under_bounded_heading_increments(self, cross_junction):
        # heading is recalibrated to the axis every corridor step, so what
        # must stay below eta_str is the step-to-step heading increment,
        # not the absolute direction; a wobbly random walk stays confined
        rng = np.random.default_rng(21)
        eng = corridor_engine(cross_junction, 101, 0.35, 0.0, 0.0)
        theta = 0.0
        for k in range(1, 14):
            theta += rng.uniform(-10.0, 10.0)
            st = eng.step(obs(k, theta))
            assert st.area == CorridorArea(101, "fwd")
            assert abs(st.positional.y) < 1e-9
            assert st.positional.x == pytest.approx(0.35 + S * k, abs=1e-9)
        assert eng.diagnostics["noise_turns"] == 0

    def test_heading_offset_absorbs_slow_drift(self):
        # 0.02 rad of extra rotation per step; raw deviation would break
        # eta_str after ~26 steps, the per-step deviation never does
        m = long_corridor_map()
        eng = corridor_engine(m, 101, 0.0, 0.0, 0.0)
        n = 95
        for k in range(1, n + 1):
            st = eng.step(obs(k, math.degrees(0.02 * k)))
            assert st.area == CorridorArea(101, "fwd")
            assert abs(st.positional.y) < 1e-9
        assert eng.diagnostics["noise_turns"] == 0
        assert eng._heading_offset == pytest.approx(-0.02 * n, abs=1e-9)

    def test_sharp_heading_far_from_nodes_is_noise(self):
        m = long_corridor_map()
        eng = corridor_engine(m, 101, 0.0, 0.0, 0.0)
        walk(eng, [0.0] * 10)  # reach (7, 0), 7 m from either endpoint
        st = eng.step(obs(11, 90.0))
        assert st.positional.pos == pytest.approx((7.0, 0.0), abs=1e-9)
        assert st.area == CorridorArea(101, "fwd")
        assert st.positional.h == pytest.approx((0.0, 1.0), abs=1e-12)
        assert eng.diagnostics["noise_turns"] == 1

    def test_dead_end_clamps_at_endpoint(self):
        m = long_corridor_map(length=7.0)
        eng = corridor_engine(m, 101, 6.65, 0.0, 0.0)
        for k in (1, 2):
            st = eng.step(obs(k, 0.0))
            assert st.positional.pos == pytest.approx((7.0, 0.0), abs=1e-9)
            assert st.area == CorridorArea(101, "fwd")

    def test_straight_handoff_spends_residual_in_next_corridor(self, stata_like):
        eng = corridor_engine(stata_like, 101, 13.0, 0.0, 0.0)
        eng.step(obs(1, 0.0))
        st = eng.step(obs(2, 0.0))
        assert st.area == CorridorArea(102, "fwd")
        assert st.positional.pos == pytest.approx((14.4, 0.0), abs=1e-9)


class TestTurnVerification:
    def test_confirm_after_window(self, tjunction):
        eng = corridor_engine(tjunction, 101, 7.0, 0.0, 0.0)
        walk(eng, [0.0] * 10)  # lands exactly on the junction node (14, 0)
        states = walk(eng, [90.0] * 5, start_k=11)

        assert FLAG_SNAPPED in states[0].flags
        for i, st in enumerate(states, start=1):
            assert st.area == CorridorArea(103, "fwd")
            assert st.positional.pos == pytest.approx((14.0, S * i), abs=1e-9)
        # window resolved: heading snapped to the confirmed bearing
        assert eng.verification is None
        assert states[-1].positional.h == pytest.approx((0.0, 1.0), abs=1e-12)
        assert eng.diagnostics["verification_rounds"] == 1
        assert eng.diagnostics["switches"] == 0

    def test_switch_rewrites_whole_turn(self, cross_junction):
        # approach the hub heading east, then turn: the first post-turn
        # heading leans east (wrong), the next four lean north
        eng = corridor_engine(cross_junction, 103, -3.15, 0.0, 0.0, direction="rev")
        walk(eng, [0.0] * 4)  # stop 0.35 m short of the hub
        states = walk(eng, [40.0] + [80.0] * 4, start_k=5)

        assert states[0].area == CorridorArea(101, "fwd")  # initial wrong guess
        final = states[-1]
        assert final.area == CorridorArea(102, "fwd")
        assert FLAG_COMPENSATED in final.flags
        assert eng.diagnostics["switches"] == 1
        for k in range(5, 10):  # history rewritten onto the north corridor
            st = eng.history[k]
            assert st.area == CorridorArea(102, "fwd")
            assert st.positional.pos == pytest.approx((0.0, S * (k - 4)), abs=1e-9)
            assert FLAG_COMPENSATED in st.flags

        # the re-armed window continues the march instead of restarting it
        more = walk(eng, [80.0] * 5, start_k=10)
        for i, st in enumerate(more, start=6):
            assert st.area == CorridorArea(102, "fwd")
            assert st.positional.pos == pytest.approx((0.0, S * i), abs=1e-9)
        assert eng.verification is None
        assert eng.diagnostics["verification_rounds"] == 2

    def test_double_switch_rewrites_from_the_node(self, cross_junction):
        # guess east, switch to north, then the evidence flips to south:
        # the second rewrite must relocate all ten steps, not just five
        eng = corridor_engine(cross_junction, 103, -3.15, 0.0, 0.0, direction="rev")
        walk(eng, [0.0] * 4)
        walk(eng, [40.0] + [80.0] * 4, start_k=5)  # switch #1: now on 102 north
        states = walk(eng, [-85.0] * 5, start_k=10)

        final = states[-1]
        assert final.area == CorridorArea(104, "fwd")
        assert final.positional.pos == pytest.approx((0.0, -S * 10), abs=1e-9)
        assert eng.diagnostics["switches"] == 2
        for k in range(5, 15):
            st = eng.history[k]
            assert st.area == CorridorArea(104, "fwd")
            assert st.positional.pos == pytest.approx((0.0, -S * (k - 4)), abs=1e-9)

    def test_uturn_reenters_arrival_corridor(self, tjunction):
        eng = corridor_engine(tjunction, 101, 12.6, 0.0, 0.0)
        states = walk(eng, [180.0] * 5)
        final = states[-1]
        assert final.area == CorridorArea(101, "rev")
        assert final.positional.pos == pytest.approx((14.0 - 5 * S, 0.0), abs=1e-9)
        assert final.positional.h == pytest.approx((-1.0, 0.0), abs=1e-12)

    def test_moderate_reversal_is_not_a_uturn(self, tjunction):
        # 120 degrees off the travel bearing: arrival way stays excluded,
        # so the candidate set is the two genuine exits
        eng = corridor_engine(tjunction, 101, 12.6, 0.0, 0.0)
        eng.step(obs(1, 120.0))
        assert eng.verification is not None
        assert sorted(eng.verification.hypotheses) == [102, 103]

    def test_intersection_start_picks_way_and_calibrates(self, cross_junction):
        start = PositionalState.from_theta(0.0, 0.0, 0.0)
        eng = Engine(cross_junction, start, IntersectionArea(1))
        states = walk(eng, [10.0] * 5)
        for i, st in enumerate(states, start=1):
            assert st.area == CorridorArea(101, "fwd")
            assert st.positional.pos == pytest.approx((S * i, 0.0), abs=1e-9)
        assert eng.verification is None
        # confirming the way folds the residual deviation into the offset
        assert eng._heading_offset == pytest.approx(-math.radians(10.0), abs=1e-9)

    def test_turn_into_door_corridor_enters_room(self, room_map):
        eng = corridor_engine(room_map, 101, 6.65, 0.0, 0.0)
        st = eng.step(obs(1, 90.0))
        assert st.area == OpenArea(4)
        assert FLAG_SNAPPED in st.flags
        assert st.positional.pos == pytest.approx((7.0, 0.7), abs=1e-9)
        assert eng.verification is None


class TestVerifyTurnOracle:
    CFG = EngineConfig()

    @staticmethod
    def window(bearings, candidate, k_win):
        hyps = {w: Hypothesis(w, "fwd", b) for w, b in bearings.items()}
        return VerificationState(node_id=0, candidate=candidate, hypotheses=hyps, k_win=k_win)

    def test_continue_until_window_full(self):
        v = self.window({1: (1.0, 0.0), 2: (0.0, 1.0)}, candidate=1, k_win=3)
        for _ in range(2):
            likelihood_update(v, obs(1, 5.0), self.CFG)
            assert verify_turn(v) == Continue()
        likelihood_update(v, obs(1, 5.0), self.CFG)
        assert verify_turn(v) == Confirm(1)

    def test_matches_brute_force_map(self):
        # independent oracle: product of per-step Gaussian densities of the
        # angular deviation, argmax over hypotheses
        from scipy import stats

        rng = np.random.default_rng(7)
        sigma = self.CFG.sigma_h
        for _ in range(60):
            n_ways = rng.integers(2, 5)
            k_win = int(rng.integers(3, 8))
            bearings = {}
            for w in range(n_ways):
                ang = rng.uniform(-math.pi, math.pi)
                bearings[w] = (math.cos(ang), math.sin(ang))
            candidate = int(rng.integers(0, n_ways))
            v = self.window(bearings, candidate, k_win)
            thetas = rng.uniform(-180.0, 180.0, size=k_win)
            observations = [obs(i + 1, t) for i, t in enumerate(thetas)]
            for o in observations:
                likelihood_update(v, o, self.CFG)

            def density(w):
                p = 1.0
                for o in observations:
                    dev = math.atan2(
                        bearings[w][1] * o.h_o[0] - bearings[w][0] * o.h_o[1],
                        bearings[w][0] * o.h_o[0] + bearings[w][1] * o.h_o[1],
                    )
                    p *= stats.norm.pdf(dev, 0.0, sigma)
                return p

            best = max(bearings, key=lambda w: (density(w), -w))
            decision = verify_turn(v)
            if best == candidate:
                assert decision == Confirm(best)
            else:
                assert decision == Switch(best)

    def test_decision_invariant_to_likelihood_normalizer(self):
        v = self.window({1: (1.0, 0.0), 2: (0.0, 1.0), 3: (-1.0, 0.0)}, 2, 4)
        for k in range(4):
            likelihood_update(v, obs(k + 1, 70.0), self.CFG)
        base = verify_turn(v)
        for hyp in v.hypotheses.values():
            hyp.log_likelihood += 123.456
        assert verify_turn(v) == base

    def test_tie_goes_to_lowest_way_id(self):
        v = self.window({4: (1.0, 0.0), 9: (1.0, 0.0)}, candidate=9, k_win=2)
        for k in (1, 2):
            likelihood_update(v, obs(k, 12.0), self.CFG)
        assert verify_turn(v) == Switch(4)

    def test_perpendicular_gap_hand_value(self):
        # five straight-ahead steps, sigma 15 degrees: the perpendicular
        # hypothesis trails by 0.5 * (90/15)^2 per step = 90 nats total
        v = self.window({1: (1.0, 0.0), 2: (0.0, 1.0)}, candidate=1, k_win=5)
        for k in range(5):
            likelihood_update(v, obs(k + 1, 0.0), self.CFG)
        gap = v.hypotheses[1].log_likelihood - v.hypotheses[2].log_likelihood
        assert gap == pytest.approx(90.0, abs=1e-9)


class TestOpenArea:
    def test_free_motion(self, room_map):
        start = PositionalState.from_theta(7.0, 5.0, math.radians(90.0))
        eng = Engine(room_map, start, OpenArea(4))
        st = eng.step(obs(1, 90.0))
        assert st.positional.pos == pytest.approx((7.0, 5.7), abs=1e-12)
        assert st.area == OpenArea(4)

    def test_wall_contact_slides_along_tangent(self, room_map):
        # hand-computed: from (7, 3.7) at 45 degrees, the inner wall y=4 is
        # hit after 0.3*sqrt(2) = 0.424264 m; the remaining 0.275736 m slides east
        start = PositionalState.from_theta(7.0, 3.7, math.radians(45.0))
        eng = Engine(room_map, start, OpenArea(4))
        st = eng.step(obs(1, 45.0))
        x, y = st.positional.pos
        assert x == pytest.approx(7.3 + (S - 0.3 * math.sqrt(2.0)), abs=1e-9)
        assert y == pytest.approx(4.0, abs=1e-6)
        assert y < 4.0  # stays on the near side of the wall

    def test_seeded_walk_never_crosses_walls(self, room_map):
        from indoorloc import mapmodel

        rng = np.random.default_rng(17)
        start = PositionalState.from_theta(7.0, 6.0, 0.0)
        eng = Engine(room_map, start, OpenArea(4))
        for k in range(1, 101):
            eng.step(obs(k, rng.uniform(-180.0, 180.0)))
        pts = [st.positional.pos for st in eng.history]
        for a, b in zip(pts, pts[1:]):
            assert mapmodel.segment_crosses_wall(room_map, a, b) is None

    def test_doorway_clamp_blocks_unmapped_exit(self, room_map):
        # heading out through the door with no corridor accepting the
        # heading: stand in the doorway instead of leaving the map
        start = PositionalState.from_theta(7.0, 1.2, math.radians(-90.0))
        eng = Engine(room_map, start, OpenArea(4))
        st1 = eng.step(obs(1, -90.0))
        assert st1.positional.pos == pytest.approx((7.0, 0.5), abs=1e-9)
        st2 = eng.step(obs(2, -90.0))
        assert st2.positional.pos == pytest.approx((7.0, 0.0), abs=1e-9)
        st3 = eng.step(obs(3, -90.0))
        assert st3.positional.pos == pytest.approx((7.0, 0.0), abs=1e-9)
        assert st3.area == OpenArea(4)

    def test_door_exit_into_aligned_corridor(self, room_map):
        start = PositionalState.from_theta(7.0, 1.2, math.radians(-90.0))
        eng = Engine(room_map, start, OpenArea(4))
        walk(eng, [-90.0, -90.0])  # funnel down to the door node
        st = eng.step(obs(3, 0.0))
        assert st.area == CorridorArea(102, "fwd")
        assert st.positional.pos == pytest.approx((7.7, 0.0), abs=1e-9)
        assert st.positional.h == pytest.approx((1.0, 0.0), abs=1e-12)

    def test_heading_back_inside_is_free_motion(self, room_map):
        start = PositionalState.from_theta(7.0, 1.2, math.radians(-90.0))
        eng = Engine(room_map, start, OpenArea(4))
        walk(eng, [-90.0, -90.0])  # clamped at the door (7, 0)
        st = eng.step(obs(3, 90.0))
        assert st.positional.pos == pytest.approx((7.0, 0.7), abs=1e-9)
        assert st.area == OpenArea(4)


class TestCalibration:
    def test_corridor_calibration_pins_to_axis(self, stata_like):
        eng = corridor_engine(stata_like, 101, 7.0, 0.0, 0.0)
        st = eng.apply_calibration((8.0, 2.5))
        assert st.positional.pos == pytest.approx((8.0, 0.0), abs=1e-9)
        assert FLAG_CALIBRATED in st.flags
        assert eng.history[-1] is st

    def test_open_area_calibration_is_exact(self, room_map):
        start = PositionalState.from_theta(7.0, 5.0, 0.0)
        eng = Engine(room_map, start, OpenArea(4))
        st = eng.apply_calibration((5.2, 6.0))
        assert st.positional.pos == pytest.approx((5.2, 6.0), abs=1e-12)
        assert st.area == OpenArea(4)

    def test_skipped_during_verification(self, tjunction):
        eng = corridor_engine(tjunction, 101, 12.6, 0.0, 0.0)
        eng.step(obs(1, 90.0))
        assert eng.verification is not None
        before = eng.current
        after = eng.apply_calibration((0.0, 0.0))
        assert after is before
        assert FLAG_CALIBRATED not in after.flags

    def test_heading_untouched(self, stata_like):
        eng = corridor_engine(stata_like, 101, 7.0, 0.0, 40.0)
        h_before = eng.current.positional.h
        st = eng.apply_calibration((9.0, 1.0))
        assert st.positional.h == h_before


class TestInitValidation:
    def test_corridor_start_pinned_to_axis(self, rect_loop):
        eng = corridor_engine(rect_loop, 101, 3.0, 0.3, 0.0)
        assert eng.current.positional.pos == pytest.approx((3.0, 0.0), abs=1e-9)

    def test_unknown_corridor(self, rect_loop):
        with pytest.raises(EngineInitError, match="unknown corridor 999"):
            corridor_engine(rect_loop, 999, 0.0, 0.0, 0.0)

    def test_position_off_corridor(self, rect_loop):
        with pytest.raises(EngineInitError, match="not on corridor"):
            corridor_engine(rect_loop, 101, 3.0, 2.0, 0.0)

    def test_unknown_intersection_node(self, rect_loop):
        with pytest.raises(EngineInitError, match="unknown node"):
            Engine(rect_loop, PositionalState.from_theta(0, 0, 0), IntersectionArea(999))

    def test_position_far_from_intersection(self, rect_loop):
        with pytest.raises(EngineInitError, match="not at node"):
            Engine(rect_loop, PositionalState.from_theta(7, 0, 0), IntersectionArea(1))

    def test_unknown_room(self, room_map):
        with pytest.raises(EngineInitError, match="unknown room"):
            Engine(room_map, PositionalState.from_theta(7, 5, 0), OpenArea(99))

    def test_position_outside_room(self, room_map):
        with pytest.raises(EngineInitError, match="outside room"):
            Engine(room_map, PositionalState.from_theta(0.2, 5.0, 0), OpenArea(4))


class TestProtocol:
    def test_step_indices_must_be_sequential(self, rect_loop):
        eng = corridor_engine(rect_loop, 101, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError, match="expected observation k=1"):
            eng.step(obs(2, 0.0))
        eng.step(obs(1, 0.0))
        with pytest.raises(ValueError, match="expected observation k=2"):
            eng.step(obs(1, 0.0))

    def test_observation_of_normalizes(self):
        o = Observation.of(1, (3.0, 4.0), S)
        assert o.h_o == pytest.approx((0.6, 0.8), abs=1e-12)
        assert o.displacement == pytest.approx((0.42, 0.56), abs=1e-12)
        assert o.theta == pytest.approx(math.atan2(0.8, 0.6), abs=1e-12)

    def test_deterministic_replay(self, stata_like):
        rng = np.random.default_rng(33)
        degs = rng.uniform(-40, 40, size=30)
        runs = []
        for _ in range(2):
            eng = corridor_engine(stata_like, 101, 0.0, 0.0, 0.0)
            walk(eng, degs)
            runs.append([st.positional.pos for st in eng.history])
        assert runs[0] == runs[1]

    def test_area_labels(self):
        assert area_label(CorridorArea(101, "fwd")) == "corridor:101"
        assert area_label(IntersectionArea(2)) == "intersection:2"
        assert area_label(OpenArea(4)) == "open:4"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"step_length": 0.0},
            {"eta_str": 0.0},
            {"eta_str": math.pi / 2},
            {"turn_snap_radius": -1.0},
            {"k_win": 0},
            {"sigma_h": 0.0},
        ],
    )
    def test_config_validation(self, kwargs):
        with pytest.raises((ValueError, ConfigError)):
            EngineConfig(**kwargs)
