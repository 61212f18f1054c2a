import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enercov.energy import EnergyModel
from enercov.errors import ConfigurationError
from enercov.formation import OCH, OCV, Formation
from enercov.planner import (CHARGE, DWELL, HOLD, TRANSIT, CycleSchedule, assign_start_offsets, build_schedule,
                             phase_table, planned_soc)
from enercov.routing import build_graph, solve_alternating_tour

from conftest import REF_OCH, REF_OCV

M3 = EnergyModel(alpha=0.0005, beta=0.0005, c=0.01, vmax=50.0)


def _schedule(ocv, och, model=M3, pinned=0):
    fo, fh = Formation(OCV, ocv, 0.0), Formation(OCH, och, 0.0, pinned_index=pinned)
    tour = solve_alternating_tour(build_graph(fo, fh))
    return build_schedule(fo, fh, tour, model)


@pytest.fixture(scope="module")
def ref():
    return _schedule(REF_OCV, REF_OCH)


def test_macro_period_on_published_formations(ref):
    assert ref.macro_period == pytest.approx(678.6, abs=1.0)
    assert ref.macro_period == pytest.approx(3 * ref.times.step)


def test_one_agent_at_full_speed_per_transition(ref):
    for m in range(3):
        for kind_index in (1, 3):
            speeds = [ref.step_phases(a, m)[kind_index].speed for a in range(3)]
            assert all(s <= 50.0 + 1e-9 for s in speeds)
            assert sum(abs(s - 50.0) < 1e-9 for s in speeds) == 1


def test_transit_speeds_are_leg_over_time(ref):
    tm = ref.times
    for a in range(3):
        for p in ref.phases(a, ref.macro_period):
            if p.kind == TRANSIT:
                d = np.hypot(p.end[0] - p.start[0], p.end[1] - p.start[1])
                assert p.speed == pytest.approx(d / p.duration)
                assert p.duration in (pytest.approx(tm.tau_to_cov), pytest.approx(tm.tau_to_chg))


def test_charging_intervals_disjoint_and_full(ref):
    spans = []
    for a in range(3):
        charges = [p for p in ref.phases(a, ref.macro_period) if p.kind == CHARGE]
        assert len(charges) == 1
        assert charges[0].duration == pytest.approx(ref.times.tau_c)
        spans.append((charges[0].t0, charges[0].t1))
    spans.sort()
    assert all(b[0] >= a[1] - 1e-9 for a, b in zip(spans, spans[1:]))


def test_synchronized_boundaries(ref):
    first = [(p.t0, p.t1) for p in ref.phases(0, 2 * ref.macro_period)]
    for a in (1, 2):
        assert [(p.t0, p.t1) for p in ref.phases(a, 2 * ref.macro_period)] == first


def test_occupancy_invariants(ref):
    tm = ref.times
    for m in range(6):
        base = m * tm.step
        dwell = ref.positions_at(base + 0.5 * tm.tau_d)
        assert len({tuple(np.round(p, 9)) for p in dwell}) == 3
        assert {tuple(np.round(p, 9)) for p in dwell} == {tuple(np.round(p, 9)) for p in ref.ocv.positions}
        hold_t = base + tm.tau_d + tm.tau_to_chg + 0.5 * tm.tau_c
        kinds = [ref.phase_at(a, hold_t).kind for a in range(3)]
        assert kinds.count(CHARGE) == 1 and kinds.count(HOLD) == 2
        # at most one agent is heading to or sitting at the station
        move_t = base + tm.tau_d + 0.5 * tm.tau_to_chg
        to_station = [a for a in range(3) if ref.phase_at(a, move_t).tour_pos == 5]
        assert len(to_station) == 1


def test_node_sequence_is_rotated_tour(ref):
    for a in range(3):
        visited = [p.tour_pos for p in ref.phases(a, ref.macro_period) if p.kind in (DWELL, HOLD, CHARGE)]
        start = 2 * ref.offsets[a]
        assert visited == [(start + k) % 6 for k in range(6)]


def test_single_agent_alternates_with_station():
    s = _schedule([(30.0, 40.0)], [(0.0, 0.0)])
    kinds = [p.kind for p in s.phases(0, 2 * s.step_period)]
    assert kinds == [DWELL, TRANSIT, CHARGE, TRANSIT] * 2
    assert s.phase_at(0, s.times.tau_d + s.times.tau_to_chg + 1.0).start == (0.0, 0.0)


def test_zero_length_tour_has_no_transits():
    s = _schedule([(0.0, 0.0)] * 3, [(0.0, 0.0)] * 3)
    assert s.times.tau_to_cov == 0 and s.times.tau_to_chg == 0
    assert all(p.kind != TRANSIT for a in range(3) for p in s.phases(a, s.macro_period))


def test_offsets_equal_soc_is_identity(ref):
    assert assign_start_offsets(ref, [1.0, 1.0, 1.0]).offsets == [0, 1, 2]


def test_emptiest_agent_charges_first(ref):
    s = assign_start_offsets(ref, [1.0, 1.0, 0.1])
    first = [a for a in range(3) if s.phase_at(a, s.times.tau_d + s.times.tau_to_chg + 1.0).kind == CHARGE]
    assert first == [2]


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.3, 1.0), min_size=3, max_size=3))
def test_any_assignment_keeps_invariants(soc):
    s = assign_start_offsets(_schedule(REF_OCV, REF_OCH), soc)
    assert sorted(s.offsets) == [0, 1, 2]
    tm = s.times
    for m in range(3):
        t = m * tm.step + tm.tau_d + tm.tau_to_chg + 0.5 * tm.tau_c
        assert [s.phase_at(a, t).kind for a in range(3)].count(CHARGE) == 1


def test_offsets_validate_length(ref):
    with pytest.raises(ConfigurationError):
        assign_start_offsets(ref, [1.0])


def test_planned_soc_converges_to_fixed_point(ref):
    for a in range(3):
        times, socs = planned_soc(ref, a, 1.0, 5 * ref.macro_period, M3)
        assert socs.min() >= 0.0
        arrivals = [q for t, q in zip(times[:-1], socs[:-1]) if ref.phase_at(a, t + 1e-9).kind == CHARGE]
        # last two station arrivals agree with the planner's fixed point
        assert arrivals[-1] == pytest.approx(ref.duty.q_arrival, abs=1e-9)
        assert arrivals[-2] == pytest.approx(ref.duty.q_arrival, abs=1e-9)


def test_schedule_is_deterministic_and_roundtrips(ref):
    again = _schedule(REF_OCV, REF_OCH)
    assert again.to_dict() == ref.to_dict()
    back = CycleSchedule.from_dict(ref.to_dict())
    assert back.to_dict() == ref.to_dict()
    with pytest.raises(ConfigurationError):
        CycleSchedule.from_dict({"ocv": {}})


def test_phase_table_sorted(ref):
    rows = phase_table(ref, 300.0)
    keys = [(r["t0"], r["agent"]) for r in rows]
    assert keys == sorted(keys)
    assert {r["kind"] for r in rows} >= {DWELL, TRANSIT, HOLD, CHARGE}


def test_boundaries_cover_every_phase_edge(ref):
    b = set(np.round(ref.boundaries(ref.macro_period), 9))
    for a in range(3):
        for p in ref.phases(a, ref.macro_period):
            assert round(p.t0, 9) in b
