import math

import numpy as np
import pytest

from enercov import pipeline
from enercov.energy import EnergyModel
from enercov.mission import MissionSpace, coverage
from enercov.scenario import BaselineParams, scenario_from_dict
from enercov.simulator import (COVER, DOCKED, MODES, AgentState, BaselineController, ControlInput, ScheduleController,
                               SimTrace, decentralized_controller, metrics, run, sensing_off_intervals, step)

M = EnergyModel(alpha=0.0005, beta=0.0005, c=0.01, vmax=50.0)
SPACE = MissionSpace(600, 500)


def _small(**kw):
    raw = {
        "space": {"width": 600, "height": 500},
        "field": {"uniform": 1.0, "cell": 10.0},
        "sensing": {"range": 220},
        "energy": {"alpha": 0.0005, "beta": 0.0005, "c": 0.01, "vmax": 50},
        "agents": 3,
        "horizon": 300,
        "dt": 0.5,
        "solver": {"multistart": 2,
                   "initial_ocv": [[186.7, 119.3], [160.3, 371.1], [451.4, 290.4]],
                   "initial_och": [[0, 0], [169.3, 320.2], [430.6, 185.0]]},
    }
    raw.update(kw)
    return scenario_from_dict(raw)


class Static:
    name = "static"

    def __init__(self, pts, b=1):
        self.pts = np.asarray(pts, dtype=float)
        self.b = b

    def initial_states(self, sc):
        return [AgentState(p.copy(), q) for p, q in zip(self.pts, sc.initial_soc)]

    def next_boundary(self, t):
        return math.inf

    def controls(self, t, states):
        return [ControlInput(0.0, 0.0, self.b, False, None) for _ in states]


def test_step_idle_without_sensing():
    st = AgentState(np.array([10.0, 10.0]), 0.5)
    out = step([st], [ControlInput(0.0, 0.0, 0, False, None)], 1.0, M, SPACE)[0]
    assert out.q == 0.5 and np.array_equal(out.pos, st.pos)


def test_step_full_speed_east():
    st = AgentState(np.array([10.0, 10.0]), 1.0)
    out = step([st], [ControlInput(50.0, 0.0, 1, False, None)], 1.0, M, SPACE)[0]
    assert out.pos[0] == pytest.approx(60.0) and out.pos[1] == pytest.approx(10.0)
    assert out.q == pytest.approx(1.0 - (0.0005 * 50 + 0.0005))


def test_step_charging_at_station():
    st = AgentState(np.array([0.0, 0.0]), 0.5)
    out = step([st], [ControlInput(0.0, 0.0, 1, True, None)], 1.0, M, SPACE)[0]
    assert out.q == pytest.approx(0.5 + 0.0095) and out.charging == 1 and out.mode == DOCKED
    full = step([AgentState(np.array([0.0, 0.0]), 0.999)], [ControlInput(0, 0, 1, True, None)], 1.0, M, SPACE)[0]
    assert full.q == 1.0


def test_charging_needs_the_station():
    out = step([AgentState(np.array([5.0, 0.0]), 0.5)], [ControlInput(0, 0, 1, True, None)], 1.0, M, SPACE)[0]
    assert out.charging == 0 and out.q < 0.5


def test_step_snaps_to_target_and_charges_distance_moved():
    st = AgentState(np.array([0.0, 0.0]), 1.0)
    out = step([st], [ControlInput(50.0, 0.0, 1, False, np.array([3.0, 4.0]))], 1.0, M, SPACE)[0]
    assert np.array_equal(out.pos, [3.0, 4.0])
    assert out.q == pytest.approx(1.0 - 0.0005 * 5 - 0.0005)


def test_static_agents_constant_h_linear_soc():
    sc = _small(horizon=100, dt=1.0)
    pts = [(100, 100), (300, 300), (500, 100)]
    tr = run(sc, Static(pts))
    assert np.all(tr.coverage == tr.coverage[0])
    assert tr.coverage[0] == pytest.approx(coverage(pts, sc.field, sc.sensing))
    assert np.allclose(tr.soc[:, 0], 1.0 - 0.0005 * tr.times)
    long = run(_small(horizon=2500, dt=5.0), Static(pts))
    assert long.soc[-1, 0] == 0.0
    assert sum(v.kind == "battery_death" for v in long.violations) == 3


def test_zero_horizon_gives_single_sample():
    tr = run(_small(horizon=0), Static([(1, 1)] * 3))
    assert len(tr.times) == 1 and tr.time_average() is None
    assert metrics(tr)["time_average_h"] is None


def test_metrics_constant_and_square_wave():
    times = np.linspace(0, 10, 11)
    z = np.zeros((11, 1))
    tr = SimTrace("x", times, np.zeros((11, 1, 2)), z + 1, z.astype(int), z.astype(int) + 1, z.astype(int),
                  np.full(11, 5.0))
    m = metrics(tr)
    assert m["time_average_h"] == pytest.approx(5.0) and m["min_h"] == 5.0
    cov = np.where(times < 3, 8.0, 2.0)
    tr.coverage = cov
    assert tr.time_average() == pytest.approx(0.3 * 8 + 0.7 * 2)


def test_sensing_off_intervals_are_maximal():
    times = np.arange(6.0)
    sensing = np.array([[1], [0], [0], [1], [0], [0]])
    tr = SimTrace("x", times, np.zeros((6, 1, 2)), np.ones((6, 1)), np.zeros((6, 1), int), sensing,
                  np.zeros((6, 1), int), np.ones(6))
    assert sensing_off_intervals(tr) == [(0, 1.0, 3.0), (0, 4.0, 5.0)]
    assert sensing_off_intervals(tr, min_duration=1.5) == [(0, 1.0, 3.0)]


def test_baseline_single_agent_above_threshold_stays():
    sc = _small(agents=1, horizon=100, dt=1.0, solver={"multistart": 1})
    ctl = BaselineController([(300, 250)], BaselineParams(0.3, 1.0), sc.energy, (0, 0))
    tr = run(sc, ctl)
    assert np.allclose(tr.positions[:, 0], (300, 250))
    assert np.all(tr.sensing == 1)


def test_baseline_never_triggered_is_static():
    sc = _small(horizon=500, dt=1.0)
    homes = [(100, 100), (300, 300), (500, 100)]
    tr = run(sc, decentralized_controller(homes, BaselineParams(0.0, 1.0), sc.energy, (0, 0)))
    ref = run(sc, Static(homes))
    assert np.allclose(tr.coverage, ref.coverage)


def test_baseline_contention_turns_sensing_off():
    # both agents cross the threshold at once; the lower-priority one queues with sensing off
    sc = _small(agents=2, horizon=400, dt=0.5, initial_soc=[0.31, 0.31])
    homes = [(40, 30), (60, 80)]
    ctl = BaselineController(homes, BaselineParams(0.3, 1.0), sc.energy, (0, 0))
    tr = run(sc, ctl)
    off = sensing_off_intervals(tr)
    assert off and all(a == 1 for a, *_ in off)
    assert not any(v.kind == "outlet" for v in tr.violations)
    k = int(np.argmax(tr.sensing[:, 1] == 0))
    assert np.linalg.norm(tr.positions[k, 1]) == pytest.approx(1.0, abs=1e-6)
    # while queued the waiting agent adds nothing to H
    only0 = coverage([tr.positions[k, 0]], sc.field, sc.sensing)
    assert tr.coverage[k] == pytest.approx(only0)
    assert tr.charging[:, 0].any() and tr.charging[:, 1].any()
    assert np.all(tr.charging.sum(axis=1) <= 1)


def test_centralized_short_run_is_clean_and_consistent():
    sc = _small(horizon=500, dt=0.5)
    forms = pipeline.formations(sc)
    sched = pipeline.plan(sc, forms)
    tr = pipeline.simulate(sc, "centralized", sched)
    assert not tr.violations
    # mode consistency: CHARGE exactly when charging
    assert np.array_equal(tr.modes == MODES.index(DOCKED), tr.charging == 1)
    assert tr.coverage.max() == pytest.approx(forms.ocv.achieved_h, rel=1e-9)
    assert tr.coverage.min() == pytest.approx(forms.och.achieved_h, rel=1e-9)
    again = pipeline.simulate(sc, "centralized", sched)
    assert np.array_equal(tr.positions, again.positions) and np.array_equal(tr.coverage, again.coverage)


def test_schedule_controller_hits_phase_boundaries(three_schedule):
    ctl = ScheduleController(three_schedule, 500.0)
    b = three_schedule.boundaries(500.0)
    assert ctl.next_boundary(0.0) == pytest.approx(b[1])
    assert ctl.next_boundary(b[1]) == pytest.approx(b[2])
    assert ctl.next_boundary(1e9) == math.inf


def test_mode_labels():
    assert COVER in MODES and DOCKED in MODES
