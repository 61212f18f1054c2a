"""Fixed-step closed-loop simulation of unicycle kinematics and battery SOC.

The loop advances in steps of ``dt`` but splits a step at any controller
boundary (phase change of a schedule), so plateau lengths are exact.  Coverage
is sampled at the start of every (sub)step from the agents whose sensing is on;
the time-average is the left Riemann sum over those intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .energy import EnergyModel, deplete
from .mission import MissionSpace, coverage
from .planner import CHARGE, TRANSIT, CycleSchedule
from .scenario import BaselineParams, Scenario

COVER = "COVER"
MOVE = "TRANSIT"
DOCKED = "CHARGE"
WAIT = "WAIT"
MODES = (COVER, MOVE, DOCKED, WAIT)

AT_STATION_TOL = 1e-6
MOTION_EPS = 1e-9
_TIME_EPS = 1e-9


@dataclass
class AgentState:
    pos: np.ndarray
    q: float
    mode: str = COVER
    b: int = 1
    charging: int = 0

    def copy(self) -> "AgentState":
        return AgentState(self.pos.copy(), self.q, self.mode, self.b, self.charging)


@dataclass
class ControlInput:
    speed: float = 0.0
    heading: float = 0.0
    b: int = 1
    charge: bool = False
    target: Optional[np.ndarray] = None


def _at(pos, point) -> bool:
    return math.hypot(pos[0] - point[0], pos[1] - point[1]) <= AT_STATION_TOL


def step(states: Sequence[AgentState], controls: Sequence[ControlInput], dt: float,
         model: EnergyModel, space: MissionSpace) -> list[AgentState]:
    """Advance every agent by ``dt``; charging happens only when docked at the station."""
    out = []
    for st, u in zip(states, controls):
        new = st.copy()
        new.b = int(u.b)
        if u.charge and _at(st.pos, space.station):
            new.pos = np.array(space.station, dtype=float)
            new.charging = 1
            new.mode = DOCKED
            new.q = min(1.0, st.q + model.f(st.q, new.b) * dt)
            out.append(new)
            continue
        new.charging = 0
        speed = min(max(u.speed, 0.0), model.vmax)
        reach = speed * dt
        if u.target is not None:
            delta = np.asarray(u.target, dtype=float) - st.pos
            dist = float(np.hypot(*delta))
            if dist <= reach + 1e-9 * max(1.0, reach):
                new.pos = np.asarray(u.target, dtype=float).copy()
            else:
                new.pos = st.pos + reach * delta / dist
        else:
            new.pos = st.pos + reach * np.array([math.cos(u.heading), math.sin(u.heading)])
        new.pos = space.clip(new.pos)[0]
        moved = float(np.hypot(*(new.pos - st.pos)))
        new.q = deplete(st.q, moved / dt if dt > 0 else 0.0, new.b, dt, model)
        if moved > 0:
            new.mode = MOVE
        else:
            new.mode = COVER if new.b else WAIT
        out.append(new)
    return out


class Controller(Protocol):
    name: str

    def initial_states(self, scenario: Scenario) -> list[AgentState]: ...

    def controls(self, t: float, states: Sequence[AgentState]) -> list[ControlInput]: ...

    def next_boundary(self, t: float) -> float: ...


class ScheduleController:
    """Plays back a :class:`CycleSchedule`; sensing stays on throughout."""

    name = "centralized"

    def __init__(self, schedule: CycleSchedule, horizon: float):
        self.schedule = schedule
        self._bounds = schedule.boundaries(horizon) if schedule.times.step > 0 else np.array([0.0])

    def initial_states(self, scenario: Scenario) -> list[AgentState]:
        pts = self.schedule.start_positions()
        return [AgentState(pts[a].copy(), scenario.initial_soc[a]) for a in range(self.schedule.n)]

    def next_boundary(self, t: float) -> float:
        i = np.searchsorted(self._bounds, t + _TIME_EPS, side="right")
        return float(self._bounds[i]) if i < len(self._bounds) else math.inf

    def controls(self, t: float, states: Sequence[AgentState]) -> list[ControlInput]:
        out = []
        for a in range(self.schedule.n):
            p = self.schedule.phase_at(a, t + _TIME_EPS)
            if p.kind == TRANSIT:
                out.append(ControlInput(p.speed, p.heading, 1, False, np.asarray(p.end, dtype=float)))
            else:
                out.append(ControlInput(0.0, 0.0, 1, p.kind == CHARGE, np.asarray(p.start, dtype=float)))
        return out


class BaselineController:
    """Threshold-triggered charging without coordination (decentralized stand-in).

    Each agent covers at its home point until its SOC drops to ``q_low``, then
    flies to the station at full speed.  An occupied outlet sends it to a wait
    point ``wait_offset`` short of the station on its approach line, where it
    idles with sensing off.  Queued agents dock first-come-first-served (ties by
    index), charge to full and fly home.  Teammates never reposition.
    """

    name = "baseline"

    def __init__(self, homes, params: BaselineParams, model: EnergyModel, station):
        self.homes = np.asarray(homes, dtype=float).reshape(-1, 2)
        self.params = params
        self.model = model
        self.station = np.asarray(station, dtype=float)
        n = len(self.homes)
        self.phase = ["cover"] * n
        self.wait_points = [self.station.copy() for _ in range(n)]
        self.queue: list[int] = []
        self.outlet: Optional[int] = None

    def initial_states(self, scenario: Scenario) -> list[AgentState]:
        return [AgentState(self.homes[a].copy(), scenario.initial_soc[a]) for a in range(len(self.homes))]

    def next_boundary(self, t: float) -> float:
        return math.inf

    def _wait_point(self, pos) -> np.ndarray:
        away = np.asarray(pos, dtype=float) - self.station
        dist = float(np.hypot(*away))
        if dist <= self.params.wait_offset or dist == 0:
            return self.station.copy()
        return self.station + away / dist * self.params.wait_offset

    def controls(self, t: float, states: Sequence[AgentState]) -> list[ControlInput]:
        vmax = self.model.vmax
        p = self.params
        # state transitions, in agent-index order
        for a, st in enumerate(states):
            ph = self.phase[a]
            if ph == "cover" and st.q <= p.q_low:
                self.phase[a] = "to_station"
                self.wait_points[a] = self._wait_point(st.pos)
            elif ph == "to_station" and np.allclose(st.pos, self.wait_points[a], atol=AT_STATION_TOL):
                self.phase[a] = "queued"
                self.queue.append(a)
            elif ph == "docking" and _at(st.pos, self.station):
                self.phase[a] = "charging"
            elif ph == "charging" and st.q >= 1.0:
                self.phase[a] = "returning"
                self.outlet = None
            elif ph == "returning" and np.allclose(st.pos, self.homes[a], atol=AT_STATION_TOL):
                self.phase[a] = "cover"
        if self.outlet is None and self.queue:
            head = self.queue.pop(0)
            self.outlet = head
            self.phase[head] = "charging" if _at(states[head].pos, self.station) else "docking"

        out = []
        for a, st in enumerate(states):
            ph = self.phase[a]
            if ph == "cover":
                out.append(ControlInput(vmax if not _at(st.pos, self.homes[a]) else 0.0, 0.0, 1, False, self.homes[a]))
            elif ph == "to_station":
                out.append(ControlInput(vmax, 0.0, 1, False, self.wait_points[a]))
            elif ph == "queued":
                out.append(ControlInput(0.0, 0.0, 0, False, st.pos.copy()))
            elif ph == "docking":
                out.append(ControlInput(vmax, 0.0, 1, False, self.station))
            elif ph == "charging":
                out.append(ControlInput(0.0, 0.0, 1, True, self.station))
            else:
                out.append(ControlInput(vmax, 0.0, 1, False, self.homes[a]))
        return out


def decentralized_controller(homes, params: BaselineParams, model: EnergyModel, station) -> BaselineController:
    return BaselineController(homes, params, model, station)


@dataclass
class Violation:
    t: float
    kind: str           # "battery_death" | "outlet"
    agents: tuple


@dataclass
class SimTrace:
    controller: str
    times: np.ndarray          # (K+1,) sample instants, last == horizon
    positions: np.ndarray      # (K+1, N, 2)
    soc: np.ndarray            # (K+1, N)
    modes: np.ndarray          # (K+1, N) indices into MODES
    sensing: np.ndarray        # (K+1, N) control b in force from this sample on
    charging: np.ndarray       # (K+1, N)
    coverage: np.ndarray       # (K+1,) H over the interval starting at each sample
    violations: list = field(default_factory=list)

    @property
    def horizon(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0

    @property
    def intervals(self) -> np.ndarray:
        return np.diff(self.times)

    def time_average(self) -> Optional[float]:
        T = self.horizon
        if T <= 0:
            return None
        return float(np.dot(self.coverage[:-1], self.intervals) / T)


def run(scenario: Scenario, controller: Controller) -> SimTrace:
    model, space = scenario.energy, scenario.space
    fld, sensing = scenario.field, scenario.sensing
    T, dt = scenario.horizon, scenario.dt
    states = controller.initial_states(scenario)
    n = len(states)

    times, pos, soc, modes, bflag, chg, cov = [], [], [], [], [], [], []
    violations: list[Violation] = []
    dead = [False] * n
    cached_key, cached_h, cached_pts = None, 0.0, None

    def sample(t, sts, ctrls):
        nonlocal cached_key, cached_h, cached_pts
        pts = np.array([s.pos for s, u in zip(sts, ctrls) if u.b]).reshape(-1, 2)
        key = tuple(int(u.b) for u in ctrls)
        if (cached_key != key or cached_pts is None or cached_pts.shape != pts.shape
                or np.max(np.abs(cached_pts - pts), initial=0.0) > MOTION_EPS):
            cached_h = coverage(pts, fld, sensing)
            cached_key, cached_pts = key, pts
        times.append(t)
        pos.append([s.pos.copy() for s in sts])
        soc.append([s.q for s in sts])
        modes.append([MODES.index(s.mode) for s in sts])
        bflag.append([int(u.b) for u in ctrls])
        chg.append([s.charging for s in sts])
        cov.append(cached_h)

    t = 0.0
    controls = controller.controls(t, states)
    sample(t, states, controls)
    while t < T - _TIME_EPS:
        t_next = min(t + dt, T)
        boundary = controller.next_boundary(t)
        if boundary < t_next - _TIME_EPS:
            t_next = boundary
        h = t_next - t
        states = step(states, controls, h, model, space)
        t = t_next
        for a, s in enumerate(states):
            is_dead = s.q <= 0.0 and not _at(s.pos, space.station)
            if is_dead and not dead[a]:
                violations.append(Violation(t, "battery_death", (a,)))
            dead[a] = is_dead
        docked = tuple(a for a, s in enumerate(states) if s.charging)
        if len(docked) > 1:
            violations.append(Violation(t, "outlet", docked))
        controls = controller.controls(t, states)
        sample(t, states, controls)

    return SimTrace(
        controller=controller.name,
        times=np.array(times),
        positions=np.array(pos).reshape(len(times), n, 2),
        soc=np.array(soc).reshape(len(times), n),
        modes=np.array(modes, dtype=int).reshape(len(times), n),
        sensing=np.array(bflag, dtype=int).reshape(len(times), n),
        charging=np.array(chg, dtype=int).reshape(len(times), n),
        coverage=np.array(cov),
        violations=violations,
    )


def sensing_off_intervals(trace: SimTrace, min_duration: float = 0.0) -> list[tuple[int, float, float]]:
    """``(agent, t_start, t_end)`` for every maximal stretch with sensing switched off."""
    out = []
    n = trace.sensing.shape[1] if trace.sensing.size else 0
    for a in range(n):
        off = trace.sensing[:-1, a] == 0
        start = None
        for k, flag in enumerate(off):
            if flag and start is None:
                start = trace.times[k]
            elif not flag and start is not None:
                if trace.times[k] - start >= min_duration:
                    out.append((a, float(start), float(trace.times[k])))
                start = None
        if start is not None and trace.times[-1] - start >= min_duration:
            out.append((a, float(start), float(trace.times[-1])))
    return sorted(out, key=lambda r: (r[1], r[0]))


def metrics(trace: SimTrace) -> dict:
    if len(trace.times) < 2:
        return {"controller": trace.controller, "horizon": trace.horizon, "time_average_h": None,
                "min_h": None, "max_h": None, "battery_deaths": 0, "outlet_violations": 0,
                "min_soc": [], "sensing_off_intervals": 0, "sensing_off_time": 0.0}
    live = trace.coverage[:-1][trace.intervals > 0]
    off = sensing_off_intervals(trace)
    return {
        "controller": trace.controller,
        "horizon": trace.horizon,
        "time_average_h": trace.time_average(),
        "min_h": float(live.min()),
        "max_h": float(live.max()),
        "battery_deaths": sum(v.kind == "battery_death" for v in trace.violations),
        "outlet_violations": sum(v.kind == "outlet" for v in trace.violations),
        "min_soc": [float(v) for v in trace.soc.min(axis=0)],
        "sensing_off_intervals": len(off),
        "sensing_off_time": float(sum(e - s for _, s, e in off)),
    }
