"""Synchronized cyclic schedules switching the team between OCV and OCH formations.

Time is divided into identical steps of ``tau_d + tau_to_chg + tau_c + tau_to_cov``.
During step ``m`` the agent with start offset ``o`` dwells at OCV tour position
``2 * ((o + m) % N)``, moves to the following OCH position, waits there (charging
when it is the station) and moves on to the next OCV position.  Every agent
charges once per macro-cycle of ``N`` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .energy import (CriticalTimes, DutyCycle, EnergyModel, charge_update, duty_cycle_optimize, optimal_speed,
                     transit_cost)
from .errors import ConfigurationError, InfeasibleError, InfeasibleTransitionError
from .formation import Formation
from .routing import AlternatingTour

DWELL = "DWELL"
TRANSIT = "TRANSIT"
HOLD = "HOLD"
CHARGE = "CHARGE"


@dataclass(frozen=True)
class Phase:
    t0: float
    t1: float
    kind: str
    start: tuple[float, float]
    end: tuple[float, float]
    speed: float = 0.0
    heading: float = 0.0
    tour_pos: int = -1        # node occupied (DWELL/HOLD/CHARGE) or targeted (TRANSIT)

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    def position_at(self, t: float) -> np.ndarray:
        if self.kind != TRANSIT or self.t1 <= self.t0:
            return np.asarray(self.end if self.kind == TRANSIT else self.start, dtype=float)
        s = min(1.0, max(0.0, (t - self.t0) / (self.t1 - self.t0)))
        a = np.asarray(self.start, dtype=float)
        return a + s * (np.asarray(self.end, dtype=float) - a)


@dataclass
class CycleSchedule:
    ocv: Formation
    och: Formation
    tour: AlternatingTour
    duty: DutyCycle
    offsets: list[int]
    vmax: float

    @property
    def times(self) -> CriticalTimes:
        return self.duty.times

    @property
    def n(self) -> int:
        return self.tour.n

    @property
    def step_period(self) -> float:
        return self.times.step

    @property
    def macro_period(self) -> float:
        return self.n * self.times.step

    def node(self, pos: int) -> tuple[float, float]:
        x, y = self.tour.points[pos % (2 * self.n)]
        return float(x), float(y)

    def start_positions(self) -> np.ndarray:
        return np.array([self.node(2 * o) for o in self.offsets])

    def step_phases(self, agent: int, m: int) -> list[Phase]:
        """Non-degenerate phases of ``agent`` during global step ``m``."""
        n, tm = self.n, self.times
        base = m * tm.step
        pv = 2 * ((self.offsets[agent] + m) % n)
        ph = pv + 1
        pn = (pv + 2) % (2 * n)
        at_station = ph == 2 * n - 1
        a, b, c = self.node(pv), self.node(ph), self.node(pn)
        bounds = np.cumsum([base, tm.tau_d, tm.tau_to_chg, tm.tau_c, tm.tau_to_cov])
        out = [
            Phase(bounds[0], bounds[1], DWELL, a, a, tour_pos=pv),
            self._transit(bounds[1], bounds[2], a, b, ph),
            Phase(bounds[2], bounds[3], CHARGE if at_station else HOLD, b, b, tour_pos=ph),
            self._transit(bounds[3], bounds[4], b, c, pn),
        ]
        return [p for p in out if p.t1 > p.t0]

    def _transit(self, t0, t1, a, b, pos) -> Phase:
        tau = t1 - t0
        if tau <= 0:
            return Phase(t0, t1, TRANSIT, a, b, tour_pos=pos)
        d = math.hypot(b[0] - a[0], b[1] - a[1])
        if d == 0:
            return Phase(t0, t1, TRANSIT, a, b, 0.0, 0.0, pos)
        heading = math.atan2(b[1] - a[1], b[0] - a[0]) % (2 * math.pi)
        return Phase(t0, t1, TRANSIT, a, b, min(d / tau, self.vmax), heading, pos)

    def phases(self, agent: int, horizon: float) -> list[Phase]:
        if self.times.step <= 0:
            raise ConfigurationError("schedule has a zero-length step")
        out = []
        m = 0
        while m * self.times.step < horizon:
            out.extend(p for p in self.step_phases(agent, m) if p.t0 < horizon)
            m += 1
        return out

    def phase_at(self, agent: int, t: float) -> Phase:
        m = int(t // self.times.step) if self.times.step > 0 else 0
        for p in self.step_phases(agent, m):
            if p.t0 <= t < p.t1:
                return p
        # t on the far edge of a degenerate step: fall through to the next step
        return self.step_phases(agent, m + 1)[0]

    def positions_at(self, t: float) -> np.ndarray:
        return np.array([self.phase_at(a, t).position_at(t) for a in range(self.n)])

    def boundaries(self, horizon: float) -> np.ndarray:
        tm = self.times
        offs = np.unique(np.cumsum([0.0, tm.tau_d, tm.tau_to_chg, tm.tau_c]))
        steps = np.arange(0, math.ceil(horizon / tm.step) + 1) * tm.step
        b = (steps[:, None] + offs[None, :]).ravel()
        return np.unique(b[b <= horizon])

    def to_dict(self) -> dict:
        return {
            "ocv": self.ocv.to_dict(),
            "och": self.och.to_dict(),
            "tour": self.tour.to_dict(),
            "duty": self.duty.to_dict(),
            "offsets": list(map(int, self.offsets)),
            "vmax": float(self.vmax),
            "step_period": self.step_period,
            "macro_period": self.macro_period,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CycleSchedule":
        try:
            duty = data["duty"]
            return cls(
                ocv=Formation.from_dict(data["ocv"]),
                och=Formation.from_dict(data["och"]),
                tour=AlternatingTour.from_dict(data["tour"]),
                duty=DutyCycle(CriticalTimes.from_dict(duty["times"]), float(duty["duty_fraction"]),
                               float(duty["q_arrival"]), duty["rule"], bool(duty.get("slack", True))),
                offsets=[int(o) for o in data["offsets"]],
                vmax=float(data["vmax"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed schedule record: {exc}") from None


def build_schedule(ocv: Formation, och: Formation, tour: AlternatingTour, model: EnergyModel,
                   rule: str = "reserve") -> CycleSchedule:
    duty = duty_cycle_optimize(tour, model, rule)
    tm = duty.times
    # every leg is reachable at or below vmax by construction of the transition times
    for k, leg in enumerate(tour.legs):
        tau = tm.tau_to_chg if k % 2 == 0 else tm.tau_to_cov
        if leg > 0:
            optimal_speed((0.0, 0.0), (leg, 0.0), tau, model)
    return CycleSchedule(ocv, och, tour, duty, list(range(tour.n)), model.vmax)


def assign_start_offsets(schedule: CycleSchedule, initial_soc: Sequence[float]) -> CycleSchedule:
    """Give the rotations reaching the station soonest to the emptiest agents.

    Offset ``N - 1`` charges during the first step.  Agents are ranked by
    ``(soc, -index)``; with equal SOC this is the identity assignment.
    """
    n = schedule.n
    soc = list(initial_soc)
    if len(soc) != n:
        raise ConfigurationError(f"expected {n} initial SOC values, got {len(soc)}")
    ranked = sorted(range(n), key=lambda a: (soc[a], -a))
    offsets = [0] * n
    for rank, agent in enumerate(ranked):
        offsets[agent] = n - 1 - rank
    return CycleSchedule(schedule.ocv, schedule.och, schedule.tour, schedule.duty, offsets, schedule.vmax)


def planned_soc(schedule: CycleSchedule, agent: int, q0: float, horizon: float,
                model: EnergyModel) -> tuple[np.ndarray, np.ndarray]:
    """SOC of ``agent`` at every phase boundary up to ``horizon`` (linear law, unclamped below)."""
    times, socs = [0.0], [q0]
    q = q0
    for p in schedule.phases(agent, horizon):
        tau = min(p.t1, horizon) - p.t0
        if p.kind == CHARGE:
            q = charge_update(q, tau, model)
        else:
            d = p.speed * tau if p.kind == TRANSIT else 0.0
            try:
                q = min(1.0, q + transit_cost(q, tau, d, model))
            except InfeasibleTransitionError as exc:
                raise InfeasibleError(str(exc)) from None
        times.append(p.t0 + tau)
        socs.append(q)
    return np.array(times), np.array(socs)


def phase_table(schedule: CycleSchedule, horizon: float) -> list[dict]:
    rows = []
    for a in range(schedule.n):
        for p in schedule.phases(a, horizon):
            rows.append({"agent": a, "t0": p.t0, "t1": p.t1, "kind": p.kind, "tour_pos": p.tour_pos,
                         "x0": p.start[0], "y0": p.start[1], "x1": p.end[0], "y1": p.end[1],
                         "speed": p.speed, "heading": p.heading})
    rows.sort(key=lambda r: (r["t0"], r["agent"]))
    return rows
