"""End-to-end orchestration shared by the CLI and the test-suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from .energy import sufficient_feasibility_check
from .formation import Formation, solve_och, solve_ocv
from .planner import CycleSchedule, assign_start_offsets, build_schedule
from .routing import build_graph, solve_alternating_tour
from .scenario import Scenario
from .simulator import BaselineController, ScheduleController, SimTrace, metrics, run

log = logging.getLogger(__name__)


@dataclass
class Formations:
    ocv: Formation
    och: Formation

    @property
    def converged(self) -> bool:
        return self.ocv.converged and self.och.converged


def formations(sc: Scenario) -> Formations:
    ocv = solve_ocv(sc.n_agents, sc.field, sc.sensing, sc.solver_options("OCV"))
    och = solve_och(sc.n_agents, sc.field, sc.sensing, sc.space.station, sc.solver_options("OCH"))
    return Formations(ocv, och)


def plan(sc: Scenario, forms: Formations) -> CycleSchedule:
    if not sufficient_feasibility_check(sc.energy, sc.n_agents):
        log.info("advisory: c < N*(alpha*vmax + beta); the conservative outlet-capacity condition does not hold")
    graph = build_graph(forms.ocv, forms.och, sc.space.station)
    tour = solve_alternating_tour(graph, sc.tour_mode)
    schedule = build_schedule(forms.ocv, forms.och, tour, sc.energy, sc.dwell_rule)
    return assign_start_offsets(schedule, sc.initial_soc)


def simulate(sc: Scenario, controller: str, schedule: Optional[CycleSchedule] = None,
             ocv: Optional[Formation] = None) -> SimTrace:
    if controller == "centralized":
        if schedule is None:
            raise ValueError("centralized simulation needs a schedule")
        return run(sc, ScheduleController(schedule, sc.horizon))
    if controller == "baseline":
        homes = ocv.positions if ocv is not None else schedule.ocv.positions
        return run(sc, BaselineController(homes, sc.baseline, sc.energy, sc.space.station))
    raise ValueError(f"unknown controller {controller!r}")


def compare(sc: Scenario, forms: Optional[Formations] = None) -> dict:
    forms = forms or formations(sc)
    schedule = plan(sc, forms)
    cen = metrics(simulate(sc, "centralized", schedule))
    base = metrics(simulate(sc, "baseline", ocv=forms.ocv))
    return comparison_report(cen, base, schedule)


def comparison_report(a: dict, b: dict, schedule: Optional[CycleSchedule] = None) -> dict:
    avg_a, avg_b = a["time_average_h"], b["time_average_h"]
    pct = None
    if avg_a is not None and avg_b:
        pct = 100.0 * (avg_a - avg_b) / avg_b
    report = {"centralized": a, "baseline": b, "improvement_percent": pct}
    if schedule is not None:
        report["h_ocv"] = schedule.ocv.achieved_h
        report["h_och"] = schedule.och.achieved_h
        report["times"] = schedule.times.to_dict()
    return report
