"""Battery models, per-leg energy maps and the duty-cycle planner.

State of charge (SOC) lives in [0, 1].  With the linear law an agent moving at
speed ``v`` with sensing ``b`` depletes at ``alpha*v + beta*b`` per second and
charges at ``c - beta`` per second while docked (sensing stays on).

Cycle bookkeeping follows the alternating tour: an agent dwells ``tau_d`` at
each OCV node, travels a coverage->charging leg in ``tau_to_chg``, waits
``tau_c`` at each OCH node (charging when that node is the station) and travels
a charging->coverage leg in ``tau_to_cov``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, InfeasibleError, InfeasibleTransitionError, UnsupportedModelError
from .routing import AlternatingTour

_REACH_RTOL = 1e-5     # absorbs legs and times rounded to printed precision


@dataclass(frozen=True)
class EnergyModel:
    alpha: float
    beta: float
    c: float
    vmax: float
    depletion: Optional[Callable[[float, float, int], float]] = None   # g(q, v, b) <= 0
    charging: Optional[Callable[[float, int], float]] = None           # f(q, b) >= 0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.vmax > 0):
            raise ConfigurationError("alpha, beta and vmax must be positive")
        if not self.c > self.beta:
            raise ConfigurationError(f"charging rate c={self.c} must exceed beta={self.beta}")

    @property
    def linear(self) -> bool:
        return self.depletion is None and self.charging is None

    def g(self, q: float, v: float, b: int) -> float:
        if self.depletion is not None:
            return min(0.0, float(self.depletion(q, v, b)))
        return -self.alpha * v - self.beta * b

    def f(self, q: float, b: int = 1) -> float:
        if self.charging is not None:
            return max(0.0, float(self.charging(q, b)))
        return self.c - self.beta * b

    def full_charge_time(self, q: float = 0.0) -> float:
        self._require_linear("full_charge_time")
        return max(0.0, 1.0 - q) / (self.c - self.beta)

    def _require_linear(self, what: str) -> None:
        if not self.linear:
            raise UnsupportedModelError(f"{what} is closed-form only for the linear battery law")


def _clamp(q: float) -> float:
    return min(1.0, max(0.0, q))


def deplete(q: float, v: float, b: int, dt: float, model: EnergyModel) -> float:
    """One explicit-Euler step in depletion mode (exact for the linear law)."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    return _clamp(q + model.g(q, v, b) * dt)


def charge_update(q: float, tau: float, model: EnergyModel, substeps: int = 1000) -> float:
    """SOC after docking ``tau`` seconds starting from ``q``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if model.charging is None:
        return min(1.0, q + (model.c - model.beta) * tau)
    h = tau / substeps
    for _ in range(substeps):
        q = min(1.0, q + model.f(q, 1) * h)
    return q


def transit_cost(q: float, tau: float, d: float, model: EnergyModel) -> float:
    """SOC change (<= 0) for covering distance ``d`` in ``tau`` seconds at the optimal speed."""
    if tau < 0 or d < 0:
        raise ValueError("tau and d must be nonnegative")
    if d > model.vmax * tau * (1.0 + _REACH_RTOL) + 1e-12:
        raise InfeasibleTransitionError(f"distance {d:.6g} unreachable in {tau:.6g}s at vmax={model.vmax}")
    model._require_linear("transit_cost")
    return -(model.alpha * d + model.beta * tau)


@dataclass(frozen=True)
class SpeedProfile:
    speed: float
    heading: float
    energy_cost: float     # SOC consumed, alpha*|ds| + beta*tau


def optimal_speed(start, end, tau: float, model: EnergyModel) -> SpeedProfile:
    """Constant speed along the straight segment; heading in [0, 2pi)."""
    dx = float(end[0]) - float(start[0])
    dy = float(end[1]) - float(start[1])
    d = math.hypot(dx, dy)
    if d == 0.0:
        return SpeedProfile(0.0, 0.0, model.beta * tau)
    if tau <= 0 or d > model.vmax * tau * (1.0 + _REACH_RTOL) + 1e-12:
        raise InfeasibleTransitionError(f"leg of {d:.6g} needs more than vmax={model.vmax} over {tau:.6g}s")
    heading = math.atan2(dy, dx) % (2.0 * math.pi)
    return SpeedProfile(min(d / tau, model.vmax), heading, model.alpha * d + model.beta * tau)


def profile_cost(speeds, durations, model: EnergyModel) -> float:
    """SOC consumed by a piecewise-constant speed profile with sensing on."""
    speeds = np.asarray(speeds, dtype=float)
    durations = np.asarray(durations, dtype=float)
    return float(np.sum((model.alpha * speeds + model.beta) * durations))


@dataclass(frozen=True)
class CriticalTimes:
    tau_c: float
    tau_d: float
    tau_to_cov: float
    tau_to_chg: float

    @property
    def step(self) -> float:
        """One formation step: dwell, to-charge transit, charge, to-cover transit."""
        return self.tau_d + self.tau_to_chg + self.tau_c + self.tau_to_cov

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "CriticalTimes":
        try:
            return cls(*(float(data[k]) for k in ("tau_c", "tau_d", "tau_to_cov", "tau_to_chg")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed critical-times record: {exc}") from None


def transition_times(tour: AlternatingTour, vmax: float) -> tuple[float, float]:
    """``(tau_to_cov, tau_to_chg)``: longest leg of each transition at full speed."""
    return float(tour.to_cover_legs.max()) / vmax, float(tour.to_charge_legs.max()) / vmax


@dataclass
class SocChain:
    """Arrival/departure SOC at each tour position over one cycle starting at station arrival."""

    arrive: np.ndarray
    depart: np.ndarray
    final: float           # station-arrival SOC after one full cycle

    def to_dict(self) -> dict:
        return {"arrive": [float(v) for v in self.arrive], "depart": [float(v) for v in self.depart],
                "final": float(self.final)}


def soc_chain(tour: AlternatingTour, model: EnergyModel, q_station: float, times: CriticalTimes) -> SocChain:
    """Walk one cycle forward from station arrival with SOC ``q_station``.

    Uses ``charge_update`` at the station and ``transit_cost`` on legs and dwells,
    clamping into [0, 1].  A transient value below zero raises ``InfeasibleError``.
    """
    m = 2 * tour.n
    arrive = np.zeros(m)
    depart = np.zeros(m)
    station = m - 1
    arrive[station] = q_station
    q = depart[station] = charge_update(q_station, times.tau_c, model)
    for k in range(m):
        # leg into position k comes from k - 1 (station for k == 0)
        leg = tour.legs[k - 1] if k > 0 else tour.legs[-1]
        tau_leg = times.tau_to_cov if k % 2 == 0 else times.tau_to_chg
        q = q + transit_cost(q, tau_leg, leg, model)
        if q < -1e-12:
            raise InfeasibleError(f"SOC drops below zero on the leg into tour position {k}")
        q = _clamp(q)
        if k == station:
            break
        arrive[k] = q
        dwell = times.tau_d if k % 2 == 0 else times.tau_c
        q = q + transit_cost(q, dwell, 0.0, model)
        if q < -1e-12:
            raise InfeasibleError(f"SOC drops below zero while dwelling at tour position {k}")
        q = depart[k] = _clamp(q)
    return SocChain(arrive, depart, q)


def cycle_consumption(tour: AlternatingTour, model: EnergyModel, tau_d: float, tau_c: float,
                      tau_to_cov: float, tau_to_chg: float) -> float:
    """SOC spent over one cycle outside the charging dwell (linear law)."""
    n = tour.n
    return (model.alpha * tour.length
            + model.beta * (n * tau_d + (n - 1) * tau_c + n * (tau_to_cov + tau_to_chg)))


@dataclass
class FeasibilityResult:
    q_arrival: float
    tau_c_min: float
    chain: SocChain
    times: CriticalTimes


def feasibility_solve(tour: AlternatingTour, model: EnergyModel, tau_d: float = 0.0) -> FeasibilityResult:
    """Smallest station-arrival SOC and charging time keeping the cycle SOC non-decreasing."""
    model._require_linear("feasibility_solve")
    if tau_d < 0:
        raise ValueError("tau_d must be nonnegative")
    n = tour.n
    if model.c <= n * model.beta:
        raise InfeasibleError(
            f"feasibility: charging cannot offset depletion (c={model.c} <= N*beta={n * model.beta})")
    to_cov, to_chg = transition_times(tour, model.vmax)
    # net per-cycle balance: (c - N beta) tau_c >= alpha D + N beta (tau_t + tau_d)
    tau_c = (model.alpha * tour.length + n * model.beta * (to_cov + to_chg + tau_d)) / (model.c - n * model.beta)
    cap = model.full_charge_time(0.0)
    if tau_c > cap * (1.0 + 1e-12):
        raise InfeasibleError(
            f"feasibility: charging cannot offset depletion (needs tau_c={tau_c:.6g}s > full charge {cap:.6g}s)")
    tau_c = min(tau_c, cap)
    times = CriticalTimes(tau_c, tau_d, to_cov, to_chg)
    chain = soc_chain(tour, model, 0.0, times)
    return FeasibilityResult(0.0, tau_c, chain, times)


def sufficient_feasibility_check(model: EnergyModel, n: int) -> bool:
    """Conservative advisory: the outlet out-supplies N agents all flying flat out."""
    return model.c >= n * (model.alpha * model.vmax + model.beta)


@dataclass
class DutyCycle:
    times: CriticalTimes
    duty_fraction: float
    q_arrival: float           # station-arrival SOC at the operating fixed point
    rule: str
    slack: bool = field(default=True)

    def to_dict(self) -> dict:
        return {"times": self.times.to_dict(), "duty_fraction": self.duty_fraction,
                "q_arrival": self.q_arrival, "rule": self.rule, "slack": self.slack}


DWELL_RULES = ("reserve", "tight")


def duty_cycle_optimize(tour: AlternatingTour, model: EnergyModel, rule: str = "reserve") -> DutyCycle:
    """Maximize the share of each step spent in the full coverage formation.

    The charging time sits at its full-charge bound.  ``rule`` fixes the dwell:

    * ``"reserve"``: ``tau_d = (1 - alpha D)/(N beta) - tau_c - tau_t``; the
      sensing drain of the charging dwell is budgeted twice, so agents reach the
      station with ``beta * tau_c`` SOC in hand.
    * ``"tight"``: the largest dwell the per-cycle balance admits; agents reach
      the station empty.
    """
    if rule not in DWELL_RULES:
        raise ConfigurationError(f"unknown dwell rule {rule!r}; expected one of {DWELL_RULES}")
    feas = feasibility_solve(tour, model, 0.0)
    n = tour.n
    to_cov, to_chg = feas.times.tau_to_cov, feas.times.tau_to_chg
    tau_c = model.full_charge_time(feas.q_arrival)
    if rule == "reserve":
        tau_d = (1.0 - model.alpha * tour.length) / (n * model.beta) - tau_c - to_cov - to_chg
    else:
        tau_d = ((model.c - n * model.beta) * tau_c - model.alpha * tour.length) / (n * model.beta) - to_cov - to_chg
    slack = tau_d > 0
    tau_d = max(0.0, tau_d)
    times = CriticalTimes(tau_c, tau_d, to_cov, to_chg)
    # fixed point of the saturating map: a full charge every visit
    q_arrival = max(0.0, 1.0 - cycle_consumption(tour, model, tau_d, tau_c, to_cov, to_chg))
    total = times.step
    duty = tau_d / total if total > 0 else 0.0
    return DutyCycle(times, duty, q_arrival, rule, slack)
