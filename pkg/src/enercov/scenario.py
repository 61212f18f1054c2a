"""Scenario configuration: loading, validation and defaults.

Scenarios are YAML or JSON mappings::

    space:    {width: 600, height: 500, station: [0, 0]}
    field:    {uniform: 1.0, cell: 2.0}        # or {file: reward.txt}
    sensing:  {range: 220}
    energy:   {alpha: 0.0005, beta: 0.0005, c: 0.01, vmax: 50}
    agents: 3
    horizon: 1000
    dt: 0.1
    initial_soc: 1.0                           # scalar or one value per agent
    seed: 0
    solver:   {step: 20, max_iter: 400, tol: null, multistart: 16,
               initial_ocv: [[x, y], ...], initial_och: [[x, y], ...]}
    planning: {tour: exact, dwell_rule: reserve}
    baseline: {q_low: 0.3, wait_offset: 1.0}

Every key except ``space``, ``sensing``, ``energy`` and ``agents`` is optional.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .energy import DWELL_RULES, EnergyModel
from .errors import ConfigurationError
from .formation import SolverOptions
from .mission import MissionSpace, RewardField, SensingModel


@dataclass(frozen=True)
class BaselineParams:
    q_low: float = 0.3
    wait_offset: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.q_low < 1.0:
            raise ConfigurationError(f"baseline q_low must lie in [0, 1), got {self.q_low}")
        if self.wait_offset < 0:
            raise ConfigurationError("baseline wait_offset must be nonnegative")


@dataclass
class Scenario:
    space: MissionSpace
    field: RewardField
    sensing: SensingModel
    energy: EnergyModel
    n_agents: int
    horizon: float = 1000.0
    dt: float = 0.1
    initial_soc: list = field(default_factory=list)
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    initial_ocv: Optional[list] = None
    initial_och: Optional[list] = None
    tour_mode: str = "exact"
    dwell_rule: str = "reserve"
    baseline: BaselineParams = field(default_factory=BaselineParams)
    source: Optional[str] = None

    def __post_init__(self):
        if self.n_agents < 1:
            raise ConfigurationError("a scenario needs at least one agent")
        if self.horizon < 0:
            raise ConfigurationError("horizon must be nonnegative")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not self.initial_soc:
            self.initial_soc = [1.0] * self.n_agents
        elif np.ndim(self.initial_soc) == 0:
            self.initial_soc = [float(self.initial_soc)] * self.n_agents
        self.initial_soc = [float(q) for q in self.initial_soc]
        if len(self.initial_soc) != self.n_agents:
            raise ConfigurationError(f"initial_soc has {len(self.initial_soc)} entries for {self.n_agents} agents")
        if any(not 0.0 <= q <= 1.0 for q in self.initial_soc):
            raise ConfigurationError("initial SOC values must lie in [0, 1]")
        if self.tour_mode not in ("exact", "heuristic"):
            raise ConfigurationError(f"planning.tour must be 'exact' or 'heuristic', got {self.tour_mode!r}")
        if self.dwell_rule not in DWELL_RULES:
            raise ConfigurationError(f"planning.dwell_rule must be one of {DWELL_RULES}")
        self.field.check_space(self.space)

    def solver_options(self, kind: str) -> SolverOptions:
        seeds = self.initial_ocv if kind == "OCV" else self.initial_och
        return replace(self.solver, seed=self.seed, initial=[seeds] if seeds else [])

    def with_overrides(self, seed=None, dt=None, grid=None) -> "Scenario":
        sc = self
        if seed is not None:
            sc = replace(sc, seed=int(seed))
        if dt is not None:
            sc = replace(sc, dt=float(dt))
        if grid is not None:
            if sc.field.sigma is None:
                raise ConfigurationError("--grid only applies to uniform reward fields")
            sc = replace(sc, field=RewardField.uniform(sc.space, sc.field.sigma, float(grid)))
        return sc


def _section(raw: dict, key: str, required: bool = False) -> dict:
    val = raw.get(key)
    if val is None:
        if required:
            raise ConfigurationError(f"scenario is missing the '{key}' section")
        return {}
    if not isinstance(val, dict):
        raise ConfigurationError(f"scenario section '{key}' must be a mapping")
    return val


def _num(sec: dict, key: str, where: str, default: Any = None) -> Any:
    if key not in sec or sec[key] is None:
        if default is None:
            raise ConfigurationError(f"{where}.{key} is required")
        return default
    try:
        return float(sec[key])
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}.{key} must be a number, got {sec[key]!r}") from None


def scenario_from_dict(raw: dict, base_dir: Optional[Path] = None) -> Scenario:
    if not isinstance(raw, dict):
        raise ConfigurationError("scenario must be a mapping")
    sp = _section(raw, "space", True)
    space = MissionSpace(_num(sp, "width", "space"), _num(sp, "height", "space"),
                         tuple(sp.get("station", (0.0, 0.0))))

    fl = _section(raw, "field")
    if "file" in fl:
        path = Path(fl["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigurationError(f"reward field file not found: {path}")
        reward = RewardField.from_file(path)
    else:
        reward = RewardField.uniform(space, _num(fl, "uniform", "field", 1.0), _num(fl, "cell", "field", 2.0))

    se = _section(raw, "sensing", True)
    sensing = SensingModel(_num(se, "range", "sensing"))

    en = _section(raw, "energy", True)
    energy = EnergyModel(_num(en, "alpha", "energy"), _num(en, "beta", "energy"), _num(en, "c", "energy"),
                         _num(en, "vmax", "energy"))

    so = _section(raw, "solver")
    solver = SolverOptions(
        step=_num(so, "step", "solver", 20.0),
        max_iter=int(_num(so, "max_iter", "solver", 400)),
        tol=None if so.get("tol") is None else _num(so, "tol", "solver"),
        multistart=int(_num(so, "multistart", "solver", 16)),
    )
    pl = _section(raw, "planning")
    bl = _section(raw, "baseline")
    if "agents" not in raw:
        raise ConfigurationError("scenario is missing 'agents'")
    try:
        n = int(raw["agents"])
        seed = int(raw.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigurationError("'agents' and 'seed' must be integers") from None
    return Scenario(
        space=space,
        field=reward,
        sensing=sensing,
        energy=energy,
        n_agents=n,
        horizon=_num(raw, "horizon", "scenario", 1000.0),
        dt=_num(raw, "dt", "scenario", 0.1),
        initial_soc=raw.get("initial_soc", 1.0),
        seed=seed,
        solver=solver,
        initial_ocv=so.get("initial_ocv"),
        initial_och=so.get("initial_och"),
        tour_mode=pl.get("tour", "exact"),
        dwell_rule=pl.get("dwell_rule", "reserve"),
        baseline=BaselineParams(_num(bl, "q_low", "baseline", 0.3), _num(bl, "wait_offset", "baseline", 1.0)),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"scenario file not found: {path}")
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    sc = scenario_from_dict(raw, base_dir=path.parent)
    sc.source = str(path)
    return sc
