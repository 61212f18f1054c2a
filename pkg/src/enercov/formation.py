"""Coverage (OCV) and charging (OCH) formations by projected gradient ascent.

Both solvers run a monotone projected ascent with Armijo backtracking from a
set of starting points (explicit seeds, one grid-stratified spread, then
uniform-random draws) and keep the best local maximizer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError
from .mission import MissionSpace, RewardField, SensingModel, coverage, coverage_and_gradient

log = logging.getLogger(__name__)

OCV = "OCV"
OCH = "OCH"


@dataclass
class SolverOptions:
    step: float = 20.0               # first trial displacement of the fastest agent, length units
    max_iter: int = 400
    tol: Optional[float] = None      # projected-gradient norm; None -> 1e-3 * sigma * delta
    multistart: int = 16
    seed: int = 0
    initial: list = field(default_factory=list)   # explicit starting formations, tried first
    armijo: float = 1e-4
    tie_rtol: float = 1e-6           # results this close count as ties; lowest start index wins

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError("solver step must be positive")
        if self.tol is not None and not self.tol > 0:
            raise ConfigurationError("solver tolerance must be positive")
        if self.max_iter < 1 or self.multistart < 0:
            raise ConfigurationError("solver iteration/multistart counts must be positive")

    def tolerance(self, fld: RewardField, model: SensingModel) -> float:
        if self.tol is not None:
            return self.tol
        sigma = fld.sigma if fld.sigma is not None else float(fld.values.mean())
        return 1e-3 * max(sigma, 1e-12) * model.delta


@dataclass
class Formation:
    kind: str
    positions: np.ndarray
    achieved_h: float
    pinned_index: Optional[int] = None
    status: str = "converged"
    grad_norm: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "positions": [[float(x), float(y)] for x, y in self.positions],
            "pinned_index": self.pinned_index,
            "achieved_h": float(self.achieved_h),
            "status": self.status,
            "grad_norm": float(self.grad_norm),
            "iterations": int(self.iterations),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Formation":
        try:
            return cls(
                kind=data["kind"],
                positions=np.array(data["positions"], dtype=float),
                achieved_h=float(data["achieved_h"]),
                pinned_index=data.get("pinned_index"),
                status=data.get("status", "converged"),
                grad_norm=float(data.get("grad_norm", 0.0)),
                iterations=int(data.get("iterations", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed formation record: {exc}") from None


def canonical_order(positions) -> np.ndarray:
    """Indices sorting points lexicographically by (x, y)."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    return np.lexsort((pts[:, 1], pts[:, 0]))


def _space_of(fld: RewardField) -> MissionSpace:
    return MissionSpace(fld.width, fld.height)


def spread_start(n: int, width: float, height: float) -> np.ndarray:
    """``n`` cell centers of a near-square grid stratification of the space."""
    if n == 0:
        return np.zeros((0, 2))
    cols = max(1, math.ceil(math.sqrt(n * width / height)))
    rows = math.ceil(n / cols)
    pts = [((c + 0.5) * width / cols, (r + 0.5) * height / rows) for r in range(rows) for c in range(cols)]
    return np.array(pts[:n])


@dataclass
class _Ascent:
    positions: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    status: str


def _ascend(start, fld, model, space, opts, fixed, tol) -> _Ascent:
    x = space.clip(start)
    value, g = coverage_and_gradient(x, fld, model, fixed=fixed)
    gnorm = float(np.linalg.norm(g))
    t = None
    it = 0
    while it < opts.max_iter:
        if gnorm <= tol:
            return _Ascent(x, value, gnorm, it, "converged")
        if t is None:
            t = opts.step / max(np.max(np.linalg.norm(g, axis=1)), 1e-300)
        else:
            t *= 2.0
        while True:
            trial = space.clip(x + t * g)
            moved = trial - x
            if not np.any(moved):
                return _Ascent(x, value, gnorm, it, "stalled")
            trial_value = coverage(trial, fld, model)
            if trial_value >= value + opts.armijo * float(np.sum(g * moved)):
                break
            t *= 0.5
            if np.max(np.abs(moved)) < 1e-10:
                return _Ascent(x, value, gnorm, it, "stalled")
        x = trial
        value, g = coverage_and_gradient(x, fld, model, fixed=fixed)
        gnorm = float(np.linalg.norm(g))
        it += 1
    status = "converged" if gnorm <= tol else "max_iter"
    return _Ascent(x, value, gnorm, it, status)


def _starts(n_free: int, space: MissionSpace, opts: SolverOptions, seeds: Sequence[np.ndarray]) -> list[np.ndarray]:
    rng = np.random.default_rng(opts.seed)
    starts = list(seeds)
    starts.append(spread_start(n_free, space.width, space.height))
    for _ in range(opts.multistart):
        starts.append(rng.uniform((0.0, 0.0), (space.width, space.height), size=(n_free, 2)))
    return starts


def _solve(kind, n, fld, model, opts, station=None) -> Formation:
    if n < 1:
        raise ConfigurationError(f"need at least one agent, got {n}")
    space = _space_of(fld)
    tol = opts.tolerance(fld, model)
    pinned = kind == OCH
    if pinned and not space.contains([station]):
        raise ConfigurationError(f"station {tuple(station)} lies outside the mission space")
    n_free = n - 1 if pinned else n

    seeds = []
    for init in opts.initial:
        pts = np.asarray(init, dtype=float).reshape(-1, 2)
        if pinned and len(pts) == n:
            # drop whichever seed point sits closest to the station
            pts = np.delete(pts, int(np.argmin(np.linalg.norm(pts - station, axis=1))), axis=0)
        if len(pts) != n_free:
            raise ConfigurationError(f"initial {kind} formation has {len(pts)} points, expected {n_free}")
        seeds.append(pts)

    best = None
    for idx, start in enumerate(_starts(n_free, space, opts, seeds)):
        if pinned:
            full = np.vstack([np.asarray(station, dtype=float).reshape(1, 2), start])
            res = _ascend(full, fld, model, space, opts, fixed=(0,), tol=tol)
        else:
            res = _ascend(start, fld, model, space, opts, fixed=(), tol=tol)
        log.debug("%s start %d: H=%.6g |g|=%.3g iters=%d %s", kind, idx, res.value, res.grad_norm, res.iterations, res.status)
        if best is None or res.value > best.value * (1.0 + opts.tie_rtol):
            best = res

    order = canonical_order(best.positions)
    positions = best.positions[order]
    pinned_index = None
    if pinned:
        pinned_index = int(np.flatnonzero(order == 0)[0])
        positions[pinned_index] = station
    if best.status != "converged":
        log.warning("%s solver did not converge (|g|=%.3g > %.3g)", kind, best.grad_norm, tol)
    return Formation(
        kind=kind,
        positions=positions,
        achieved_h=coverage(positions, fld, model),
        pinned_index=pinned_index,
        status=best.status,
        grad_norm=best.grad_norm,
        iterations=best.iterations,
    )


def solve_ocv(n: int, fld: RewardField, model: SensingModel, opts: Optional[SolverOptions] = None) -> Formation:
    return _solve(OCV, n, fld, model, opts or SolverOptions())


def solve_och(n: int, fld: RewardField, model: SensingModel, station=(0.0, 0.0),
              opts: Optional[SolverOptions] = None) -> Formation:
    """Coverage-optimal formation with one agent held at ``station``."""
    return _solve(OCH, n, fld, model, opts or SolverOptions(), station=np.asarray(station, dtype=float))
