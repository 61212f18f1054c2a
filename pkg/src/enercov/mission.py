"""Mission space, reward field and sensing model.

Coverage is the integral of reward times joint detection probability over the
rectangular mission space, approximated by the midpoint rule on the reward
grid.  Cell centers sit at ``((i + 0.5) * cell, (j + 0.5) * cell)``; row ``j``
of the value array is the strip at height ``(j + 0.5) * cell``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, UnsupportedModelError

_EXTENT_RTOL = 1e-9


@dataclass(frozen=True)
class MissionSpace:
    width: float
    height: float
    station: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigurationError(f"mission space must have positive extent, got {self.width}x{self.height}")
        sx, sy = self.station
        if not (0.0 <= sx <= self.width and 0.0 <= sy <= self.height):
            raise ConfigurationError(f"station {self.station} lies outside the mission space")
        object.__setattr__(self, "station", (float(sx), float(sy)))

    def contains(self, points, tol: float = 1e-9) -> bool:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            return True
        return bool(
            np.all(pts[:, 0] >= -tol) and np.all(pts[:, 0] <= self.width + tol)
            and np.all(pts[:, 1] >= -tol) and np.all(pts[:, 1] <= self.height + tol)
        )

    def clip(self, points) -> np.ndarray:
        pts = np.array(points, dtype=float, ndmin=2)
        pts[:, 0] = np.clip(pts[:, 0], 0.0, self.width)
        pts[:, 1] = np.clip(pts[:, 1], 0.0, self.height)
        return pts


@dataclass(frozen=True, eq=False)
class RewardField:
    """Nonnegative reward sampled at cell centers.

    ``sigma`` is set when the field is uniform; it is informational (used for
    scale-aware solver tolerances) and always agrees with ``values``.
    """

    values: np.ndarray
    cell: float
    sigma: Optional[float] = None
    xs: np.ndarray = field(init=False, repr=False)
    ys: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.size == 0:
            raise ConfigurationError("reward grid must be a non-empty 2D array")
        if not self.cell > 0:
            raise ConfigurationError(f"cell size must be positive, got {self.cell}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ConfigurationError("reward values must be finite and nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        ny, nx = vals.shape
        object.__setattr__(self, "xs", (np.arange(nx) + 0.5) * self.cell)
        object.__setattr__(self, "ys", (np.arange(ny) + 0.5) * self.cell)

    @classmethod
    def uniform(cls, space: MissionSpace, sigma: float = 1.0, cell: float = 2.0) -> "RewardField":
        if sigma < 0:
            raise ConfigurationError("uniform reward must be nonnegative")
        nx = int(round(space.width / cell))
        ny = int(round(space.height / cell))
        if nx < 1 or ny < 1 or not np.isclose(nx * cell, space.width) or not np.isclose(ny * cell, space.height):
            raise ConfigurationError(f"cell size {cell} does not tile a {space.width}x{space.height} space")
        return cls(np.full((ny, nx), float(sigma)), float(cell), sigma=float(sigma))

    @classmethod
    def from_file(cls, path) -> "RewardField":
        """Load ``width height cell`` followed by row-major values (``#`` comments allowed)."""
        tokens = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.replace(",", " ").split())
        if len(tokens) < 3:
            raise ConfigurationError(f"{path}: missing 'width height cell' header")
        try:
            width, height, cell = (float(t) for t in tokens[:3])
            data = np.array([float(t) for t in tokens[3:]])
        except ValueError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        nx = int(round(width / cell))
        ny = int(round(height / cell))
        if data.size != nx * ny:
            raise ConfigurationError(f"{path}: expected {ny}x{nx}={nx * ny} values, found {data.size}")
        vals = data.reshape(ny, nx)
        sigma = float(vals.flat[0]) if np.all(vals == vals.flat[0]) else None
        return cls(vals, cell, sigma=sigma)

    def to_file(self, path) -> None:
        ny, nx = self.values.shape
        with open(path, "w") as fh:
            fh.write(f"{nx * self.cell!r} {ny * self.cell!r} {self.cell!r}\n")
            for row in self.values:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")

    @property
    def width(self) -> float:
        return self.values.shape[1] * self.cell

    @property
    def height(self) -> float:
        return self.values.shape[0] * self.cell

    @property
    def cell_area(self) -> float:
        return self.cell * self.cell

    def total(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def check_space(self, space: MissionSpace) -> None:
        if not (np.isclose(self.width, space.width, rtol=_EXTENT_RTOL)
                and np.isclose(self.height, space.height, rtol=_EXTENT_RTOL)):
            raise ConfigurationError(
                f"reward grid covers {self.width}x{self.height} but the mission space is "
                f"{space.width}x{space.height}"
            )

    def refined(self) -> "RewardField":
        """Same field at half the cell size (each cell split into four)."""
        vals = np.repeat(np.repeat(self.values, 2, axis=0), 2, axis=1)
        return RewardField(vals, self.cell / 2.0, sigma=self.sigma)


def quadratic_law(dist: np.ndarray, delta: float) -> np.ndarray:
    return np.where(dist < delta, 1.0 - (dist * dist) / (delta * delta), 0.0)


@dataclass(frozen=True)
class SensingModel:
    """Isotropic sensor of range ``delta``.

    ``law(dist, delta)`` maps distances to detection probabilities; the default
    ``1 - d^2/delta^2`` is the only law with an analytic gradient.
    """

    delta: float
    law: Optional[Callable[[np.ndarray, float], np.ndarray]] = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigurationError(f"sensing range must be positive, got {self.delta}")

    @property
    def differentiable(self) -> bool:
        return self.law is None

    def probability(self, dist) -> np.ndarray:
        dist = np.asarray(dist, dtype=float)
        if self.law is None:
            return quadratic_law(dist, self.delta)
        p = np.asarray(self.law(dist, self.delta), dtype=float)
        return np.where(dist < self.delta, np.clip(p, 0.0, 1.0), 0.0)


def _as_positions(positions) -> np.ndarray:
    pts = np.asarray(positions, dtype=float)
    if pts.size == 0:
        return np.zeros((0, 2))
    return pts.reshape(-1, 2)


def sensing_probability(point, agent, model: SensingModel) -> float:
    d = np.hypot(point[0] - agent[0], point[1] - agent[1])
    return float(model.probability(d))


def joint_detection(point, positions, model: SensingModel) -> float:
    pts = _as_positions(positions)
    d = np.hypot(pts[:, 0] - point[0], pts[:, 1] - point[1])
    return float(1.0 - np.prod(1.0 - model.probability(d)))


def _miss_grids(pts: np.ndarray, fld: RewardField, model: SensingModel) -> list[np.ndarray]:
    """Per-agent ``1 - p_i`` sampled at every cell center."""
    grids = []
    for x, y in pts:
        dx2 = (fld.xs - x) ** 2
        dy2 = (fld.ys - y) ** 2
        dist2 = dy2[:, None] + dx2[None, :]
        if model.law is None:
            p = np.where(dist2 < model.delta ** 2, 1.0 - dist2 / model.delta ** 2, 0.0)
        else:
            p = model.probability(np.sqrt(dist2))
        grids.append(1.0 - p)
    return grids


def detection_grid(positions, fld: RewardField, model: SensingModel) -> np.ndarray:
    pts = _as_positions(positions)
    miss = np.ones_like(fld.values)
    for m in _miss_grids(pts, fld, model):
        miss *= m
    return 1.0 - miss


def coverage(positions, fld: RewardField, model: SensingModel, space: Optional[MissionSpace] = None) -> float:
    """Midpoint-rule approximation of the coverage functional H."""
    if space is not None:
        fld.check_space(space)
    pts = _as_positions(positions)
    if len(pts) == 0:
        return 0.0
    return float(np.sum(fld.values * detection_grid(pts, fld, model)) * fld.cell_area)


def coverage_gradient(
    positions,
    fld: RewardField,
    model: SensingModel,
    project: bool = True,
    fixed: Sequence[int] = (),
) -> np.ndarray:
    """Gradient of :func:`coverage` w.r.t. agent positions, shape ``(N, 2)``.

    With ``project`` set, components that would push an agent sitting on the
    boundary out of the space are zeroed.  Rows listed in ``fixed`` are zero.
    """
    return coverage_and_gradient(positions, fld, model, project=project, fixed=fixed)[1]


def coverage_and_gradient(positions, fld: RewardField, model: SensingModel, project: bool = True, fixed=()):
    """``(coverage, gradient)`` sharing one pass over the grid."""
    if not model.differentiable:
        raise UnsupportedModelError("coverage_gradient needs the default quadratic sensing law")
    pts = _as_positions(positions)
    n = len(pts)
    grad = np.zeros((n, 2))
    if n == 0:
        return 0.0, grad
    miss = _miss_grids(pts, fld, model)
    # leave-one-out products via prefix/suffix sweeps (no division by zero at p = 1)
    prefix = [np.ones_like(fld.values)]
    for m in miss[:-1]:
        prefix.append(prefix[-1] * m)
    suffix = np.ones_like(fld.values)
    scale = 2.0 / model.delta ** 2 * fld.cell_area
    for i in range(n - 1, -1, -1):
        others = prefix[i] * suffix
        suffix = suffix * miss[i]
        x, y = pts[i]
        inside = miss[i] < 1.0
        weight = np.where(inside, fld.values * others, 0.0)
        # dp/dx_i = 2 (x - x_i) / delta^2 inside the disk
        wx = weight.sum(axis=0)
        wy = weight.sum(axis=1)
        grad[i, 0] = scale * np.dot(wx, fld.xs - x)
        grad[i, 1] = scale * np.dot(wy, fld.ys - y)
    value = float(np.sum(fld.values * (1.0 - suffix)) * fld.cell_area)
    if project:
        w, h = fld.width, fld.height
        grad[(pts[:, 0] <= 0.0) & (grad[:, 0] < 0), 0] = 0.0
        grad[(pts[:, 0] >= w) & (grad[:, 0] > 0), 0] = 0.0
        grad[(pts[:, 1] <= 0.0) & (grad[:, 1] < 0), 1] = 0.0
        grad[(pts[:, 1] >= h) & (grad[:, 1] > 0), 1] = 0.0
    for i in fixed:
        grad[i] = 0.0
    return value, grad
