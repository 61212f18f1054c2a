"""Minimum-length alternating tours on the complete bipartite graph OCV x OCH.

Tour positions are 0-based here: even positions hold OCV nodes, odd positions
hold OCH nodes, and the last position (``2N - 1``) is always the charging
station.  ``legs[k]`` is the distance from position ``k`` to ``k + 1`` (wrapping),
so even ``k`` are coverage->charging legs and odd ``k`` are charging->coverage
legs; ``legs[-1]`` leaves the station.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError
from .formation import Formation

EXACT_MAX_N = 9


@dataclass
class BipartiteTourGraph:
    ocv: np.ndarray          # (N, 2)
    och: np.ndarray          # (N, 2)
    station_index: int       # index into och
    weights: np.ndarray      # (N, N): weights[i, j] = |ocv[i] - och[j]|

    @property
    def n(self) -> int:
        return len(self.ocv)

    def edges(self):
        for i in range(self.n):
            for j in range(self.n):
                yield i, j, float(self.weights[i, j])


@dataclass
class AlternatingTour:
    ocv_order: list[int]     # OCV indices at positions 0, 2, 4, ...
    och_order: list[int]     # OCH indices at positions 1, 3, ...; last entry is the station
    points: np.ndarray       # (2N, 2) coordinates in visiting order
    legs: np.ndarray         # (2N,) leg lengths, legs[k] = |points[k+1] - points[k]|

    @property
    def n(self) -> int:
        return len(self.ocv_order)

    @property
    def length(self) -> float:
        return float(self.legs.sum())

    @property
    def to_charge_legs(self) -> np.ndarray:
        return self.legs[0::2]

    @property
    def to_cover_legs(self) -> np.ndarray:
        return self.legs[1::2]

    def nodes(self) -> list[tuple[str, int]]:
        out = []
        for a, b in zip(self.ocv_order, self.och_order):
            out += [("OCV", a), ("OCH", b)]
        return out

    def to_dict(self) -> dict:
        return {
            "ocv_order": list(map(int, self.ocv_order)),
            "och_order": list(map(int, self.och_order)),
            "points": [[float(x), float(y)] for x, y in self.points],
            "legs": [float(d) for d in self.legs],
            "length": self.length,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AlternatingTour":
        try:
            points = np.array(data["points"], dtype=float).reshape(-1, 2)
            tour = cls(list(data["ocv_order"]), list(data["och_order"]), points, _legs_of(points))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed tour record: {exc}") from None
        validate_tour(tour)
        return tour


def _legs_of(points: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)


def build_graph(ocv: Formation, och: Formation, station=None) -> BipartiteTourGraph:
    if ocv.n != och.n:
        raise ConfigurationError(f"formation sizes differ: {ocv.n} OCV vs {och.n} OCH")
    if ocv.n == 0:
        raise ConfigurationError("formations are empty")
    if och.pinned_index is not None:
        station_index = och.pinned_index
    elif station is not None:
        station_index = int(np.argmin(np.linalg.norm(och.positions - np.asarray(station), axis=1)))
    else:
        raise ConfigurationError("OCH formation carries no station pin")
    if station is not None and not np.allclose(och.positions[station_index], station):
        raise ConfigurationError("OCH formation does not contain the charging station")
    w = np.linalg.norm(ocv.positions[:, None, :] - och.positions[None, :, :], axis=2)
    return BipartiteTourGraph(ocv.positions.copy(), och.positions.copy(), station_index, w)


def _make_tour(graph: BipartiteTourGraph, ocv_order, och_order) -> AlternatingTour:
    ocv_order, och_order = list(ocv_order), list(och_order)
    pts = np.empty((2 * graph.n, 2))
    pts[0::2] = graph.ocv[ocv_order]
    pts[1::2] = graph.och[och_order]
    return AlternatingTour(ocv_order, och_order, pts, _legs_of(pts))


def canonicalize(graph: BipartiteTourGraph, ocv_order, och_order) -> AlternatingTour:
    """Rotate so the station is last and pick the traversal direction.

    ``ocv_order``/``och_order`` describe any alternating cycle a0 b0 a1 b1 ... .
    Reversing a cycle swaps its coverage->charging and charging->coverage leg
    sets, so the direction is chosen to make the longest to-charge leg the
    shorter of the two maxima: the agent flying to the station is the one
    nearest to empty.  Exact ties fall back to the smaller first OCV index.
    """
    ocv_order, och_order = list(ocv_order), list(och_order)
    n = len(ocv_order)
    k = och_order.index(graph.station_index)
    ocv_order = ocv_order[k + 1:] + ocv_order[:k + 1]
    och_order = och_order[k + 1:] + och_order[:k + 1]
    fwd = _make_tour(graph, ocv_order, och_order)
    if n == 1:
        return fwd
    # reversed cycle: station, a_{n-1}, b_{n-2}, ..., b_0, a_0
    rev = _make_tour(graph, ocv_order[::-1], och_order[-2::-1] + [och_order[-1]])
    chg_f, chg_r = float(fwd.to_charge_legs.max()), float(rev.to_charge_legs.max())
    if chg_f != chg_r:
        return fwd if chg_f < chg_r else rev
    return fwd if ocv_order[0] < ocv_order[-1] else rev


def validate_tour(tour: AlternatingTour, graph: Optional[BipartiteTourGraph] = None) -> None:
    n = tour.n
    if len(tour.och_order) != n or tour.points.shape != (2 * n, 2) or len(tour.legs) != 2 * n:
        raise ConfigurationError("tour arrays have inconsistent sizes")
    if sorted(tour.ocv_order) != list(range(n)) or sorted(tour.och_order) != list(range(n)):
        raise ConfigurationError("tour does not visit every node exactly once")
    if graph is not None:
        if tour.och_order[-1] != graph.station_index:
            raise ConfigurationError("tour does not end at the charging station")
        if not (np.allclose(tour.points[0::2], graph.ocv[tour.ocv_order])
                and np.allclose(tour.points[1::2], graph.och[tour.och_order])):
            raise ConfigurationError("tour coordinates disagree with the graph")
    if not np.isclose(tour.length, float(_legs_of(tour.points).sum())):
        raise ConfigurationError("tour length differs from the sum of its legs")


def cycle_length(graph: BipartiteTourGraph, ocv_order, och_order) -> float:
    w = graph.weights
    n = len(ocv_order)
    return float(sum(w[ocv_order[i], och_order[i]] + w[ocv_order[(i + 1) % n], och_order[i]] for i in range(n)))


def enumerate_tours(graph: BipartiteTourGraph):
    """Yield ``(length, ocv_order, och_order)`` for every alternating cycle ending at the station.

    Each undirected cycle appears twice (both orientations); N!(N-1)! items.
    """
    n = graph.n
    others = [j for j in range(n) if j != graph.station_index]
    for a in itertools.permutations(range(n)):
        for b in itertools.permutations(others):
            och = list(b) + [graph.station_index]
            yield cycle_length(graph, a, och), list(a), och


def _exact(graph: BipartiteTourGraph) -> tuple[list[int], list[int]]:
    """Held-Karp over alternating paths from the station.

    State ``(ocv_mask, och_mask, last_ocv)``: a path station -> a0 -> b0 -> ... -> a_k
    using the OCV nodes in ``ocv_mask`` and non-station OCH nodes in ``och_mask``.
    """
    n, w, s = graph.n, graph.weights, graph.station_index
    others = [j for j in range(n) if j != s]
    layer = {}
    for a in range(n):
        layer[(1 << a, 0, a)] = (w[a, s], None)
    history = [layer]
    for _ in range(n - 1):
        nxt = {}
        for (amask, bmask, last), (cost, _) in layer.items():
            for b in others:
                if bmask >> b & 1:
                    continue
                via = cost + w[last, b]
                for a in range(n):
                    if amask >> a & 1:
                        continue
                    key = (amask | 1 << a, bmask | 1 << b, a)
                    c = via + w[a, b]
                    prev = nxt.get(key)
                    # strict improvement keeps the first-found (lowest-index) path on ties
                    if prev is None or c < prev[0]:
                        nxt[key] = (c, (amask, bmask, last, b))
        layer = nxt
        history.append(layer)

    best_key, best_cost = None, np.inf
    for key, (cost, _) in layer.items():
        total = cost + w[key[2], s]
        if total < best_cost:
            best_key, best_cost = key, total

    ocv_rev, och_rev = [], []
    key = best_key
    for depth in range(n - 1, -1, -1):
        _, back = history[depth][key]
        ocv_rev.append(key[2])
        if back is None:
            break
        amask, bmask, last, b = back
        och_rev.append(b)
        key = (amask, bmask, last)
    ocv_order = ocv_rev[::-1]
    och_order = och_rev[::-1] + [s]
    return ocv_order, och_order


def _nearest_neighbor(graph: BipartiteTourGraph) -> tuple[list[int], list[int]]:
    n, w, s = graph.n, graph.weights, graph.station_index
    free_a = set(range(n))
    free_b = set(range(n)) - {s}
    ocv_order, och_order = [], []
    cur_b = s
    while free_a:
        a = min(free_a, key=lambda i: (w[i, cur_b], i))
        free_a.remove(a)
        ocv_order.append(a)
        if free_b:
            cur_b = min(free_b, key=lambda j: (w[a, j], j))
            free_b.remove(cur_b)
            och_order.append(cur_b)
    och_order.append(s)
    return ocv_order, och_order


def _two_opt(graph: BipartiteTourGraph, ocv_order, och_order) -> tuple[list[int], list[int]]:
    """Local search keeping alternation: same-parity segment reversals and same-part swaps.

    The station occupies the last slot and never moves.
    """
    seq = []
    for a, b in zip(ocv_order, och_order):
        seq += [("a", a), ("b", b)]
    m = len(seq)

    def dist(u, v):
        if u[0] == "a":
            return graph.weights[u[1], v[1]]
        return graph.weights[v[1], u[1]]

    def around(k):
        return dist(seq[k - 1], seq[k]) + dist(seq[k], seq[(k + 1) % m])

    improved = True
    while improved:
        improved = False
        for i in range(0, m - 1):
            for j in range(i + 2, m - 1, 2):
                before = dist(seq[i - 1], seq[i]) + dist(seq[j], seq[j + 1])
                after = dist(seq[i - 1], seq[j]) + dist(seq[i], seq[j + 1])
                if after < before - 1e-9:
                    seq[i:j + 1] = seq[i:j + 1][::-1]
                    improved = True
        for i in range(0, m - 1):
            for j in range(i + 2, m - 1, 2):
                before = around(i) + around(j)
                seq[i], seq[j] = seq[j], seq[i]
                after = around(i) + around(j)
                if after < before - 1e-9:
                    improved = True
                else:
                    seq[i], seq[j] = seq[j], seq[i]
    return [v for k, v in seq if k == "a"], [v for k, v in seq if k == "b"]


def nearest_neighbor_tour(graph: BipartiteTourGraph) -> AlternatingTour:
    return canonicalize(graph, *_nearest_neighbor(graph))


def solve_alternating_tour(graph: BipartiteTourGraph, mode: str = "exact") -> AlternatingTour:
    if mode == "exact":
        if graph.n > EXACT_MAX_N:
            raise ConfigurationError(f"exact tour search supports N <= {EXACT_MAX_N}, got {graph.n}")
        tour = canonicalize(graph, *_exact(graph))
    elif mode == "heuristic":
        tour = canonicalize(graph, *_two_opt(graph, *_nearest_neighbor(graph)))
    else:
        raise ConfigurationError(f"unknown tour mode {mode!r}")
    validate_tour(tour, graph)
    return tour
