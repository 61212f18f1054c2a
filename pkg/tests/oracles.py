"""Independent reference computations used to freeze derived test values.

Nothing here imports the package under test except plain data containers.
"""

import itertools
import math

import numpy as np


def disk_integral(delta):
    # integral of (1 - r^2/delta^2) over the disk of radius delta
    return math.pi * delta ** 2 / 2.0


def coverage_loop(points, width, height, cell, delta, sigma=1.0):
    """Midpoint-rule coverage written as a plain per-cell product."""
    xs = np.arange(cell / 2, width, cell)
    ys = np.arange(cell / 2, height, cell)
    X, Y = np.meshgrid(xs, ys)
    miss = np.ones_like(X)
    for px, py in points:
        d2 = (X - px) ** 2 + (Y - py) ** 2
        p = np.where(d2 < delta ** 2, 1.0 - d2 / delta ** 2, 0.0)
        miss = miss * (1.0 - p)
    return float(sigma * (1.0 - miss).sum() * cell * cell)


def alternating_cycles(ocv, och):
    """Length of every Hamiltonian cycle of the complete bipartite graph.

    Built from raw permutations of both parts, without fixing the station.
    """
    n = len(ocv)
    w = [[math.dist(ocv[i], och[j]) for j in range(n)] for i in range(n)]
    out = []
    for rest in itertools.permutations(range(1, n)):
        a = (0,) + rest  # rotation symmetry: cycles start at OCV node 0
        for b in itertools.permutations(range(n)):
            out.append(sum(w[a[i]][b[i]] + w[a[(i + 1) % n]][b[i]] for i in range(n)))
    return out


def min_alternating_cycle(ocv, och):
    return min(alternating_cycles(ocv, och))


def closed_form_times(D, n, alpha, beta, c, tau_to_cov, tau_to_chg):
    tau_t = tau_to_cov + tau_to_chg
    tau_c_min = (alpha * D + n * beta * tau_t) / (c - n * beta)
    tau_c_star = 1.0 / (c - beta)
    tau_d_reserve = (1.0 - alpha * D) / (n * beta) - tau_c_star - tau_t
    tau_d_tight = ((c - n * beta) * tau_c_star - alpha * D) / (n * beta) - tau_t
    return tau_c_min, tau_c_star, tau_d_reserve, tau_d_tight
