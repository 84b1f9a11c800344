"""Independent reference implementations used as test oracles."""

import itertools
import math

import numpy as np

from hpfts.demog_data import AgeGrid
from hpfts.hp_engine import ProjectionResult


def oadr_by_shares(pop, months, lower_age=15):
    """Per-bin share below the threshold, summed with explicit loops."""
    num = den = 0.0
    for x, n in enumerate(pop):
        below = min(max((months - 12 * x) / 12.0, 0.0), 1.0)
        num += n * (1.0 - below)
        if x >= lower_age:
            den += n * below
    return 100.0 * num / den


def dfs_scheme(table, start, target):
    """Lexicographically first feasible non-decreasing scheme.

    ``table[h][a - start]`` is the OADR in horizon step h at age a months.
    Returns None when no scheme exists.
    """
    H, G = len(table), len(table[0])

    def go(h, lo):
        if h == H:
            return []
        for i in range(lo, G):
            if table[h][i] <= target:
                rest = go(h + 1, i)
                if rest is not None:
                    return [start + i] + rest
        return None

    return go(0, 0)


def exhaustive_schemes(table, start, target):
    """Every feasible non-decreasing scheme, by full enumeration."""
    H, G = len(table), len(table[0])
    out = []
    for combo in itertools.combinations_with_replacement(range(G), H):
        if all(table[h][i] <= target for h, i in enumerate(combo)):
            out.append([start + i for i in combo])
    return out


def toy_projection(pops, paths=None, year0=2001):
    """ProjectionResult holding ``pops`` (H, p) as the female point, males zero."""
    pops = np.asarray(pops, dtype=float)
    H, p = pops.shape
    if paths is not None:
        paths = np.asarray(paths, dtype=float)
        paths = np.stack([paths, np.zeros_like(paths)], axis=1)
    return ProjectionResult(
        "TOY", np.arange(year0, year0 + H), pops, np.zeros_like(pops), AgeGrid(p - 1),
        pops[0], np.zeros(p), paths,
    )


def constant_m_e0(m, max_age=100):
    """Closed-form e_0 for a flat hazard under the mid-year-death table."""
    v = math.exp(-m)
    closed = 0.5 * (1.0 + v) * (1.0 - v**max_age) / (1.0 - v)
    return closed + v**max_age / m


def summed_e0(m):
    """e_0 by direct summation of survivors for any rate curve."""
    l, total = 1.0, 0.0
    for x, mx in enumerate(m):
        if x == len(m) - 1:
            total += l / mx
        else:
            q = 1.0 - math.exp(-mx)
            total += l * (1.0 - 0.5 * q)
            l *= 1.0 - q
    return total
