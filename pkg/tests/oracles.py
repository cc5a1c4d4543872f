"""Independent reference implementations used only to check the package.

Each oracle deliberately takes a different algorithmic route than the code
under test: flood fill instead of union-find, per-cell segment clipping
instead of grid traversal, factorial enumeration instead of the Hungarian
solver.
"""

import itertools
import math

import numpy as np


def flood_fill_partition(binary, connectivity=8):
    """Partition of the foreground into components via BFS flood fill.

    Returns a set of frozensets of (i, j) pixels, which is label-free and
    therefore comparable across implementations up to relabeling.
    """
    fg = np.asarray(binary) != 0
    h, w = fg.shape
    if connectivity == 8:
        neigh = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        neigh = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    seen = np.zeros_like(fg, dtype=bool)
    parts = set()
    for si in range(h):
        for sj in range(w):
            if not fg[si, sj] or seen[si, sj]:
                continue
            comp = []
            stack = [(si, sj)]
            seen[si, sj] = True
            while stack:
                i, j = stack.pop()
                comp.append((i, j))
                for di, dj in neigh:
                    ni, nj = i + di, j + dj
                    if 0 <= ni < h and 0 <= nj < w and fg[ni, nj] and not seen[ni, nj]:
                        seen[ni, nj] = True
                        stack.append((ni, nj))
            parts.add(frozenset(comp))
    return parts


def labeling_partition(labels):
    """The same set-of-pixel-sets view for a label grid."""
    labels = np.asarray(labels)
    parts = set()
    for lab in np.unique(labels):
        if lab == 0:
            continue
        ii, jj = np.nonzero(labels == lab)
        parts.add(frozenset(zip(ii.tolist(), jj.tolist())))
    return parts


def clip_building_length(a, b, cells):
    """Meters of a->b inside building cells by Liang-Barsky clipping per cell."""
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg_len = math.hypot(dx, dy)
    total = 0.0
    cells = np.asarray(cells)
    for i, j in zip(*np.nonzero(cells)):
        t0, t1 = 0.0, 1.0
        ok = True
        for p, q0, q1 in ((dx, j - ax, j + 1 - ax), (dy, i - ay, i + 1 - ay)):
            if p == 0:
                if q0 > 0 or q1 < 0:
                    ok = False
                    break
            else:
                ta, tb = q0 / p, q1 / p
                if ta > tb:
                    ta, tb = tb, ta
                t0, t1 = max(t0, ta), min(t1, tb)
                if t0 >= t1:
                    ok = False
                    break
        if ok and t1 > t0:
            total += (t1 - t0) * seg_len
    return total


def brute_force_assignment_cost(pred, true, cutoff=math.inf):
    """Minimum sum of min(cutoff, d)^2 over all size-min(|P|,|T|) matchings."""
    n_pred, n_true = len(pred), len(true)
    m = min(n_pred, n_true)
    if m == 0:
        return 0.0
    best = math.inf
    idx_small, idx_large, small_is_pred = (
        (range(n_pred), range(n_true), True) if n_pred <= n_true
        else (range(n_true), range(n_pred), False))
    for perm in itertools.permutations(idx_large, m):
        cost = 0.0
        for a, b in zip(idx_small, perm):
            i, j = (a, b) if small_is_pred else (b, a)
            d = math.hypot(pred[i][0] - true[j][0], pred[i][1] - true[j][1])
            cost += min(cutoff, d) ** 2
        best = min(best, cost)
    return best


def brute_force_ospa(pred, true, g):
    """OSPA from the factorial enumeration of matchings."""
    n_pred, n_true = len(pred), len(true)
    if n_pred == 0 and n_true == 0:
        return 0.0
    if n_pred == 0 or n_true == 0:
        return float(g)
    n, m = max(n_pred, n_true), min(n_pred, n_true)
    matched = brute_force_assignment_cost(pred, true, cutoff=g)
    return math.sqrt((matched + g * g * (n - m)) / n)
