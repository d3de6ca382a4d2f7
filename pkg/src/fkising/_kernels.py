"""Numba kernels for exhaustive enumeration of bond configurations.

All kernels walk a contiguous range of configuration indices; bit ``j`` of the
index is the state of bond ``j``.  They accumulate integer counts keyed by the
number of open bonds and loops (or clusters), so weights for any ``p`` can be
applied afterwards without re-enumerating.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def _union(parent, i, j):
    ri = _find(parent, i)
    rj = _find(parent, j)
    if ri != rj:
        if ri < rj:
            parent[rj] = ri
        else:
            parent[ri] = rj
        return True
    return False


@njit(cache=True)
def _popcount(v):
    c = 0
    while v:
        v &= v - 1
        c += 1
    return c


@njit(cache=True)
def dobrushin_counts(start, stop, n_bonds, next_open, next_closed, head_bond, direction,
                     ea, eb, bond_u, bond_v, n_sites, wired, l_max):
    """Exploration-path statistics for configurations ``start..stop-1``.

    Returns ``hist[o, L]``, ``phase[o, L, e, w]`` (count of configurations whose
    path visits edge ``e`` with winding ``w`` quarter-turns mod 8 to ``e_b``),
    ``conn[o, L, s]`` (site ``s`` connected to the wired arc), and the range of
    ``L - 2k - o`` seen over the configurations.
    """
    n_edges = next_open.shape[0]
    hist = np.zeros((n_bonds + 1, l_max + 1), dtype=np.int64)
    phase = np.zeros((n_bonds + 1, l_max + 1, n_edges, 8), dtype=np.int64)
    conn = np.zeros((n_bonds + 1, l_max + 1, n_sites), dtype=np.int64)
    visited = np.zeros(n_edges, dtype=np.int64)
    path = np.empty(n_edges, dtype=np.int64)
    turns = np.empty(n_edges, dtype=np.int64)
    parent = np.empty(n_sites, dtype=np.int64)
    kd_min = 1 << 30
    kd_max = -(1 << 30)
    stamp = 0
    for cfg in range(start, stop):
        stamp += 1
        o = _popcount(cfg)
        # exploration path from e_a
        e = ea
        n = 0
        c = 0
        while True:
            visited[e] = stamp
            path[n] = e
            turns[n] = c
            n += 1
            if e == eb:
                break
            b = head_bond[e]
            if b >= 0 and (cfg >> b) & 1:
                nxt = next_open[e]
            else:
                nxt = next_closed[e]
            d = (direction[nxt] - direction[e]) % 4
            c += 1 if d == 1 else -1
            e = nxt
        # loops
        n_loops = 0
        for e0 in range(n_edges):
            if visited[e0] == stamp:
                continue
            n_loops += 1
            e = e0
            while visited[e] != stamp:
                visited[e] = stamp
                b = head_bond[e]
                if b >= 0 and (cfg >> b) & 1:
                    e = next_open[e]
                else:
                    e = next_closed[e]
        hist[o, n_loops] += 1
        for j in range(n):
            w = (c - turns[j]) % 8
            phase[o, n_loops, path[j], w] += 1
        # clusters with the wired arc merged
        for s in range(n_sites):
            parent[s] = s
        for s in range(1, wired.shape[0]):
            _union(parent, wired[0], wired[s])
        k = n_sites - (wired.shape[0] - 1)
        for b in range(n_bonds):
            if (cfg >> b) & 1:
                if _union(parent, bond_u[b], bond_v[b]):
                    k -= 1
        root = _find(parent, wired[0])
        for s in range(n_sites):
            if _find(parent, s) == root:
                conn[o, n_loops, s] += 1
        kd = n_loops - 2 * k - o
        if kd < kd_min:
            kd_min = kd
        if kd > kd_max:
            kd_max = kd
    return hist, phase, conn, kd_min, kd_max


@njit(cache=True)
def bulk_counts(start, stop, n_bonds, next_open, next_closed, head_bond, direction,
                e0, bond_u, bond_v, n_sites, origin, l_max):
    """Statistics of the loop through ``e0`` on a free-boundary box.

    ``phase[o, L, e, w]`` counts configurations whose loop through ``e0`` visits
    ``e`` with winding ``w`` (mod 8, quarter-turns) measured from ``e`` forward
    to ``e0``.  ``conn[o, L, s]`` counts ``origin <-> s``.
    """
    n_edges = next_open.shape[0]
    hist = np.zeros((n_bonds + 1, l_max + 1), dtype=np.int64)
    phase = np.zeros((n_bonds + 1, l_max + 1, n_edges, 8), dtype=np.int64)
    conn = np.zeros((n_bonds + 1, l_max + 1, n_sites), dtype=np.int64)
    visited = np.zeros(n_edges, dtype=np.int64)
    path = np.empty(n_edges, dtype=np.int64)
    turns = np.empty(n_edges, dtype=np.int64)
    parent = np.empty(n_sites, dtype=np.int64)
    kd_min = 1 << 30
    kd_max = -(1 << 30)
    stamp = 0
    for cfg in range(start, stop):
        stamp += 1
        o = _popcount(cfg)
        e = e0
        n = 0
        c = 0
        while True:
            visited[e] = stamp
            path[n] = e
            turns[n] = c
            n += 1
            b = head_bond[e]
            if b >= 0 and (cfg >> b) & 1:
                nxt = next_open[e]
            else:
                nxt = next_closed[e]
            d = (direction[nxt] - direction[e]) % 4
            c += 1 if d == 1 else -1
            if nxt == e0:
                break
            e = nxt
        n_loops = 1
        for s0 in range(n_edges):
            if visited[s0] == stamp:
                continue
            n_loops += 1
            e = s0
            while visited[e] != stamp:
                visited[e] = stamp
                b = head_bond[e]
                if b >= 0 and (cfg >> b) & 1:
                    e = next_open[e]
                else:
                    e = next_closed[e]
        hist[o, n_loops] += 1
        for j in range(1, n):
            w = (c - turns[j]) % 8
            phase[o, n_loops, path[j], w] += 1
        for s in range(n_sites):
            parent[s] = s
        k = n_sites
        for b in range(n_bonds):
            if (cfg >> b) & 1:
                if _union(parent, bond_u[b], bond_v[b]):
                    k -= 1
        root = _find(parent, origin)
        for s in range(n_sites):
            if _find(parent, s) == root:
                conn[o, n_loops, s] += 1
        kd = n_loops - 2 * k - o
        if kd < kd_min:
            kd_min = kd
        if kd > kd_max:
            kd_max = kd
    return hist, phase, conn, kd_min, kd_max


@njit(cache=True)
def cluster_counts(start, stop, n_bonds, bond_u, bond_v, n_sites, premerge, in_a, in_b):
    """Counts keyed by (open bonds, clusters): all configs, A<->B events, open bonds."""
    hist = np.zeros((n_bonds + 1, n_sites + 1), dtype=np.int64)
    event = np.zeros((n_bonds + 1, n_sites + 1), dtype=np.int64)
    opened = np.zeros((n_bonds + 1, n_sites + 1, max(n_bonds, 1)), dtype=np.int64)
    parent = np.empty(n_sites, dtype=np.int64)
    mark = np.zeros(n_sites, dtype=np.int64)
    stamp = 0
    for cfg in range(start, stop):
        stamp += 1
        o = _popcount(cfg)
        for s in range(n_sites):
            parent[s] = s
        k = n_sites
        for s in range(1, premerge.shape[0]):
            if _union(parent, premerge[0], premerge[s]):
                k -= 1
        for b in range(n_bonds):
            if (cfg >> b) & 1:
                if _union(parent, bond_u[b], bond_v[b]):
                    k -= 1
        hist[o, k] += 1
        for b in range(n_bonds):
            if (cfg >> b) & 1:
                opened[o, k, b] += 1
        for s in range(n_sites):
            if in_a[s]:
                mark[_find(parent, s)] = stamp
        hit = False
        for s in range(n_sites):
            if in_b[s] and mark[_find(parent, s)] == stamp:
                hit = True
                break
        if hit:
            event[o, k] += 1
    return hist, event, opened
