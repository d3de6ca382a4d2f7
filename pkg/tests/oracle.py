"""Slow reference implementation used to check the enumeration kernels.

Configurations are weighted with p^o (1-p)^c 2^k, clusters counted by
networkx, and the exploration path is traced in doubled coordinates with its
own turn rule: at the midpoint of an open bond the path keeps the dual face on
its right, at a closed bond it keeps the primal site on its left.

Running this file regenerates the golden observable table in tests/data.
"""

from __future__ import annotations

import cmath
import csv
import itertools
import math
import sys
from pathlib import Path

import networkx as nx

DIAGONALS = ((1, 1), (-1, 1), (-1, -1), (1, -1))
NAMES = {(1, 1): "NE", (-1, 1): "NW", (-1, -1): "SW", (1, -1): "SE"}


def left_of(tail, d):
    """Doubled coordinates of the point on the left of the edge tail -> tail + d."""
    return ((2 * tail[0] + d[0] - d[1]) // 2, (2 * tail[1] + d[1] + d[0]) // 2)


def right_of(tail, d):
    return ((2 * tail[0] + d[0] + d[1]) // 2, (2 * tail[1] + d[1] - d[0]) // 2)


def is_site(pt):
    return pt[0] % 2 == 0 and pt[1] % 2 == 0


def bond_at(v):
    x, y = v
    if x % 2:
        a, b = ((x - 1) // 2, y // 2), ((x + 1) // 2, y // 2)
    else:
        a, b = (x // 2, (y - 1) // 2), (x // 2, (y + 1) // 2)
    return tuple(sorted((a, b)))


def step(tail, d, open_bonds):
    """Next (tail, direction) after traversing tail -> tail + d."""
    h = (tail[0] + d[0], tail[1] + d[1])
    keep_white = bond_at(h) in open_bonds
    black, white = left_of(tail, d), right_of(tail, d)
    for d2 in DIAGONALS:
        if d2 == (-d[0], -d[1]) or not is_site(left_of(h, d2)):
            continue
        if keep_white and right_of(h, d2) == white:
            return h, d2
        if not keep_white and left_of(h, d2) == black:
            return h, d2
    raise RuntimeError(f"no continuation at {h}")


def turn(d, d2):
    return 1 if d2 == (-d[1], d[0]) else -1


def _edge_key(tail, d):
    return (tail, (tail[0] + d[0], tail[1] + d[1]))


def trace(start, stop, open_bonds, max_steps=100000):
    """Edges from ``start`` up to and including ``stop`` with cumulative turn counts."""
    tail, d = start
    out = [(_edge_key(tail, d), 0)]
    c = 0
    for _ in range(max_steps):
        if (tail, d) == stop:
            return out
        t2, d2 = step(tail, d, open_bonds)
        c += turn(d, d2)
        tail, d = t2, d2
        out.append((_edge_key(tail, d), c))
    raise RuntimeError("path did not close")


def _start(edge):
    (tx, ty), (hx, hy) = edge
    return (tx, ty), (hx - tx, hy - ty)


def _norm_bond(b):
    return tuple(sorted(tuple(int(c) for c in s) for s in b))


def _weight(p, sites, bonds, open_set):
    g = nx.Graph()
    g.add_nodes_from(sites)
    g.add_edges_from(open_set)
    k = nx.number_connected_components(g)
    o = sum(1 for b in bonds if b in open_set)
    return p ** o * (1 - p) ** (len(bonds) - o) * 2.0 ** k, g


def dobrushin_observable(domain, e_a, e_b, p):
    """F on every edge visited by some exploration path, plus P(u <-> wired arc)."""
    sites = [tuple(s) for s in domain.sites]
    bonds = [_norm_bond(b) for b in domain.dobrushin_bonds]
    inert = {_norm_bond(b) for b in domain.inert_bonds}
    wired = [tuple(s) for s in domain.wired_arc]
    F, conn, Z = {}, {s: 0.0 for s in sites}, 0.0
    stop = _start(e_b)
    for bits in itertools.product((0, 1), repeat=len(bonds)):
        chosen = {b for b, x in zip(bonds, bits) if x}
        w, g = _weight(p, sites, bonds, chosen | inert)
        Z += w
        path = trace(_start(e_a), stop, chosen | inert)
        total = path[-1][1]
        for e, c in path:
            F[e] = F.get(e, 0) + w * cmath.exp(1j * math.pi * (total - c) / 4)
        comp = nx.node_connected_component(g, wired[0])
        for s in comp:
            conn[s] += w
    return {e: v / Z for e, v in F.items()}, {s: v / Z for s, v in conn.items()}


def bulk_observable(box, e0, p):
    """F on the loop through e0 in a free box; the value on e0 itself is omitted."""
    sites = [tuple(s) for s in box.sites]
    bonds = [_norm_bond(b) for b in box.bonds]
    F, Z = {}, 0.0
    start = _start(e0)
    for bits in itertools.product((0, 1), repeat=len(bonds)):
        chosen = {b for b, x in zip(bonds, bits) if x}
        w, _ = _weight(p, sites, bonds, chosen)
        Z += w
        tail, d = start
        path, c = [], 0
        while True:
            t2, d2 = step(tail, d, chosen)
            c += turn(d, d2)
            tail, d = t2, d2
            if (tail, d) == start:
                break
            path.append((_edge_key(tail, d), c))
        for e, ce in path:
            F[e] = F.get(e, 0) + w * cmath.exp(1j * math.pi * (c - ce) / 4)
    return {e: v / Z for e, v in F.items()}


GOLDEN = Path(__file__).parent / "data" / "golden_rect2x2_p0.4.csv"


def write_golden(path=GOLDEN):
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    from fkising.lattice import build_medial, build_rectangle_domain

    dom = build_rectangle_domain(2, 2)
    med = build_medial(dom)
    F, _ = dobrushin_observable(dom, med.e_a, med.e_b, 0.4)
    path.parent.mkdir(exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["edge_midpoint_x2", "edge_midpoint_y2", "direction", "re_F", "im_F"])
        for e in sorted(F):
            (tx, ty), (hx, hy) = e
            wr.writerow([f"{(tx + hx) / 2:.17g}", f"{(ty + hy) / 2:.17g}", NAMES[(hx - tx, hy - ty)],
                         f"{F[e].real:.17g}", f"{F[e].imag:.17g}"])


if __name__ == "__main__":
    write_golden()
    print(f"wrote {GOLDEN}")
