"""Exact enumeration of random-cluster configurations on small domains.

Configurations are enumerated once per domain; the kernels return integer
counts grouped by (open bonds, loops) or (open bonds, clusters), and weights for
a particular ``p`` are applied afterwards.  Observables at many values of ``p``
therefore cost a single enumeration.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np

from . import _kernels
from .lattice import (
    DIRECTIONS,
    Bond,
    DobrushinDomain,
    LatticeDomain,
    MedialEdge,
    MedialGraph,
    ModelParams,
    SiteCoord,
    build_medial,
    nw_edge,
)

DEFAULT_CAP = 24
BOUNDARY_CONDITIONS = ("free", "wired", "dobrushin")

# Values taken by the bulk observable on e0, seen from its tail and from its head
# endpoint.  Seen from the tail the loop is just arriving at e0 (winding 0);
# seen from the head it has completed a full turn, giving e^{i pi} = -1.
E0_TAIL_VALUE = 1.0 + 0.0j
E0_HEAD_VALUE = -1.0 + 0.0j


class EnumerationCapError(ValueError):
    """Raised when a domain has more bonds than the enumeration cap allows."""


@dataclass(frozen=True)
class BondConfig:
    """Open/closed assignment over ``bonds``; bit j of ``open_mask`` is bond j."""

    bonds: tuple[Bond, ...]
    open_mask: int

    def __post_init__(self):
        if self.open_mask < 0 or self.open_mask >> len(self.bonds):
            raise ValueError("open_mask wider than the bond list")

    @property
    def width(self) -> int:
        return len(self.bonds)

    @property
    def n_open(self) -> int:
        return bin(self.open_mask).count("1")

    @property
    def n_closed(self) -> int:
        return self.width - self.n_open

    def is_open(self, bond: Bond) -> bool:
        try:
            j = self.bonds.index(bond)
        except ValueError:
            return False
        return bool((self.open_mask >> j) & 1)

    def open_bonds(self) -> list[Bond]:
        return [b for j, b in enumerate(self.bonds) if (self.open_mask >> j) & 1]

    @classmethod
    def from_open(cls, bonds, open_bonds: Iterable[Bond]) -> "BondConfig":
        bonds = tuple(bonds)
        idx = {b: j for j, b in enumerate(bonds)}
        return cls(bonds, sum(1 << idx[b] for b in open_bonds))


def config_bonds(domain: LatticeDomain, bc: str) -> tuple[Bond, ...]:
    """The bonds a configuration ranges over under boundary condition ``bc``."""
    _check_bc(bc)
    if bc == "dobrushin":
        if not isinstance(domain, DobrushinDomain):
            raise TypeError("dobrushin boundary condition needs a DobrushinDomain")
        return domain.dobrushin_bonds
    return domain.bonds


def all_configs(domain: LatticeDomain, bc: str = "dobrushin"):
    bonds = config_bonds(domain, bc)
    for mask in range(1 << len(bonds)):
        yield BondConfig(bonds, mask)


@dataclass
class LoopDecomposition:
    loops: list[list[MedialEdge]]
    path: list[MedialEdge]
    winding: dict[MedialEdge, int]  # quarter-turns from the edge to e_b along the path

    def winding_radians(self, edge: MedialEdge) -> float:
        return self.winding[edge] * math.pi / 2


@dataclass(frozen=True)
class Observable:
    """Complex function on medial edges.

    For the bulk variant ``e0`` is set and ``convention_at_e0`` holds the two
    values of F(e0) as seen from its tail and from its head.
    """

    edges: tuple[MedialEdge, ...]
    values: np.ndarray
    e0: MedialEdge | None = None
    convention_at_e0: tuple[complex, complex] | None = None
    index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.index is None:
            object.__setattr__(self, "index", {e: i for i, e in enumerate(self.edges)})

    def __contains__(self, edge) -> bool:
        return edge in self.index

    def __getitem__(self, edge: MedialEdge) -> complex:
        return complex(self.values[self.index[edge]])

    def get(self, edge, default=None):
        i = self.index.get(edge)
        return default if i is None else complex(self.values[i])

    def at(self, edge: MedialEdge, vertex) -> complex:
        """Value of F on ``edge`` when used in a relation around ``vertex``."""
        if self.e0 is not None and edge == self.e0:
            return self.convention_at_e0[0] if vertex == edge.tail else self.convention_at_e0[1]
        return self[edge]

    def at_site(self, site) -> complex:
        """F on the north-west pointing side of the site's diamond."""
        return self[nw_edge(SiteCoord(*site))]

    def with_value(self, edge: MedialEdge, value: complex) -> "Observable":
        vals = self.values.copy()
        vals[self.index[edge]] = value
        return Observable(self.edges, vals, self.e0, self.convention_at_e0)


def _check_bc(bc: str) -> None:
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bc!r}; use one of {BOUNDARY_CONDITIONS}")


def _check_cap(n_bonds: int, cap: int) -> None:
    if n_bonds > cap:
        raise EnumerationCapError(
            f"domain has {n_bonds} enumerated bonds, above the enumeration cap of {cap}")


def _premerged(domain: LatticeDomain, bc: str) -> tuple[SiteCoord, ...]:
    if bc == "dobrushin":
        return domain.wired_arc
    if bc == "wired":
        return domain.boundary_cycle
    return ()


# ---------------------------------------------------------------------------
# single-configuration functions


class _UnionFind:
    def __init__(self, items):
        self.parent = {s: s for s in items}

    def find(self, s):
        root = s
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[s] != root:
            self.parent[s], s = root, self.parent[s]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def cluster_count(domain: LatticeDomain, config: BondConfig, bc: str) -> int:
    _check_bc(bc)
    uf = _UnionFind(domain.sites)
    k = len(domain.sites)
    merged = _premerged(domain, bc)
    for s in merged[1:]:
        k -= uf.union(merged[0], s)
    for u, v in config.open_bonds():
        k -= uf.union(u, v)
    return k


def rc_weight(domain: LatticeDomain, config: BondConfig, params: ModelParams, bc: str) -> float:
    """Unnormalised weight p^o (1-p)^c q^k, with k counted after the bc's wirings."""
    k = cluster_count(domain, config, bc)
    return params.p ** config.n_open * (1 - params.p) ** config.n_closed * params.q ** k


def transition_tables(medial: MedialGraph, bonds: tuple[Bond, ...]):
    """Successor of each medial edge when the bond at its head is open or closed.

    Returns ``(next_open, next_closed, head_bond)``; ``head_bond[e]`` indexes
    ``bonds`` or is -1 where the successor does not depend on the configuration.
    At a degree-4 vertex an open bond keeps the walker on the same white face and
    a closed bond keeps it on the same black diamond.
    """
    idx = medial.edge_index
    bond_idx = {b: j for j, b in enumerate(bonds)}
    n = len(medial.edges)
    next_open = np.full(n, -1, dtype=np.int64)
    next_closed = np.full(n, -1, dtype=np.int64)
    head_bond = np.full(n, -1, dtype=np.int64)
    for e in medial.edges:
        outs = medial.outgoing.get(e.head, ())
        i = idx[e]
        if not outs:
            continue
        if len(outs) == 1:
            next_open[i] = next_closed[i] = idx[outs[0]]
            continue
        same_white = [f for f in outs if f.white == e.white]
        same_black = [f for f in outs if f.black == e.black]
        if len(same_white) != 1 or len(same_black) != 1:
            raise AssertionError(f"ambiguous turn at {e.head}")
        next_open[i] = idx[same_white[0]]
        next_closed[i] = idx[same_black[0]]
        bond = MedialGraph.vertex_bond(e.head)
        if bond not in bond_idx:
            raise AssertionError(f"bond {bond} at a degree-4 vertex is not enumerated")
        head_bond[i] = bond_idx[bond]
    return next_open, next_closed, head_bond


def _turn(e: MedialEdge, f: MedialEdge) -> int:
    return 1 if (f.direction - e.direction) % 4 == 1 else -1


def loop_decompose(domain: DobrushinDomain, config: BondConfig) -> LoopDecomposition:
    """Exploration path from e_a to e_b plus the closed loops of ``config``."""
    medial = _medial(domain)
    next_open, next_closed, head_bond = transition_tables(medial, domain.dobrushin_bonds)
    bonds = domain.dobrushin_bonds
    state = [config.is_open(b) for b in bonds]
    edges = medial.edges

    def step(i):
        b = head_bond[i]
        return next_open[i] if (b >= 0 and state[b]) else next_closed[i]

    ia, ib = medial.edge_index[medial.e_a], medial.edge_index[medial.e_b]
    path = [ia]
    while path[-1] != ib:
        path.append(int(step(path[-1])))
    seen = set(path)
    total = 0
    cum = [0]
    for i in range(1, len(path)):
        total += _turn(edges[path[i - 1]], edges[path[i]])
        cum.append(total)
    winding = {edges[i]: total - c for i, c in zip(path, cum)}
    loops = []
    for start in range(len(edges)):
        if start in seen:
            continue
        loop, i = [], start
        while i not in seen:
            seen.add(i)
            loop.append(edges[i])
            i = int(step(i))
        loops.append(loop)
    return LoopDecomposition(loops, [edges[i] for i in path], winding)


def loop_weight(domain: DobrushinDomain, config: BondConfig, params: ModelParams) -> float:
    """x^o sqrt(2)^L with L the number of closed loops (the path is not counted)."""
    n_loops = len(loop_decompose(domain, config).loops)
    return params.x ** config.n_open * math.sqrt(2.0) ** n_loops


# ---------------------------------------------------------------------------
# enumeration


@lru_cache(maxsize=64)
def _medial(domain: LatticeDomain) -> MedialGraph:
    return build_medial(domain)


def medial_of(domain: LatticeDomain) -> MedialGraph:
    """Cached medial graph of a domain."""
    return _medial(domain)


def _ranges(total: int, workers: int) -> list[tuple[int, int]]:
    n = max(1, min(workers, total))
    cuts = [total * i // n for i in range(n + 1)]
    return [(cuts[i], cuts[i + 1]) for i in range(n)]


def _call_kernel(name, start, stop, args):
    return getattr(_kernels, name)(start, stop, *args)


def _map_reduce(name: str, total: int, args: tuple, workers: int):
    """Run a kernel over [0, total) split into ranges and add the partial counts."""
    ranges = _ranges(total, workers)
    if len(ranges) == 1:
        parts = [_call_kernel(name, 0, total, args)]
    else:
        with ProcessPoolExecutor(max_workers=len(ranges)) as ex:
            parts = list(ex.map(_call_kernel, [name] * len(ranges),
                                [r[0] for r in ranges], [r[1] for r in ranges],
                                [args] * len(ranges)))
    out = list(parts[0])
    for part in parts[1:]:
        for j, val in enumerate(part):
            if isinstance(val, np.ndarray):
                out[j] = out[j] + val
            elif j == len(part) - 2:
                out[j] = min(out[j], val)
            else:
                out[j] = max(out[j], val)
    return tuple(out)


@dataclass(frozen=True)
class LoopTables:
    """p-independent enumeration counts for one domain."""

    medial: MedialGraph
    hist: np.ndarray  # [o, L]
    phase: np.ndarray  # [o, L, edge, winding mod 8]
    conn: np.ndarray  # [o, L, site]
    euler_range: tuple[int, int]  # min and max of L - 2k - o
    n_configs: int


_TABLES: dict = {}
_TABLES_MAX = 32


def _cached(key, build):
    """Tables depend only on the domain, not on the cap or the worker count."""
    if key not in _TABLES:
        if len(_TABLES) >= _TABLES_MAX:
            _TABLES.pop(next(iter(_TABLES)))
        _TABLES[key] = build()
    return _TABLES[key]


def dobrushin_tables(domain: DobrushinDomain, cap: int = DEFAULT_CAP, workers: int = 1) -> LoopTables:
    _check_cap(len(domain.dobrushin_bonds), cap)
    return _cached(("dobrushin", domain), lambda: _build_dobrushin_tables(domain, workers))


def _build_dobrushin_tables(domain: DobrushinDomain, workers: int) -> LoopTables:
    bonds = domain.dobrushin_bonds
    medial = _medial(domain)
    nxt_o, nxt_c, head = transition_tables(medial, bonds)
    direction = np.array([e.direction for e in medial.edges], dtype=np.int64)
    barr = domain.bond_array(bonds)
    sidx = domain.site_index
    wired = np.array([sidx[s] for s in domain.wired_arc], dtype=np.int64)
    l_max = len(medial.edges) // 4 + 1
    args = (len(bonds), nxt_o, nxt_c, head, direction,
            medial.edge_index[medial.e_a], medial.edge_index[medial.e_b],
            barr[:, 0].copy(), barr[:, 1].copy(), len(domain.sites), wired, l_max)
    hist, phase, conn, kmin, kmax = _map_reduce("dobrushin_counts", 1 << len(bonds), args, workers)
    return LoopTables(medial, hist, phase, conn, (int(kmin), int(kmax)), 1 << len(bonds))


def bulk_tables(box: LatticeDomain, origin=(0, 0), cap: int = DEFAULT_CAP, workers: int = 1) -> LoopTables:
    origin = SiteCoord(*origin)
    if isinstance(box, DobrushinDomain):
        raise TypeError("the bulk observable needs a free-boundary box")
    if origin not in box.site_set or origin in set(box.boundary_cycle):
        raise ValueError("origin must be an interior site of the box")
    _check_cap(len(box.bonds), cap)
    return _cached(("bulk", box, origin), lambda: _build_bulk_tables(box, origin, workers))


def _build_bulk_tables(box: LatticeDomain, origin: SiteCoord, workers: int) -> LoopTables:
    bonds = box.bonds
    medial = _medial(box)
    nxt_o, nxt_c, head = transition_tables(medial, bonds)
    direction = np.array([e.direction for e in medial.edges], dtype=np.int64)
    barr = box.bond_array(bonds)
    l_max = len(medial.edges) // 4 + 1
    args = (len(bonds), nxt_o, nxt_c, head, direction, medial.edge_index[nw_edge(origin)],
            barr[:, 0].copy(), barr[:, 1].copy(), len(box.sites), box.site_index[origin], l_max)
    hist, phase, conn, kmin, kmax = _map_reduce("bulk_counts", 1 << len(bonds), args, workers)
    return LoopTables(medial, hist, phase, conn, (int(kmin), int(kmax)), 1 << len(bonds))


def _loop_class_weights(hist: np.ndarray, x: float) -> np.ndarray:
    """Normalised x^o sqrt2^L over the populated (o, L) classes, in extended precision."""
    o = np.arange(hist.shape[0], dtype=np.longdouble)[:, None]
    L = np.arange(hist.shape[1], dtype=np.longdouble)[None, :]
    lw = o * np.log(np.longdouble(x)) + L * np.log(np.sqrt(np.longdouble(2)))
    lw = np.where(hist > 0, lw, -np.inf)
    return np.exp(lw - lw.max())


_OMEGA = np.exp(1j * np.pi / 4 * np.arange(8))


def _observable_from_tables(t: LoopTables, params: ModelParams):
    w = _loop_class_weights(t.hist, params.x)
    z = (w * t.hist).sum()
    # sum over classes in extended precision, then apply the 8 phases
    per_edge = np.einsum("ol,olew->ew", w, t.phase.astype(np.longdouble)) / z
    cos8 = np.cos(np.pi / 4 * np.arange(8, dtype=np.longdouble))
    sin8 = np.sin(np.pi / 4 * np.arange(8, dtype=np.longdouble))
    re = (per_edge * cos8).sum(axis=1)
    im = (per_edge * sin8).sum(axis=1)
    return (re.astype(float) + 1j * im.astype(float)), w, z


def observable_exact(domain: DobrushinDomain, params: ModelParams, cap: int = DEFAULT_CAP,
                     workers: int = 1) -> Observable:
    """F(e) = E[e^{i W/2} 1{e in path}] on every medial edge, W the winding to e_b."""
    t = dobrushin_tables(domain, cap, workers)
    vals, _, _ = _observable_from_tables(t, params)
    return Observable(t.medial.edges, vals)


def observable_bulk_exact(box: LatticeDomain, params: ModelParams, cap: int = DEFAULT_CAP,
                          workers: int = 1, origin=(0, 0)) -> Observable:
    """Bulk observable on a free box: loop through the NW side e0 of ``origin``."""
    t = bulk_tables(box, tuple(origin), cap, workers)
    vals, _, _ = _observable_from_tables(t, params)
    e0 = nw_edge(SiteCoord(*origin))
    vals[t.medial.edge_index[e0]] = np.nan
    return Observable(t.medial.edges, vals, e0, (E0_TAIL_VALUE, E0_HEAD_VALUE))


def connection_from_tables(t: LoopTables, params: ModelParams, domain: LatticeDomain) -> dict:
    """Per-site probability of the connection recorded by the tables."""
    w = _loop_class_weights(t.hist, params.x)
    z = (w * t.hist).sum()
    probs = np.einsum("ol,ols->s", w, t.conn.astype(np.longdouble)) / z
    return {s: float(probs[i]) for i, s in enumerate(domain.sites)}


@lru_cache(maxsize=64)
def _cluster_tables(domain: LatticeDomain, bc: str, a: frozenset, b: frozenset, cap: int, workers: int):
    bonds = config_bonds(domain, bc)
    _check_cap(len(bonds), cap)
    sidx = domain.site_index
    barr = domain.bond_array(bonds)
    premerge = np.array([sidx[s] for s in _premerged(domain, bc)], dtype=np.int64)
    in_a = np.zeros(len(domain.sites), dtype=np.bool_)
    in_b = np.zeros(len(domain.sites), dtype=np.bool_)
    for s in a:
        in_a[sidx[s]] = True
    for s in b:
        in_b[sidx[s]] = True
    args = (len(bonds), barr[:, 0].copy(), barr[:, 1].copy(), len(domain.sites), premerge, in_a, in_b)
    return _map_reduce("cluster_counts", 1 << len(bonds), args, workers)


def _rc_class_weights(hist: np.ndarray, n_bonds: int, p: float, q: float) -> np.ndarray:
    o = np.arange(hist.shape[0], dtype=np.longdouble)[:, None]
    k = np.arange(hist.shape[1], dtype=np.longdouble)[None, :]
    p_ = np.longdouble(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where(o > 0, o * np.log(p_), 0.0)
        lq = np.where(n_bonds - o > 0, (n_bonds - o) * np.log1p(-p_), 0.0)
    lw = lp + lq + k * np.log(np.longdouble(q))
    lw = np.where(hist > 0, lw, -np.inf)
    return np.exp(lw - lw.max())


def connection_prob(domain: LatticeDomain, params: ModelParams, bc: str, A, B,
                    cap: int = DEFAULT_CAP, workers: int = 1) -> float:
    """Exact probability that some site of A is connected to some site of B."""
    _check_bc(bc)
    A = frozenset(SiteCoord(*s) for s in A)
    B = frozenset(SiteCoord(*s) for s in B)
    missing = (A | B) - domain.site_set
    if missing:
        raise ValueError(f"sites {sorted(missing)} are not in the domain")
    if A & B:
        return 1.0
    hist, event, _ = _cluster_tables(domain, bc, A, B, cap, workers)
    n_bonds = len(config_bonds(domain, bc))
    w = _rc_class_weights(hist, n_bonds, params.p, params.q)
    return float((w * event).sum() / (w * hist).sum())


def bond_marginals(domain: LatticeDomain, params: ModelParams, bc: str,
                   cap: int = DEFAULT_CAP) -> dict[Bond, float]:
    """Exact probability that each enumerated bond is open."""
    s0 = domain.sites[0]
    hist, _, opened = _cluster_tables(domain, bc, frozenset([s0]), frozenset([s0]), cap, 1)
    bonds = config_bonds(domain, bc)
    w = _rc_class_weights(hist, len(bonds), params.p, params.q)
    z = (w * hist).sum()
    probs = np.einsum("ok,okb->b", w, opened.astype(np.longdouble)) / z
    return {b: float(probs[j]) for j, b in enumerate(bonds)}


# ---------------------------------------------------------------------------
# golden files


def write_observable_csv(obs: Observable, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["edge_midpoint_x2", "edge_midpoint_y2", "direction", "re_F", "im_F"])
        for e, v in zip(obs.edges, obs.values):
            mx, my = e.midpoint_x2
            wr.writerow([f"{mx:.17g}", f"{my:.17g}", DIRECTIONS[e.direction],
                         f"{v.real:.17g}", f"{v.imag:.17g}"])


def read_observable_csv(path) -> dict[tuple[float, float, str], complex]:
    out = {}
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            key = (float(row["edge_midpoint_x2"]), float(row["edge_midpoint_y2"]), row["direction"])
            out[key] = complex(float(row["re_F"]), float(row["im_F"]))
    return out
