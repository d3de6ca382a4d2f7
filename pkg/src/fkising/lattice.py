"""Square-lattice domains, their oriented medial graphs, and parameter conversions.

Geometry conventions
--------------------
Sites are integer points ``SiteCoord(x1, x2)``.  Everything living between sites
(faces of the lattice, bond midpoints, medial edges) is stored in *doubled*
integer coordinates: a site ``(x1, x2)`` sits at ``(2*x1, 2*x2)``, the face with
lower-left corner ``(x1, x2)`` at ``(2*x1+1, 2*x2+1)`` and bond midpoints at
mixed-parity points.  All geometry is therefore exact integer arithmetic.

Each site is the centre of a black diamond and each dual vertex (face) the
centre of a white diamond.  A medial edge is a side of a black diamond shared
with a white one; it is oriented so that the black diamond lies on its left,
i.e. clockwise around the white diamond.  Medial vertices are the bond midpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

SQRT2 = math.sqrt(2.0)

#: Self-dual point of the q=2 random-cluster model.
P_SD = SQRT2 / (1.0 + SQRT2)

#: Critical inverse temperature of the Ising model, 0.5*ln(1+sqrt(2)).
BETA_C = 0.5 * math.log1p(SQRT2)

#: Diagonal directions of medial edges, indexed by quarter-turns from north-east.
DIRECTIONS = ("NE", "NW", "SW", "SE")
_DIR_VECTORS = ((1, 1), (-1, 1), (-1, -1), (1, -1))
_AXIS_STEPS = ((1, 0), (0, 1), (-1, 0), (0, -1))  # E, N, W, S


class SiteCoord(NamedTuple):
    x1: int
    x2: int

    def __add__(self, other):  # type: ignore[override]
        return SiteCoord(self.x1 + other[0], self.x2 + other[1])

    def __sub__(self, other):
        return SiteCoord(self.x1 - other[0], self.x2 - other[1])

    def neighbors(self) -> tuple["SiteCoord", ...]:
        return tuple(SiteCoord(self.x1 + dx, self.x2 + dy) for dx, dy in _AXIS_STEPS)

    @property
    def doubled(self) -> tuple[int, int]:
        return (2 * self.x1, 2 * self.x2)


Bond = tuple[SiteCoord, SiteCoord]


def _bond(u: SiteCoord, v: SiteCoord) -> Bond:
    return (u, v) if u < v else (v, u)


def _direction_index(vec: tuple[int, int]) -> int:
    try:
        return _DIR_VECTORS.index((int(vec[0]), int(vec[1])))
    except ValueError:
        raise ValueError(f"{vec} is not a diagonal unit step") from None


class MedialEdge(NamedTuple):
    """Oriented medial edge, endpoints in doubled coordinates."""

    tail: tuple[int, int]
    head: tuple[int, int]

    @property
    def direction(self) -> int:
        return _direction_index((self.head[0] - self.tail[0], self.head[1] - self.tail[1]))

    @property
    def direction_name(self) -> str:
        return DIRECTIONS[self.direction]

    @property
    def midpoint_x2(self) -> tuple[float, float]:
        """Midpoint in doubled coordinates (half-integers)."""
        return ((self.tail[0] + self.head[0]) / 2, (self.tail[1] + self.head[1]) / 2)

    @property
    def black(self) -> SiteCoord:
        """The site whose diamond lies on the left of the edge."""
        dx, dy = self.head[0] - self.tail[0], self.head[1] - self.tail[1]
        sx, sy = self.tail[0] + self.head[0] - dy, self.tail[1] + self.head[1] + dx
        return SiteCoord(sx // 4, sy // 4)

    @property
    def white(self) -> tuple[int, int]:
        """The face (doubled coordinates) whose diamond lies on the right."""
        dx, dy = self.head[0] - self.tail[0], self.head[1] - self.tail[1]
        return ((self.tail[0] + self.head[0] + dy) // 2, (self.tail[1] + self.head[1] - dx) // 2)


def medial_edge(site: SiteCoord, face: tuple[int, int]) -> MedialEdge:
    """The side of ``site``'s diamond facing ``face`` (doubled coordinates)."""
    sx, sy = face[0] - 2 * site.x1, face[1] - 2 * site.x2
    if abs(sx) != 1 or abs(sy) != 1:
        raise ValueError(f"face {face} is not adjacent to site {site}")
    k = {(1, 1): 0, (-1, 1): 1, (-1, -1): 2, (1, -1): 3}[(sx, sy)]
    t, h = _AXIS_STEPS[k], _AXIS_STEPS[(k + 1) % 4]
    return MedialEdge((2 * site.x1 + t[0], 2 * site.x2 + t[1]), (2 * site.x1 + h[0], 2 * site.x2 + h[1]))


def nw_edge(site: SiteCoord) -> MedialEdge:
    """The north-west pointing side of a site's diamond (the one facing its NE face)."""
    return medial_edge(site, (2 * site.x1 + 1, 2 * site.x2 + 1))


def faces_around(site: SiteCoord) -> tuple[tuple[int, int], ...]:
    """The four faces touching ``site`` in doubled coordinates: NE, NW, SW, SE."""
    x, y = 2 * site.x1, 2 * site.x2
    return ((x + 1, y + 1), (x - 1, y + 1), (x - 1, y - 1), (x + 1, y - 1))


def face_corners(face: tuple[int, int]) -> tuple[SiteCoord, ...]:
    x, y = (face[0] - 1) // 2, (face[1] - 1) // 2
    return (SiteCoord(x, y), SiteCoord(x + 1, y), SiteCoord(x + 1, y + 1), SiteCoord(x, y + 1))


def _right_face(u: SiteCoord, v: SiteCoord) -> tuple[int, int]:
    dx, dy = v.x1 - u.x1, v.x2 - u.x2
    return (u.x1 + v.x1 + dy, u.x2 + v.x2 - dx)


def _exterior_faces(prev: SiteCoord, u: SiteCoord, nxt: SiteCoord) -> list[tuple[int, int]]:
    """Faces around ``u`` swept clockwise from the outgoing to the incoming boundary bond."""
    out = math.degrees(math.atan2(nxt.x2 - u.x2, nxt.x1 - u.x1))
    back = math.degrees(math.atan2(prev.x2 - u.x2, prev.x1 - u.x1))
    span = round(out - back) % 360
    if span == 0:
        raise ValueError(f"boundary cycle reverses at {u}")
    faces = []
    t = 45
    while t < span:
        phi = math.radians(out - t)
        faces.append((2 * u.x1 + round(math.copysign(1, math.cos(phi))),
                      2 * u.x2 + round(math.copysign(1, math.sin(phi)))))
        t += 90
    return faces


@dataclass(frozen=True)
class LatticeDomain:
    """Finite induced subgraph of Z^2 bounded by a counterclockwise lattice polygon."""

    sites: tuple[SiteCoord, ...]
    bonds: tuple[Bond, ...]
    boundary_cycle: tuple[SiteCoord, ...]

    def __post_init__(self):
        _validate_graph(self.sites, self.bonds, self.boundary_cycle)

    @cached_property
    def site_set(self) -> frozenset[SiteCoord]:
        return frozenset(self.sites)

    @cached_property
    def site_index(self) -> dict[SiteCoord, int]:
        return {s: i for i, s in enumerate(self.sites)}

    @cached_property
    def bond_index(self) -> dict[Bond, int]:
        return {b: i for i, b in enumerate(self.bonds)}

    def bond_array(self, bonds: Sequence[Bond] | None = None) -> np.ndarray:
        idx = self.site_index
        bonds = self.bonds if bonds is None else bonds
        return np.array([[idx[u], idx[v]] for u, v in bonds], dtype=np.int64).reshape(-1, 2)

    @cached_property
    def interior_faces(self) -> frozenset[tuple[int, int]]:
        faces = set()
        for s in self.sites:
            f = (2 * s.x1 + 1, 2 * s.x2 + 1)
            if all(c in self.site_set for c in face_corners(f)):
                faces.add(f)
        return frozenset(faces)

    def white_faces(self) -> frozenset[tuple[int, int]]:
        """Dual vertices carrying white diamonds; with free boundary every face is white."""
        return frozenset(f for s in self.sites for f in faces_around(s))


@dataclass(frozen=True)
class DobrushinDomain(LatticeDomain):
    """Lattice domain with two marked boundary sites; free arc a->b, wired arc b->a."""

    marked_a: int = 0
    marked_b: int = 0

    def __post_init__(self):
        super().__post_init__()
        n = len(self.boundary_cycle)
        if not (0 <= self.marked_a < n and 0 <= self.marked_b < n):
            raise ValueError("marked indices out of range")
        if self.marked_a == self.marked_b:
            raise ValueError("a and b must be distinct boundary sites")

    @property
    def a(self) -> SiteCoord:
        return self.boundary_cycle[self.marked_a]

    @property
    def b(self) -> SiteCoord:
        return self.boundary_cycle[self.marked_b]

    def _arc(self, i: int, j: int) -> tuple[SiteCoord, ...]:
        n = len(self.boundary_cycle)
        out = [self.boundary_cycle[i]]
        while i != j:
            i = (i + 1) % n
            out.append(self.boundary_cycle[i])
        return tuple(out)

    @cached_property
    def free_arc(self) -> tuple[SiteCoord, ...]:
        return self._arc(self.marked_a, self.marked_b)

    @cached_property
    def wired_arc(self) -> tuple[SiteCoord, ...]:
        return self._arc(self.marked_b, self.marked_a)

    @cached_property
    def inert_bonds(self) -> tuple[Bond, ...]:
        """Bonds between consecutive wired-arc sites: their state never matters."""
        w = self.wired_arc
        steps = {_bond(w[i], w[i + 1]) for i in range(len(w) - 1)}
        return tuple(b for b in self.bonds if b in steps)

    @cached_property
    def dobrushin_bonds(self) -> tuple[Bond, ...]:
        """Bonds whose state is summed over under Dobrushin boundary conditions."""
        inert = set(self.inert_bonds)
        return tuple(b for b in self.bonds if b not in inert)

    def white_faces(self) -> frozenset[tuple[int, int]]:
        faces = set(self.interior_faces)
        arc = self.free_arc
        for u, v in zip(arc[:-1], arc[1:]):
            faces.add(_right_face(u, v))
        cyc, n = self.boundary_cycle, len(self.boundary_cycle)
        for k in range(1, len(arc) - 1):
            i = (self.marked_a + k) % n
            faces.update(_exterior_faces(cyc[i - 1], cyc[i], cyc[(i + 1) % n]))
        return frozenset(faces)

    @cached_property
    def e_a_face(self) -> tuple[int, int]:
        return _right_face(self.free_arc[0], self.free_arc[1])

    @cached_property
    def e_b_face(self) -> tuple[int, int]:
        return _right_face(self.free_arc[-2], self.free_arc[-1])


def _validate_graph(sites, bonds, cycle) -> None:
    site_set = set(sites)
    if len(site_set) != len(sites) or not sites:
        raise ValueError("sites must be a non-empty collection of distinct points")
    for u, v in bonds:
        if abs(u.x1 - v.x1) + abs(u.x2 - v.x2) != 1:
            raise ValueError(f"bond {u}-{v} does not join nearest neighbours")
        if u not in site_set or v not in site_set:
            raise ValueError(f"bond {u}-{v} leaves the site set")
    # connectivity
    adj: dict[SiteCoord, list[SiteCoord]] = {s: [] for s in sites}
    for u, v in bonds:
        adj[u].append(v)
        adj[v].append(u)
    seen, stack = {sites[0]}, [sites[0]]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != len(sites):
        raise ValueError("domain graph is not connected")
    # boundary polygon
    n = len(cycle)
    if n < 4 or len(set(cycle)) != n:
        raise ValueError("boundary cycle must be a self-avoiding polygon")
    bond_set = set(bonds)
    for i in range(n):
        u, v = cycle[i], cycle[(i + 1) % n]
        if _bond(u, v) not in bond_set:
            raise ValueError(f"boundary cycle step {u}->{v} is not a bond")
    area2 = sum(cycle[i].x1 * cycle[(i + 1) % n].x2 - cycle[(i + 1) % n].x1 * cycle[i].x2
                for i in range(n))
    if area2 <= 0:
        raise ValueError("boundary cycle must be counterclockwise with positive area")
    on_cycle = set(cycle)
    for s in sites:
        if any(nb not in site_set for nb in s.neighbors()) and s not in on_cycle:
            raise ValueError(f"site {s} touches the exterior but is not on the boundary cycle")


def _induced_bonds(sites) -> tuple[Bond, ...]:
    site_set = set(sites)
    out = []
    for s in sites:
        for nb in (s + (1, 0), s + (0, 1)):
            if nb in site_set:
                out.append(_bond(s, nb))
    return tuple(sorted(out))


def _sorted_sites(sites) -> tuple[SiteCoord, ...]:
    return tuple(sorted(sites, key=lambda s: (s.x2, s.x1)))


def _rectangle_cycle(x0: int, x1: int, y0: int, y1: int) -> tuple[SiteCoord, ...]:
    cyc = [SiteCoord(x, y0) for x in range(x0, x1)]
    cyc += [SiteCoord(x1, y) for y in range(y0, y1)]
    cyc += [SiteCoord(x, y1) for x in range(x1, x0, -1)]
    cyc += [SiteCoord(x0, y) for y in range(y1, y0, -1)]
    return tuple(cyc)


def build_box(x0: int, x1: int, y0: int, y1: int) -> LatticeDomain:
    """Rectangle [x0,x1] x [y0,y1] with all induced bonds (used with free/wired boundary)."""
    if x1 <= x0 or y1 <= y0:
        raise ValueError("box must have positive width and height")
    sites = _sorted_sites(SiteCoord(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1))
    return LatticeDomain(sites, _induced_bonds(sites), _rectangle_cycle(x0, x1, y0, y1))


def dobrushin_domain(sites, boundary_cycle, a: SiteCoord, b: SiteCoord) -> DobrushinDomain:
    """Validating constructor for an arbitrary polygonal Dobrushin domain."""
    sites = _sorted_sites(SiteCoord(*s) for s in sites)
    cycle = tuple(SiteCoord(*s) for s in boundary_cycle)
    a, b = SiteCoord(*a), SiteCoord(*b)
    if a == b:
        raise ValueError("a and b must be distinct")
    if a not in cycle or b not in cycle:
        raise ValueError("a and b must lie on the boundary cycle")
    return DobrushinDomain(sites, _induced_bonds(sites), cycle, cycle.index(a), cycle.index(b))


def build_rectangle_domain(width: int, height: int, a=None, b=None) -> DobrushinDomain:
    """Dobrushin domain on [0,width] x [0,height].

    By default the wired arc is the bottom side: a = (width, 0), b = (0, 0).
    """
    if width <= 0 or height <= 0:
        raise ValueError("rectangle must have positive width and height")
    a = SiteCoord(width, 0) if a is None else SiteCoord(*a)
    b = SiteCoord(0, 0) if b is None else SiteCoord(*b)
    sites = [SiteCoord(x, y) for x in range(width + 1) for y in range(height + 1)]
    return dobrushin_domain(sites, _rectangle_cycle(0, width, 0, height), a, b)


def build_strip_domain(height: int, halfwidth: int) -> DobrushinDomain:
    """[-halfwidth, halfwidth] x [0, height], wired along the bottom and free elsewhere."""
    if height < 1 or halfwidth < 1:
        raise ValueError("strip height and halfwidth must be at least 1")
    sites = [SiteCoord(x, y) for x in range(-halfwidth, halfwidth + 1) for y in range(height + 1)]
    cycle = _rectangle_cycle(-halfwidth, halfwidth, 0, height)
    return dobrushin_domain(sites, cycle, (halfwidth, 0), (-halfwidth, 0))


def in_wedge_complement(site, w) -> bool:
    """Membership in T(w): the plane minus {x : x > w} and {x : x < 0} (strict, both coordinates)."""
    x, y = site
    upper = x > w[0] and y > w[1]
    lower = x < 0 and y < 0
    return not (upper or lower)


def build_wedge_domain(w=(2, 2), radius: int = 4) -> DobrushinDomain:
    """Finite truncation T(w) intersected with [0, radius]^2.

    The wired arc runs down the left side and along the bottom, standing in for
    the boundary of the lower-left wedge; the free arc climbs the right side,
    follows the staircase around the upper-right wedge and returns along the top.
    """
    w = SiteCoord(*w)
    if not (0 < w.x1 < radius and 0 < w.x2 < radius):
        raise ValueError("wedge vertex must lie strictly inside the truncation box")
    R = radius
    sites = [SiteCoord(x, y) for x in range(R + 1) for y in range(R + 1)
             if in_wedge_complement((x, y), w)]
    cyc = [SiteCoord(x, 0) for x in range(0, R)]
    cyc += [SiteCoord(R, y) for y in range(0, w.x2)]
    cyc += [SiteCoord(x, w.x2) for x in range(R, w.x1, -1)]
    cyc += [SiteCoord(w.x1, y) for y in range(w.x2, R)]
    cyc += [SiteCoord(x, R) for x in range(w.x1, 0, -1)]
    cyc += [SiteCoord(0, y) for y in range(R, 0, -1)]
    return dobrushin_domain(sites, cyc, (R, 0), (0, R))


@dataclass(frozen=True)
class MedialGraph:
    """Oriented medial graph of a domain.

    ``edges`` lists every medial edge including the distinguished edges ``e_a``
    and ``e_b`` (``None`` for free-boundary domains).  ``vertices`` are the bond
    midpoints touched by edges other than the outer endpoints of e_a and e_b.
    """

    domain: LatticeDomain
    edges: tuple[MedialEdge, ...]
    vertices: tuple[tuple[int, int], ...]
    incoming: dict = field(repr=False)
    outgoing: dict = field(repr=False)
    e_a: MedialEdge | None = None
    e_b: MedialEdge | None = None

    @cached_property
    def edge_index(self) -> dict[MedialEdge, int]:
        return {e: i for i, e in enumerate(self.edges)}

    def degree(self, v, include_special: bool = False) -> int:
        special = {self.e_a, self.e_b}
        es = self.incoming.get(v, ()) + self.outgoing.get(v, ())
        return sum(1 for e in es if include_special or e not in special)

    @staticmethod
    def vertex_bond(v: tuple[int, int]) -> Bond:
        """The pair of sites whose bond midpoint is the medial vertex ``v``."""
        x, y = v
        if x % 2:
            return (SiteCoord((x - 1) // 2, y // 2), SiteCoord((x + 1) // 2, y // 2))
        return (SiteCoord(x // 2, (y - 1) // 2), SiteCoord(x // 2, (y + 1) // 2))


def build_medial(domain: LatticeDomain) -> MedialGraph:
    white = domain.white_faces()
    edges = []
    for s in domain.sites:
        for f in faces_around(s):
            if f in white:
                edges.append(medial_edge(s, f))
    e_a = e_b = None
    outer = set()
    if isinstance(domain, DobrushinDomain):
        e_a = medial_edge(domain.a, domain.e_a_face)
        e_b = medial_edge(domain.b, domain.e_b_face)
        # e_a enters the domain from outside, e_b leaves it
        outer = {e_a.tail, e_b.head}
    edges.sort(key=lambda e: (e.tail[1] + e.head[1], e.tail[0] + e.head[0], e.direction))
    incoming: dict = {}
    outgoing: dict = {}
    for e in edges:
        outgoing[e.tail] = outgoing.get(e.tail, ()) + (e,)
        incoming[e.head] = incoming.get(e.head, ()) + (e,)
    vertices = tuple(sorted((set(incoming) | set(outgoing)) - outer, key=lambda v: (v[1], v[0])))
    g = MedialGraph(domain, tuple(edges), vertices, incoming, outgoing, e_a, e_b)
    _check_medial(g)
    return g


def _check_medial(g: MedialGraph) -> None:
    special = {g.e_a, g.e_b} - {None}
    n_three = 0
    for v in g.vertices:
        n_in = len([e for e in g.incoming.get(v, ()) if e not in special])
        n_out = len([e for e in g.outgoing.get(v, ()) if e not in special])
        deg = n_in + n_out
        if deg == 3:
            n_three += 1
        elif not (n_in == n_out and deg in (2, 4)):
            raise AssertionError(f"medial vertex {v} has in/out degree {n_in}/{n_out}")
        if len(g.incoming.get(v, ())) != len(g.outgoing.get(v, ())):
            raise AssertionError(f"medial vertex {v} is not balanced")
    if special and n_three != 2:
        raise AssertionError(f"expected two degree-3 medial vertices, found {n_three}")
    if isinstance(g.domain, DobrushinDomain):
        # degree-2 vertices must be exactly the midpoints of inert bonds
        inert = {b for b in g.domain.inert_bonds}
        for v in g.vertices:
            bond = MedialGraph.vertex_bond(v)
            in_graph = bond in g.domain.bond_index
            if in_graph and (g.degree(v, include_special=True) == 2) != (bond in inert):
                raise AssertionError(f"bond {bond} inert status disagrees with medial degree")


@dataclass(frozen=True)
class ModelParams:
    p: float
    q: float
    x: float
    alpha: float
    beta: float
    mass: float

    @property
    def phase(self) -> complex:
        """e^{i alpha}."""
        return complex(math.cos(self.alpha), math.sin(self.alpha))


def params_from_p(p: float) -> ModelParams:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    x = p / ((1.0 - p) * SQRT2)
    # e^{i alpha} = (w + x)/(w x + 1), w = e^{i pi/4}; multiplying by the conjugate
    # of the denominator gives 2x + (1 + x^2)/sqrt2 + i(1 - x^2)/sqrt2.  1 - x is
    # written through p_sd - p so that alpha vanishes exactly at p_sd.
    one_minus_x = (1.0 + SQRT2) * (P_SD - p) / ((1.0 - p) * SQRT2)
    im = one_minus_x * (1.0 + x) / SQRT2
    re = 2.0 * x + (1.0 + x * x) / SQRT2
    alpha = math.atan2(im, re) % (2 * math.pi)
    beta = -0.5 * math.log1p(-p)
    # cos 2alpha = (re - im)(re + im)/(re^2 + im^2) written as a product of positive
    # factors; cos(2 * alpha) itself loses digits as alpha -> pi/4
    s = x * x + SQRT2 * x + 1.0
    mass = 1.0 if alpha == 0 else 2.0 * x * (x + SQRT2) * (SQRT2 * x + 1.0) / (s * s)
    return ModelParams(p=p, q=2.0, x=x, alpha=alpha, beta=beta, mass=mass)


def p_from_beta(beta: float) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    return -math.expm1(-2.0 * beta)


def params_from_beta(beta: float) -> ModelParams:
    return params_from_p(p_from_beta(beta))


def dual_p(p: float, q: float = 2.0) -> float:
    if not 0.0 <= p <= 1.0 or q <= 0:
        raise ValueError("need 0 <= p <= 1 and q > 0")
    return (1.0 - p) * q / ((1.0 - p) * q + p)


def p_self_dual(q: float = 2.0) -> float:
    return math.sqrt(q) / (1.0 + math.sqrt(q))
