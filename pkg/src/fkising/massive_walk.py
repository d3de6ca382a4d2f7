"""Massive Laplacian stencils, massive Green functions, the random-walk
representation of the bulk observable, and the correlation-length rate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exact_loop import Observable
from .lattice import (
    BETA_C,
    DobrushinDomain,
    LatticeDomain,
    ModelParams,
    SiteCoord,
    face_corners,
    in_wedge_complement,
    medial_edge,
    nw_edge,
)
from .relations import ResidualReport

ROLES = ("interior", "horizontal_free_boundary", "vertical_free_boundary", "corner_w", "wired", "source")

# Payoff collected by the walk when it is absorbed at the origin, keyed by the
# neighbour of the origin it jumps from.  Derived from the two values of F(e0):
# these are the values of F(0) that make the bulk stencil hold at each neighbour.
WALK_PAYOFF = {"E": 1.0, "N": -1.0, "W": -1.0, "S": 1.0}
_NEIGHBOR_NAMES = {(1, 0): "E", (0, 1): "N", (-1, 0): "W", (0, -1): "S"}


def derivation_vertices(site) -> tuple[tuple[int, int], ...]:
    """The six medial vertices whose relations combine into the stencil at ``site``.

    These are the N, W, S, E vertices of the site, the N vertex of its east
    neighbour and the E vertex of its north neighbour (doubled coordinates).
    """
    x, y = 2 * site[0], 2 * site[1]
    return ((x, y + 1), (x - 1, y), (x, y - 1), (x + 1, y), (x + 2, y + 1), (x + 1, y + 2))


def _edges_at(edges_by_vertex: dict, v) -> frozenset:
    return edges_by_vertex.get(v, frozenset())


def _incidence(edges) -> dict:
    inc: dict = {}
    for e in edges:
        inc.setdefault(e.tail, set()).add(e)
        inc.setdefault(e.head, set()).add(e)
    return {v: frozenset(s) for v, s in inc.items()}


def _full_plane_edges(v) -> frozenset:
    x, y = v
    if x % 2:
        sites = (SiteCoord((x - 1) // 2, y // 2), SiteCoord((x + 1) // 2, y // 2))
        faces = ((x, y + 1), (x, y - 1))
    else:
        sites = (SiteCoord(x // 2, (y - 1) // 2), SiteCoord(x // 2, (y + 1) // 2))
        faces = ((x + 1, y), (x - 1, y))
    return frozenset(medial_edge(s, f) for s in sites for f in faces)


@dataclass
class StencilField:
    """Role tag per site, optional values, and the wedge vertex for wedge geometries."""

    region: dict
    values: dict = field(default_factory=dict)
    w: SiteCoord | None = None

    def __post_init__(self):
        bad = {s: r for s, r in self.region.items() if r not in ROLES}
        if bad:
            raise ValueError(f"unknown role tags {bad}")


def _stencil_value(F, X, params: ModelParams) -> complex:
    x1, x2 = X
    return (params.mass / 4) * (F((x1 - 1, x2)) + F((x1, x2 - 1)) + F((x1 + 1, x2)) + F((x1, x2 + 1))) - F(X)


def bulk_stencil_residual(obs: Observable, params: ModelParams, region=None) -> ResidualReport:
    """|(cos 2a / 4) sum_nbrs F - F(X)| at eligible sites of ``region``.

    A site is eligible when its six derivation vertices carry the full set of
    four medial edges, none of them is an endpoint of e0, and F is known on the
    north-west sides of the site and its four neighbours.
    """
    inc = _incidence(obs.edges)
    banned = set()
    origin = None
    if obs.e0 is not None:
        banned = {obs.e0.tail, obs.e0.head}
        origin = obs.e0.black
    if region is None:
        region = sorted({e.black for e in obs.edges})
    res, excluded = {}, 0
    for X in region:
        X = SiteCoord(*X)
        need = [X] + list(X.neighbors())
        ok = X != origin and all(nw_edge(s) in obs for s in need)
        if ok:
            for v in derivation_vertices(X):
                if v in banned or _edges_at(inc, v) != _full_plane_edges(v):
                    ok = False
                    break
        if not ok:
            excluded += 1
            continue
        res[tuple(X)] = abs(_stencil_value(obs.at_site, X, params))
    return ResidualReport.from_residuals("bulk_stencil_residual", res, excluded)


def wedge_white(face, w) -> bool:
    """White faces of the infinite wedge complement T(w): interior faces and faces on its free side."""
    corners = face_corners(face)
    inside = [in_wedge_complement(c, w) for c in corners]
    if all(inside):
        return True
    upper = [c.x1 > w[0] and c.x2 > w[1] for c in corners]
    return any(upper) and any(inside)


def _wedge_reference_edges(v, w) -> frozenset:
    return frozenset(e for e in _full_plane_edges(v)
                     if in_wedge_complement(e.black, w) and wedge_white(e.white, w))


def wedge_roles(domain: DobrushinDomain, w) -> StencilField:
    """Role of each site of a wedge truncation, read off the infinite geometry of T(w)."""
    w = SiteCoord(*w)
    wired = set(domain.wired_arc)
    region = {}
    for s in domain.sites:
        if s in wired:
            region[s] = "wired"
        elif s == w:
            region[s] = "corner_w"
        elif s.x2 == w.x2 and s.x1 > w.x1:
            region[s] = "horizontal_free_boundary"
        elif s.x1 == w.x1 and s.x2 > w.x2:
            region[s] = "vertical_free_boundary"
        else:
            region[s] = "interior"
    return StencilField(region, w=w)


def wedge_stencil(role: str, params: ModelParams):
    """Neighbour coefficients (W, S, E, N) of g + Delta g for a site of the given role.

    The coefficient of E and N at the wedge vertex is cos(pi/4 + alpha)/2; this is
    the value under which the exact observable satisfies the relation.
    """
    a, m = params.alpha, params.mass
    cp, cm = math.cos(math.pi / 4 - a), math.cos(math.pi / 4 + a)
    if role == "interior":
        return (m / 4, m / 4, m / 4, m / 4)
    if role == "horizontal_free_boundary":
        return (m / (2 * (1 + cp)), m / (2 * (1 + cp)), cm / (1 + cp), 0.0)
    if role == "vertical_free_boundary":
        return (m / (2 * (1 + cp)), m / (2 * (1 + cp)), 0.0, cm / (1 + cp))
    if role == "corner_w":
        return (m / 4, m / 4, cm / 2, cm / 2)
    raise ValueError(f"no stencil equation for role {role!r}")


def wedge_stencil_residual(obs: Observable, params: ModelParams, wedge: StencilField) -> ResidualReport:
    """Residual of the wedge massive Laplacian at sites whose local geometry matches T(w)."""
    if wedge.w is None:
        raise ValueError("wedge roles need the wedge vertex w")
    inc = _incidence(obs.edges)
    res, excluded = {}, 0
    steps = ((-1, 0), (0, -1), (1, 0), (0, 1))
    for X, role in sorted(wedge.region.items()):
        if role is None:
            raise ValueError(f"site {X} has no role tag")
        if role in ("wired", "source"):
            continue
        coeffs = wedge_stencil(role, params)
        X = SiteCoord(*X)
        need = [X] + [X + st for st, c in zip(steps, coeffs) if c != 0.0]
        ok = all(nw_edge(s) in obs for s in need)
        if ok:
            for v in derivation_vertices(X):
                if _edges_at(inc, v) != _wedge_reference_edges(v, wedge.w):
                    ok = False
                    break
        if not ok:
            excluded += 1
            continue
        val = sum(c * obs.at_site(X + st) for st, c in zip(steps, coeffs) if c != 0.0)
        res[(tuple(X), role)] = abs(val - obs.at_site(X))
    return ResidualReport.from_residuals("wedge_stencil_residual", res, excluded)


# ---------------------------------------------------------------------------
# Green function


@dataclass
class GreenField:
    mass: float
    source: SiteCoord
    radius: int
    tail_bound: float
    grid: np.ndarray  # grid[i, j] is the value at source + (i - radius, j - radius)
    iterations: int = 0
    defect: float = 0.0

    def value(self, site) -> float:
        dx, dy = site[0] - self.source[0], site[1] - self.source[1]
        if max(abs(dx), abs(dy)) > self.radius:
            return 0.0
        return float(self.grid[dx + self.radius, dy + self.radius])

    @property
    def values(self) -> dict:
        r = self.radius
        idx = np.argwhere(self.grid > 0)
        return {SiteCoord(int(i) - r + self.source[0], int(j) - r + self.source[1]): float(self.grid[i, j])
                for i, j in idx}

    def rate_series(self, direction=(1, 0), ns=None) -> list[tuple[int, float]]:
        """Pairs (n, -(1/n) ln G(source, source + n*direction))."""
        d = max(abs(direction[0]), abs(direction[1]))
        ns = range(1, self.radius // max(d, 1) + 1) if ns is None else ns
        out = []
        for n in ns:
            g = self.value((self.source[0] + n * direction[0], self.source[1] + n * direction[1]))
            if g > 0:
                out.append((int(n), -math.log(g) / n))
        return out

    def write_csv(self, path, max_distance: int | None = None) -> None:
        r = self.radius if max_distance is None else min(max_distance, self.radius)
        with open(path, "w") as fh:
            fh.write(f"# mass={self.mass:.17g} radius={self.radius} tail_bound={self.tail_bound:.17g}\n")
            fh.write("x,y,value\n")
            for i in range(-r, r + 1):
                for j in range(-r, r + 1):
                    v = self.grid[i + self.radius, j + self.radius]
                    fh.write(f"{self.source[0] + i},{self.source[1] + j},{v:.17g}\n")


def required_radius(mass: float, tol: float) -> int:
    """Smallest radius with m^radius / (1 - m) <= tol."""
    return int(math.ceil(math.log(tol * (1 - mass)) / math.log(mass)))


def green_function(mass: float, source=(0, 0), radius: int = 200, tol: float = 1e-12,
                   rtol: float = 1e-13, max_iter: int = 200_000) -> GreenField:
    """G(source, y) = sum_n m^n P^source(X_n = y) on the box of the given radius.

    Jacobi iteration from zero reproduces the partial sums of the series, so
    every iterate is a lower bound with positive terms; iteration stops when the
    geometric tail m^(k+1)/(1-m) is below ``tol`` and the largest relative
    change on the nonzero sites is below ``rtol``.  Outside the box the field is
    zero, which is reported through ``tail_bound = m^radius/(1-m)``.
    """
    if not 0.0 < mass < 1.0:
        raise ValueError(f"mass must lie in (0, 1) (the series diverges for m >= 1); got {mass}")
    tail = mass ** radius / (1 - mass)
    if tail > tol:
        raise ValueError(f"radius {radius} gives tail bound {tail:.3g} > tol {tol:.3g}; "
                         f"use radius >= {required_radius(mass, tol)}")
    n = 2 * radius + 1
    g = np.zeros((n, n))
    new = np.empty_like(g)
    q = mass / 4
    it = 0
    while it < max_iter:
        it += 1
        new.fill(0.0)
        new[1:, :] += g[:-1, :]
        new[:-1, :] += g[1:, :]
        new[:, 1:] += g[:, :-1]
        new[:, :-1] += g[:, 1:]
        new *= q
        new[radius, radius] += 1.0
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(new > 0, (new - g) / new, 0.0)
        g, new = new, g
        if mass ** (it + 1) / (1 - mass) <= tol and it > 2 * radius and rel.max() <= rtol:
            break
    else:
        raise RuntimeError("Green iteration did not converge")
    # defect of (I - mP) G = delta on the box
    lap = np.zeros_like(g)
    lap[1:, :] += g[:-1, :]
    lap[:-1, :] += g[1:, :]
    lap[:, 1:] += g[:, :-1]
    lap[:, :-1] += g[:, 1:]
    resid = g - q * lap
    resid[radius, radius] -= 1.0
    return GreenField(mass, SiteCoord(*source), radius, tail, g, it, float(np.abs(resid).max()))


def green_series_quadrature(mass: float, n: int) -> float:
    """G(0, (n, 0)) by one-dimensional quadrature of a positive integrand.

    Summing the walk over vertical displacements leaves
    (1/2pi) int (2/m) r(t)^n / sqrt(A^2 - 1) dt with A = 2/m - cos t and
    r = A - sqrt(A^2 - 1); every term is positive, so the result keeps full
    relative accuracy far into the tail.
    """
    from scipy import integrate

    def f(t):
        A = 2.0 / mass - math.cos(t)
        s = math.sqrt(A * A - 1.0)
        return (2.0 / mass) * math.exp(n * math.log(A - s)) / s

    val, _ = integrate.quad(f, 0.0, math.pi, epsabs=0.0, epsrel=1e-13, limit=500)
    return val / math.pi


# ---------------------------------------------------------------------------
# rate function


@dataclass(frozen=True)
class RateQuery:
    beta: float
    direction: SiteCoord

    def __post_init__(self):
        object.__setattr__(self, "direction", SiteCoord(*self.direction))
        if self.direction == (0, 0):
            raise ValueError("direction must be nonzero")
        if not self.beta < BETA_C:
            raise ValueError(f"rate is defined for beta < beta_c = {BETA_C:.15g}; got beta = {self.beta}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @classmethod
    def from_p(cls, p: float, direction) -> "RateQuery":
        return cls(-0.5 * math.log1p(-p), direction)


@dataclass(frozen=True)
class RateResult:
    beta: float
    direction: SiteCoord
    s: float
    rate: float


def _excess(beta: float) -> float:
    """sinh 2b + 1/sinh 2b - 2 = (sinh 2b - 1)^2 / sinh 2b, without cancellation near beta_c."""
    diff = 2.0 * math.cosh(beta + BETA_C) * math.sinh(beta - BETA_C)
    return diff * diff / math.sinh(2 * beta)


def _sqrt1p_minus1(t: float) -> float:
    return t * t / (math.sqrt(1.0 + t * t) + 1.0)


def solve_rate(query: RateQuery) -> RateResult:
    """Bisection for s >= 0 in sqrt(1+(s a1)^2) + sqrt(1+(s a2)^2) = sinh 2b + 1/sinh 2b."""
    a1, a2 = abs(query.direction.x1), abs(query.direction.x2)
    target = _excess(query.beta)

    def g(s):
        return _sqrt1p_minus1(s * a1) + _sqrt1p_minus1(s * a2) - target

    lo, hi = 0.0, 1.0
    while g(hi) < 0:
        hi *= 2.0
    # shrink the bracket from above first so tiny roots keep relative precision
    while hi > 1e-300 and g(hi / 2) > 0:
        hi /= 2.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * max(hi, 1e-300) and hi - lo < 1e-14:
            break
    s = 0.5 * (lo + hi)
    rate = a1 * math.asinh(s * a1) + a2 * math.asinh(s * a2)
    return RateResult(query.beta, query.direction, s, rate)


def rate_function(query: RateQuery) -> float:
    return solve_rate(query).rate


def rate_for_p(p: float, direction=(1, 0)) -> float:
    return rate_function(RateQuery.from_p(p, direction))


# ---------------------------------------------------------------------------
# walk representation


def walk_representation(box: LatticeDomain, params: ModelParams, target, tol: float = 1e-12,
                        origin=(0, 0), return_field: bool = False):
    """E^target[F(X_tau) m^tau] for the walk with weights m/4 killed off the box.

    The walk is absorbed at the origin with the payoff of ``WALK_PAYOFF`` for the
    neighbour it jumps from, and killed when it steps outside the box.  The
    absorbing linear system is solved directly; ``tol`` bounds the relative
    residual of the solve.
    """
    m = params.mass
    if not 0 < m < 1:
        raise ValueError(f"walk representation needs mass in (0, 1); got {m}")
    origin = SiteCoord(*origin)
    target = SiteCoord(*target)
    if target == origin:
        raise ValueError("target must differ from the origin")
    sites = [s for s in box.sites if s != origin]
    if target not in box.site_set or origin not in box.site_set:
        raise ValueError("box must contain the origin and the target")
    idx = {s: i for i, s in enumerate(sites)}
    rows, cols, vals = [], [], []
    rhs = np.zeros(len(sites))
    for s, i in idx.items():
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        for nb in s.neighbors():
            if nb == origin:
                rhs[i] += (m / 4) * WALK_PAYOFF[_NEIGHBOR_NAMES[tuple(s - origin)]]
            elif nb in idx:
                rows.append(i)
                cols.append(idx[nb])
                vals.append(-m / 4)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(sites), len(sites)))
    u = spla.spsolve(A.tocsc(), rhs)
    defect = np.abs(A @ u - rhs).max()
    if defect > tol * max(1.0, np.abs(u).max()):
        raise RuntimeError(f"walk system solved only to residual {defect:.3g}")
    if return_field:
        return {s: float(u[i]) for s, i in idx.items()}
    return complex(u[idx[target]])


def centered_box(radius: int) -> LatticeDomain:
    from .lattice import build_box
    return build_box(-radius, radius, -radius, radius)
