"""Swendsen-Wang sampling of the Ising model and FK estimators through the
Edwards-Sokal coupling.

Random numbers come from numpy's counter-based Philox generator.  Chain ``c``
of a run seeded with ``seed`` uses ``SeedSequence(seed, spawn_key=(*stream, c))``
where ``stream`` distinguishes independent runs sharing a seed, so
streams are independent across chains and reproducible from (seed, chain).
Uniforms are drawn in blocks of sweeps and handed to a compiled kernel.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._kernels import _find, _union
from .exact_loop import BondConfig
from .lattice import SiteCoord, build_box, p_from_beta

RNG_NAME = "numpy Philox4x64 via SeedSequence(seed, spawn_key=(*stream, chain))"
BOUNDARY_CONDITIONS = ("free", "plus", "strip_dobrushin")


def make_rng(seed: int, chain: int = 0, stream: tuple = ()) -> np.random.Generator:
    key = tuple(int(k) for k in stream) + (int(chain),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass
class SpinConfig:
    """Spins on the box ``origin + [0, nx) x [0, ny)``; ``spins[i, j]`` sits at origin + (i, j)."""

    spins: np.ndarray
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        self.spins = np.asarray(self.spins, dtype=np.int8)
        if self.spins.ndim != 2 or not np.isin(self.spins, (-1, 1)).all():
            raise ValueError("spins must be a 2D array of +1/-1")

    @property
    def shape(self) -> tuple[int, int]:
        return self.spins.shape

    def __getitem__(self, site) -> int:
        return int(self.spins[site[0] - self.origin[0], site[1] - self.origin[1]])


@dataclass
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    autocorrelation_time_estimate: float = 0.5

    def __post_init__(self):
        if self.std_error < 0 or self.n_samples < 1:
            raise ValueError("std_error must be >= 0 and n_samples >= 1")


@dataclass(frozen=True)
class McLattice:
    """Box geometry flattened for the kernels; site (i, j) has index i*ny + j."""

    shape: tuple[int, int]
    bc: str
    bond_u: np.ndarray
    bond_v: np.ndarray
    ghost_site: np.ndarray  # one entry per bond to the + exterior (plus bc)
    pinned: np.ndarray  # sites wired to the + exterior (strip bc)

    @property
    def n_sites(self) -> int:
        return self.shape[0] * self.shape[1]

    def index(self, i: int, j: int) -> int:
        return i * self.shape[1] + j


def make_lattice(shape, bc: str = "free") -> McLattice:
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    nx, ny = shape
    if nx < 1 or ny < 1:
        raise ValueError("box must be non-empty")
    idx = np.arange(nx * ny).reshape(nx, ny)
    us = [idx[:-1, :].ravel(), idx[:, :-1].ravel()]
    vs = [idx[1:, :].ravel(), idx[:, 1:].ravel()]
    bu, bv = np.concatenate(us), np.concatenate(vs)
    ghost = np.zeros(0, dtype=np.int64)
    pinned = np.zeros(0, dtype=np.int64)
    if bc == "plus":
        ghost = np.concatenate([idx[0, :], idx[-1, :], idx[:, 0], idx[:, -1]]).astype(np.int64)
    elif bc == "strip_dobrushin":
        pinned = idx[:, 0].astype(np.int64).copy()
        # bonds inside the wired bottom row never change anything
        keep = ~np.isin(bu, pinned) | ~np.isin(bv, pinned)
        bu, bv = bu[keep], bv[keep]
    return McLattice((nx, ny), bc, bu.astype(np.int64), bv.astype(np.int64), ghost, pinned)


@njit(cache=True)
def _sw_sweep(spins, bond_u, bond_v, ghost_site, pinned, p, ub, ug, us, parent):
    n = spins.shape[0]
    g = n
    for i in range(n + 1):
        parent[i] = i
    for k in range(pinned.shape[0]):
        _union(parent, pinned[k], g)
    for b in range(bond_u.shape[0]):
        u = bond_u[b]
        v = bond_v[b]
        if spins[u] == spins[v] and ub[b] < p:
            _union(parent, u, v)
    for k in range(ghost_site.shape[0]):
        s = ghost_site[k]
        if spins[s] == 1 and ug[k] < p:
            _union(parent, s, g)
    for i in range(n + 1):
        parent[i] = _find(parent, i)
    rg = parent[g]
    for i in range(n):
        r = parent[i]
        if r == rg:
            spins[i] = 1
        elif us[r] < 0.5:
            spins[i] = 1
        else:
            spins[i] = -1
    return rg


@njit(cache=True)
def _sw_block(spins, bond_u, bond_v, ghost_site, pinned, p, UB, UG, US, parent,
              pair_u, pair_v, pair_group, conn_out, spin_out, top_sites, cross_out,
              code_sites, code_out, t0):
    for t in range(UB.shape[0]):
        rg = _sw_sweep(spins, bond_u, bond_v, ghost_site, pinned, p, UB[t], UG[t], US[t], parent)
        row = t0 + t
        for k in range(pair_u.shape[0]):
            u = pair_u[k]
            v = pair_v[k]
            grp = pair_group[k]
            if parent[u] == parent[v]:
                conn_out[row, grp] += 1.0
            spin_out[row, grp] += spins[u] * spins[v]
        c = 0
        for k in range(top_sites.shape[0]):
            if parent[top_sites[k]] == rg:
                c += 1
        if top_sites.shape[0] > 0:
            cross_out[row] = c
        code = 0
        for k in range(code_sites.shape[0]):
            if spins[code_sites[k]] == 1:
                code |= 1 << k
        if code_sites.shape[0] > 0:
            code_out[row] = code


@dataclass
class ChainOutput:
    conn: np.ndarray  # [sweep, group] mean connection indicator over the group's pairs
    spin: np.ndarray  # [sweep, group] mean spin product
    cross: np.ndarray  # [sweep] mean crossing indicator over top sites
    codes: np.ndarray  # [sweep] spin-state code
    burn_in: int
    spins: np.ndarray
    meta: dict = field(default_factory=dict)


def _initial_spins(lat: McLattice, rng) -> np.ndarray:
    spins = np.where(rng.random(lat.n_sites) < 0.5, 1, -1).astype(np.int8)
    spins[lat.pinned] = 1
    return spins


def run_chain(lat: McLattice, p: float, n_samples: int, seed: int, chain: int = 0,
              burn_in: int | None = None, pairs=None, groups=None, n_groups: int = 0,
              top_sites=None, code_sites=None, block: int = 64, spins=None,
              stream: tuple = ()) -> ChainOutput:
    """Run burn-in plus ``n_samples`` measured sweeps of one chain."""
    rng = make_rng(seed, chain, stream)
    pair_u = np.zeros(0, np.int64) if pairs is None else np.ascontiguousarray(pairs[:, 0], dtype=np.int64)
    pair_v = np.zeros(0, np.int64) if pairs is None else np.ascontiguousarray(pairs[:, 1], dtype=np.int64)
    pair_g = np.zeros(0, np.int64) if groups is None else np.asarray(groups, dtype=np.int64)
    top = np.zeros(0, np.int64) if top_sites is None else np.asarray(top_sites, dtype=np.int64)
    codes_at = np.zeros(0, np.int64) if code_sites is None else np.asarray(code_sites, dtype=np.int64)
    spins = _initial_spins(lat, rng) if spins is None else spins.astype(np.int8).copy()
    parent = np.empty(lat.n_sites + 1, dtype=np.int64)
    nb, ng, ns = lat.bond_u.shape[0], lat.ghost_site.shape[0], lat.n_sites

    def sweeps(n, conn, spin, cross, codes):
        done = 0
        while done < n:
            m = min(block, n - done)
            UB = rng.random((m, nb))
            UG = rng.random((m, ng))
            US = rng.random((m, ns))
            _sw_block(spins, lat.bond_u, lat.bond_v, lat.ghost_site, lat.pinned, p, UB, UG, US, parent,
                      pair_u, pair_v, pair_g, conn, spin, top, cross, codes_at, codes, done)
            done += m

    if burn_in is None:
        # pilot run: estimate the autocorrelation time of the magnetisation-like
        # observables measured below and burn in for max(100, 10 tau) sweeps
        pilot = 200
        pc = np.zeros((pilot, max(n_groups, 1)))
        ps = np.zeros_like(pc)
        pcross = np.zeros(pilot)
        pcodes = np.zeros(pilot, np.int64)
        sweeps(pilot, pc, ps, pcross, pcodes)
        series = pc.sum(axis=1) if n_groups else pcross
        tau = integrated_autocorrelation(series)
        extra = max(100, int(math.ceil(10 * tau))) - pilot
        if extra > 0:
            z = np.zeros((extra, max(n_groups, 1)))
            sweeps(extra, z, z.copy(), np.zeros(extra), np.zeros(extra, np.int64))
        burn_in = pilot + max(extra, 0)
    else:
        z = np.zeros((burn_in, max(n_groups, 1)))
        sweeps(burn_in, z, z.copy(), np.zeros(burn_in), np.zeros(burn_in, np.int64))
    conn = np.zeros((n_samples, max(n_groups, 1)))
    spin = np.zeros_like(conn)
    cross = np.zeros(n_samples)
    codes = np.zeros(n_samples, np.int64)
    sweeps(n_samples, conn, spin, cross, codes)
    if n_groups:
        counts = np.bincount(pair_g, minlength=n_groups).astype(float)
        conn /= counts
        spin /= counts
    if top.shape[0]:
        cross /= top.shape[0]
    meta = {"rng": RNG_NAME, "seed": seed, "chain": chain, "stream": list(stream), "burn_in": burn_in, "p": p,
            "shape": list(lat.shape), "bc": lat.bc, "n_samples": n_samples}
    return ChainOutput(conn, spin, cross, codes, burn_in, spins.copy(), meta)


def _run_chain_kw(kw):
    return run_chain(**kw)


def run_chains(n_chains: int, workers: int = 1, **kw) -> list[ChainOutput]:
    """Chains 0..n_chains-1 with disjoint streams; results are in chain order."""
    jobs = [dict(kw, chain=c) for c in range(n_chains)]
    if workers <= 1 or n_chains == 1:
        return [run_chain(**j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, n_chains)) as ex:
        return list(ex.map(_run_chain_kw, jobs))


# ---------------------------------------------------------------------------
# statistics


def integrated_autocorrelation(x: np.ndarray, c: float = 6.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window (tau = 1/2 for white noise)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4 or x.var() == 0:
        return 0.5
    y = x - x.mean()
    f = np.fft.rfft(y, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 0.5
    for w in range(1, n):
        tau += acf[w]
        if w >= c * tau:
            break
    return max(tau, 0.5)


def estimate_from_series(x: np.ndarray, n_batches: int = 50) -> McEstimate:
    """Mean with a batch-means standard error."""
    x = np.asarray(x, dtype=float)
    n = x.size
    tau = integrated_autocorrelation(x)
    if n < 2 * n_batches:
        se = x.std(ddof=1) * math.sqrt(2 * tau / n) if n > 1 else 0.0
        return McEstimate(float(x.mean()), float(se), n, tau)
    size = n // n_batches
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    se = means.std(ddof=1) / math.sqrt(n_batches)
    return McEstimate(float(x.mean()), float(se), n, tau)


def combine_estimates(estimates) -> McEstimate:
    """Inverse-variance free average of independent chains with equal sample counts."""
    estimates = list(estimates)
    k = len(estimates)
    mean = sum(e.mean for e in estimates) / k
    se = math.sqrt(sum(e.std_error ** 2 for e in estimates)) / k
    n = sum(e.n_samples for e in estimates)
    tau = sum(e.autocorrelation_time_estimate for e in estimates) / k
    return McEstimate(mean, se, n, tau)


# ---------------------------------------------------------------------------
# public operations


def sw_step(spins: SpinConfig, beta: float, bc: str, rng: np.random.Generator) -> SpinConfig:
    """One Swendsen-Wang update at inverse temperature ``beta``."""
    lat = make_lattice(spins.shape, bc)
    p = 0.0 if beta == 0 else (1.0 if math.isinf(beta) else p_from_beta(beta))
    flat = spins.spins.ravel().astype(np.int8).copy()
    if lat.pinned.size:
        flat[lat.pinned] = 1
    parent = np.empty(lat.n_sites + 1, dtype=np.int64)
    _sw_sweep(flat, lat.bond_u, lat.bond_v, lat.ghost_site, lat.pinned, p,
              rng.random(lat.bond_u.shape[0]), rng.random(lat.ghost_site.shape[0]),
              rng.random(lat.n_sites), parent)
    return SpinConfig(flat.reshape(spins.shape), spins.origin)


def fk_from_spins(spins: SpinConfig, p: float, rng: np.random.Generator) -> BondConfig:
    """Open each bond joining equal spins independently with probability p (free boundary)."""
    nx, ny = spins.shape
    x0, y0 = spins.origin
    box = build_box(x0, x0 + nx - 1, y0, y0 + ny - 1)
    mask = 0
    u = rng.random(len(box.bonds))
    for j, (a, b) in enumerate(box.bonds):
        if spins[a] == spins[b] and u[j] < p:
            mask |= 1 << j
    return BondConfig(box.bonds, mask)


def _pairs_for(box_size: int, separations, directions, margin_from=None):
    """Site pairs (x, x + n d) with both ends at distance >= |n d| from the box boundary."""
    L = box_size
    pairs, groups = [], []
    idx = np.arange(L * L).reshape(L, L)
    for g, n in enumerate(separations):
        count = 0
        for d in directions:
            a = (n * d[0], n * d[1])
            margin = math.ceil(math.hypot(*a)) if margin_from is None else margin_from
            for i in range(margin, L - margin):
                for j in range(margin, L - margin):
                    i2, j2 = i + a[0], j + a[1]
                    if margin <= i2 < L - margin and margin <= j2 < L - margin:
                        pairs.append((idx[i, j], idx[i2, j2]))
                        groups.append(g)
                        count += 1
        if count == 0:
            raise ValueError(f"box {L} leaves no pair at separation {n} with margin >= |a|")
    return np.array(pairs, dtype=np.int64), np.array(groups, dtype=np.int64)


def two_point_profile(box_size: int, p: float, separations, n_samples: int, seed: int,
                      burn_in: int | None = None, directions=((1, 0), (0, 1)), n_chains: int = 1,
                      workers: int = 1):
    """phi^0(0 <-> n d) for each n, averaged over translates and the given lattice directions.

    Returns ``(estimates, meta)`` with ``estimates[n]`` an McEstimate.
    """
    lat = make_lattice((box_size, box_size), "free")
    pairs, groups = _pairs_for(box_size, separations, directions)
    outs = run_chains(n_chains, workers, lat=lat, p=p, n_samples=n_samples, seed=seed, burn_in=burn_in,
                      pairs=pairs, groups=groups, n_groups=len(separations))
    est = {}
    for g, n in enumerate(separations):
        est[n] = combine_estimates(estimate_from_series(o.conn[:, g]) for o in outs)
    meta = dict(outs[0].meta, n_chains=n_chains, directions=[list(d) for d in directions],
                pairs_per_separation={int(n): int((groups == g).sum()) for g, n in enumerate(separations)})
    return est, meta


def estimate_two_point(box_size: int, p: float, a, n_samples: int, burn_in: int | None, seed: int) -> McEstimate:
    """phi^0(0 <-> a) from free-boundary Swendsen-Wang samples, averaged over translates."""
    a = SiteCoord(*a)
    if a == (0, 0):
        return McEstimate(1.0, 0.0, max(n_samples, 1), 0.5)
    norm = math.hypot(*a)
    lat = make_lattice((box_size, box_size), "free")
    margin = math.ceil(norm)
    if box_size - 2 * margin <= max(abs(a.x1), abs(a.x2)):
        raise ValueError(f"box {box_size} cannot keep a pair at separation {tuple(a)} "
                         f"a distance >= {norm:.3g} from the boundary")
    pairs, groups = _pairs_for(box_size, [1], [tuple(a)])
    out = run_chain(lat, p, n_samples, seed, 0, burn_in, pairs, groups, 1)
    return estimate_from_series(out.conn[:, 0])


def spin_and_connection(box_size: int, p: float, pairs_xy, n_samples: int, seed: int,
                        burn_in: int | None = None, origin=(0, 0)):
    """E[s_x s_y] and P(x <-> y) from the same free-boundary chain, for each (x, y).

    Coordinates are relative to ``origin``, the lower-left corner of the box.
    """
    lat = make_lattice((box_size, box_size), "free")
    idx = lambda s: lat.index(s[0] - origin[0], s[1] - origin[1])  # noqa: E731
    pairs = np.array([(idx(x), idx(y)) for x, y in pairs_xy], dtype=np.int64)
    groups = np.arange(len(pairs_xy), dtype=np.int64)
    out = run_chain(lat, p, n_samples, seed, 0, burn_in, pairs, groups, len(pairs_xy))
    res = []
    for g in range(len(pairs_xy)):
        res.append((estimate_from_series(out.spin[:, g]), estimate_from_series(out.conn[:, g]),
                    estimate_from_series(out.spin[:, g] - out.conn[:, g])))
    return res


def estimate_strip_crossing(height: int, halfwidth: int, p: float, n_samples: int, seed: int,
                            burn_in: int | None = None, average_width: int | None = None,
                            n_chains: int = 1, workers: int = 1) -> McEstimate:
    """P(top site connected to the wired bottom) in [-hw, hw] x [0, height].

    The indicator is averaged over top sites with |x| <= ``average_width``
    (default halfwidth // 2), which leaves the mean unchanged up to boundary
    effects that are exponentially small in the distance to the free sides.
    Each height draws from its own stream, so estimates at different heights
    with the same seed are independent.
    """
    if height == 0:
        return McEstimate(1.0, 0.0, max(n_samples, 1), 0.5)
    if height < 0 or halfwidth < 1:
        raise ValueError("need height >= 0 and halfwidth >= 1")
    avg = halfwidth // 2 if average_width is None else average_width
    lat = make_lattice((2 * halfwidth + 1, height + 1), "strip_dobrushin")
    top = [lat.index(halfwidth + x, height) for x in range(-avg, avg + 1)]
    outs = run_chains(n_chains, workers, lat=lat, p=p, n_samples=n_samples, seed=seed, burn_in=burn_in,
                      top_sites=top, stream=(height,))
    return combine_estimates(estimate_from_series(o.cross) for o in outs)


def state_histogram(shape, beta: float, bc: str, n_samples: int, seed: int, burn_in: int = 100):
    """Counts of each spin state (bit k = site k is +) over ``n_samples`` sweeps."""
    lat = make_lattice(shape, bc)
    if lat.n_sites > 20:
        raise ValueError("state histograms are limited to 20 sites")
    out = run_chain(lat, p_from_beta(beta), n_samples, seed, 0, burn_in,
                    code_sites=np.arange(lat.n_sites))
    return np.bincount(out.codes, minlength=1 << lat.n_sites), out.codes


def fit_decay_rate(points, prefactor_power: float = 0.0):
    """Weighted least-squares slope of -ln(mean) - prefactor_power*ln(n) against n.

    ``prefactor_power`` removes a known power-law prefactor n^(-prefactor_power)
    before fitting (0 fits a pure exponential).  Returns (rate, rate_std_error).
    """
    ns, ys, sig = [], [], []
    for n, est in points:
        if not est.mean > 0:
            warnings.warn(f"dropping point n={n} with non-positive mean {est.mean}")
            continue
        ns.append(float(n))
        ys.append(-math.log(est.mean) - prefactor_power * math.log(n))
        sig.append(est.std_error / est.mean)
    if len(ns) < 4:
        raise ValueError(f"need at least 4 points with positive mean, got {len(ns)}")
    n_arr, y = np.array(ns), np.array(ys)
    s = np.array(sig)
    w = np.ones_like(s) if np.any(s <= 0) else 1.0 / s ** 2
    X = np.column_stack([np.ones_like(n_arr), n_arr])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    if np.any(s <= 0):
        resid = y - X @ beta
        dof = max(len(y) - 2, 1)
        cov = cov * float(resid @ resid) / dof
    return float(beta[1]), float(math.sqrt(max(cov[1, 1], 0.0)))


def ln_ratio(a: McEstimate, b: McEstimate) -> tuple[float, float]:
    """ln(b/a) with a delta-method error for independent estimates."""
    val = math.log(b.mean / a.mean)
    se = math.hypot(a.std_error / a.mean, b.std_error / b.mean)
    return val, se
