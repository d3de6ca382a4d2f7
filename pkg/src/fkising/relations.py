"""Residual checks of the local identities satisfied by the exact observable,
and the strip contraction factor."""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exact_loop import (
    DEFAULT_CAP,
    EnumerationCapError,
    Observable,
    all_configs,
    connection_from_tables,
    connection_prob,
    dobrushin_tables,
    loop_weight,
    medial_of,
    observable_exact,
    rc_weight,
)
from .lattice import (
    DobrushinDomain,
    MedialEdge,
    MedialGraph,
    ModelParams,
    SiteCoord,
    build_strip_domain,
    faces_around,
    medial_edge,
    nw_edge,
)


@dataclass
class ResidualReport:
    check_name: str
    max_abs_residual: float
    worst_location: str | None
    count_checked: int
    mean_abs_residual: float = 0.0
    count_excluded: int = 0
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.count_checked < 1:
            raise ValueError(f"{self.check_name}: nothing was checked")
        if not self.max_abs_residual >= 0:
            raise ValueError(f"{self.check_name}: residual is not a non-negative number")

    def passed(self, tol: float) -> bool:
        return self.max_abs_residual < tol

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_residuals(cls, name: str, residuals: dict, excluded: int = 0, **notes) -> "ResidualReport":
        if not residuals:
            raise ValueError(f"{name}: every candidate location was excluded ({excluded} excluded)")
        worst = max(residuals, key=residuals.get)
        vals = np.fromiter(residuals.values(), dtype=float)
        return cls(name, float(vals.max()), str(worst), len(vals), float(vals.mean()), excluded, notes)

    def merge(self, other: "ResidualReport") -> "ResidualReport":
        n = self.count_checked + other.count_checked
        worst = self if self.max_abs_residual >= other.max_abs_residual else other
        mean = (self.mean_abs_residual * self.count_checked
                + other.mean_abs_residual * other.count_checked) / n
        return ResidualReport(self.check_name, worst.max_abs_residual, worst.worst_location, n, mean,
                              self.count_excluded + other.count_excluded, {**self.notes, **other.notes})


def check_vertex_relation(obs: Observable, medial: MedialGraph, params: ModelParams) -> ResidualReport:
    """|F(A)+F(C) - e^{i alpha}(F(B)+F(D))| at every vertex with two incoming (A, C)
    and two outgoing (B, D) edges."""
    phase = params.phase
    res = {}
    for v in medial.vertices:
        ins, outs = medial.incoming.get(v, ()), medial.outgoing.get(v, ())
        if len(ins) != 2 or len(outs) != 2:
            continue
        for e in ins + outs:
            if e not in obs:
                raise KeyError(f"observable has no value on {e} at vertex {v}")
        lhs = obs.at(ins[0], v) + obs.at(ins[1], v)
        rhs = phase * (obs.at(outs[0], v) + obs.at(outs[1], v))
        res[v] = abs(lhs - rhs)
    return ResidualReport.from_residuals("check_vertex_relation", res)


def line_of(edge: MedialEdge, reference: MedialEdge) -> complex:
    """Unit vector of the line on which F(edge) lies.

    Along any path the winding to the reference edge equals the direction
    difference modulo a full turn, so e^{iW/2} lies on e^{i pi (d_ref - d)/4} R.
    """
    k = (reference.direction - edge.direction) % 8
    return cmath.exp(1j * math.pi * k / 4)


def _reference_edge(obs: Observable, medial: MedialGraph) -> MedialEdge:
    if obs.e0 is not None:
        return obs.e0
    if medial.e_b is None:
        raise ValueError("observable has neither e_b nor e0 to fix the argument lines")
    return medial.e_b


def check_argument_lines(obs: Observable, medial: MedialGraph) -> ResidualReport:
    """Distance of F(e) from its prescribed line through the origin."""
    ref = _reference_edge(obs, medial)
    res = {}
    for e in obs.edges:
        if e == obs.e0:
            continue
        res[e] = abs((obs[e] * line_of(e, ref).conjugate()).imag)
    return ResidualReport.from_residuals("check_argument_lines", res)


def boundary_edges(domain: DobrushinDomain, site: SiteCoord, medial: MedialGraph) -> list[MedialEdge]:
    """Sides of a boundary site's diamond facing white faces outside the domain."""
    out = []
    interior = domain.interior_faces
    for f in faces_around(site):
        e = medial_edge(site, f)
        if f not in interior and e in medial.edge_index:
            out.append(e)
    return out


def check_boundary_modulus(domain: DobrushinDomain, params: ModelParams, obs: Observable,
                           cap: int = DEFAULT_CAP, probs_from: str = "loops") -> ResidualReport:
    """||F(e_u)| - P(u <-> wired arc)| on every free-arc site u and boundary side e_u.

    With ``probs_from="clusters"`` the connection probabilities come from the
    separate cluster enumeration instead of the loop tables behind ``obs``.
    """
    medial = medial_of(domain)
    if probs_from == "loops":
        probs = connection_from_tables(dobrushin_tables(domain, cap), params, domain)
    elif probs_from == "clusters":
        probs = {u: connection_prob(domain, params, "dobrushin", [u], domain.wired_arc, cap)
                 for u in domain.free_arc}
    else:
        raise ValueError(f"probs_from must be 'loops' or 'clusters', not {probs_from!r}")
    res = {}
    for u in domain.free_arc:
        for e in boundary_edges(domain, u, medial):
            res[(tuple(u), e.direction_name)] = abs(abs(obs[e]) - probs[u])
    return ResidualReport.from_residuals("check_boundary_modulus", res, probs_from=probs_from)


BRUTE_FORCE_BONDS = 12


def check_measure_proportionality(domain: DobrushinDomain, params: ModelParams,
                                  max_bonds: int = BRUTE_FORCE_BONDS) -> ResidualReport:
    """Relative spread of loop weight / random-cluster weight over all configurations.

    Each configuration is decomposed into loops one at a time, so this is a
    slow, independent check meant for small domains.
    """
    n = len(domain.dobrushin_bonds)
    if n > max_bonds:
        raise EnumerationCapError(f"{n} bonds exceeds the brute-force limit of {max_bonds}")
    ratios = {cfg.open_mask: loop_weight(domain, cfg, params) / rc_weight(domain, cfg, params, "dobrushin")
              for cfg in all_configs(domain, "dobrushin")}
    r0 = next(iter(ratios.values()))
    res = {f"{mask:#x}": abs(r / r0 - 1.0) for mask, r in ratios.items()}
    return ResidualReport.from_residuals("check_measure_proportionality", res)


# ---------------------------------------------------------------------------
# strip


def strip_contraction(params: ModelParams) -> float:
    """lambda(alpha) = [1+cos(pi/4+a)]cos(pi/4+a) / ([1+cos(pi/4-a)]cos(pi/4-a))."""
    a = params.alpha
    if not 0.0 <= a < math.pi / 4:
        raise ValueError(f"alpha={a} outside [0, pi/4): p must lie in (0, p_sd]")
    cp, cm = math.cos(math.pi / 4 + a), math.cos(math.pi / 4 - a)
    return (1.0 + cp) * cp / ((1.0 + cm) * cm)


@dataclass
class StripProfile:
    height: int
    halfwidth: int
    moduli: list[float]  # |F(e_k)|, k = 1..height
    ratios: list[float]  # |F(e_{k+1})| / |F(e_k)|


def strip_observable_profile(height: int, halfwidth: int, params: ModelParams,
                             cap: int = DEFAULT_CAP) -> StripProfile:
    """|F| on the north-west sides of the mid-column sites (0, k) of a finite strip."""
    domain = build_strip_domain(height, halfwidth)
    obs = observable_exact(domain, params, cap=cap)
    moduli = [abs(obs.at_site((0, k))) for k in range(1, height + 1)]
    ratios = [moduli[k + 1] / moduli[k] for k in range(height - 1)]
    return StripProfile(height, halfwidth, moduli, ratios)


def aitken(seq) -> float:
    """Aitken delta-squared extrapolation from the last three terms of ``seq``."""
    if len(seq) < 3:
        raise ValueError("need at least three terms to extrapolate")
    a0, a1, a2 = seq[-3:]
    d1, d2 = a1 - a0, a2 - a1
    denom = d2 - d1
    if denom == 0:
        return a2
    return a2 - d2 * d2 / denom


@dataclass
class StripExtrapolation:
    height: int
    halfwidths: list[int]
    ratios: list[list[float]]  # ratios[j] for halfwidths[j]
    extrapolated: list[float]
    method: str = "aitken delta-squared over the last three halfwidths"


def strip_ratio_extrapolation(height: int, halfwidths, params: ModelParams,
                              cap: int = DEFAULT_CAP) -> StripExtrapolation:
    """Finite-width ratios and their extrapolation to infinite halfwidth."""
    halfwidths = sorted(halfwidths)
    profiles = [strip_observable_profile(height, hw, params, cap) for hw in halfwidths]
    ratios = [pr.ratios for pr in profiles]
    extr = [aitken([r[k] for r in ratios]) for k in range(height - 1)]
    return StripExtrapolation(height, list(halfwidths), ratios, extr)


def projected_relation(vertex, medial: MedialGraph, reference: MedialEdge, eliminate: MedialEdge,
                       params: ModelParams) -> dict[MedialEdge, float]:
    """Real three-term relation sum_e c_e f(e) = 0 at ``vertex``.

    The vertex relation is projected orthogonally to the term carrying
    ``eliminate``; f(e) is the real coordinate of F(e) on its argument line.
    """
    ins, outs = medial.incoming[vertex], medial.outgoing[vertex]
    coeff = {e: 1.0 + 0j for e in ins}
    coeff.update({e: -params.phase for e in outs})
    if eliminate not in coeff:
        raise KeyError(f"{eliminate} does not meet vertex {vertex}")
    z = (coeff[eliminate] * line_of(eliminate, reference)).conjugate()
    return {e: (z * c * line_of(e, reference)).imag for e, c in coeff.items() if e != eliminate}


def strip_edges(k: int) -> dict[str, MedialEdge]:
    """Edges around the mid-column diamonds at heights k and k+1.

    ``x`` joins the head of e_k to the tail of e_{k+1}; ``x2`` is its mirror
    image meeting e_k, and ``x1`` the unit translate of ``x2`` meeting e_{k+1}.
    """
    top = SiteCoord(0, k + 1)
    return {
        "e_k": nw_edge(SiteCoord(0, k)),
        "e_k1": nw_edge(top),
        "x": medial_edge(top, (1, 2 * k + 1)),
        "x2": medial_edge(top, (-1, 2 * k + 1)),
        "x1": medial_edge(SiteCoord(1, k + 1), (1, 2 * k + 1)),
        "y": medial_edge(SiteCoord(1, k + 1), (1, 2 * k + 3)),
        "y2": medial_edge(SiteCoord(0, k), (-1, 2 * k + 1)),
    }


@dataclass
class ProjectionCheck:
    halfwidths: list[int]
    predicted: complex
    extrapolated: complex
    residual: float


def strip_projection_check(params: ModelParams, halfwidths=(1, 2, 3), height: int = 2, k: int = 1,
                           cap: int = DEFAULT_CAP) -> ProjectionCheck:
    """Reconstruct F(e_{k+1}) from F(e_k) and F(x) with translation invariance imposed.

    The values are extrapolated in the halfwidth first; the two projected vertex
    relations around the endpoints of x are then solved for f(x'') = f(x') and
    f(e_{k+1}).
    """
    if not 1 <= k < height:
        raise ValueError("need 1 <= k < height")
    lab = strip_edges(k)
    series: dict[str, list[complex]] = {name: [] for name in lab}
    ref = None
    medial = None
    for hw in sorted(halfwidths):
        domain = build_strip_domain(height, hw)
        obs = observable_exact(domain, params, cap=cap)
        medial = medial_of(domain)
        ref = medial.e_b
        for name, e in lab.items():
            series[name].append(obs[e])
    # e_b keeps its direction for every halfwidth, so the argument lines agree
    extr = {name: aitken([v.real for v in vals]) + 1j * aitken([v.imag for v in vals])
            for name, vals in series.items()}
    f = {name: (extr[name] * line_of(e, ref).conjugate()).real for name, e in lab.items()}
    v2, v1 = lab["x"].tail, lab["x"].head
    rel2 = projected_relation(v2, medial, ref, lab["y2"], params)
    rel1 = projected_relation(v1, medial, ref, lab["y"], params)
    # v2: c_ek f(e_k) + c_x f(x) + c_x2 f(x'') = 0
    f_x2 = -(rel2[lab["e_k"]] * f["e_k"] + rel2[lab["x"]] * f["x"]) / rel2[lab["x2"]]
    # translation invariance: f(x') = f(x'')
    f_e1 = -(rel1[lab["x"]] * f["x"] + rel1[lab["x1"]] * f_x2) / rel1[lab["e_k1"]]
    predicted = f_e1 * line_of(lab["e_k1"], ref)
    return ProjectionCheck(sorted(halfwidths), complex(predicted), complex(extr["e_k1"]),
                           abs(predicted - extr["e_k1"]))


def check_measure_from_tables(domain: DobrushinDomain, params: ModelParams,
                              cap: int = DEFAULT_CAP) -> ResidualReport:
    """Proportionality of the two measures read off the enumeration tables.

    The ratio of loop weight to random-cluster weight is a constant times
    sqrt(2)^(L - 2k - o), so its relative spread is fixed by the range of
    L - 2k - o seen over all configurations.
    """
    lo, hi = dobrushin_tables(domain, cap).euler_range
    spread = math.sqrt(2.0) ** (hi - lo) - 1.0
    return ResidualReport.from_residuals("check_measure_proportionality", {"euler_range": spread},
                                         euler_range=[lo, hi], p=params.p)
