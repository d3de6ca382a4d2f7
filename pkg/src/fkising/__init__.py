"""Exact and Monte Carlo tools for the FK-Ising model on Z^2: the parafermionic
observable on small Dobrushin domains, its local identities, massive random
walks, and Swendsen-Wang estimates of connection probabilities."""

from __future__ import annotations

__version__ = "0.1.0"

from .exact_loop import (
    BondConfig,
    EnumerationCapError,
    Observable,
    connection_prob,
    observable_bulk_exact,
    observable_exact,
)
from .lattice import (
    BETA_C,
    P_SD,
    DobrushinDomain,
    LatticeDomain,
    MedialEdge,
    ModelParams,
    SiteCoord,
    build_box,
    build_rectangle_domain,
    build_strip_domain,
    build_wedge_domain,
    params_from_beta,
    params_from_p,
)
from .massive_walk import RateQuery, green_function, rate_function, walk_representation
from .relations import ResidualReport, check_argument_lines, check_vertex_relation, strip_contraction

__all__ = [
    "BETA_C", "P_SD", "BondConfig", "DobrushinDomain", "EnumerationCapError", "LatticeDomain",
    "MedialEdge", "ModelParams", "Observable", "RateQuery", "ResidualReport", "SiteCoord",
    "build_box", "build_rectangle_domain", "build_strip_domain", "build_wedge_domain",
    "check_argument_lines", "check_vertex_relation", "connection_prob", "green_function",
    "observable_bulk_exact", "observable_exact", "params_from_beta", "params_from_p",
    "rate_function", "strip_contraction", "walk_representation",
]
