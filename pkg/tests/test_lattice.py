from __future__ import annotations

import math

import numpy as np
import pytest

from fkising.lattice import (
    BETA_C,
    P_SD,
    MedialEdge,
    SiteCoord,
    build_box,
    build_medial,
    build_rectangle_domain,
    build_strip_domain,
    build_wedge_domain,
    dobrushin_domain,
    dual_p,
    medial_edge,
    nw_edge,
    p_from_beta,
    p_self_dual,
    params_from_beta,
    params_from_p,
)


@pytest.mark.parametrize(
    "dom, n_sites, n_bonds, n_active",
    [
        (build_rectangle_domain(1, 1), 4, 4, 3),
        (build_rectangle_domain(2, 1), 6, 7, 5),
        (build_rectangle_domain(2, 2), 9, 12, 10),
        (build_rectangle_domain(3, 2), 12, 17, 14),
        (build_rectangle_domain(3, 3), 16, 24, 21),
        (build_strip_domain(2, 3), 21, 32, 26),
        (build_wedge_domain((2, 2), 4), 21, 32, 24),
    ],
)
def test_domain_counts(dom, n_sites, n_bonds, n_active):
    assert len(dom.sites) == n_sites
    assert len(dom.bonds) == n_bonds
    assert len(dom.dobrushin_bonds) == n_active
    assert len(dom.inert_bonds) == n_bonds - n_active


def test_arcs_partition_the_boundary():
    dom = build_rectangle_domain(3, 2)
    assert dom.free_arc[0] == dom.a and dom.free_arc[-1] == dom.b
    assert dom.wired_arc[0] == dom.b and dom.wired_arc[-1] == dom.a
    assert set(dom.free_arc) | set(dom.wired_arc) == set(dom.boundary_cycle)
    assert set(dom.free_arc) & set(dom.wired_arc) == {dom.a, dom.b}


def test_medial_degrees():
    for dom in (build_rectangle_domain(1, 1), build_rectangle_domain(3, 2), build_wedge_domain()):
        med = build_medial(dom)
        special = {med.e_a, med.e_b}
        degs = [med.degree(v) for v in med.vertices]
        assert degs.count(3) == 2
        assert set(degs) <= {2, 3, 4}
        for v in med.vertices:
            # balanced once e_a and e_b are counted
            assert len(med.incoming.get(v, ())) == len(med.outgoing.get(v, ()))
        assert med.e_a in med.edges and med.e_b in med.edges
        assert all(e.black in dom.site_set for e in med.edges if e not in special)


def test_medial_small_square():
    med = build_medial(build_rectangle_domain(1, 1))
    assert len(med.vertices) == 8


def test_edge_orientation_black_left():
    e = nw_edge(SiteCoord(0, 0))
    assert e.direction_name == "NW"
    assert e.black == (0, 0)
    assert e.white == (1, 1)
    # all four sides of a diamond wind counterclockwise around its site
    faces = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    sides = [medial_edge(SiteCoord(0, 0), f) for f in faces]
    for s, t in zip(sides, sides[1:] + sides[:1]):
        assert s.head == t.tail
    assert [s.direction_name for s in sides] == ["NW", "SW", "SE", "NE"]


def test_medial_edge_rejects_far_face():
    with pytest.raises(ValueError):
        medial_edge(SiteCoord(0, 0), (3, 1))
    with pytest.raises(ValueError):
        MedialEdge((0, 1), (0, 3)).direction


def test_invalid_domains():
    with pytest.raises(ValueError):
        build_rectangle_domain(0, 2)
    with pytest.raises(ValueError):
        build_box(0, 0, 0, 1)
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    with pytest.raises(ValueError, match="distinct"):
        dobrushin_domain(sq, sq, (0, 0), (0, 0))
    with pytest.raises(ValueError, match="counterclockwise"):
        dobrushin_domain(sq, sq[::-1], (0, 0), (1, 1))
    with pytest.raises(ValueError, match="not connected"):
        dobrushin_domain(sq + [(5, 5)], sq, (0, 0), (1, 1))
    with pytest.raises(ValueError):
        build_wedge_domain((4, 2), 4)


def test_self_dual_point():
    assert P_SD == pytest.approx(math.sqrt(2) / (1 + math.sqrt(2)), abs=1e-15)
    assert p_self_dual(2.0) == P_SD
    assert dual_p(P_SD) == pytest.approx(P_SD, abs=1e-15)
    for p in (0.1, 0.4, 0.8):
        assert dual_p(dual_p(p)) == pytest.approx(p, abs=1e-14)


def test_params_conventions():
    pr = params_from_p(P_SD)
    assert pr.alpha == 0.0 and pr.mass == 1.0 and pr.x == pytest.approx(1.0, abs=1e-15)
    sub = params_from_p(0.3)
    assert 0 < sub.alpha < math.pi / 4 and 0 < sub.mass < 1
    # e^{i alpha} = (e^{i pi/4} + x) / (e^{i pi/4} x + 1)
    w = np.exp(1j * math.pi / 4)
    for p in (0.05, 0.3, 0.5, 0.7, 0.95):
        pr = params_from_p(p)
        assert abs(pr.phase - (w + pr.x) / (w * pr.x + 1)) < 1e-14
    with pytest.raises(ValueError):
        params_from_p(1.0)


def test_beta_round_trip():
    assert params_from_p(P_SD).beta == pytest.approx(BETA_C, abs=1e-15)
    for beta in (0.1, 0.3, BETA_C, 0.9):
        assert params_from_beta(beta).beta == pytest.approx(beta, rel=1e-14)
    assert p_from_beta(BETA_C) == pytest.approx(P_SD, abs=1e-15)
    with pytest.raises(ValueError):
        p_from_beta(0.0)
