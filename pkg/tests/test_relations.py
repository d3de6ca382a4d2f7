from __future__ import annotations

import math

import pytest

from fkising.exact_loop import EnumerationCapError, medial_of, observable_exact
from fkising.lattice import P_SD, build_rectangle_domain, nw_edge, params_from_p, SiteCoord
from fkising.relations import (
    ResidualReport,
    aitken,
    check_argument_lines,
    check_boundary_modulus,
    check_measure_from_tables,
    check_measure_proportionality,
    check_vertex_relation,
    line_of,
    strip_contraction,
    strip_observable_profile,
    strip_projection_check,
)


@pytest.mark.parametrize("p", [0.2, 0.4, P_SD, 0.7])
def test_local_relations_on_rectangle(p):
    dom = build_rectangle_domain(3, 2)
    pr = params_from_p(p)
    obs = observable_exact(dom, pr)
    med = medial_of(dom)
    rep = check_vertex_relation(obs, med, pr)
    assert rep.max_abs_residual < 1e-12
    full = [v for v in med.vertices if len(med.incoming[v]) == 2 and len(med.outgoing.get(v, ())) == 2]
    assert rep.count_checked == len(full)
    assert check_argument_lines(obs, med).max_abs_residual < 1e-12
    assert check_boundary_modulus(dom, pr, obs).max_abs_residual < 1e-12
    assert check_boundary_modulus(dom, pr, obs, probs_from="clusters").max_abs_residual < 1e-12
    assert check_measure_from_tables(dom, pr).max_abs_residual == 0


def test_vertex_relation_detects_perturbation():
    dom = build_rectangle_domain(2, 2)
    pr = params_from_p(0.4)
    obs = observable_exact(dom, pr)
    med = medial_of(dom)
    v = next(v for v in med.vertices if med.degree(v) == 4)
    e = med.incoming[v][0]
    bad = obs.with_value(e, obs[e] + 1e-6 * line_of(e, med.e_b))
    rep = check_vertex_relation(bad, med, pr)
    assert rep.max_abs_residual == pytest.approx(1e-6, rel=1e-6)
    assert not rep.passed(1e-10)
    # moving along the prescribed line leaves the argument check intact
    assert check_argument_lines(bad, med).max_abs_residual < 1e-12


def test_measure_proportionality_brute_force():
    dom = build_rectangle_domain(2, 2)
    rep = check_measure_proportionality(dom, params_from_p(0.3))
    assert rep.count_checked == 1 << 10
    assert rep.max_abs_residual < 1e-12
    with pytest.raises(EnumerationCapError):
        check_measure_proportionality(build_rectangle_domain(3, 2), params_from_p(0.3))


def test_report_from_empty_refuses():
    with pytest.raises(ValueError, match="excluded"):
        ResidualReport.from_residuals("x", {}, excluded=3)


def test_report_merge_and_json():
    a = ResidualReport.from_residuals("c", {"u": 1e-3, "v": 3e-3})
    b = ResidualReport.from_residuals("c", {"w": 2e-3})
    m = a.merge(b)
    assert m.count_checked == 3
    assert m.max_abs_residual == 3e-3 and m.worst_location == "v"
    assert m.mean_abs_residual == pytest.approx(2e-3)
    assert '"check_name": "c"' in m.to_json()


def test_strip_contraction_values():
    assert strip_contraction(params_from_p(P_SD)) == 1.0
    prev = 0.0
    for p in (0.1, 0.2, 0.3, 0.4, 0.5, 0.55):
        lam = strip_contraction(params_from_p(p))
        assert prev < lam < 1
        prev = lam
    with pytest.raises(ValueError):
        strip_contraction(params_from_p(0.7))


def test_aitken_geometric_limit():
    seq = [2 + 0.5 ** n for n in range(5)]
    assert aitken(seq) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(ValueError):
        aitken([1.0, 2.0])


def test_strip_profile_ratios_increase_with_width():
    pr = params_from_p(0.45)
    lam = strip_contraction(pr)
    r = [strip_observable_profile(2, hw, pr).ratios[0] for hw in (1, 2)]
    assert r[0] < r[1] < lam


def test_strip_mirror_symmetry():
    # F(x) = e^{i pi/4} conj F(x~) for mirror-image edges about the vertical axis
    from fkising.lattice import build_strip_domain, medial_edge
    dom = build_strip_domain(2, 2)
    obs = observable_exact(dom, params_from_p(0.4))
    w = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
    x = medial_edge(SiteCoord(0, 2), (1, 3))
    xm = medial_edge(SiteCoord(0, 2), (-1, 3))
    assert abs(obs[x] - w * obs[xm].conjugate()) < 1e-12
    # the mid-column north-west sides sit on the line through e^{i pi/4}
    e = nw_edge(SiteCoord(0, 1))
    assert abs((obs[e] * w.conjugate()).imag) < 1e-12


@pytest.mark.slow
def test_projection_reconstructs_next_edge():
    pr = params_from_p(0.3)
    chk = strip_projection_check(pr, (1, 2, 3), height=2, cap=26)
    assert chk.residual < 1e-3 * abs(chk.extrapolated) + 1e-4
