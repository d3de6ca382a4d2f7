from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np
import pytest

import oracle
from fkising.exact_loop import (
    E0_HEAD_VALUE,
    E0_TAIL_VALUE,
    BondConfig,
    EnumerationCapError,
    all_configs,
    bond_marginals,
    cluster_count,
    connection_prob,
    dobrushin_tables,
    loop_decompose,
    loop_weight,
    medial_of,
    observable_bulk_exact,
    observable_exact,
    rc_weight,
    read_observable_csv,
    write_observable_csv,
)
from fkising.lattice import (
    P_SD,
    MedialEdge,
    SiteCoord,
    build_box,
    build_rectangle_domain,
    build_strip_domain,
    nw_edge,
    params_from_p,
)

RECTS = [(1, 1), (2, 1), (2, 2), (3, 2)]


@pytest.mark.parametrize("shape", RECTS)
@pytest.mark.parametrize("p", [0.2, P_SD, 0.7])
def test_observable_matches_oracle(shape, p):
    dom = build_rectangle_domain(*shape)
    med = medial_of(dom)
    ref, conn = oracle.dobrushin_observable(dom, med.e_a, med.e_b, p)
    obs = observable_exact(dom, params_from_p(p))
    for e, v in ref.items():
        assert abs(obs[MedialEdge(*e)] - v) < 1e-12
    for e in obs.edges:
        if tuple(e) not in ref:
            assert obs[e] == 0
    probs = connection_prob(dom, params_from_p(p), "dobrushin", [dom.a], dom.wired_arc)
    assert probs == pytest.approx(1.0)
    for s, v in conn.items():
        assert connection_prob(dom, params_from_p(p), "dobrushin", [s], dom.wired_arc) == pytest.approx(v, abs=1e-12)


def test_bulk_observable_matches_oracle():
    box = build_box(-1, 1, -1, 1)
    ref = oracle.bulk_observable(box, tuple(nw_edge(SiteCoord(0, 0))), 0.4)
    obs = observable_bulk_exact(box, params_from_p(0.4))
    assert math.isnan(obs.values[obs.index[obs.e0]].real)
    for e, v in ref.items():
        assert abs(obs[MedialEdge(*e)] - v) < 1e-12


def test_golden_table():
    golden = read_observable_csv(oracle.GOLDEN)
    obs = observable_exact(build_rectangle_domain(2, 2), params_from_p(0.4))
    computed = {(e.midpoint_x2[0], e.midpoint_x2[1], e.direction_name): obs[e] for e in obs.edges}
    assert len(golden) == 30
    for key, v in golden.items():
        assert abs(computed[key] - v) < 1e-12
    assert all(v == 0 for k, v in computed.items() if k not in golden)


def test_csv_round_trip(tmp_path):
    obs = observable_exact(build_rectangle_domain(2, 1), params_from_p(0.3))
    path = tmp_path / "f.csv"
    write_observable_csv(obs, path)
    back = read_observable_csv(path)
    assert len(back) == len(obs.edges)
    for e in obs.edges:
        assert back[(*e.midpoint_x2, e.direction_name)] == obs[e]


def test_observable_basic_properties():
    for shape in RECTS:
        dom = build_rectangle_domain(*shape)
        for p in (0.3, 0.7):
            obs = observable_exact(dom, params_from_p(p))
            med = medial_of(dom)
            assert obs[med.e_b] == pytest.approx(1.0, abs=1e-14)
            assert np.abs(obs.values).max() <= 1 + 1e-14


def test_euler_relation_constant():
    for shape in RECTS + [(3, 3)]:
        lo, hi = dobrushin_tables(build_rectangle_domain(*shape)).euler_range
        assert lo == hi


def test_loop_and_cluster_weights_proportional():
    dom = build_rectangle_domain(2, 2)
    pr = params_from_p(0.35)
    ratios = [loop_weight(dom, c, pr) / rc_weight(dom, c, pr, "dobrushin") for c in all_configs(dom)]
    assert max(ratios) / min(ratios) - 1 < 1e-12


def test_loop_decompose_all_closed():
    dom = build_rectangle_domain(1, 1)
    cfg = BondConfig(dom.dobrushin_bonds, 0)
    dec = loop_decompose(dom, cfg)
    med = medial_of(dom)
    assert dec.path[0] == med.e_a and dec.path[-1] == med.e_b
    assert dec.winding[med.e_b] == 0
    # every medial edge is on the path or on exactly one loop
    covered = dec.path + [e for loop in dec.loops for e in loop]
    assert sorted(covered) == sorted(med.edges)
    # the path from e_a to e_b turns by the angle between them
    turn = (med.e_b.direction - med.e_a.direction) % 4
    assert dec.winding[med.e_a] % 4 == turn


def test_cluster_count_boundary_conditions():
    box = build_box(0, 1, 0, 1)
    empty = BondConfig(box.bonds, 0)
    assert cluster_count(box, empty, "free") == 4
    assert cluster_count(box, empty, "wired") == 1
    full = BondConfig(box.bonds, (1 << len(box.bonds)) - 1)
    assert cluster_count(box, full, "free") == 1
    with pytest.raises(ValueError):
        cluster_count(box, empty, "periodic")


def _brute_connection(dom, p, bc, a, b):
    bonds = list(dom.bonds)
    premerge = [] if bc == "free" else list(zip(dom.boundary_cycle, dom.boundary_cycle[1:]))
    num = den = 0.0
    for bits in itertools.product((0, 1), repeat=len(bonds)):
        g = nx.Graph()
        g.add_nodes_from(dom.sites)
        g.add_edges_from(premerge)
        g.add_edges_from(b_ for b_, x in zip(bonds, bits) if x)
        o = sum(bits)
        w = p ** o * (1 - p) ** (len(bonds) - o) * 2.0 ** nx.number_connected_components(g)
        den += w
        num += w * nx.has_path(g, a, b)
    return num / den


@pytest.mark.parametrize("bc", ["free", "wired"])
def test_connection_prob_brute_force(bc):
    box = build_box(0, 2, 0, 2)
    for p in (0.3, 0.6):
        got = connection_prob(box, params_from_p(p), bc, [(1, 1)], [(2, 1)])
        assert got == pytest.approx(_brute_connection(box, p, bc, (1, 1), (2, 1)), abs=1e-12)


def test_bond_marginals_symmetry():
    box = build_box(0, 2, 0, 2)
    marg = bond_marginals(box, params_from_p(0.4), "free")
    # the two central bonds of the middle row are images of each other
    b1 = (SiteCoord(0, 1), SiteCoord(1, 1))
    b2 = (SiteCoord(1, 1), SiteCoord(2, 1))
    assert marg[b1] == pytest.approx(marg[b2], abs=1e-14)
    assert all(0 < v < 1 for v in marg.values())


def test_connection_prob_errors():
    box = build_box(0, 1, 0, 1)
    pr = params_from_p(0.4)
    assert connection_prob(box, pr, "free", [(0, 0)], [(0, 0)]) == 1.0
    with pytest.raises(ValueError):
        connection_prob(box, pr, "free", [(5, 5)], [(0, 0)])


def test_enumeration_cap():
    strip = build_strip_domain(2, 3)
    with pytest.raises(EnumerationCapError):
        observable_exact(strip, params_from_p(0.4))
    with pytest.raises(EnumerationCapError):
        observable_exact(build_rectangle_domain(2, 2), params_from_p(0.4), cap=4)


def test_bond_config_validation():
    bonds = build_box(0, 1, 0, 1).bonds
    with pytest.raises(ValueError):
        BondConfig(bonds, 1 << len(bonds))
    cfg = BondConfig.from_open(bonds, [bonds[1]])
    assert cfg.n_open == 1 and cfg.is_open(bonds[1]) and not cfg.is_open(bonds[0])


def test_e0_convention_values():
    assert E0_TAIL_VALUE == 1 and E0_HEAD_VALUE == -1
    obs = observable_bulk_exact(build_box(-1, 1, -1, 1), params_from_p(0.3))
    assert obs.at(obs.e0, obs.e0.tail) == 1
    assert obs.at(obs.e0, obs.e0.head) == -1


def test_bulk_origin_must_be_interior():
    with pytest.raises(ValueError):
        observable_bulk_exact(build_box(0, 2, 0, 2), params_from_p(0.3))
    with pytest.raises(TypeError):
        observable_bulk_exact(build_rectangle_domain(2, 2), params_from_p(0.3), origin=(1, 1))


def test_parallel_enumeration_matches_serial():
    from fkising import exact_loop
    dom = build_rectangle_domain(3, 2)
    serial = dobrushin_tables(dom)
    exact_loop._TABLES.clear()
    par = dobrushin_tables(dom, workers=2)
    assert np.array_equal(serial.hist, par.hist)
    assert np.array_equal(serial.phase, par.phase)
    assert serial.euler_range == par.euler_range
