"""Tetrahedron metrics: validation, constructors, charts and gluings."""

import itertools
import math

import numpy as np
import pytest

from geoloop.cckernel import GeometryError, dist, dist_h
from geoloop.tetra import (
    EDGES,
    FACES,
    TetraMetric,
    across,
    edge_name,
    equifacial_from_angles,
    face_edges,
    is_valid,
    parse_edge,
    parse_vertex,
    regular_from_angle,
    regular_from_edge,
    validate,
    vertex_data,
)

A_PI4 = math.acosh(math.sqrt(2) + 1)


def test_names_round_trip():
    for e in EDGES:
        assert parse_edge(edge_name(e)) == e
    assert parse_vertex("A3") == 3
    with pytest.raises(GeometryError):
        parse_vertex("A5")


def test_validate_examples():
    assert validate(regular_from_edge(1, math.pi / 2)) == []
    lengths = {e: 1.0 for e in EDGES}
    lengths.update({(1, 2): 3.0, (1, 3): 3.0, (2, 3): 3.0})
    bad = validate(TetraMetric(1, lengths))
    assert any(v["code"] == "invalid spherical face" and v["face"] == "A1A2A3" for v in bad)
    h = regular_from_edge(-1, A_PI4)
    assert is_valid(h)
    assert h.angle_sum(1) == pytest.approx(3 * math.pi / 4, abs=1e-12)


def test_cone_angle_policy():
    t = regular_from_angle(1, 0.75 * math.pi)
    assert t.angle_sum(1) > 2 * math.pi
    assert is_valid(t)
    assert not is_valid(t, strict_cone=True)


def test_regular_from_angle():
    assert regular_from_angle(1, math.pi / 2).length(1, 2) == pytest.approx(math.pi / 2)
    assert regular_from_angle(1, 2 * math.pi / 3).length(1, 2) == pytest.approx(1.910633, abs=1e-6)
    assert regular_from_angle(-1, math.pi / 4).length(3, 4) == pytest.approx(1.528571, abs=1e-6)
    assert regular_from_angle(0, math.pi / 3, 2.0).length(1, 4) == 2.0
    for k, a in ((1, 0.3), (-1, 1.2), (0, 1.0), (1, math.pi)):
        with pytest.raises(GeometryError, match="no regular tetrahedron"):
            regular_from_angle(k, a)


def test_vertex_data_examples():
    vd = vertex_data(regular_from_angle(-1, math.pi / 4), 1)
    assert vd.half_angle == pytest.approx(3 * math.pi / 8)
    # right triangle on the face: cosh a = cosh(a/2) cosh h
    h = math.acosh(math.cosh(A_PI4) / math.cosh(A_PI4 / 2))
    assert vd.height == pytest.approx(h, abs=1e-12)
    # quoted fixture values are rounded; the closed forms above are the oracle
    assert vd.height == pytest.approx(1.22425, abs=3e-5)
    assert vd.clearance_bound == pytest.approx(math.asinh(math.cos(3 * math.pi / 8) * math.sinh(h)), abs=1e-12)
    assert vd.clearance_bound == pytest.approx(0.56421, abs=3e-5)
    s = vertex_data(regular_from_angle(1, 2 * math.pi / 3), 2)
    assert s.clearance_bound is None and s.status == "undefined"
    assert vertex_data(regular_from_edge(0, 1.0), 3).height == pytest.approx(math.sqrt(3) / 2)


def test_vertex_data_hypothesis_violated():
    # short edges at A1 against longer opposite sides: angle sum above pi at A1
    lengths = {e: (1.0 if 1 in e else 1.2) for e in EDGES}
    t = TetraMetric(-1, lengths)
    assert t.angle_sum(1) > math.pi
    vd = vertex_data(t, 1)
    assert vd.status == "hypothesis violated" and vd.clearance_bound is None


def test_equifacial():
    ang = (0.1 * math.pi, 0.15 * math.pi, 0.2 * math.pi)
    t = equifacial_from_angles(-1, ang)
    for f in FACES:
        assert sorted(t.angle(f, v) for v in f) == pytest.approx(sorted(ang), abs=1e-10)
    assert t.length(1, 2) == t.length(3, 4)


@pytest.mark.parametrize("kappa,alpha", [(1, 2 * math.pi / 3), (0, math.pi / 3), (-1, math.pi / 4)])
def test_charts_canonical(kappa, alpha):
    t = regular_from_angle(kappa, alpha)
    for f in FACES:
        ch = t.charts[f]
        i, j, k = f
        assert ch[i].coords[:2] == pytest.approx([0, 0], abs=1e-12)
        assert abs(ch[j].hom[1]) < 1e-12 and ch[j].hom[0] > 0
        assert ch[k].hom[1] > 0
        for u, v in itertools.combinations(f, 2):
            assert dist(ch[u], ch[v]) == pytest.approx(t.length(u, v), abs=1e-12)


@pytest.mark.parametrize("kappa,alpha", [(1, 0.6 * math.pi), (0, math.pi / 3), (-1, 0.2 * math.pi)])
def test_glue_matches_shared_edge(kappa, alpha):
    t = regular_from_angle(kappa, alpha)
    lengths = {e: t.length(*e) * (1 + 0.03 * n) for n, e in enumerate(EDGES)}
    t = TetraMetric(kappa, lengths)
    for f in FACES:
        for e in face_edges(f):
            g = t.glue[(f, e)]
            nb = across(f, e)
            assert g.residual() < 1e-12
            for v in e:
                assert dist_h(kappa, g.apply_h(t.charts[nb][v].hom), t.charts[f][v].hom) < 1e-12
            # the third vertices land on opposite sides of the edge
            c = t.inward_normals[(f, e)]
            far = g.apply_h(t.charts[nb][[w for w in nb if w not in e][0]].hom)
            assert float(c @ far) < 0


def test_relabel():
    lengths = {e: 1.0 + 0.1 * n for n, e in enumerate(EDGES)}
    t = TetraMetric(0, lengths)
    perm = {1: 2, 2: 3, 3: 4, 4: 1}
    r = t.relabel(perm)
    for i, j in EDGES:
        assert r.length(perm[i], perm[j]) == t.length(i, j)
    with pytest.raises(GeometryError):
        t.relabel({1: 1, 2: 1, 3: 3, 4: 4})


def test_missing_edge():
    with pytest.raises(GeometryError, match="missing edge"):
        TetraMetric(0, {(1, 2): 1.0})


def test_random_hyperbolic_metrics_valid(rng):
    for _ in range(50):
        ang = rng.uniform(0.05, 0.3, size=3) * math.pi
        t = equifacial_from_angles(-1, tuple(ang))
        assert is_valid(t)
        for v in (1, 2, 3, 4):
            assert t.angle_sum(v) == pytest.approx(float(np.sum(ang)), abs=1e-9)
