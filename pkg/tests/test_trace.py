"""Surface tracing: both kernels, closure, simplicity, signatures and cutting sequences."""

import math

import numpy as np
import pytest

from geoloop import _tracecore_py, trace
from geoloop.cckernel import GeodesicSegment, GeometryError, ModelPoint, dist_h, normalize_hom, tangent_toward_h
from geoloop.hyp_loops import closed_geodesic, shoot_closed_geodesic
from geoloop.tetra import EDGES, FACES, edge, regular_from_angle, regular_from_edge, vertex_data
from geoloop.trace import (
    CurvePiece,
    SurfaceCurve,
    chord_near_vertex,
    classify_counts,
    cutting_sequence,
    edge_point,
    interior_point,
    is_simple,
    junction_residual,
    shoot,
    signature,
    vertex_point,
)

TETRAS = [
    regular_from_angle(1, 0.6 * math.pi),
    regular_from_edge(0, 1.0),
    regular_from_angle(-1, 0.2 * math.pi),
]


@pytest.fixture(params=["compiled", "python"])
def kernel(request, monkeypatch):
    if request.param == "python":
        monkeypatch.setattr(trace, "_kernel_trace", _tracecore_py.trace)
    elif trace.KERNEL != "compiled":
        pytest.skip("compiled kernel not built")
    return request.param


def test_flat_01_closes_with_length_two_edges(kernel):
    t = regular_from_edge(0, 1.0)
    for s in (0.5, 0.625):
        c = shoot(t, edge_point(t, (1, 2), s, face=(1, 2, 3)), math.pi / 3, max_length=3.0)
        assert c.stop_reason == "closed"
        assert c.length == pytest.approx(2.0, abs=1e-9)
        sig = signature(c)
        assert sig.type == (0, 1)
        assert sorted(sig.grouped()) == [(0, 0), (1, 1), (1, 1)]


def test_vertex_aim_is_a_hit(kernel):
    t = regular_from_angle(-1, 0.25 * math.pi)
    start = interior_point(t, (1, 2, 3))
    a1 = t.charts[(1, 2, 3)][1].hom
    d = tangent_toward_h(-1, start.position.hom, a1)
    c = shoot(t, start, d, max_length=5.0)
    assert c.stop_reason == "vertex hit"
    assert c.pieces[-1].exit == ("vertex", 1)


def test_bad_max_length():
    t = regular_from_edge(0, 1.0)
    with pytest.raises(GeometryError):
        shoot(t, interior_point(t, (1, 2, 3)), 0.3, max_length=0.0)


@pytest.mark.parametrize("t", TETRAS, ids=["sphere", "flat", "hyp"])
def test_kernels_agree(t, monkeypatch, rng):
    if trace.KERNEL != "compiled":
        pytest.skip("compiled kernel not built")
    for _ in range(40):
        f = FACES[rng.integers(4)]
        start = interior_point(t, f, tuple(rng.uniform(0.2, 1.0, size=3)))
        psi = rng.uniform(0, 2 * math.pi)
        a = shoot(t, start, psi, max_length=6.0)
        with monkeypatch.context() as m:
            m.setattr(trace, "_kernel_trace", _tracecore_py.trace)
            b = shoot(t, start, psi, max_length=6.0)
        assert a.stop_reason == b.stop_reason
        assert a.faces == b.faces
        for pa, pb in zip(a.pieces, b.pieces):
            assert dist_h(int(t.kappa), pa.segment.end.hom, pb.segment.end.hom) < 1e-12


@pytest.mark.parametrize("t", TETRAS, ids=["sphere", "flat", "hyp"])
def test_geodesic_condition_and_length_additivity(t, rng):
    for _ in range(20):
        f = FACES[rng.integers(4)]
        start = interior_point(t, f, tuple(rng.uniform(0.2, 1.0, size=3)))
        c = shoot(t, start, rng.uniform(0, 2 * math.pi), max_length=2.5)
        if c.stop_reason == "vertex hit":
            continue
        assert junction_residual(c) < 1e-9
        # re-develop the faces and compare with the single-chart chord
        edges = [x for x, _ in c.crossings]
        if not edges or (t.kappa > 0 and c.length >= math.pi - 0.1):
            continue
        x0 = c.pieces[0].segment.start.hom
        # transport the final point back through the gluings
        m = np.eye(3)
        for p in c.pieces[:-1]:
            e = edge(*p.exit[1])
            m = m @ t.glue[(p.face, e)].matrix
        xn = normalize_hom(int(t.kappa), m @ c.pieces[-1].segment.end.hom)
        assert dist_h(int(t.kappa), x0, xn) == pytest.approx(c.length, abs=1e-8)


def test_hyperbolic_closed_geodesic_reshoots():
    t = regular_from_angle(-1, 0.25 * math.pi)
    geo = closed_geodesic(t, 1, 0)
    c = shoot_closed_geodesic(t, geo)
    assert c.stop_reason == "closed"
    assert c.length == pytest.approx(geo.length, abs=1e-7)
    assert sorted(signature(c).grouped()) == [(0, 0), (1, 1), (1, 1)]


def test_is_simple_examples():
    t = regular_from_edge(0, 1.0)
    f = (1, 2, 3)
    ch = t.charts[f]
    mid = lambda a, b, w=0.5: ModelPoint.from_hom(0, normalize_hom(0, w * ch[a].hom + (1 - w) * ch[b].hom))
    one = SurfaceCurve(t, (CurvePiece(f, GeodesicSegment(mid(1, 2), mid(1, 3)), ("interior",), ("interior",)),))
    assert is_simple(one) == (True, None)
    # two chords of one face crossing each other, joined through another face
    a = CurvePiece(f, GeodesicSegment(mid(1, 2), mid(1, 3)), ("interior",), ("interior",))
    g = t.charts[(1, 2, 4)]
    b = CurvePiece((1, 2, 4), GeodesicSegment(g[4], ModelPoint.from_hom(0, 0.5 * (g[1].hom + g[2].hom))), ("interior",), ("interior",))
    c = CurvePiece(f, GeodesicSegment(mid(1, 2, 0.8), mid(3, 2)), ("interior",), ("interior",))
    ok, wit = is_simple(SurfaceCurve(t, (a, b, c)))
    assert not ok and wit["kind"] == "crossing"
    assert wit["point"].kappa == 0


def test_signature_rules():
    assert classify_counts({e: 0 for e in EDGES} | {(1, 2): 2}) is None
    with pytest.raises(GeometryError):
        signature(SurfaceCurve(regular_from_edge(0, 1.0), ()))


@pytest.mark.parametrize("pq,n", [((0, 1), 4), ((1, 1), 8), ((1, 2), 12), ((2, 3), 20)])
def test_cutting_sequence_lengths(pq, n):
    seq = cutting_sequence(*pq)
    assert len(seq) == n == 2 * pq[0] + 2 * pq[1] + 2 * sum(pq)
    assert seq.edges[0] == seq.edges[-1] == (1, 2)
    counts = {e: 0 for e in EDGES}
    for e in seq.crossings:
        counts[e] += 1
    assert classify_counts(counts) == tuple(sorted(pq))


def test_cutting_sequence_errors():
    with pytest.raises(GeometryError, match="not coprime"):
        cutting_sequence(2, 4)
    seq = cutting_sequence(2, 1)
    assert seq.swapped and (seq.p, seq.q) == (1, 2)


@pytest.mark.parametrize("frac,simple", [(0.5, False), (0.64, False), (0.9, True), (1.2, True)])
def test_chord_near_vertex(frac, simple):
    t = regular_from_angle(-1, 0.25 * math.pi)
    vd = vertex_data(t, 1)
    c = chord_near_vertex(t, 1, frac * vd.clearance_bound, face=(1, 2, 3))
    assert all(1 in p.face for p in c.pieces)
    assert is_simple(c)[0] is simple


def test_vertex_start_direction_checked():
    t = regular_from_edge(0, 1.0)
    start = vertex_point(t, 1, (1, 2, 3))
    with pytest.raises(GeometryError, match="points out"):
        shoot(t, start, math.pi + 0.5, max_length=1.0)
