"""Developments: gluing, vertex images, convexity and walking segments through strips."""

import math

import numpy as np
import pytest

from geoloop.cckernel import GeodesicSegment, GeometryError, ModelPoint, angle_at, dist, dist_h, frame_isometry_h, normalize_hom
from geoloop.develop import (
    CuttingSequence,
    is_convex,
    relax_path,
    star_development,
    unroll,
    unroll_faces,
    vertex_pair_development,
    walk_path,
    walk_segment,
)
from geoloop.sph_loops import enumerate_candidates, resolve_candidate
from geoloop.tetra import EDGES, TetraMetric, regular_from_angle, regular_from_edge
from geoloop.trace import cutting_sequence


def _bumpy(kappa, alpha):
    t = regular_from_angle(kappa, alpha)
    return TetraMetric(kappa, {e: t.length(*e) * (1 + 0.02 * n) for n, e in enumerate(EDGES)})


def test_single_face():
    d = unroll_faces(regular_from_edge(0, 1.0), [(1, 2, 3)])
    assert len(d) == 1 and d.interior_edges == ()


def test_bad_schedule():
    t = regular_from_edge(0, 1.0)
    with pytest.raises(GeometryError, match="not a gluing schedule"):
        unroll(t, [(1, 2), (3, 4)])
    with pytest.raises(GeometryError, match="not a gluing schedule"):
        CuttingSequence([(1, 2), (1, 3)], 0, 1)


def test_right_angled_sphere_strip():
    t = regular_from_edge(1, math.pi / 2)
    d = vertex_pair_development(t, 4, 1)
    a1 = d.image(0, 1)
    a42, a43 = d.image(0, 4), d.image(2, 4)
    run = [r for r in d.vertex_runs if r.vertex == 1][0]
    assert run.angle == pytest.approx(1.5 * math.pi)
    # the apex images are a quarter-circle from A1 and the strip angle 3pi/2 opens to pi/2 outside
    assert dist(a1, a42) == pytest.approx(math.pi / 2)
    assert angle_at(a1, a42, a43) == pytest.approx(math.pi / 2, abs=1e-9)


def test_two_images_of_a1_on_d01():
    t = regular_from_angle(-1, math.pi / 4)
    d = unroll(t, cutting_sequence(0, 1))
    assert len(d.vertex_images[1]) == 2


def test_vertex_pair_examples():
    t = regular_from_angle(1, 2 * math.pi / 3)
    d = vertex_pair_development(t, 4, 1)
    run = [r for r in d.vertex_runs if r.vertex == 1][0]
    assert run.angle == pytest.approx(2 * math.pi)
    f = regular_from_edge(0, 1.0)
    df = vertex_pair_development(f, 4, 1)
    a1, p, q = df.image(0, 1), df.image(0, 4), df.image(2, 4)
    assert angle_at(a1, p, q) == pytest.approx(math.pi, abs=1e-9)
    with pytest.raises(GeometryError):
        vertex_pair_development(f, 2, 2)


def test_flat_strip_hits_middle_vertex():
    t = regular_from_edge(0, 1.0)
    d = vertex_pair_development(t, 4, 1)
    rep = walk_path(d, 0, d.chart_point(0, 4), 2, d.chart_point(2, 4))
    assert rep.outcome == "vertex hit"
    assert rep.witness["vertex"] == 1


def test_segment_inside_first_face():
    t = regular_from_edge(0, 1.0)
    d = unroll_faces(t, [(1, 2, 3)])
    ch = t.charts[(1, 2, 3)]
    a = normalize_hom(0, (ch[1].hom + ch[2].hom + ch[3].hom) / 3)
    b = normalize_hom(0, (2 * ch[1].hom + ch[2].hom + ch[3].hom) / 4)
    rep = walk_segment(d, GeodesicSegment(ModelPoint.from_hom(0, a), ModelPoint.from_hom(0, b)))
    assert rep.ok and rep.crossings == []


@pytest.mark.parametrize("frac", [0.6, 2 / 3, 0.7])
def test_sphere_strip_arc_two_crossings(frac):
    t = regular_from_angle(1, frac * math.pi)
    d = vertex_pair_development(t, 4, 1)
    p = d.chart_point(0, 4)
    q = normalize_hom(1, d.transfer(0, 2) @ d.chart_point(2, 4))
    if frac == 2 / 3:
        # cone angle 2 pi at the middle vertex: both apex images coincide
        assert dist_h(1, p, q) < 1e-12
    else:
        # the minor arc runs outside the strip; the loop takes the long way round
        assert walk_path(d, 0, p, 2, d.chart_point(2, 4)).outcome == "exit"
    (c,) = [resolve_candidate(c) for c in enumerate_candidates(t, 4) if c.middle == 1]
    assert c.status == "exists" and c.arc_length > math.pi
    assert len(c.curve.crossings) == 2


@pytest.mark.parametrize("kappa,alpha", [(1, 0.6 * math.pi), (0, math.pi / 3), (-1, 0.2 * math.pi)])
def test_gluing_consistency(kappa, alpha):
    t = _bumpy(kappa, alpha)
    d = unroll(t, cutting_sequence(1, 2))
    assert d.gluing_residual() < 1e-9
    for g in d.gluing_edges[:6]:
        assert dist(*g.images) == pytest.approx(t.length(*g.edge), abs=1e-9)


@pytest.mark.parametrize("kappa,alpha", [(1, 0.6 * math.pi), (-1, 0.2 * math.pi)])
def test_base_invariance(kappa, alpha, rng):
    t = _bumpy(kappa, alpha)
    seq = cutting_sequence(0, 1)
    d0 = unroll(t, seq)
    o = np.array([0.0, 0.0, 1.0])
    base = frame_isometry_h(kappa, o, np.array([math.cos(0.7), math.sin(0.7), 0.0]))
    d1 = unroll(t, seq, base=base)
    for k in range(len(d0)):
        for v in d0.faces[k]:
            assert dist(base(d0.image(k, v)), d1.image(k, v)) < 1e-8


def test_angle_additivity():
    t = _bumpy(-1, 0.2 * math.pi)
    for apex, middle in ((4, 1), (1, 2), (2, 3)):
        d = vertex_pair_development(t, apex, middle)
        want = sum(t.angle(f, middle) for f in d.faces)
        (run,) = [r for r in d.vertex_runs if r.vertex == middle]
        assert run.angle == pytest.approx(want, abs=1e-12)
        got = angle_at(d.image(0, middle), d.image(0, apex), d.image(2, apex))
        assert got == pytest.approx(want, abs=1e-8)


def test_convexity_fixtures():
    t = regular_from_edge(0, 1.0)
    assert is_convex(unroll_faces(t, [(1, 2, 3)]))
    small = regular_from_angle(-1, 0.2 * math.pi)
    for pq in ((0, 1), (1, 1), (1, 2)):
        assert is_convex(unroll(small, cutting_sequence(*pq)))
    # regression fixture: at face angle 0.3 pi, D(1,2) has corners where four
    # faces meet (1.2 pi), so it is not convex
    d = unroll(regular_from_angle(-1, 0.3 * math.pi), cutting_sequence(1, 2))
    assert max(r.angle for r in d.vertex_runs) == pytest.approx(1.2 * math.pi)
    assert not is_convex(d)


def test_star_development_angle():
    t = regular_from_angle(-1, math.pi / 4)
    d = star_development(t, 1, 2)
    run = [r for r in d.vertex_runs if r.vertex == 1][0]
    assert run.first == 0 and run.last == 2
    assert run.angle == pytest.approx(0.75 * math.pi)


@pytest.mark.parametrize("alpha", [0.2 * math.pi, 0.25 * math.pi])
def test_relax_matches_walk_on_short_strip(alpha):
    # on a short strip the direct segment and the relaxed path are the same geodesic
    t = regular_from_angle(-1, alpha)
    d = vertex_pair_development(t, 4, 1)
    a, b = d.chart_point(0, 4), d.chart_point(2, 4)
    w = walk_path(d, 0, a, 2, b)
    r = relax_path(d, 0, a, 2, b)
    assert w.ok and r.ok
    assert r.length == pytest.approx(w.length, abs=1e-9)
    for cw, cr in zip(w.crossings, r.crossings):
        assert cr.edge == cw.edge and cr.s == pytest.approx(cw.s, abs=1e-8)


def test_relax_length_is_hyperbolic_distance():
    t = regular_from_angle(-1, 0.2 * math.pi)
    d = unroll(t, cutting_sequence(0, 1))
    n = len(d)
    a = d.chart_point(0, 1)
    b = d.chart_point(n - 1, 1)
    r = relax_path(d, 0, a, n - 1, b)
    assert r.ok
    far = normalize_hom(-1, d.transfer(0, n - 1) @ b)
    assert r.length == pytest.approx(dist_h(-1, a, far), rel=1e-9)
