"""Hyperbolic (p, q) closed geodesics and simple loops through a vertex."""

import math

import numpy as np
import pytest

from geoloop.cckernel import GeometryError, Isometry2
from geoloop.develop import is_convex
from geoloop.hyp_loops import (
    alternative_matching,
    base_edge,
    classify_isometry,
    closed_geodesic,
    development_sweep,
    general_vertex_loop,
    holonomy,
    rotated_schedule,
    uniqueness_probe,
    vertex_loop,
    vertex_runs,
)
from geoloop.tetra import equifacial_from_angles, regular_from_angle, regular_from_edge
from geoloop.trace import clearance_check, cutting_sequence, is_simple, signature

T_PI4 = regular_from_angle(-1, math.pi / 4)


@pytest.mark.parametrize("pq", [(0, 1), (1, 1), (1, 2), (2, 3)])
def test_holonomy_is_hyperbolic(pq):
    h = holonomy(T_PI4, *pq)
    assert h.kind == "hyperbolic"
    # a Lorentz boost of translation length l has trace 1 + 2 cosh l
    assert np.trace(h.isometry.matrix) == pytest.approx(1 + 2 * math.cosh(h.length), rel=1e-9)
    assert h.axis_residual() < 1e-9


def test_classify_isometry():
    boost = np.array([[math.cosh(1), 0, math.sinh(1)], [0, 1, 0], [math.sinh(1), 0, math.cosh(1)]])
    kind, length = classify_isometry(Isometry2(boost, -1))[:2]
    assert kind == "hyperbolic" and length == pytest.approx(1.0)
    rot = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1.0]])
    assert classify_isometry(Isometry2(rot, -1))[0] == "elliptic"


@pytest.mark.parametrize("pq", [(0, 1), (1, 2), (2, 5)])
def test_closed_geodesic_type_and_length(pq):
    g = closed_geodesic(T_PI4, *pq)
    assert g.type == pq
    assert signature(g.curve).type == pq
    assert is_simple(g.curve)[0]
    assert g.length == pytest.approx(g.holonomy.length, rel=1e-9)
    assert g.curve.length == pytest.approx(g.length, rel=1e-9)


def test_swapped_pq():
    a = closed_geodesic(T_PI4, 1, 2)
    b = closed_geodesic(T_PI4, 2, 1)
    assert b.swapped and not a.swapped
    assert a.length == pytest.approx(b.length)


def test_negative_controls():
    assert alternative_matching(T_PI4, 0, 1).startswith("rejected")
    with pytest.raises(GeometryError):
        closed_geodesic(T_PI4, 0, 1, flip_gluing=(1,))


@pytest.mark.parametrize("pq", [(0, 1), (1, 2), (3, 4)])
def test_vertex_loop_properties(pq):
    r = vertex_loop(T_PI4, *pq, vertex=1)
    assert r.loop_type == pq
    assert is_simple(r.loop)[0]
    assert set(r.loop.vertices_touched()) == {1}
    assert r.loop.loop_vertex == 1
    assert r.loop_length > r.geodesic_length
    assert base_edge(r.development) == rotated_schedule(cutting_sequence(*pq), r.extra["rotation"])[0]
    assert all(1 in e for e in r.skipped)


def test_loop_is_the_same_at_every_vertex():
    # regular tetrahedron: the four vertices are equivalent, whichever rotation anchors the strip
    lengths = {v: vertex_loop(T_PI4, 1, 2, v, with_geodesic=False) for v in (1, 2, 3, 4)}
    ref = lengths[1].loop_length
    for v, r in lengths.items():
        assert r.loop_length == pytest.approx(ref, abs=1e-9)
        assert r.loop_type == (1, 2)
    # recorded fixture: (1, 2) at pi/4 anchors A1 at rotation 6 and A2 at rotation 0
    assert lengths[1].extra["rotation"] == 6 and lengths[2].extra["rotation"] == 0
    assert ref == pytest.approx(7.105056586, abs=1e-8)


def test_rotated_schedule_is_a_cyclic_shift():
    seq = cutting_sequence(1, 2)
    for r in range(len(seq)):
        rot = rotated_schedule(seq, r)
        assert rot[0] == rot[-1] == seq.edges[r]
        assert sorted(rot[:-1]) == sorted(seq.edges[:-1])
    runs = vertex_runs(seq, 1)
    assert runs == sorted(runs, key=lambda x: (-x[1], x[0]))
    assert all(1 in seq.edges[(s + i) % len(seq)] for s, n in runs for i in range(n))


def test_flat_control_is_a_vertex_hit():
    with pytest.raises(GeometryError, match="vertex hit"):
        vertex_loop(regular_from_edge(0, 1.0), 0, 1)


def test_clearance_reports():
    r = vertex_loop(T_PI4, 0, 1)
    assert r.clearance and all(x["vertex"] != 1 for x in r.clearance)
    again = clearance_check(T_PI4, r.loop, r.development)
    assert [x["margin"] for x in again] == [x["margin"] for x in r.clearance]
    for x in r.clearance:
        assert x["margin"] == pytest.approx(math.sinh(x["d"]) - math.cos(0.5 * x["angle_sum"]) * math.sinh(x["h"]))


def test_development_sweep_stays_inside():
    out = development_sweep(T_PI4, 0, 1, points=9)
    assert all(o == "success" for _, o in out)


def test_general_loop_hypothesis():
    with pytest.raises(GeometryError, match="face-angle hypothesis"):
        general_vertex_loop(regular_from_angle(-1, 0.3 * math.pi), 0, 1)
    t = equifacial_from_angles(-1, (0.1 * math.pi, 0.2 * math.pi, 0.25 * math.pi))
    r = general_vertex_loop(t, 1, 1)
    assert r.extra["convex"] and is_convex(r.development)
    assert r.loop_type == (1, 1)


def test_uniqueness_probe_small():
    rep = uniqueness_probe(T_PI4, 0, 1, samples=1000)
    assert rep.status == "unique" and rep.classes == 1 and rep.matches_constructed


@pytest.mark.parametrize("alpha", [0.1 * math.pi, 0.2 * math.pi, 0.25 * math.pi])
def test_loops_clear_right_triangle_threshold(alpha):
    # adjacent leg of a right triangle: tanh d = cos(s/2) tanh h; loops stay outside it
    t = regular_from_angle(-1, alpha)
    for pq in ((0, 1), (1, 1), (1, 2), (2, 3)):
        r = vertex_loop(t, *pq, vertex=1, with_geodesic=False)
        for c in r.clearance:
            thr = math.atanh(math.cos(0.5 * c["angle_sum"]) * math.tanh(c["h"]))
            assert c["d"] > thr
