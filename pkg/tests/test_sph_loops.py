"""Spherical loop candidates, the pole construction and the shooting oracle."""

import math

import numpy as np
import pytest

from geoloop.cckernel import GeometryError, solve_side_from_angles
from geoloop.sph_loops import (
    census_counts,
    construct_pole_loop,
    curve_distance,
    enumerate_candidates,
    loop_census,
    regime,
    resolve_candidate,
    shooting_oracle,
)
from geoloop.tetra import TetraMetric, regular_from_angle
from geoloop.trace import is_simple, loop_signature, signature


@pytest.mark.parametrize(
    "frac,want",
    [(0.45, "proven blocked"), (0.5, "proven blocked"), (2 / 3, "proven exists"), (0.62, "proven exists")],
)
def test_regime(frac, want):
    assert regime(regular_from_angle(1, frac * math.pi)) == want


def test_side_trichotomy_grid():
    for alpha in np.linspace(math.pi / 3 + 0.01, math.pi - 0.05, 100):
        a = solve_side_from_angles(alpha, alpha, alpha, 1)
        if abs(alpha - math.pi / 2) < 1e-12:
            assert a == pytest.approx(math.pi / 2)
        else:
            assert (a < math.pi / 2) == (alpha < math.pi / 2)


def test_acute_faces_have_short_sides(rng):
    n = 0
    while n < 500:
        ang = rng.uniform(0.05, math.pi / 2, size=3)
        if ang.sum() <= math.pi + 1e-3:
            continue
        n += 1
        for i in range(3):
            assert solve_side_from_angles(ang[i], ang[(i + 1) % 3], ang[(i + 2) % 3], 1) < math.pi / 2


def test_candidates_per_apex():
    t = regular_from_angle(1, 2 * math.pi / 3)
    cands = enumerate_candidates(t, 4)
    assert [c.middle for c in cands] == [1, 2, 3]
    assert cands[0].crossed_edges == ((1, 2), (1, 3))


def test_right_angle_witnesses_are_vertex_hits():
    census = loop_census(regular_from_angle(1, math.pi / 2))
    for cands in census.values():
        for c in cands:
            assert c.status == "blocked"
            assert c.witness["kind"] == "vertex hit"
            assert c.witness["vertex"] != c.apex


def test_blocked_below_right_angle():
    c = resolve_candidate(enumerate_candidates(regular_from_angle(1, 0.45 * math.pi), 1)[0])
    assert c.status == "blocked" and c.curve is None


@pytest.mark.parametrize("frac", [0.55, 2 / 3, 0.75])
def test_loops_are_simple(frac):
    t = regular_from_angle(1, frac * math.pi)
    counts = census_counts(loop_census(t))
    assert counts["exists"] == 12
    for c in loop_census(t, vertices=(2,))[2]:
        assert is_simple(c.curve)[0]
        assert c.curve.loop_vertex == 2
        assert [e for e, _ in c.curve.crossings] in (list(c.crossed_edges), list(reversed(c.crossed_edges)))


def test_loop_signature_fixture():
    # the loop at A4 through the strip around A1 crosses A1A2 and A1A3 once each;
    # pushed off A4 it picks up the edges at A4 on one side and becomes type (0, 1)
    t = regular_from_angle(1, 2 * math.pi / 3)
    (c,) = [resolve_candidate(x) for x in enumerate_candidates(t, 4) if x.middle == 1]
    sig = signature(c.curve)
    assert {e: n for e, n in sig.counts.items() if n} == {(1, 2): 1, (1, 3): 1}
    assert sig.type is None
    assert loop_signature(c.curve).type == (0, 1)


def test_pole_certificate():
    t = regular_from_angle(1, 2 * math.pi / 3)
    curve, cert = construct_pole_loop(t, 4, 1)
    assert cert.to_middle < math.pi / 2 - 1e-6
    assert min(cert.to_others) > math.pi / 2 + 1e-6
    assert cert.to_apex == pytest.approx((math.pi / 2, math.pi / 2), abs=1e-9)
    (c,) = [resolve_candidate(x) for x in enumerate_candidates(t, 4) if x.middle == 1]
    assert curve_distance(curve, c.curve) < 1e-8
    with pytest.raises(GeometryError, match="hypotheses"):
        construct_pole_loop(regular_from_angle(1, 0.45 * math.pi), 4, 1)


def test_perturbed_census(rng):
    base = regular_from_angle(1, 0.7 * math.pi)
    lengths = {e: base.length(*e) * (1 + rng.uniform(-0.02, 0.02)) for e in base.edge_lengths}
    t = TetraMetric(1, lengths)
    assert regime(t) == "proven exists"
    assert census_counts(loop_census(t))["exists"] == 12


def test_census_parallel_matches_serial():
    t = regular_from_angle(1, 0.6 * math.pi)
    a = loop_census(t)
    b = loop_census(t, jobs=2)
    for v in a:
        assert [c.arc_length for c in a[v]] == pytest.approx([c.arc_length for c in b[v]])


def test_shooting_oracle_generic():
    rep = shooting_oracle(regular_from_angle(1, 0.6 * math.pi), 1, samples=1500)
    assert rep.ok
    assert all(n > 0 for n in rep.geometric.values())
    assert sum(rep.pattern_only.values()) == 0
