"""Simple geodesic loops on spherical tetrahedra.

A simple loop at a vertex (the apex) crosses exactly two edges of the opposite
face, once each, and these share a vertex (the middle).  So every candidate
lives in the three-face strip around the middle vertex, between the two images
of the apex, and existence comes down to whether a great-circle arc joining
those images stays inside the strip.

The arc used is the one symmetric about the bisector of the strip at the
middle vertex; its pole O lies on that bisector at distance pi/2 from both
apex images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cckernel import (
    TOL,
    Curvature,
    GeometryError,
    ModelPoint,
    cross,
    dist_h,
    normalize_hom,
    rotate_tangent_h,
    tangent_toward_h,
)
from .develop import Development, WalkReport, vertex_pair_development, walk_path
from .tetra import TetraMetric, edge, parse_vertex
from .trace import SurfaceCurve, curve_from_walk, is_simple, loop_signature, reverse_curve, sweep_loops

HALF_PI = 0.5 * math.pi


@dataclass
class LoopCandidate:
    tetra: TetraMetric
    apex: int
    middle: int
    development: Development
    images: tuple  # apex in chart 0 and in chart 2 of the strip
    status: str = "unresolved"  # "exists" | "blocked"
    curve: SurfaceCurve | None = None
    witness: dict | None = None
    regime: str = ""
    arc_length: float | None = None
    reports: list = field(default_factory=list)

    @property
    def crossed_edges(self) -> tuple:
        x, y = [v for v in (1, 2, 3, 4) if v not in (self.apex, self.middle)]
        return (edge(self.middle, x), edge(self.middle, y))


def _check_spherical(t: TetraMetric):
    if t.kappa != Curvature.SPHERICAL:
        raise GeometryError("spherical only")


def regime(t: TetraMetric) -> str:
    """Which known result, if any, decides loop existence for ``t``."""
    angles = [a for a in t.face_angles.values()]
    if all(math.pi / 3 < a < HALF_PI for a in angles):
        return "proven blocked"
    if t.is_regular and all(abs(a - HALF_PI) < 1e-12 for a in angles):
        return "proven blocked"
    if all(a > HALF_PI for a in angles) and all(t.length(*e) > HALF_PI for e in t.edge_lengths):
        return "proven exists"
    return "outside proven range"


def enumerate_candidates(t: TetraMetric, apex) -> list:
    """One candidate per vertex of the face opposite ``apex``."""
    _check_spherical(t)
    apex = parse_vertex(apex)
    out = []
    reg = regime(t)
    for middle in (v for v in (1, 2, 3, 4) if v != apex):
        d = vertex_pair_development(t, apex, middle)
        images = (d.chart_point(0, apex), d.chart_point(2, apex))
        out.append(LoopCandidate(t, apex, middle, d, images, regime=reg))
    return out


def _strip_frame(c: LoopCandidate):
    """Middle vertex, its interior bisector tangent and the cone angle, all in chart 0."""
    t = c.tetra
    d = c.development
    k = int(t.kappa)
    m = d.chart_point(0, c.middle)
    a0 = d.chart_point(0, c.apex)
    total = sum(t.angle(f, c.middle) for f in d.faces)
    dir_apex = tangent_toward_h(k, m, a0)
    # the strip turns from the apex direction towards the face's third vertex
    x = [v for v in d.faces[0] if v not in (c.apex, c.middle)][0]
    sign = 1.0 if float(cross(m, dir_apex) @ d.chart_point(0, x)) > 0 else -1.0
    bis = rotate_tangent_h(k, m, dir_apex, sign * 0.5 * total)
    return m, bis, total


def _symmetric_pole(c: LoopCandidate) -> np.ndarray:
    """Pole of the great circle through both apex images, symmetric about the bisector."""
    d = c.development
    p = c.images[0]
    q = d.transfer(0, 2) @ c.images[1]
    n = cross(p, q)
    if float(np.linalg.norm(n)) > 1e-9:
        return n / np.linalg.norm(n)
    # coincident (or antipodal) images: the pole lies on the bisector circle
    m, bis, _ = _strip_frame(c)
    o = cross(p, cross(m, bis))
    return o / np.linalg.norm(o)


def _walk_arcs(c: LoopCandidate, pole) -> list:
    """Walk the arcs of the great circle with pole ``pole`` joining the two apex images."""
    d = c.development
    p = c.images[0]
    q = normalize_hom(1, d.transfer(0, 2) @ c.images[1])
    out = []
    for sgn in (1.0, -1.0):
        dvec = sgn * cross(pole, p)
        dvec = dvec / np.linalg.norm(dvec)
        length = math.atan2(float(q @ dvec), float(q @ p)) % (2 * math.pi)
        if length < TOL.geom or length > 2 * math.pi - TOL.geom:
            length = 2 * math.pi
        # a strip with cone angle above 2 pi needs an arc winding once more
        for extra in (0.0, 2 * math.pi):
            rep = walk_path(d, 0, p, 2, direction=dvec, length=length + extra)
            out.append((length + extra, dvec, rep))
    out.sort(key=lambda x: x[0])
    return out


def _settle(c: LoopCandidate, arcs) -> LoopCandidate:
    c.reports = [rep for _, _, rep in arcs]
    for length, _, rep in arcs:
        if rep.ok:
            curve = curve_from_walk(
                c.development, rep, closed=True, loop_vertex=c.apex,
                start_tag=("vertex", c.apex), end_tag=("vertex", c.apex),
            )
            simple, wit = is_simple(curve)
            if not simple:
                raise GeometryError(f"constructed loop is not simple: {wit}")
            c.status = "exists"
            c.curve = curve
            c.arc_length = length
            c.witness = None
            return c
    c.status = "blocked"
    hits = [rep for _, _, rep in arcs if rep.outcome == "vertex hit"]
    rep = hits[0] if hits else min((r for _, _, r in arcs), key=lambda r: r.length)
    c.witness = dict(rep.witness or {"kind": rep.outcome})
    c.witness["margin"] = rep.margin
    return c


def resolve_candidate(c: LoopCandidate) -> LoopCandidate:
    """Decide whether the candidate arc stays inside its strip."""
    _check_spherical(c.tetra)
    return _settle(c, _walk_arcs(c, _symmetric_pole(c)))


@dataclass
class PoleCertificate:
    pole: np.ndarray  # chart 0 of the strip
    offset: float  # signed distance of O from the middle vertex along the outer bisector
    to_middle: float
    to_others: tuple
    to_apex: tuple


def construct_pole_loop(t: TetraMetric, apex, middle) -> tuple[SurfaceCurve, PoleCertificate]:
    """Loop through the pole O on the outer bisector, with its distance certificate."""
    _check_spherical(t)
    if regime(t) != "proven exists":
        raise GeometryError("hypotheses not met: need all face angles and edges above pi/2")
    apex, middle = parse_vertex(apex), parse_vertex(middle)
    (c,) = [x for x in enumerate_candidates(t, apex) if x.middle == middle]
    k = 1
    m, bis, total = _strip_frame(c)
    a = t.length(apex, middle)
    phi = 2 * math.pi - total  # angle outside the strip at the middle vertex
    r = math.atan2(-math.cos(a), math.sin(a) * math.cos(0.5 * phi))
    if r > HALF_PI:
        r -= math.pi
    elif r < -HALF_PI:
        r += math.pi
    outer = -bis
    o = math.cos(r) * m + math.sin(r) * outer
    d = c.development
    others = [v for v in (1, 2, 3, 4) if v not in (apex, middle)]
    x_img = d.chart_point(0, others[0])
    y_img = normalize_hom(k, d.transfer(0, 2) @ d.chart_point(2, others[1]))
    apex_imgs = (c.images[0], normalize_hom(k, d.transfer(0, 2) @ c.images[1]))
    cert = PoleCertificate(
        pole=o,
        offset=r,
        to_middle=dist_h(k, o, m),
        to_others=(dist_h(k, o, x_img), dist_h(k, o, y_img)),
        to_apex=tuple(dist_h(k, o, p) for p in apex_imgs),
    )
    _settle(c, _walk_arcs(c, o))
    if c.status != "exists":
        raise GeometryError(f"pole arc leaves the strip: {c.witness}")
    return c.curve, cert


def curve_distance(c1: SurfaceCurve, c2: SurfaceCurve) -> float:
    """Largest gap between matching piece endpoints of two curves (inf if combinatorics differ)."""
    if len(c1.pieces) != len(c2.pieces):
        return math.inf
    k = int(c1.tetra.kappa)
    worst = 0.0
    for p1, p2 in zip(c1.pieces, c2.pieces):
        if p1.face != p2.face:
            return math.inf
        worst = max(
            worst,
            dist_h(k, p1.segment.start.hom, p2.segment.start.hom),
            dist_h(k, p1.segment.end.hom, p2.segment.end.hom),
        )
    return worst


def loop_type(c: LoopCandidate):
    if c.curve is None:
        return None
    return loop_signature(c.curve).type


@dataclass
class OracleReport:
    vertex: int
    samples: int
    max_length: float
    returns: int  # simple loops found by the sweep (with repeats)
    geometric: dict  # middle -> returns matching that candidate curve
    pattern_only: dict  # middle -> returns crossing the candidate's edges but elsewhere
    unmatched: list  # crossing lists of returns that belong to no candidate
    traces: int = 0

    @property
    def ok(self) -> bool:
        return not self.unmatched


def shooting_oracle(t: TetraMetric, v, samples: int = 10000, max_length: float = 4 * math.pi, max_steps: int = 200, tol: float = 1e-6) -> OracleReport:
    """Sweep directions at ``v`` and sort every simple return into the candidate it belongs to.

    A return matches geometrically when it retraces the candidate curve (either
    orientation); it matches by pattern when it crosses the same two edges.
    Degenerate tetrahedra (cone angle 2 pi at the apex) have a continuum of
    returns, which can only match by pattern.
    """
    _check_spherical(t)
    v = parse_vertex(v)
    cands = [resolve_candidate(c) for c in enumerate_candidates(t, v)]
    loops, res = sweep_loops(t, v, samples, max_length, max_steps)
    geo = {c.middle: 0 for c in cands}
    pat = {c.middle: 0 for c in cands}
    unmatched = []
    for lp in loops:
        edges = {e for e, _ in lp.crossings}
        hit = None
        for c in cands:
            if c.status == "exists" and edges == set(c.crossed_edges) and len(lp.crossings) == 2:
                hit = c
                break
        if hit is None:
            unmatched.append([e for e, _ in lp.crossings])
            continue
        gap = min(curve_distance(lp, hit.curve), curve_distance(reverse_curve(lp), hit.curve))
        if gap < tol:
            geo[hit.middle] += 1
        else:
            pat[hit.middle] += 1
    return OracleReport(v, samples, max_length, len(loops), geo, pat, unmatched, res.traces)


def _resolve_pair(args):
    t, apex, middle = args
    (c,) = [x for x in enumerate_candidates(t, apex) if x.middle == middle]
    return resolve_candidate(c)


def loop_census(t: TetraMetric, vertices=(1, 2, 3, 4), jobs: int = 1) -> dict:
    """Resolved candidates for every apex, keyed by vertex and sorted by middle vertex."""
    _check_spherical(t)
    tasks = [(t, v, m) for v in vertices for m in (1, 2, 3, 4) if m != v]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as ex:
            done = list(ex.map(_resolve_pair, tasks))
    else:
        done = [_resolve_pair(x) for x in tasks]
    out = {v: [] for v in vertices}
    for c in done:
        out[c.apex].append(c)
    for v in out:
        out[v].sort(key=lambda c: c.middle)
    return out


def census_counts(census: dict) -> dict:
    flat = [c for cs in census.values() for c in cs]
    return {
        "exists": sum(c.status == "exists" for c in flat),
        "blocked": sum(c.status == "blocked" for c in flat),
        "vertex hit": sum(c.status == "blocked" and (c.witness or {}).get("kind") == "vertex hit" for c in flat),
    }


__all__ = [
    "LoopCandidate",
    "PoleCertificate",
    "enumerate_candidates",
    "resolve_candidate",
    "construct_pole_loop",
    "loop_census",
    "census_counts",
    "regime",
    "curve_distance",
    "OracleReport",
    "shooting_oracle",
]
