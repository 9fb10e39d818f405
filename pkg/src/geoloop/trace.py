"""Geodesics on the surface of a tetrahedron.

Curves are stored as lists of per-face pieces in canonical face charts.  The
tracer itself lives in a compiled extension with a pure-Python twin; set
``GEOLOOP_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
import weakref
from dataclasses import dataclass, field

import numpy as np

from .cckernel import (
    TOL,
    Curvature,
    GeodesicSegment,
    GeometryError,
    ModelPoint,
    angle_between_h,
    cross,
    dist_h,
    form,
    intersect_segments,
    left_normal_h,
    normalize_hom,
    normalize_tangent,
    point_segment_distance,
    rotate_tangent_h,
    tangent_toward_h,
    transport_h,
)
from .develop import CuttingSequence, Development, WalkReport, unroll_faces
from .tetra import (
    EDGES,
    FACES,
    OPPOSITE_PAIRS,
    TetraMetric,
    across,
    edge,
    edge_name,
    face_edges,
    regular_from_edge,
    third_vertex,
    vertex_data,
)

if os.environ.get("GEOLOOP_PURE_PYTHON"):
    from ._tracecore_py import trace as _kernel_trace

    KERNEL = "python"
else:
    try:
        from ._tracecore import trace as _kernel_trace

        KERNEL = "compiled"
    except ImportError:  # extension not built
        from ._tracecore_py import trace as _kernel_trace

        KERNEL = "python"

STOP_REASONS = ("max_length", "vertex hit", "closed", "max steps", "error")


# ---------------------------------------------------------------------------
# points and curves


@dataclass(frozen=True)
class SurfacePoint:
    """A point of a face in its canonical chart, with an incidence tag.

    ``tag`` is ``("interior",)``, ``("edge", e, s)`` with ``s`` the fraction
    along the sorted edge, or ``("vertex", v)``.
    """

    face: tuple
    position: ModelPoint
    tag: tuple = ("interior",)

    @property
    def kind(self) -> str:
        return self.tag[0]


def interior_point(t: TetraMetric, f, weights=(1.0, 1.0, 1.0)) -> SurfacePoint:
    f = tuple(sorted(f))
    chart = t.charts[f]
    h = sum(w * chart[v].hom for w, v in zip(weights, f))
    return SurfacePoint(f, ModelPoint.from_hom(t.kappa, h))


def edge_point(t: TetraMetric, e, s: float, face=None) -> SurfacePoint:
    """Point at fraction ``s`` of the way along the sorted edge ``e``."""
    e = edge(*e)
    if not 0.0 < s < 1.0:
        raise GeometryError("edge parameter must lie in (0, 1)")
    f = tuple(sorted(face)) if face is not None else next(g for g in FACES if set(e) <= set(g))
    if not set(e) <= set(f):
        raise GeometryError(f"edge {edge_name(e)} is not on the requested face")
    chart = t.charts[f]
    u, w = chart[e[0]].hom, chart[e[1]].hom
    k = int(t.kappa)
    ell = t.length(*e)
    d = tangent_toward_h(k, u, w)
    from .cckernel import geodesic_point_h

    x = geodesic_point_h(k, u, d, s * ell)
    return SurfacePoint(f, ModelPoint.from_hom(k, x), ("edge", e, s))


def vertex_point(t: TetraMetric, v: int, face) -> SurfacePoint:
    f = tuple(sorted(face))
    if v not in f:
        raise GeometryError("vertex is not on the face")
    return SurfacePoint(f, t.charts[f][v], ("vertex", v))


@dataclass(frozen=True)
class CurvePiece:
    face: tuple
    segment: GeodesicSegment
    enter: tuple
    exit: tuple
    dev_index: int | None = None

    @property
    def length(self) -> float:
        return self.segment.length


@dataclass(frozen=True, eq=False)
class SurfaceCurve:
    tetra: TetraMetric
    pieces: tuple
    closed: bool = False
    loop_vertex: int | None = None
    stop_reason: str | None = None
    development: Development | None = None

    @property
    def length(self) -> float:
        return float(sum(p.length for p in self.pieces))

    @property
    def faces(self) -> list:
        return [p.face for p in self.pieces]

    @property
    def crossings(self) -> list:
        """(edge, s) for every edge crossing, in order; loop-vertex junctions excluded."""
        return [(p.exit[1], p.exit[2]) for p in self.pieces if p.exit[0] == "edge"]

    @property
    def start(self) -> SurfacePoint:
        p = self.pieces[0]
        return SurfacePoint(p.face, p.segment.start, p.enter)

    @property
    def end(self) -> SurfacePoint:
        p = self.pieces[-1]
        return SurfacePoint(p.face, p.segment.end, p.exit)

    def vertices_touched(self) -> list:
        out = []
        for p in self.pieces:
            for tag in (p.enter, p.exit):
                if tag[0] == "vertex":
                    out.append(tag[1])
        return out


# ---------------------------------------------------------------------------
# kernel tables


_TABLES = weakref.WeakKeyDictionary()


def kernel_tables(t: TetraMetric):
    """Arrays consumed by the tracer kernel, indexed by position in FACES."""
    try:
        return _TABLES[t]
    except KeyError:
        pass
    charts = np.zeros((4, 3, 3))
    normals = np.zeros((4, 3, 3))
    ginv = np.zeros((4, 3, 3, 3))
    nbr = np.zeros((4, 3), dtype=np.int64)
    nbr_edge = np.zeros((4, 3), dtype=np.int64)
    for fi, f in enumerate(FACES):
        for vi, v in enumerate(f):
            charts[fi, vi] = t.charts[f][v].hom
        for m, e in enumerate(face_edges(f)):
            normals[fi, m] = t.inward_normals[(f, e)]
            nb = across(f, e)
            ginv[fi, m] = t.glue[(f, e)].inverse().matrix
            nbr[fi, m] = FACES.index(nb)
            nbr_edge[fi, m] = face_edges(nb).index(e)
    tabs = (charts, normals, ginv, nbr, nbr_edge)
    _TABLES[t] = tabs
    return tabs


# ---------------------------------------------------------------------------
# shooting


def start_frame(t: TetraMetric, start: SurfacePoint):
    """(position, reference tangent, sign) used to turn an angle into a direction.

    Angles are measured from the reference tangent, turning towards the inside
    of the face: along the edge towards its higher vertex for an edge point,
    towards the lower of the two other vertices for a vertex, and the chart's
    first axis carried from the chart origin for an interior point.
    """
    k = int(t.kappa)
    chart = t.charts[start.face]
    x = start.position.hom
    if start.kind == "edge":
        e = start.tag[1]
        ref = tangent_toward_h(k, x, chart[e[1]].hom)
        w = third_vertex(start.face, e)
    elif start.kind == "vertex":
        v = start.tag[1]
        a, b = [u for u in start.face if u != v]
        ref = tangent_toward_h(k, x, chart[a].hom)
        w = b
    else:
        o = np.array([0.0, 0.0, 0.0 if k == 0 else 1.0])
        e1 = np.array([1.0, 0.0, 0.0])
        r = dist_h(k, o, x)
        if r < 1e-15:
            return x, e1, 1.0
        u = tangent_toward_h(k, o, x)
        beta = math.atan2(float(left_normal_h(k, o, u) @ e1), float(u @ e1))
        ux = normalize_tangent(k, x, transport_h(k, o, u, r))
        ref = rotate_tangent_h(k, x, ux, beta)
        return x, normalize_tangent(k, x, ref), 1.0
    sign = 1.0 if float(cross(x, ref) @ chart[w].hom) > 0 else -1.0
    return x, ref, sign


def direction_from_angle(t: TetraMetric, start: SurfacePoint, angle: float) -> np.ndarray:
    x, ref, sign = start_frame(t, start)
    return rotate_tangent_h(int(t.kappa), x, ref, sign * angle)


def _tag_edge(t: TetraMetric, f, e, x) -> tuple:
    k = int(t.kappa)
    chart = t.charts[f]
    s = dist_h(k, chart[e[0]].hom, x) / t.length(*e)
    return ("edge", e, min(max(s, 0.0), 1.0))


def shoot(
    t: TetraMetric,
    start: SurfacePoint,
    direction,
    max_length: float,
    max_steps: int = 100000,
    eps_vertex: float | None = None,
    eps_close: float | None = None,
) -> SurfaceCurve:
    """Follow the geodesic from ``start``; ``direction`` is an angle or a tangent vector."""
    if not max_length > 0:
        raise GeometryError("max_length must be positive")
    k = int(t.kappa)
    if np.ndim(direction) == 0:
        d = direction_from_angle(t, start, float(direction))
    else:
        d = normalize_tangent(k, start.position.hom, np.asarray(direction, dtype=float))
    eps_vertex = TOL.vertex if eps_vertex is None else eps_vertex
    eps_close = TOL.close if eps_close is None else eps_close
    charts, normals, ginv, nbr, nbr_edge = kernel_tables(t)
    fi = FACES.index(start.face)
    x0 = start.position.hom
    # a start on an edge or at a vertex must head into the face
    for e in face_edges(start.face):
        c = t.inward_normals[(start.face, e)]
        if abs(float(c @ x0)) < TOL.geom and float(c @ d) < -TOL.geom:
            raise GeometryError("start direction points out of the face")
    code, faces, starts, ends, exits, total, hit = _kernel_trace(
        k, charts, normals, ginv, nbr, nbr_edge, fi, x0, d, float(max_length), int(max_steps),
        float(eps_vertex), float(eps_close),
    )
    return _curve_from_kernel(t, start, code, faces, starts, ends, exits, hit, eps_close)


def _curve_from_kernel(t, start, code, faces, starts, ends, exits, hit, eps_close) -> SurfaceCurve:
    k = int(t.kappa)
    reason = STOP_REASONS[code]
    pieces = []
    enter = start.tag
    n = len(faces)
    for i in range(n):
        f = FACES[faces[i]]
        a = ModelPoint.from_hom(k, starts[i])
        b = ModelPoint.from_hom(k, ends[i])
        if exits[i] >= 0:
            e = face_edges(f)[exits[i]]
            ex = _tag_edge(t, f, e, b.hom)
        else:
            ex = ("interior",)
        if i == n - 1 and reason == "vertex hit":
            ex = ("vertex", f[hit])
        if i == n - 1 and reason == "closed":
            ex = start.tag
        pieces.append([f, a, b, enter, ex])
        enter = ex
    if reason == "closed" and len(pieces) > 1:
        last = pieces[-1]
        if dist_h(k, last[1].hom, last[2].hom) < eps_close:
            pieces.pop()
            pieces[-1][4] = start.tag
    closed = reason == "closed"
    loop_vertex = None
    if reason == "vertex hit" and start.kind == "vertex" and pieces and pieces[-1][4][1] == start.tag[1]:
        loop_vertex = start.tag[1]
    out = []
    for f, a, b, en, ex in pieces:
        if dist_h(k, a.hom, b.hom) < 1e-15:
            continue
        out.append(CurvePiece(f, GeodesicSegment(a, b), en, ex))
    return SurfaceCurve(t, tuple(out), closed, loop_vertex, reason)


# ---------------------------------------------------------------------------
# curves from developments


def curve_from_walk(d: Development, rep: WalkReport, closed: bool = False, loop_vertex=None, start_tag=None, end_tag=None) -> SurfaceCurve:
    """Fold a successful walk back onto the surface."""
    if not rep.ok:
        raise GeometryError(f"walk did not succeed ({rep.outcome})")
    t = d.tetra
    k = int(t.kappa)
    pieces = []
    by_index = {c.index: c for c in rep.crossings}
    for n_piece, pc in enumerate(rep.pieces):
        f = pc.face
        a = ModelPoint.from_hom(k, pc.start)
        b = ModelPoint.from_hom(k, pc.end)
        if n_piece == 0:
            en = start_tag if start_tag is not None else _locate_tag(t, f, pc.start)
        else:
            prev = rep.crossings[n_piece - 1]
            en = _tag_edge(t, f, prev.edge, pc.start)
        if pc.index in by_index and n_piece < len(rep.pieces) - 1:
            c = by_index[pc.index]
            ex = ("edge", c.edge, c.s)
        else:
            ex = end_tag if end_tag is not None else _locate_tag(t, f, pc.end)
        pieces.append(CurvePiece(f, GeodesicSegment(a, b), en, ex, pc.index))
    return SurfaceCurve(t, tuple(pieces), closed, loop_vertex, "constructed", d)


def _locate_tag(t: TetraMetric, f, x) -> tuple:
    k = int(t.kappa)
    chart = t.charts[f]
    for v in f:
        if dist_h(k, chart[v].hom, x) < TOL.vertex:
            return ("vertex", v)
    for e in face_edges(f):
        if abs(float(t.inward_normals[(f, e)] @ x)) < TOL.geom:
            return _tag_edge(t, f, e, x)
    return ("interior",)


# ---------------------------------------------------------------------------
# checks on curves


def junction_residual(c: SurfaceCurve) -> float:
    """Worst deviation from straightness across the edge junctions of ``c``."""
    t = c.tetra
    k = int(t.kappa)
    worst = 0.0
    pairs = list(zip(c.pieces, c.pieces[1:]))
    if c.closed and c.loop_vertex is None and len(c.pieces) > 1:
        pairs.append((c.pieces[-1], c.pieces[0]))
    for p1, p2 in pairs:
        if p1.exit[0] != "edge":
            continue
        e = p1.exit[1]
        g = t.glue[(p1.face, e)]
        a = p1.segment.start.hom
        b = p1.segment.end.hom
        y = g.apply_h(p2.segment.end.hom)
        junction = g.apply_h(p2.segment.start.hom)
        worst = max(worst, dist_h(k, junction, b))
        d1 = tangent_toward_h(k, b, a)
        d2 = tangent_toward_h(k, b, y)
        worst = max(worst, abs(math.pi - angle_between_h(k, d1, d2)))
    return worst


def is_simple(c: SurfaceCurve):
    """(True, None) when ``c`` has no self-intersection, else (False, witness)."""
    t = c.tetra
    k = int(t.kappa)
    n = len(c.pieces)
    seen = []
    for i, (e, s) in enumerate(c.crossings):
        for j, (e2, s2) in seen:
            if e2 == e and abs(s2 - s) * t.length(*e) < TOL.geom:
                return False, {"kind": "repeated edge point", "edge": e, "s": s, "pieces": (j, i)}
        seen.append((i, (e, s)))
    for i in range(n):
        for j in range(i + 1, n):
            if c.pieces[i].face != c.pieces[j].face:
                continue
            if j == i + 1:
                continue
            if c.closed and i == 0 and j == n - 1:
                continue
            try:
                x = intersect_segments(c.pieces[i].segment, c.pieces[j].segment)
            except GeometryError:
                return False, {"kind": "overlap", "pieces": (i, j)}
            if x is not None:
                return False, {"kind": "crossing", "pieces": (i, j), "point": x, "face": c.pieces[i].face}
    inner = [p for p in c.pieces[1:]] if n > 1 else []
    for idx, p in enumerate(inner):
        if p.enter[0] == "vertex":
            return False, {"kind": "passes a vertex", "vertex": p.enter[1]}
    return True, None


# ---------------------------------------------------------------------------
# signatures


@dataclass(frozen=True)
class CrossingSignature:
    counts: dict
    type: tuple | None
    sector_edges: tuple = ()

    def grouped(self) -> tuple:
        return tuple((self.counts[a], self.counts[b]) for a, b in OPPOSITE_PAIRS)


def classify_counts(counts: dict) -> tuple | None:
    vals = []
    for a, b in OPPOSITE_PAIRS:
        if counts.get(a, 0) != counts.get(b, 0):
            return None
        vals.append(counts.get(a, 0))
    x, y, z = sorted(vals)
    if x + y != z or math.gcd(x, y) != 1:
        return None
    return (x, y)


def _count(crossings) -> dict:
    counts = {e: 0 for e in EDGES}
    for e, _ in crossings:
        counts[e] += 1
    return counts


def signature(c: SurfaceCurve) -> CrossingSignature:
    if not c.closed and c.loop_vertex is None:
        raise GeometryError("signature needs a closed curve")
    counts = _count(c.crossings)
    return CrossingSignature(counts, classify_counts(counts))


def cone_layout(t: TetraMetric, v: int):
    """Edges at ``v`` in cyclic order with their angular coordinate, and the total angle."""
    a, b, c = [u for u in (1, 2, 3, 4) if u != v]
    order = [a, b, c]
    coords = {}
    acc = 0.0
    for i, u in enumerate(order):
        coords[u] = acc
        nxt = order[(i + 1) % 3]
        acc += t.angle(tuple(sorted((v, u, nxt))), v)
    return order, coords, acc


def cone_coordinate(t: TetraMetric, v: int, face, toward) -> float:
    """Angular coordinate at ``v`` of the direction pointing at chart point ``toward`` in ``face``."""
    k = int(t.kappa)
    order, coords, total = cone_layout(t, v)
    u1, u2 = [u for u in face if u != v]
    # the face spans from its first edge (in cyclic order) to the next
    if order[(order.index(u1) + 1) % 3] == u2:
        first = u1
    else:
        first = u2
    chart = t.charts[face]
    x = chart[v].hom
    da = tangent_toward_h(k, x, chart[first].hom)
    dt = tangent_toward_h(k, x, np.asarray(toward))
    return (coords[first] + angle_between_h(k, da, dt)) % total


def loop_signature(c: SurfaceCurve, anchor=None) -> CrossingSignature:
    """Signature of a loop completed by the edges at its vertex on one side.

    Pushing the loop off its vertex makes it cross the edges at the vertex
    lying in one of the two sectors cut out by the loop's ends.  With an
    anchor edge the sector containing it is used; otherwise the sector that
    yields a (p, q) pattern is chosen (the first one on ties).
    """
    v = c.loop_vertex
    if v is None:
        return signature(c)
    t = c.tetra
    first, last = c.pieces[0], c.pieces[-1]
    th_out = cone_coordinate(t, v, first.face, first.segment.end.hom)
    th_in = cone_coordinate(t, v, last.face, last.segment.start.hom)
    order, coords, total = cone_layout(t, v)
    lo, hi = sorted((th_out, th_in))
    inside = tuple(edge(v, u) for u in order if lo < coords[u] < hi)
    outside = tuple(edge(v, u) for u in order if not lo <= coords[u] <= hi)
    base = _count(c.crossings)
    options = []
    for sector in (inside, outside):
        counts = dict(base)
        for e in sector:
            counts[e] += 1
        options.append((sector, counts))
    if anchor is not None:
        anchor = edge(*anchor)
        for sector, counts in options:
            if anchor in sector:
                return CrossingSignature(counts, classify_counts(counts), sector)
        raise GeometryError("anchor edge is not at the loop vertex or lies on the loop")
    for sector, counts in options:
        typ = classify_counts(counts)
        if typ is not None:
            return CrossingSignature(counts, typ, sector)
    sector, counts = options[0]
    return CrossingSignature(counts, None, sector)


# ---------------------------------------------------------------------------
# cutting sequences


def normalize_pq(p: int, q: int) -> tuple[int, int, bool]:
    p, q = int(p), int(q)
    if p < 0 or q < 0 or (p, q) == (0, 0):
        raise GeometryError("need nonnegative (p, q), not both zero")
    if math.gcd(p, q) != 1:
        raise GeometryError("not coprime")
    if p > q:
        return q, p, True
    return p, q, False


def cutting_sequence(p: int, q: int) -> CuttingSequence:
    """Edge schedule of the type-(p, q) closed geodesic of the flat regular tetrahedron."""
    p, q, swapped = normalize_pq(p, q)
    flat = regular_from_edge(Curvature.FLAT, 1.0)
    delta = 1.0 / (4 * (p + q + 1))
    s0 = 0.5 + delta
    theta = math.atan2(q * math.sqrt(3.0) / 2.0, p + q / 2.0)
    start = edge_point(flat, (1, 2), s0, face=(1, 2, 3))
    period = 2.0 * math.hypot(p + q / 2.0, q * math.sqrt(3.0) / 2.0)
    c = shoot(flat, start, theta, max_length=period + 0.5, max_steps=8 * (p + q) + 8)
    if c.stop_reason != "closed":
        raise GeometryError(f"flat shot did not close ({c.stop_reason})")
    edges = [(1, 2)] + [e for e, _ in c.crossings]
    n = 4 * (p + q)
    if len(edges) - 1 != n or edges[-1] != (1, 2):
        raise GeometryError("unexpected flat cutting sequence")
    return CuttingSequence(tuple(edges), p, q, swapped, s0, theta)


# ---------------------------------------------------------------------------
# clearance


def clearance_check(t: TetraMetric, c: SurfaceCurve, dev: Development) -> list:
    """Vertex clearance of a curve measured inside its development.

    For every vertex image of ``dev`` other than the loop vertex, ``d`` is its
    distance to the developed curve, measured over the pieces in the faces
    around that image and one face beyond on each side (images the curve
    never comes near are left out); the margin sinh d - cos(s/2) sinh h is
    expected to be positive for simple curves (s the angle sum, h the height).
    """
    if t.kappa != Curvature.HYPERBOLIC:
        raise GeometryError("clearance check is defined for hyperbolic tetrahedra")
    pieces = [p for p in c.pieces if p.dev_index is not None]
    if not pieces:
        raise GeometryError("curve carries no development indices")
    k = int(t.kappa)
    data = {v: vertex_data(t, v) for v in (1, 2, 3, 4)}
    out = []
    for r_i, run in enumerate(dev.vertex_runs):
        if run.vertex == c.loop_vertex:
            continue
        vd = data[run.vertex]
        best = math.inf
        where = None
        for p in pieces:
            kk = p.dev_index
            if not run.first - 1 <= kk <= run.last + 1:
                continue
            x = normalize_hom(k, dev.transfer(kk, run.first) @ dev.chart_point(run.first, run.vertex))
            dd, _ = point_segment_distance(ModelPoint(x, t.kappa), p.segment)
            if dd < best:
                best, where = dd, kk
        if where is None:
            continue  # the curve never enters the faces around this image
        rec = {
            "vertex": run.vertex,
            "image": r_i,
            "d": best,
            "face_index": where,
            "angle_sum": vd.angle_sum,
            "h": vd.height,
        }
        if vd.status != "ok":
            rec.update(bound=None, margin=None, status="not applicable")
        else:
            half = 0.5 * vd.angle_sum
            rec["bound"] = vd.clearance_bound
            rec["margin"] = math.sinh(best) - math.cos(half) * math.sinh(vd.height)
            rec["status"] = "pass" if rec["margin"] > 0 else "fail"
        out.append(rec)
    return out


def chord_near_vertex(t: TetraMetric, v: int, d: float, face=None, max_length: float = 50.0) -> SurfaceCurve:
    """Geodesic passing at distance ``d`` from ``v`` across the bisector of one face angle.

    Both halves are traced from the closest point and cut where they leave the
    faces around ``v``, so the result is the chord extended through the
    3-face development of ``v`` and nothing more.
    """
    k = int(t.kappa)
    if k >= 0:
        raise GeometryError("chord construction is for hyperbolic tetrahedra")
    f = tuple(sorted(face)) if face is not None else next(g for g in FACES if v in g)
    if v not in f:
        raise GeometryError("vertex is not on the face")
    ch = t.charts[f]
    a = ch[v].hom
    u, w = (tangent_toward_h(k, a, ch[x].hom) for x in f if x != v)
    bis = u + w
    bis = bis / math.sqrt(abs(form(k, bis, bis)))
    x = normalize_hom(k, math.cosh(d) * a + math.sinh(d) * bis)
    perp = left_normal_h(k, x, transport_h(k, a, bis, d))
    start = SurfacePoint(f, ModelPoint.from_hom(t.kappa, x))

    def star_part(c):
        out = []
        for pc in c.pieces:
            if v not in pc.face:
                break
            out.append(pc)
        return tuple(out)

    fw = shoot(t, start, perp, max_length=max_length)
    bw = shoot(t, start, -perp, max_length=max_length)
    back = reverse_curve(SurfaceCurve(t, star_part(bw), False, None, bw.stop_reason, None))
    return SurfaceCurve(t, back.pieces + star_part(fw), False, None, "chord", None)


# ---------------------------------------------------------------------------
# vertex sweeps


def vertex_direction(t: TetraMetric, v: int, psi: float):
    """Face and tangent at ``v`` for cone coordinate ``psi``."""
    k = int(t.kappa)
    order, coords, total = cone_layout(t, v)
    psi = psi % total
    for i, u in enumerate(order):
        nxt = order[(i + 1) % 3]
        f = tuple(sorted((v, u, nxt)))
        span = t.angle(f, v)
        if psi <= coords[u] + span or i == 2:
            local = min(max(psi - coords[u], 0.0), span)
            chart = t.charts[f]
            x = chart[v].hom
            ref = tangent_toward_h(k, x, chart[u].hom)
            sign = 1.0 if float(cross(x, ref) @ chart[nxt].hom) > 0 else -1.0
            return f, rotate_tangent_h(k, x, ref, sign * local)
    raise AssertionError("unreachable")


@dataclass
class _Ray:
    psi: float
    code: int
    faces: list
    exits: list
    hit: int
    total: float

    def key(self):
        return (tuple(self.faces), tuple(self.exits))


def _shoot_raw(t, v, psi, max_length, max_steps):
    f, d = vertex_direction(t, v, psi)
    charts, normals, ginv, nbr, nbr_edge = kernel_tables(t)
    x0 = t.charts[f][v].hom
    code, faces, starts, ends, exits, total, hit = _kernel_trace(
        int(t.kappa), charts, normals, ginv, nbr, nbr_edge, FACES.index(f), x0, d,
        float(max_length), int(max_steps), float(TOL.vertex), float(TOL.close),
    )
    hit_v = FACES[faces[-1]][hit] if code == 1 else -1
    return _Ray(psi, code, faces, exits, hit_v, total)


def _diverge(r1: _Ray, r2: _Ray):
    """Index of the first differing step, or None when the rays agree up to their caps."""
    n = min(len(r1.faces), len(r2.faces))
    for i in range(n):
        if r1.faces[i] != r2.faces[i] or r1.exits[i] != r2.exits[i]:
            return i
    if len(r1.faces) == len(r2.faces) and r1.code == r2.code and r1.hit == r2.hit:
        return None
    shorter = r1 if len(r1.faces) < len(r2.faces) else r2
    if shorter.code in (0, 3) or (len(r1.faces) == len(r2.faces) and r1.code in (0, 3) and r2.code in (0, 3)):
        return None
    return n - 1 if n else 0


@dataclass
class SweepEvent:
    psi_lo: float
    psi_hi: float
    step: int
    faces: list  # common face prefix, FACES indices
    vertex: int  # vertex between the diverging exits (-1 if unknown)


@dataclass
class SweepResult:
    vertex: int
    samples: int
    events: list = field(default_factory=list)
    direct_returns: list = field(default_factory=list)  # rays that hit the start vertex
    traces: int = 0


def vertex_sweep(t: TetraMetric, v: int, samples: int, max_length: float, max_steps: int, angle_tol: float = 1e-12) -> SweepResult:
    """Shoot from ``v`` on a grid of directions and locate every combinatorial change."""
    order, coords, total = cone_layout(t, v)
    res = SweepResult(v, samples)
    psis = [total * (i + 0.5) / samples for i in range(samples)]
    rays = [_shoot_raw(t, v, p, max_length, max_steps) for p in psis]
    res.traces += len(rays)
    for r in rays:
        if r.code == 1 and r.hit == v:
            res.direct_returns.append(r)

    def refine(r1, r2, depth):
        i = _diverge(r1, r2)
        if i is None:
            return
        if r2.psi - r1.psi < angle_tol or depth > 60:
            f = FACES[r1.faces[i]] if i < len(r1.faces) else None
            vert = -1
            if f is not None:
                e1 = face_edges(f)[r1.exits[i]] if r1.exits[i] >= 0 else None
                e2 = face_edges(FACES[r2.faces[i]])[r2.exits[i]] if i < len(r2.faces) and r2.exits[i] >= 0 else None
                if r1.code == 1 and len(r1.faces) == i + 1:
                    vert = r1.hit
                elif r2.code == 1 and len(r2.faces) == i + 1:
                    vert = r2.hit
                elif e1 and e2 and set(e1) & set(e2) and e1 != e2:
                    (vert,) = set(e1) & set(e2)
            res.events.append(SweepEvent(r1.psi, r2.psi, i, list(r1.faces[: i + 1]), vert))
            return
        mid = _shoot_raw(t, v, 0.5 * (r1.psi + r2.psi), max_length, max_steps)
        res.traces += 1
        refine(r1, mid, depth + 1)
        refine(mid, r2, depth + 1)

    for a, b in zip(rays, rays[1:]):
        refine(a, b, 0)
    # wrap-around between the last and first sample
    first = rays[0]
    wrapped = _Ray(first.psi + total, first.code, first.faces, first.exits, first.hit, first.total)
    refine(rays[-1], wrapped, 0)
    return res


def loop_from_faces(t: TetraMetric, v: int, faces) -> SurfaceCurve | None:
    """Exact geodesic loop at ``v`` through a face strip, if the straight segment fits."""
    from .develop import walk_path

    if len(faces) < 2:
        return None
    try:
        d = unroll_faces(t, faces)
    except GeometryError:
        return None
    n = len(faces)
    if v not in faces[0] or v not in faces[-1]:
        return None
    p = d.chart_point(0, v)
    q = d.chart_point(n - 1, v)
    if int(t.kappa) > 0:
        # loops on the sphere are often longer than pi: try every arc of the great circle
        q0 = normalize_hom(1, d.transfer(0, n - 1) @ q)
        ell = dist_h(1, p, q0)
        if ell < TOL.geom:
            return None
        u = tangent_toward_h(1, p, q0)
        tries = [dict(direction=u, length=ell), dict(direction=-u, length=2 * math.pi - ell),
                 dict(direction=u, length=ell + 2 * math.pi), dict(direction=-u, length=4 * math.pi - ell)]
    else:
        tries = [dict(q=q)]
    for kw in tries:
        try:
            rep = walk_path(d, 0, p, n - 1, **kw)
        except GeometryError:
            continue
        if rep.ok and rep.first_face == 0 and rep.last_face == n - 1:
            return curve_from_walk(d, rep, closed=True, loop_vertex=v, start_tag=("vertex", v), end_tag=("vertex", v))
    return None


def loop_from_ray(t: TetraMetric, v: int, r: _Ray) -> SurfaceCurve:
    f, d = vertex_direction(t, v, r.psi)
    start = vertex_point(t, v, f)
    return shoot(t, start, d, max_length=r.total + 1.0, max_steps=len(r.faces) + 2)


def sweep_loops(t: TetraMetric, v: int, samples: int, max_length: float, max_steps: int) -> tuple[list, SweepResult]:
    """Simple geodesic loops at ``v`` found by a direction sweep."""
    res = vertex_sweep(t, v, samples, max_length, max_steps)
    loops = []
    for ev in res.events:
        if ev.vertex != v:
            continue
        faces = [FACES[i] for i in ev.faces]
        c = loop_from_faces(t, v, faces)
        if c is not None and is_simple(c)[0]:
            loops.append(c)
    for r in res.direct_returns:
        c = loop_from_ray(t, v, r)
        if c.loop_vertex == v and is_simple(c)[0]:
            loops.append(c)
    return loops, res


def same_crossings(c1, c2, tol: float) -> bool:
    a, b = c1.crossings, c2.crossings
    if len(a) != len(b):
        return False
    t = c1.tetra
    for (e1, s1), (e2, s2) in zip(a, b):
        if e1 != e2 or abs(s1 - s2) * t.length(*e1) > tol:
            return False
    return True


def dedupe_loops(loops: list, tol: float) -> list:
    out = []
    for c in loops:
        if not any(same_crossings(c, o, tol) or same_crossings(reverse_curve(c), o, tol) for o in out):
            out.append(c)
    return out


def reverse_curve(c: SurfaceCurve) -> SurfaceCurve:
    pieces = tuple(
        CurvePiece(p.face, GeodesicSegment(p.segment.end, p.segment.start), p.exit, p.enter, p.dev_index)
        for p in reversed(c.pieces)
    )
    return SurfaceCurve(c.tetra, pieces, c.closed, c.loop_vertex, c.stop_reason, None)


def relabel_crossings(crossings, perm: dict) -> list:
    out = []
    for (a, b), s in crossings:
        pa, pb = perm[a], perm[b]
        out.append((edge(pa, pb), s if pa < pb else 1.0 - s))
    return out


def symmetry_equivalent(c1: SurfaceCurve, c2: SurfaceCurve, perms, tol: float) -> bool:
    """``c2`` equals ``c1`` up to one of the vertex permutations and reversal."""
    t = c1.tetra
    b = c2.crossings
    for src in (c1, reverse_curve(c1)):
        for perm in perms:
            a = relabel_crossings(src.crossings, perm)
            if len(a) == len(b) and all(
                e1 == e2 and abs(s1 - s2) * t.length(*e1) <= tol for (e1, s1), (e2, s2) in zip(a, b)
            ):
                return True
    return False


def loop_length_check(c: SurfaceCurve) -> float:
    return c.length


__all__ = [
    "KERNEL",
    "SurfacePoint",
    "SurfaceCurve",
    "CurvePiece",
    "CrossingSignature",
    "interior_point",
    "edge_point",
    "vertex_point",
    "shoot",
    "is_simple",
    "signature",
    "loop_signature",
    "classify_counts",
    "cutting_sequence",
    "normalize_pq",
    "clearance_check",
    "chord_near_vertex",
    "junction_residual",
    "curve_from_walk",
    "vertex_sweep",
    "sweep_loops",
    "symmetry_equivalent",
]
