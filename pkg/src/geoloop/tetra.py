"""Intrinsic tetrahedra: six edge lengths over a model curvature.

Vertices are the integers 1..4, edges sorted pairs ``(i, j)``, faces sorted
triples ``(i, j, k)``.  Nothing here embeds the tetrahedron in a 3-space; all
geometry is read off face charts placed in the model surface.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .cckernel import (
    TOL,
    Curvature,
    GeodesicSegment,
    GeometryError,
    Isometry2,
    ModelPoint,
    as_curvature,
    cross,
    exp_point,
    frame_isometry_h,
    normal_norm,
    origin,
    point_segment_distance,
    solve_angle_from_sides,
    solve_side_from_angles,
    tangent_toward_h,
)

VERTICES = (1, 2, 3, 4)
EDGES = tuple(itertools.combinations(VERTICES, 2))
FACES = tuple(itertools.combinations(VERTICES, 3))


def edge(i: int, j: int) -> tuple[int, int]:
    if i == j:
        raise GeometryError(f"degenerate edge A{i}A{j}")
    return (i, j) if i < j else (j, i)


def face_of(*vs: int) -> tuple[int, int, int]:
    f = tuple(sorted(vs))
    if len(set(f)) != 3:
        raise GeometryError(f"not a face: {vs}")
    return f


def face_edges(f) -> tuple[tuple[int, int], ...]:
    i, j, k = f
    return ((i, j), (i, k), (j, k))


def edge_faces(e) -> tuple[tuple[int, int, int], ...]:
    return tuple(f for f in FACES if e[0] in f and e[1] in f)


def across(f, e) -> tuple[int, int, int]:
    """Face on the other side of edge ``e`` from face ``f``."""
    a, b = edge_faces(e)
    if f == a:
        return b
    if f == b:
        return a
    raise GeometryError(f"edge {edge_name(e)} is not on face {face_name(f)}")


def opposite_edge(e) -> tuple[int, int]:
    return tuple(v for v in VERTICES if v not in e)


def opposite_face(v: int) -> tuple[int, int, int]:
    return tuple(u for u in VERTICES if u != v)


def third_vertex(f, e) -> int:
    (v,) = [u for u in f if u not in e]
    return v


OPPOSITE_PAIRS = (((1, 2), (3, 4)), ((1, 3), (2, 4)), ((1, 4), (2, 3)))


def vertex_name(v: int) -> str:
    return f"A{v}"


def edge_name(e) -> str:
    return f"A{e[0]}A{e[1]}"


def face_name(f) -> str:
    return "".join(f"A{v}" for v in f)


def parse_vertex(name) -> int:
    if isinstance(name, int) and name in VERTICES:
        return name
    s = str(name).strip().upper()
    if s.startswith("A"):
        s = s[1:]
    if s in {"1", "2", "3", "4"}:
        return int(s)
    raise GeometryError(f"bad vertex id {name!r}")


def parse_edge(name) -> tuple[int, int]:
    if isinstance(name, tuple):
        return edge(*name)
    s = str(name).strip().upper()
    parts = [p for p in s.split("A") if p]
    if len(parts) != 2:
        raise GeometryError(f"bad edge id {name!r}")
    return edge(parse_vertex(parts[0]), parse_vertex(parts[1]))


@dataclass(frozen=True, eq=False)
class TetraMetric:
    """Curvature plus six edge lengths; face angles derived eagerly."""

    kappa: Curvature
    edge_lengths: dict
    face_angles: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kappa", as_curvature(self.kappa))
        lengths = {}
        for e in EDGES:
            if e not in self.edge_lengths:
                raise GeometryError(f"missing edge {edge_name(e)}")
            lengths[e] = float(self.edge_lengths[e])
        object.__setattr__(self, "edge_lengths", lengths)
        angles = {}
        for f in FACES:
            for v in f:
                a = lengths[edge(*[u for u in f if u != v])]
                b, c = (lengths[edge(v, u)] for u in f if u != v)
                try:
                    angles[(f, v)] = solve_angle_from_sides(a, b, c, self.kappa)
                except GeometryError:
                    angles[(f, v)] = math.nan
        object.__setattr__(self, "face_angles", angles)

    def length(self, i: int, j: int) -> float:
        return self.edge_lengths[edge(i, j)]

    def angle(self, f, v: int) -> float:
        return self.face_angles[(tuple(f), v)]

    def faces_at(self, v: int):
        return tuple(f for f in FACES if v in f)

    def angle_sum(self, v: int) -> float:
        return sum(self.angle(f, v) for f in self.faces_at(v))

    @property
    def is_regular(self) -> bool:
        ls = list(self.edge_lengths.values())
        return max(ls) - min(ls) <= TOL.geom * max(1.0, max(ls))

    def relabel(self, perm: dict) -> "TetraMetric":
        """Metric seen through a vertex relabelling ``old -> perm[old]``."""
        if sorted(perm) != list(VERTICES) or sorted(perm.values()) != list(VERTICES):
            raise GeometryError("relabelling must permute A1..A4")
        lengths = {edge(perm[i], perm[j]): self.edge_lengths[(i, j)] for i, j in EDGES}
        return TetraMetric(self.kappa, lengths)

    @cached_property
    def charts(self) -> dict:
        """Canonical placement of every face (see :func:`face_chart`)."""
        return {f: face_chart(self, f) for f in FACES}

    @cached_property
    def inward_normals(self) -> dict:
        """``(face, edge) -> c`` with ``c . x`` = S(distance to the edge line), positive inside."""
        return {(f, e): inward_normal(self, f, e) for f in FACES for e in face_edges(f)}

    @cached_property
    def glue(self) -> dict:
        """``(face, edge) -> Isometry2`` taking the neighbour's chart into this face's chart."""
        return {(f, e): glue_matrix(self, f, e) for f in FACES for e in face_edges(f)}


def face_chart(t: TetraMetric, f) -> dict:
    """Canonical chart of face ``f = (i, j, k)``.

    ``i`` at the origin, ``j`` along the positive first axis, ``k`` on the left,
    so every chart is counter-clockwise in sorted vertex order.
    """
    i, j, k = f
    o = origin(t.kappa)
    pj = exp_point(o, np.array([1.0, 0.0, 0.0]), t.length(i, j))
    ang = t.angle(f, i)
    if not math.isfinite(ang):
        raise GeometryError(f"face {face_name(f)} is not a valid triangle")
    pk = exp_point(o, np.array([math.cos(ang), math.sin(ang), 0.0]), t.length(i, k))
    return {i: o, j: pj, k: pk}


def inward_normal(t: TetraMetric, f, e) -> np.ndarray:
    chart = t.charts[f]
    u, v = e
    w = third_vertex(f, e)
    c = cross(chart[u].hom, chart[v].hom)
    if float(c @ chart[w].hom) < 0:
        c = -c
    return c / normal_norm(t.kappa, c)


def glue_matrix(t: TetraMetric, f, e) -> Isometry2:
    """Isometry placing the face across ``e`` next to the canonical chart of ``f``.

    The shared edge is matched pointwise and the two third vertices end up on
    opposite sides of it.  The result may reverse orientation, since canonical
    charts are not coherently oriented on the surface.
    """
    k = t.kappa
    nb = across(f, e)
    x, y = t.charts[f], t.charts[nb]
    u, v = e
    side_f = float(cross(x[u].hom, x[v].hom) @ x[third_vertex(f, e)].hom)
    side_n = float(cross(y[u].hom, y[v].hom) @ y[third_vertex(nb, e)].hom)
    a = frame_isometry_h(k, x[u].hom, tangent_toward_h(k, x[u].hom, x[v].hom))
    b = frame_isometry_h(k, y[u].hom, tangent_toward_h(k, y[u].hom, y[v].hom))
    flip = -1.0 if side_f * side_n > 0 else 1.0
    return a @ Isometry2(np.diag([1.0, flip, 1.0]), k) @ b.inverse()


def _face_violation(t: TetraMetric, f) -> str | None:
    i, j, k = f
    a, b, c = t.length(j, k), t.length(i, k), t.length(i, j)
    if min(a, b, c) <= 0 or not all(map(math.isfinite, (a, b, c))):
        return "non-positive edge length"
    s = 0.5 * (a + b + c)
    if min(s - a, s - b, s - c) <= 0:
        return "triangle inequality violated"
    if t.kappa == Curvature.SPHERICAL and (max(a, b, c) >= math.pi or s >= math.pi):
        return "invalid spherical face"
    return None


def validate(t: TetraMetric, strict_cone: bool = False) -> list[dict]:
    """Machine-readable violations; an empty list means the metric is usable.

    Cone angles of 2*pi or more are legitimate cone metrics and only count as
    violations with ``strict_cone=True``.
    """
    out = []
    for e in EDGES:
        ell = t.edge_lengths[e]
        if not (math.isfinite(ell) and ell > 0):
            out.append({"code": "non-positive edge length", "edge": edge_name(e), "value": ell})
    bad_faces = set()
    for f in FACES:
        why = _face_violation(t, f)
        if why is not None:
            bad_faces.add(f)
            code = "invalid spherical face" if t.kappa == Curvature.SPHERICAL else "invalid face"
            out.append({"code": code, "face": face_name(f), "reason": why})
    if out:
        return out
    if t.kappa != Curvature.FLAT:
        for f in FACES:
            for v in f:
                others = [u for u in f if u != v]
                a = t.length(*others)
                try:
                    back = solve_side_from_angles(
                        t.angle(f, v), t.angle(f, others[0]), t.angle(f, others[1]), t.kappa
                    )
                except GeometryError:
                    back = math.nan
                if not abs(back - a) <= TOL.trig * max(1.0, a):
                    out.append(
                        {"code": "angle round-trip", "face": face_name(f), "vertex": vertex_name(v),
                         "side": a, "recovered": back}
                    )
    if strict_cone:
        for v in VERTICES:
            cone = t.angle_sum(v)
            if cone >= 2 * math.pi:
                out.append({"code": "cone angle not below 2pi", "vertex": vertex_name(v), "value": cone})
    return out


def is_valid(t: TetraMetric, strict_cone: bool = False) -> bool:
    return not validate(t, strict_cone)


def tetra_from_edges(kappa, lengths: dict) -> TetraMetric:
    t = TetraMetric(as_curvature(kappa), {parse_edge(k): v for k, v in lengths.items()})
    problems = validate(t)
    if problems:
        raise GeometryError(f"invalid tetrahedron: {problems[0]['code']}")
    return t


def regular_from_edge(kappa, a: float) -> TetraMetric:
    t = TetraMetric(as_curvature(kappa), {e: float(a) for e in EDGES})
    problems = validate(t)
    if problems:
        raise GeometryError(f"no regular tetrahedron with this edge: {problems[0]['code']}")
    return t


def regular_from_angle(kappa, alpha: float, edge_length: float = 1.0) -> TetraMetric:
    """Regular tetrahedron whose faces have angle ``alpha`` at every corner.

    The flat case only admits alpha = pi/3 and then takes ``edge_length``.
    """
    kappa = as_curvature(kappa)
    if kappa == Curvature.FLAT:
        if abs(alpha - math.pi / 3) > TOL.trig:
            raise GeometryError("no regular tetrahedron with this face angle")
        return regular_from_edge(kappa, edge_length)
    lo, hi = (math.pi / 3, math.pi) if kappa > 0 else (0.0, math.pi / 3)
    if not (lo < alpha < hi):
        raise GeometryError("no regular tetrahedron with this face angle")
    a = solve_side_from_angles(alpha, alpha, alpha, kappa)
    return regular_from_edge(kappa, a)


def equifacial_from_angles(kappa, angles) -> TetraMetric:
    """Tetrahedron with four congruent faces of the given angle triple.

    Opposite edges get equal lengths: A1A2 = A3A4 opposite the first angle,
    A1A3 = A2A4 opposite the second, A1A4 = A2A3 opposite the third.
    """
    al, be, ga = angles
    kappa = as_curvature(kappa)
    a = solve_side_from_angles(al, be, ga, kappa)
    b = solve_side_from_angles(be, ga, al, kappa)
    c = solve_side_from_angles(ga, al, be, kappa)
    lengths = {(1, 2): a, (3, 4): a, (1, 3): b, (2, 4): b, (1, 4): c, (2, 3): c}
    return tetra_from_edges(kappa, lengths)


@dataclass(frozen=True)
class VertexData:
    vertex: int
    angle_sum: float
    height: float
    clearance_bound: float | None
    status: str  # "ok" | "hypothesis violated" | "undefined"

    @property
    def half_angle(self) -> float:
        return 0.5 * self.angle_sum


def vertex_data(t: TetraMetric, v: int) -> VertexData:
    """Angle sum, height and vertex-clearance bound at vertex ``v``.

    The height is the smallest distance, inside an incident face, from ``v``
    to the opposite side.  The clearance bound asinh(cos(s/2) sinh h) is only
    defined on hyperbolic tetrahedra whose angle sum s at ``v`` is below pi.
    """
    v = parse_vertex(v)
    if validate(t):
        raise GeometryError("invalid tetrahedron")
    h = math.inf
    for f in t.faces_at(v):
        chart = t.charts[f]
        others = [u for u in f if u != v]
        seg = GeodesicSegment(chart[others[0]], chart[others[1]])
        d, _ = point_segment_distance(chart[v], seg)
        h = min(h, d)
    total = t.angle_sum(v)
    if t.kappa != Curvature.HYPERBOLIC:
        return VertexData(v, total, h, None, "undefined")
    if total >= math.pi:
        return VertexData(v, total, h, None, "hypothesis violated")
    bound = math.asinh(math.cos(0.5 * total) * math.sinh(h))
    return VertexData(v, total, h, bound, "ok")


def face_angle_extremes(t: TetraMetric) -> tuple[float, float]:
    vals = list(t.face_angles.values())
    return min(vals), max(vals)


def chart_point(t: TetraMetric, f, v: int) -> ModelPoint:
    return t.charts[tuple(f)][v]
