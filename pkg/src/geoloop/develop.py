"""Developments: face sequences of a tetrahedron laid out on the model surface.

A development keeps one glue matrix per placed face (``glue[k]`` maps the
canonical chart of face ``k`` into the chart of face ``k - 1``; ``glue[0]`` is
the base placement).  Long hyperbolic developments reach points whose
hyperboloid coordinates are astronomically large, so walks never go through a
single global frame: every test is done in the chart of the face where it
happens, with end points carried there by products of neighbouring glue
matrices.
"""

from __future__ import annotations

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
    S_inv,
    cross,
    dist_h,
    form,
    normal_norm,
    normalize_hom,
    normalize_tangent,
    tangent_toward_h,
)
from .tetra import (
    EDGES,
    FACES,
    TetraMetric,
    across,
    edge,
    edge_faces,
    edge_name,
    face_edges,
    face_name,
    third_vertex,
)


class FaceAdjacency:
    """The fixed combinatorics of a tetrahedron."""

    vertices = (1, 2, 3, 4)
    edges = EDGES
    faces = FACES

    @staticmethod
    def face_edges(f):
        return face_edges(f)

    @staticmethod
    def edge_faces(e):
        return edge_faces(e)

    @staticmethod
    def across(f, e):
        return across(f, e)

    @staticmethod
    def common_face(e1, e2):
        """The unique face containing two distinct edges that share a vertex."""
        e1, e2 = tuple(e1), tuple(e2)
        if e1 == e2 or not set(e1) & set(e2):
            raise GeometryError("not a gluing schedule")
        (f,) = [f for f in FACES if set(e1) <= set(f) and set(e2) <= set(f)]
        return f

    @staticmethod
    def shared_edge(f1, f2):
        common = sorted(set(f1) & set(f2))
        if len(common) != 2 or tuple(f1) == tuple(f2):
            raise GeometryError("not a gluing schedule")
        return tuple(common)


@dataclass(frozen=True)
class CuttingSequence:
    """Edges crossed by a closed curve, opened at the base edge.

    ``edges[0]`` and ``edges[-1]`` are both the base edge; face ``k`` of the
    associated development lies between ``edges[k]`` and ``edges[k + 1]``.
    """

    edges: tuple
    p: int
    q: int
    swapped: bool = False
    start_param: float | None = None
    direction: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if len(self.edges) < 2 or self.edges[0] != self.edges[-1]:
            raise GeometryError("not a gluing schedule")
        schedule_faces(self.edges)

    @property
    def crossings(self) -> tuple:
        return self.edges[1:]

    def __len__(self):
        return len(self.edges) - 1

    @property
    def faces(self) -> list:
        return schedule_faces(self.edges)


def schedule_faces(edges) -> list:
    edges = [tuple(e) for e in edges]
    if len(edges) < 2:
        raise GeometryError("not a gluing schedule")
    for e in edges:
        if e not in EDGES:
            raise GeometryError("not a gluing schedule")
    return [FaceAdjacency.common_face(a, b) for a, b in zip(edges, edges[1:])]


@dataclass(frozen=True)
class PlacedFace:
    face: tuple
    placement: Isometry2


@dataclass(frozen=True)
class GluingEdge:
    index: int  # between placed faces index and index + 1
    edge: tuple
    images: tuple  # (ModelPoint, ModelPoint) in sorted vertex order


@dataclass(frozen=True)
class VertexRun:
    """Consecutive placed faces sharing one image of a tetrahedron vertex."""

    vertex: int
    first: int
    last: int
    image: ModelPoint | None
    angle: float


@dataclass(frozen=True, eq=False)
class Development:
    tetra: TetraMetric
    faces: tuple
    glue: tuple  # Isometry2 per face; glue[0] is the base placement

    @property
    def kappa(self) -> Curvature:
        return self.tetra.kappa

    def __len__(self):
        return len(self.faces)

    @cached_property
    def interior_edges(self) -> tuple:
        return tuple(FaceAdjacency.shared_edge(a, b) for a, b in zip(self.faces, self.faces[1:]))

    @cached_property
    def placements(self) -> tuple:
        out = []
        m = self.glue[0]
        out.append(m)
        for g in self.glue[1:]:
            m = m @ g
            out.append(m)
        return tuple(out)

    @property
    def placed_faces(self) -> list:
        return [PlacedFace(f, m) for f, m in zip(self.faces, self.placements)]

    def chart_point(self, k: int, v: int) -> np.ndarray:
        return self.tetra.charts[self.faces[k]][v].hom

    def image(self, k: int, v: int) -> ModelPoint:
        """Global image of vertex ``v`` of placed face ``k``."""
        return self.placements[k](self.tetra.charts[self.faces[k]][v])

    def to_global(self, k: int, x) -> ModelPoint:
        return ModelPoint.from_hom(self.kappa, self.placements[k].matrix @ np.asarray(x))

    def transfer(self, k: int, j: int) -> np.ndarray:
        """Matrix taking chart ``j`` coordinates to chart ``k`` coordinates."""
        m = np.eye(3)
        if j > k:
            for i in range(k + 1, j + 1):
                m = m @ self.glue[i].matrix
        elif j < k:
            for i in range(k, j, -1):
                m = m @ self.glue[i].inverse().matrix
        return m

    @cached_property
    def gluing_edges(self) -> tuple:
        out = []
        for k, e in enumerate(self.interior_edges):
            out.append(GluingEdge(k, e, (self.image(k, e[0]), self.image(k, e[1]))))
        return tuple(out)

    @cached_property
    def vertex_runs(self) -> tuple:
        runs = []
        for v in (1, 2, 3, 4):
            k = 0
            n = len(self.faces)
            while k < n:
                if v not in self.faces[k]:
                    k += 1
                    continue
                first = k
                while k + 1 < n and v in self.interior_edges[k]:
                    k += 1
                ang = sum(self.tetra.angle(self.faces[i], v) for i in range(first, k + 1))
                try:
                    img = self.image(first, v)
                except GeometryError:
                    img = None  # too far from the base chart to normalize
                runs.append(VertexRun(v, first, k, img, ang))
                k += 1
        return tuple(runs)

    @cached_property
    def vertex_images(self) -> dict:
        table = {v: [] for v in (1, 2, 3, 4)}
        for r in self.vertex_runs:
            table[r.vertex].append(r.image)
        return {v: imgs for v, imgs in table.items() if imgs}

    def gluing_residual(self) -> float:
        """Largest mismatch of shared edge end points between neighbouring faces."""
        worst = 0.0
        for k, e in enumerate(self.interior_edges):
            for v in e:
                a = self.chart_point(k, v)
                b = self.glue[k + 1].apply_h(self.chart_point(k + 1, v))
                worst = max(worst, dist_h(self.kappa, a, b))
        return worst

    @cached_property
    def overlapping(self) -> bool:
        """True when two placed faces have overlapping interiors."""
        return bool(overlap_pairs(self, first_only=True))


def _glue_for(t: TetraMetric, f, e, flip: bool = False) -> Isometry2:
    g = t.glue[(f, e)]
    if flip:
        # negative control: glue with the reflected orientation
        g = g @ _edge_reflection(t, across(f, e), e)
    return g


def _edge_reflection(t: TetraMetric, f, e) -> Isometry2:
    from .cckernel import reflect_across

    chart = t.charts[f]
    return reflect_across(GeodesicSegment(chart[e[0]], chart[e[1]]))


def unroll_faces(t: TetraMetric, faces, base: Isometry2 | None = None, flip_gluing=()) -> Development:
    """Develop an explicit face list; consecutive faces must share an edge."""
    faces = [tuple(sorted(f)) for f in faces]
    if not faces or any(f not in FACES for f in faces):
        raise GeometryError("not a gluing schedule")
    base = Isometry2.identity(t.kappa) if base is None else base
    if base.kappa != t.kappa:
        raise GeometryError("mixed curvature")
    glue = [base]
    for k in range(1, len(faces)):
        e = FaceAdjacency.shared_edge(faces[k - 1], faces[k])
        glue.append(_glue_for(t, faces[k - 1], e, flip=k in flip_gluing))
    return Development(t, tuple(faces), tuple(glue))


def unroll(t: TetraMetric, seq, base: Isometry2 | None = None, flip_gluing=()) -> Development:
    """Develop the faces visited by a gluing schedule.

    ``seq`` is a :class:`CuttingSequence` or an edge list ``[e0, e1, ..., en]``;
    face ``k`` is the face containing ``e_k`` and ``e_(k+1)``, so the interior
    gluing edges are ``e1 .. e(n-1)``.  ``flip_gluing`` lists gluing indices
    whose orientation is deliberately reversed (for negative controls).
    """
    edges = seq.edges if isinstance(seq, CuttingSequence) else [tuple(sorted(e)) for e in seq]
    faces = schedule_faces(edges)
    return unroll_faces(t, faces, base, flip_gluing)


def vertex_pair_development(t: TetraMetric, apex: int, middle: int, base: Isometry2 | None = None) -> Development:
    """Three-face strip around ``middle`` avoiding the apex-middle edge.

    Faces are (apex, middle, x), (middle, x, y), (apex, middle, y) with x < y the
    remaining vertices; the two apex images sit at both ends.
    """
    if apex not in (1, 2, 3, 4) or middle not in (1, 2, 3, 4) or apex == middle:
        raise GeometryError("middle vertex must lie on the face opposite the apex")
    x, y = sorted(v for v in (1, 2, 3, 4) if v not in (apex, middle))
    faces = [tuple(sorted((apex, middle, x))), tuple(sorted((middle, x, y))), tuple(sorted((apex, middle, y)))]
    return unroll_faces(t, faces, base)


def star_development(t: TetraMetric, v: int, cut_toward: int, base: Isometry2 | None = None) -> Development:
    """The three faces around ``v`` developed after cutting along edge ``v``-``cut_toward``."""
    others = [u for u in (1, 2, 3, 4) if u not in (v, cut_toward)]
    a, b = others
    faces = [tuple(sorted((v, cut_toward, a))), tuple(sorted((v, a, b))), tuple(sorted((v, b, cut_toward)))]
    return unroll_faces(t, faces, base)


# ---------------------------------------------------------------------------
# overlap and convexity


def _separated(kappa, normals, pts, eps) -> bool:
    for c in normals:
        if all(float(c @ x) <= eps for x in pts):
            return True
    return False


def overlap_pairs(d: Development, first_only: bool = False) -> list:
    """Pairs of placed faces whose interiors overlap (separating-axis test)."""
    t = d.tetra
    k = d.kappa
    eps = TOL.geom
    n = len(d.faces)
    out = []
    for i in range(n):
        fi = d.faces[i]
        norm_i = [t.inward_normals[(fi, e)] for e in face_edges(fi)]
        pts_i = [d.chart_point(i, v) for v in fi]
        m = np.eye(3)
        for j in range(i + 1, n):
            m = m @ d.glue[j].matrix
            fj = d.faces[j]
            pts_j = [normalize_hom(k, m @ d.chart_point(j, v)) for v in fj]
            if _separated(k, norm_i, pts_j, eps):
                continue
            # normals of face j carried into chart i
            inv_t = np.linalg.inv(m).T
            norm_j = []
            for e in face_edges(fj):
                c = inv_t @ t.inward_normals[(fj, e)]
                c = c / normal_norm(k, c)
                norm_j.append(c)
            if _separated(k, norm_j, pts_i, eps):
                continue
            out.append((i, j))
            if first_only:
                return out
    return out


def is_convex(d: Development) -> bool:
    """Every boundary corner of the developed polygon has angle at most pi."""
    if d.overlapping:
        raise GeometryError("convexity undefined")
    return all(r.angle <= math.pi + TOL.geom for r in d.vertex_runs)


def boundary_angles(d: Development) -> list:
    return [(r.vertex, r.first, r.last, r.angle) for r in d.vertex_runs]


# ---------------------------------------------------------------------------
# walking a geodesic through a development


@dataclass
class Crossing:
    index: int  # gluing edge index
    edge: tuple
    point: np.ndarray  # chart coordinates of face ``index``
    t: float
    s: float  # fraction along the sorted edge


@dataclass
class Piece:
    index: int  # placed face index
    face: tuple
    start: np.ndarray  # chart coordinates
    end: np.ndarray
    t0: float
    t1: float


@dataclass
class WalkReport:
    outcome: str  # "success" | "vertex hit" | "exit"
    length: float
    crossings: list = field(default_factory=list)
    pieces: list = field(default_factory=list)
    witness: dict | None = None
    margin: float = math.inf  # smallest distance from an internal vertex image to the path
    first_face: int = 0
    last_face: int = 0

    @property
    def ok(self) -> bool:
        return self.outcome == "success"

    @property
    def crossed_edges(self) -> list:
        return [c.edge for c in self.crossings]


def _soft_normalize(k: int, x) -> np.ndarray:
    """Normalize when possible; far hyperbolic points stay raw homogeneous vectors.

    A point ~40 away from the chart origin has coordinates ~1e17 and its
    hyperboloid constraint drowns in rounding, but as a homogeneous vector it
    still determines lines through cross products.
    """
    if k < 0:
        q = x[2] * x[2] - x[0] * x[0] - x[1] * x[1]
        if q <= 1e-12 * x[2] * x[2]:
            return x if x[2] > 0 else -x
    return normalize_hom(k, x)


def _far_dist(k: int, p, x) -> float:
    """Distance from a normalized point to a possibly raw far point."""
    if k < 0:
        ch = -form(-1, p, x)
        if ch > 2.0:
            return math.acosh(ch)
    return dist_h(k, p, normalize_hom(k, x))


class _Path:
    """Geodesic from P (chart i) to Q (chart j), evaluated in any chart of the strip."""

    def __init__(self, d: Development, i, p, j, q, direction=None, length=None):
        self.d = d
        self.k = int(d.kappa)
        k = self.k
        self.p = {i: normalize_hom(k, p)}
        if k > 0:
            if direction is None:
                q_i = normalize_hom(k, d.transfer(i, j) @ np.asarray(q))
                direction = tangent_toward_h(k, self.p[i], q_i)
                length = dist_h(k, self.p[i], q_i)
            elif length is None:
                raise GeometryError("spherical walk with a direction needs a length")
            self.dirs = {i: normalize_tangent(k, self.p[i], direction)}
            self.length = float(length)
            self.q = {}
            end = math.cos(self.length) * self.p[i] + math.sin(self.length) * self.dirs[i]
            self.q[i] = normalize_hom(k, end)
            self.q_home = i
        else:
            self.q = {j: normalize_hom(k, q)}
            self.q_home = j
            self.length = _far_dist(k, self.p[i], d.transfer(i, j) @ self.q[j])
        self.p_home = i

    def _carry(self, table, k_to, vector=False):
        if k_to in table:
            return table[k_to]
        src = min(table, key=lambda s: abs(s - k_to))
        x = self.d.transfer(k_to, src) @ table[src]
        if not vector:
            x = _soft_normalize(self.k, x)
        table[k_to] = x
        return x

    def at(self, kk):
        """(P, Q or direction, line normal) in chart ``kk``."""
        p = self._carry(self.p, kk)
        if self.k > 0:
            dvec = self._carry(self.dirs, kk, vector=True)
            c = cross(p, dvec)
            q = self._carry(self.q, kk)
            return p, q, dvec, c / normal_norm(self.k, c)
        q = self._carry(self.q, kk)
        c = cross(p, q)
        nn = normal_norm(self.k, c)
        if nn == 0:
            raise GeometryError("zero-length segment")
        return p, q, None, c / nn

    def param(self, kk, x, x_ref, t_ref: float, slack: float = 0.0) -> float:
        """Arc parameter of ``x`` (on or near the path) given a path point of known parameter.

        On the sphere the value is the first one at or after ``t_ref - slack``.
        """
        p, q, dvec, c = self.at(kk)
        k = self.k
        if k > 0:
            lo = t_ref - slack
            t = math.atan2(float(x @ dvec), float(x @ p))
            return lo + (t - lo) % (2 * math.pi)
        if k < 0:
            # unit tangent at x_ref pointing towards Q: x = cosh(s) x_ref + sinh(s) u
            u = cross(np.array([x_ref[0], x_ref[1], -x_ref[2]]), c)
            u = u / math.sqrt(max(form(-1, u, u), 1e-300))
            return t_ref + math.asinh(form(-1, u, x))
        # flat: P and Q never blow up
        tp = dist_h(k, p, x)
        tq = dist_h(k, q, x)
        if tq > self.length + tp - 1e-12 * max(1.0, self.length) and tp > 0:
            return -tp
        return tp


def _inside(t: TetraMetric, f, x, eps) -> bool:
    return all(float(t.inward_normals[(f, e)] @ x) >= -eps for e in face_edges(f))


def _edge_fraction(k, u, w, x) -> float:
    total = dist_h(k, u, w)
    return dist_h(k, u, x) / total if total > 0 else 0.0


def walk_path(d: Development, i: int, p, j: int, q=None, direction=None, length=None) -> WalkReport:
    """Walk the geodesic from ``p`` (chart of placed face i) to ``q`` (chart of face j).

    The path must cross the gluing edges between faces i and j in order,
    strictly between their end points.  Runs of gluing edges that share an
    end point with ``p`` (or ``q``) are skipped: the path leaves (or reaches)
    that vertex image directly.  On the sphere a direction and length may be
    given instead of ``q`` to select an arc longer than pi (or 2 pi).
    """
    if not (0 <= i <= j < len(d.faces)):
        raise GeometryError("walk must run forward through the development")
    t = d.tetra
    k = int(d.kappa)
    eps_v = TOL.vertex
    eps_g = TOL.geom
    path = _Path(d, i, p, j, q, direction, length)
    L = path.length
    rep = WalkReport("success", L)
    if L < eps_g:
        raise GeometryError("zero-length segment")

    def same(a, b):
        return dist_h(k, a, b) < eps_g

    # runs of gluing edges touching the end points
    a = i
    while a < j:
        pa = path.at(a)[0]
        if any(same(pa, d.chart_point(a, v)) for v in d.interior_edges[a]):
            a += 1
        else:
            break
    b = j
    while b > a:
        qb = path.at(b - 1)[1]
        if any(same(qb, d.chart_point(b - 1, v)) for v in d.interior_edges[b - 1]):
            b -= 1
        else:
            break
    rep.first_face, rep.last_face = a, b

    def is_endpoint(kk, x):
        pk, qk, _, _ = path.at(kk)
        return same(x, pk) or same(x, qk)

    def vertex_check(kk, verts):
        _, _, _, c = path.at(kk)
        for v in verts:
            x = d.chart_point(kk, v)
            if is_endpoint(kk, x):
                continue
            tv = path.param(kk, x, x_prev, t_prev, eps_g)
            if not (eps_g < tv < L - eps_g) or (k > 0 and tv - t_prev >= math.pi):
                continue
            sd = abs(S_inv(k, float(c @ x)))
            rep.margin = min(rep.margin, sd)
            if sd < eps_v:
                rep.outcome = "vertex hit"
                rep.witness = {
                    "kind": "vertex hit",
                    "vertex": v,
                    "face_index": kk,
                    "point": d.to_global(kk, x),
                    "t": tv,
                    "distance": sd,
                }
                return True
        return False

    def exit_witness(kk, x_prev, t_prev, skip_edge=None):
        f = d.faces[kk]
        _, _, _, c = path.at(kk)
        best = None
        for e in face_edges(f):
            if e == skip_edge:
                continue
            u, w = d.chart_point(kk, e[0]), d.chart_point(kk, e[1])
            cu, cw = float(c @ u), float(c @ w)
            if cu == cw:
                continue
            x = normalize_hom(k, (cu * w - cw * u) / (cu - cw))
            tx = path.param(kk, x, x_prev, t_prev)
            if tx > t_prev + eps_g and (best is None or tx < best[0]):
                best = (tx, e, x)
        rep.outcome = "exit"
        if best is None:
            rep.witness = {"kind": "exit", "face_index": kk, "edge": None, "point": None, "t": t_prev}
        else:
            tx, e, x = best
            rep.witness = {"kind": "exit", "face_index": kk, "edge": e, "point": d.to_global(kk, x), "t": tx}
        return rep

    x_prev = path.at(a)[0]
    t_prev = 0.0
    if vertex_check(a, d.faces[a]):
        return rep
    entry_edge = None
    for kk in range(a, b):
        e = d.interior_edges[kk]
        if vertex_check(kk, e):
            return rep
        _, _, _, c = path.at(kk)
        u, w = d.chart_point(kk, e[0]), d.chart_point(kk, e[1])
        cu, cw = float(c @ u), float(c @ w)
        if cu * cw >= 0:
            return exit_witness(kk, x_prev, t_prev, entry_edge)
        x = normalize_hom(k, (cu * w - cw * u) / (cu - cw))
        tx = path.param(kk, x, x_prev, t_prev, eps_g)
        if not (t_prev - eps_g < tx < L + eps_g) or (k > 0 and tx - t_prev >= math.pi):
            return exit_witness(kk, x_prev, t_prev, entry_edge)
        mid = normalize_hom(k, x_prev + x)
        if not _inside(t, d.faces[kk], mid, eps_g):
            return exit_witness(kk, x_prev, t_prev, entry_edge)
        rep.pieces.append(Piece(kk, d.faces[kk], x_prev, x, t_prev, tx))
        rep.crossings.append(Crossing(kk, e, x, tx, _edge_fraction(k, u, w, x)))
        x_prev = d.glue[kk + 1].inverse().apply_h(x)
        t_prev = tx
        entry_edge = e
    # last piece
    if vertex_check(b, d.faces[b]):
        return rep
    qb = path.at(b)[1]
    if k > 0 and L - t_prev >= math.pi:
        return exit_witness(b, x_prev, t_prev, entry_edge)
    if L - t_prev > eps_g:
        mid = normalize_hom(k, x_prev + qb)
        if not _inside(t, d.faces[b], mid, eps_g) or not _inside(t, d.faces[b], qb, eps_g):
            return exit_witness(b, x_prev, t_prev, entry_edge)
    rep.pieces.append(Piece(b, d.faces[b], x_prev, qb, t_prev, L))
    return rep


def walk_segment(d: Development, s: GeodesicSegment) -> WalkReport:
    """Walk a segment given in global coordinates from the first to the last placed face."""
    if s.kappa != d.kappa:
        raise GeometryError("mixed curvature")
    n = len(d.faces)
    p = d.placements[0].inverse().matrix @ s.start.hom
    q = d.placements[n - 1].inverse().matrix @ s.end.hom
    if not _inside(d.tetra, d.faces[0], normalize_hom(d.kappa, p), TOL.geom):
        raise GeometryError("segment does not start in the first placed face")
    if not _inside(d.tetra, d.faces[-1], normalize_hom(d.kappa, q), TOL.geom):
        raise GeometryError("segment does not end in the last placed face")
    return walk_path(d, 0, p, n - 1, q)


def describe(d: Development) -> str:
    parts = [face_name(f) for f in d.faces]
    glued = [edge_name(e) for e in d.interior_edges]
    return f"faces {' '.join(parts)}; glued along {' '.join(glued)}"


def face_third_vertex(d: Development, k: int) -> int | None:
    """Vertex of placed face k not on either of its gluing edges (end faces only)."""
    f = d.faces[k]
    used = set()
    if k > 0:
        used |= set(d.interior_edges[k - 1])
    if k < len(d.faces) - 1:
        used |= set(d.interior_edges[k])
    rest = [v for v in f if v not in used]
    return rest[0] if rest else None


# ---------------------------------------------------------------------------
# geodesics by length relaxation, in local charts only


def _edge_point(k: int, u, w, s: float):
    """Point at parameter ``s`` of the edge from ``u`` to ``w`` and its s-derivative."""
    n = (1.0 - s) * u + s * w
    dn = w - u
    if k == 0:
        return n, dn
    r = math.sqrt(-form(-1, n, n))
    x = n / r
    return x, dn / r + n * (form(-1, n, dn) / r**3)


def _seg_len(k: int, x, y) -> float:
    if k == 0:
        return float(math.hypot(x[0] - y[0], x[1] - y[1]))
    return math.acosh(max(1.0, -form(-1, x, y)))


def _seg_grad(k: int, x, dx, y, dy):
    """Length of [x, y] and its derivatives along dx, dy (None for fixed ends)."""
    ell = _seg_len(k, x, y)
    if ell <= 0.0:
        raise GeometryError("degenerate segment in relaxation")
    if k == 0:
        g = (x - y)[:2] / ell
        gx = float(g @ dx[:2]) if dx is not None else 0.0
        gy = -float(g @ dy[:2]) if dy is not None else 0.0
    else:
        sh = math.sinh(ell)
        gx = -form(-1, dx, y) / sh if dx is not None else 0.0
        gy = -form(-1, x, dy) / sh if dy is not None else 0.0
    return ell, gx, gy


class _Relax:
    """Total length of a broken geodesic through a strip as a function of its crossings.

    Crossing ``c`` sits on ``edges[c]`` at parameter ``s[c]``; segment ``j``
    lies in chart ``charts[j]`` and runs from end ``ends[j][0]`` to
    ``ends[j][1]``, each either a crossing index or a fixed chart point.
    """

    def __init__(self, d: Development, charts, edges, ends):
        self.d = d
        self.k = int(d.kappa)
        self.charts = charts
        self.edges = edges
        self.ends = ends

    def point(self, j, end, s):
        if isinstance(end, int):
            e = self.edges[end]
            u = self.d.chart_point(self.charts[j], e[0])
            w = self.d.chart_point(self.charts[j], e[1])
            return _edge_point(self.k, u, w, s[end])
        return end, None

    def seg(self, j, s):
        a, b = self.ends[j]
        x, dx = self.point(j, a, s)
        y, dy = self.point(j, b, s)
        return _seg_grad(self.k, x, dx, y, dy)

    def value_grad(self, s):
        total = 0.0
        g = np.zeros(len(s))
        for j, (a, b) in enumerate(self.ends):
            ell, ga, gb = self.seg(j, s)
            total += ell
            if isinstance(a, int):
                g[a] += ga
            if isinstance(b, int):
                g[b] += gb
        return total, g

    def hessian(self, s, h=1e-6):
        m = len(s)
        hess = np.zeros((m, m))
        for j, (a, b) in enumerate(self.ends):
            idx = [c for c in (a, b) if isinstance(c, int)]
            for c in idx:
                sp, sm = s.copy(), s.copy()
                sp[c] += h
                sm[c] -= h
                _, gpa, gpb = self.seg(j, sp)
                _, gma, gmb = self.seg(j, sm)
                if isinstance(a, int):
                    hess[a, c] += (gpa - gma) / (2 * h)
                if isinstance(b, int):
                    hess[b, c] += (gpb - gmb) / (2 * h)
        return 0.5 * (hess + hess.T)


def _minimize(f: _Relax, s0, tol: float = 1e-14, max_iter: int = 200):
    s = np.array(s0, dtype=float)
    val, g = f.value_grad(s)
    lo, hi = 1e-15, 1.0 - 1e-15
    for _ in range(max_iter):
        hess = f.hessian(s)
        try:
            step = -np.linalg.solve(hess, g)
            if float(step @ g) >= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -g
        # stay strictly inside the edges
        lim = 1.0
        for c in range(len(s)):
            if step[c] < 0:
                lim = min(lim, 0.9 * (s[c] - lo) / -step[c])
            elif step[c] > 0:
                lim = min(lim, 0.9 * (hi - s[c]) / step[c])
        alpha = lim
        while True:
            s_new = s + alpha * step
            v_new, g_new = f.value_grad(s_new)
            if v_new <= val + 1e-4 * alpha * float(step @ g) or alpha < 1e-12:
                break
            # near the minimum the length change drowns in rounding; judge by the gradient
            if float(np.abs(g).max()) < 1e-6 and float(np.abs(g_new).max()) < float(np.abs(g).max()):
                break
            alpha *= 0.5
        moved = float(np.abs(s_new - s).max())
        s, val, g = s_new, v_new, g_new
        if moved < tol or float(np.abs(g).max()) < 1e-14:
            break
    return s, val, g


def relax_path(d: Development, i: int, p, j: int, q, periodic: bool = False, s0=None) -> WalkReport:
    """Shortest path through the gluing edges of a strip, computed chart by chart.

    With ``periodic`` the strip is read as a closed cycle of faces (the last
    face glued back to the first across the base edge) and the result is the
    closed geodesic crossing the base edge; ``p`` and ``q`` are ignored.
    Otherwise the path joins ``p`` (chart of face i) to ``q`` (chart of face j)
    and skips the gluing edges at those end points, as ``walk_path`` does.

    Nothing is ever transported further than one face, so thin tetrahedra with
    strips dozens of units long lose no precision.  In curvature <= 0 the
    length is convex along the strip and the stationary point found by Newton
    iteration is the unique geodesic; a minimizer pressed onto an edge end
    point is reported as a vertex hit.
    """
    k = int(d.kappa)
    if k > 0:
        raise GeometryError("relaxation needs curvature <= 0")
    n = len(d.faces)
    ie = list(d.interior_edges)
    if periodic:
        first = set(d.faces[0]) & set(d.faces[-1])
        base = edge(*first)
        edges = ie + [base]
        m = len(edges)
        charts = list(range(n))
        ends = [(m - 1, 0)] + [(c - 1, c) for c in range(1, n)]
    else:
        a, b = i, j
        p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
        while a < b and any(dist_h(k, p, d.chart_point(a, v)) < TOL.geom for v in ie[a]):
            # carry p one face forward: it is a shared vertex of the gluing edge
            (v,) = [v for v in ie[a] if dist_h(k, p, d.chart_point(a, v)) < TOL.geom]
            a += 1
            p = d.chart_point(a, v)
        while b > a and any(dist_h(k, q, d.chart_point(b, v)) < TOL.geom for v in ie[b - 1]):
            (v,) = [v for v in ie[b - 1] if dist_h(k, q, d.chart_point(b, v)) < TOL.geom]
            b -= 1
            q = d.chart_point(b, v)
        edges = ie[a:b]
        m = len(edges)
        charts = list(range(a, b + 1))
        if m == 0:
            ends = [(p, q)]
        else:
            ends = [(p, 0)] + [(c - 1, c) for c in range(1, m)] + [(m - 1, q)]
    f = _Relax(d, charts, edges, ends)
    if m == 0:
        ell = _seg_len(k, p, q)
        rep = WalkReport("success", ell, first_face=a, last_face=b)
        rep.pieces.append(Piece(a, d.faces[a], p, q, 0.0, ell))
        return rep
    s, total, g = _minimize(f, np.full(m, 0.5) if s0 is None else s0)
    worst = int(np.argmin(np.minimum(s, 1 - s)))
    rep = WalkReport("success", total)
    if not periodic:
        rep.first_face, rep.last_face = a, b
    else:
        rep.first_face, rep.last_face = 0, n - 1
    gap = min(s[worst], 1 - s[worst])
    if gap < 1e-9 or float(np.abs(g).max()) > 1e-8:
        e = edges[worst]
        v = e[0] if s[worst] < 0.5 else e[1]
        rep.outcome = "vertex hit" if gap < 1e-9 else "exit"
        rep.witness = {"kind": rep.outcome, "vertex": v, "edge": e, "index": worst, "gradient": float(np.abs(g).max())}
        return rep
    t_run = 0.0
    for jj, (x_end, y_end) in enumerate(ends):
        x, _ = f.point(jj, x_end, s)
        y, _ = f.point(jj, y_end, s)
        ell = _seg_len(k, x, y)
        rep.pieces.append(Piece(charts[jj], d.faces[charts[jj]], x, y, t_run, t_run + ell))
        t_run += ell
        if isinstance(y_end, int) and (periodic or jj < len(ends) - 1):
            e = edges[y_end]
            u, w = d.chart_point(charts[jj], e[0]), d.chart_point(charts[jj], e[1])
            rep.crossings.append(Crossing(charts[jj], e, y, t_run, _edge_fraction(k, u, w, y)))
    rep.length = t_run
    return rep


__all__ = [
    "FaceAdjacency",
    "CuttingSequence",
    "Development",
    "GluingEdge",
    "PlacedFace",
    "VertexRun",
    "WalkReport",
    "Crossing",
    "Piece",
    "unroll",
    "unroll_faces",
    "vertex_pair_development",
    "star_development",
    "walk_path",
    "walk_segment",
    "relax_path",
    "is_convex",
    "overlap_pairs",
    "boundary_angles",
    "schedule_faces",
    "edge",
    "third_vertex",
    "form",
]
