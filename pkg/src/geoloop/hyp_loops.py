"""Type-(p, q) closed geodesics and geodesic loops on hyperbolic tetrahedra.

The faces crossed by the type-(p, q) closed geodesic are developed in order
(the strip D(p, q)).  Gluing the last face back onto the first gives the
holonomy H; the closed geodesic is the piece of the axis of H between a point
A0 of the base edge and its image H(A0).  The loop at a vertex v is the
straight segment joining the first and last images of v in the strip cut open
where the closed geodesic passes around v.

Everything is computed in local face charts: for thin tetrahedra the strip
reaches points at distance ~50 from the base, far beyond what a single global
chart can resolve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cckernel import (
    TOL,
    Curvature,
    GeometryError,
    Isometry2,
    cross,
    dist_h,
    form,
    form_matrix,
    left_normal_h,
    normal_norm,
    normalize_hom,
    tangent_toward_h,
)
from .develop import (
    CuttingSequence,
    Development,
    _glue_for,
    is_convex,
    relax_path,
    unroll,
    walk_path,
)
from .tetra import TetraMetric, across, edge, parse_vertex
from .trace import (
    SurfaceCurve,
    clearance_check,
    curve_from_walk,
    cutting_sequence,
    edge_point,
    is_simple,
    junction_residual,
    loop_signature,
    normalize_pq,
    shoot,
    signature,
    sweep_loops,
    symmetry_equivalent,
)

@dataclass(frozen=True, eq=False)
class Holonomy:
    isometry: Isometry2
    kind: str  # "hyperbolic" | "parabolic" | "elliptic"
    length: float  # translation length (0 unless hyperbolic)
    trace: float
    attracting: np.ndarray | None = None  # light-like eigenvectors, chart of the first face
    repelling: np.ndarray | None = None
    development: Development | None = None
    closing: Isometry2 | None = None  # chart of the first face -> chart of the last face

    @property
    def axis_normal(self) -> np.ndarray:
        if self.kind != "hyperbolic":
            raise GeometryError("no axis")
        c = cross(self.attracting, self.repelling)
        return c / normal_norm(-1, c)

    def axis_residual(self) -> float:
        """How far H moves its own axis (as a plane normal)."""
        c = self.axis_normal
        h = self.isometry.matrix
        j = form_matrix(-1)
        # normals transform by the inverse transpose, which is J H J for a Lorentz matrix
        c2 = j @ h @ j @ c
        c2 = c2 / normal_norm(-1, c2)
        return float(min(np.abs(c2 - c).max(), np.abs(c2 + c).max()))


def _dominant(m: np.ndarray, iters: int = 400) -> np.ndarray:
    v = np.array([0.3, 0.2, 1.0])
    for _ in range(iters):
        w = m @ v
        w = w / np.linalg.norm(w)
        if w[2] < 0:
            w = -w
        if np.abs(w - v).max() < 1e-16:
            v = w
            break
        v = w
    return v


def classify_isometry(h: Isometry2, eps: float = 1e-8, orientation: int | None = None):
    """(kind, translation length, attracting, repelling) of an orientation-preserving isometry.

    For long products the determinant is numerically meaningless, so callers
    may pass the orientation they tracked factor by factor.
    """
    m = h.matrix
    tr = float(np.trace(m))
    if (h.orientation if orientation is None else orientation) < 0:
        raise GeometryError("holonomy reverses orientation")
    x = (tr - 1.0) / 2.0  # cosh of the translation length
    if x > 1.0 + eps:
        ell = math.acosh(x)
        j = form_matrix(-1)
        vp = _dominant(m)
        vm = _dominant(j @ m.T @ j)
        return "hyperbolic", ell, vp, vm
    if x > 1.0 - eps:
        return "parabolic", 0.0, None, None
    return "elliptic", 0.0, None, None


def _check_hyperbolic(t: TetraMetric):
    if t.kappa != Curvature.HYPERBOLIC:
        raise GeometryError("hyperbolic only")


def base_edge(d: Development) -> tuple:
    """The edge along which the last face of a closing strip meets the first."""
    first, last = set(d.faces[0]), set(d.faces[-1])
    common = first & last
    if len(common) != 2 or first == last:
        raise GeometryError("schedule does not close up")
    return edge(*common)


def _closing_glue(t: TetraMetric, d: Development, flip: bool = False) -> Isometry2:
    """Glue of the first face onto the last one along the base edge."""
    e = base_edge(d)
    if across(d.faces[-1], e) != d.faces[0]:
        raise GeometryError("schedule does not close up")
    return _glue_for(t, d.faces[-1], e, flip=flip)


def holonomy_of(d: Development, flip_closing: bool = False) -> Holonomy:
    t = d.tetra
    if not d.faces or len(d.faces) < 2:
        return Holonomy(Isometry2.identity(t.kappa), "elliptic", 0.0, 3.0, development=d)
    g = _closing_glue(t, d, flip_closing)
    h = d.placements[-1] @ g @ d.placements[0].inverse()
    orient = g.orientation
    for x in d.glue[1:]:
        orient *= x.orientation
    kind, ell, vp, vm = classify_isometry(h, TOL.classify, orient)
    if vp is not None:
        # eigenvectors of the global holonomy, pulled back to the first chart
        inv0 = d.placements[0].inverse().matrix
        vp, vm = inv0 @ vp, inv0 @ vm
    return Holonomy(h, kind, ell, float(np.trace(h.matrix)), vp, vm, d, g)


def rotated_schedule(seq: CuttingSequence, rotation: int = 0) -> list:
    """The cyclic edge schedule restarted at crossing ``rotation``."""
    e = list(seq.edges[:-1])
    r = rotation % len(e)
    return e[r:] + e[:r] + [e[r]]


def vertex_runs(seq: CuttingSequence, v: int) -> list:
    """Maximal cyclic runs of crossed edges at ``v`` as (start, length), longest first."""
    e = list(seq.edges[:-1])
    n = len(e)
    at = [v in x for x in e]
    if all(at):
        return [(0, n)]
    runs = []
    for i in range(n):
        if at[i] and not at[i - 1]:
            m = 0
            while at[(i + m) % n]:
                m += 1
            runs.append((i, m))
    return sorted(runs, key=lambda r: (-r[1], r[0]))


def strip(t: TetraMetric, p: int, q: int, flip_gluing=(), rotation: int = 0) -> tuple[Development, CuttingSequence]:
    seq = cutting_sequence(p, q)
    return unroll(t, rotated_schedule(seq, rotation), flip_gluing=flip_gluing), seq


def holonomy(t: TetraMetric, p, q=None, flip_gluing=(), flip_closing: bool = False, rotation: int = 0) -> Holonomy:
    """Holonomy of D(p, q); ``p`` may also be an explicit edge schedule."""
    _check_hyperbolic(t)
    if q is None:
        edges = list(p)
        if len(edges) < 2:
            raise GeometryError("no axis")
        d = unroll(t, edges, flip_gluing=flip_gluing)
    else:
        d, _ = strip(t, p, q, flip_gluing, rotation)
    hol = holonomy_of(d, flip_closing)
    if hol.kind != "hyperbolic":
        raise GeometryError("no axis")
    return hol


def axis_point(hol: Holonomy) -> np.ndarray:
    """A0: where the axis crosses the base edge, in the chart of the first face."""
    d = hol.development
    c = hol.axis_normal
    e = base_edge(d)
    u = d.chart_point(0, e[0])
    w = d.chart_point(0, e[1])
    cu, cw = float(c @ u), float(c @ w)
    if cu == cw:
        raise GeometryError("axis outside edge")
    lam = cu / (cu - cw)
    if not 0.0 < lam < 1.0:
        raise GeometryError(f"axis outside edge (parameter {lam:.6g})")
    return normalize_hom(-1, (1 - lam) * u + lam * w)


@dataclass
class ClosedGeodesic:
    curve: SurfaceCurve
    holonomy: Holonomy
    start: np.ndarray  # A0 in the chart of the first face
    direction: np.ndarray
    length: float
    type: tuple
    swapped: bool


def closed_geodesic(t: TetraMetric, p: int, q: int, flip_gluing=(), rotation: int = 0) -> ClosedGeodesic:
    """The type-(p, q) closed geodesic through the first edge of its (rotated) schedule.

    The holonomy supplies the translation length; the curve itself is found by
    relaxing the crossings chart by chart, which stays exact on long strips
    where the global holonomy matrix (norm ~ e^length) loses its digits.
    """
    _check_hyperbolic(t)
    pp, qq, swapped = normalize_pq(p, q)
    hol = holonomy(t, pp, qq, flip_gluing=flip_gluing, rotation=rotation)
    d = hol.development
    n = len(d.faces)
    rep = relax_path(d, 0, None, n - 1, None, periodic=True)
    if not rep.ok:
        raise GeometryError(f"axis leaves the strip: {rep.witness}")
    if abs(rep.length - hol.length) > 1e-6 * max(1.0, hol.length):
        raise GeometryError(f"relaxed length {rep.length:.12g} disagrees with holonomy {hol.length:.12g}")
    e0 = base_edge(d)
    tag = ("edge", e0, rep.crossings[-1].s)
    curve = curve_from_walk(d, rep, closed=True, start_tag=tag, end_tag=tag)
    if junction_residual(curve) > TOL.close:
        raise GeometryError("closed geodesic does not close up")
    simple, wit = is_simple(curve)
    if not simple:
        raise GeometryError(f"closed geodesic is not simple: {wit}")
    sig = signature(curve)
    if sig.type != (pp, qq):
        raise GeometryError(f"closed geodesic has type {sig.type}, expected {(pp, qq)}")
    a0 = rep.pieces[0].start
    direction = tangent_toward_h(-1, a0, rep.pieces[0].end)
    return ClosedGeodesic(curve, hol, a0, direction, rep.length, sig.type, swapped)


@dataclass
class LoopResult:
    loop: SurfaceCurve
    closed_geodesic: ClosedGeodesic | None
    development: Development
    type: tuple
    loop_type: tuple | None
    loop_length: float
    geodesic_length: float | None
    clearance: list
    vertex: int
    swapped: bool
    skipped: tuple = ()  # gluing edges at the loop vertex the loop does not cross
    extra: dict = field(default_factory=dict)

    @property
    def min_margin(self) -> float:
        m = [r["margin"] for r in self.clearance if r.get("margin") is not None]
        return min(m) if m else math.inf


def loop_in_strip(t: TetraMetric, d: Development, vertex: int):
    """Walk from the first to the last image of ``vertex`` in a closing strip."""
    n = len(d.faces)
    if vertex not in d.faces[0] or vertex not in d.faces[-1]:
        raise GeometryError("loop vertex is not on the base edge")
    pa = d.chart_point(0, vertex)
    pb = d.chart_point(n - 1, vertex)
    if t.kappa == Curvature.HYPERBOLIC:
        return relax_path(d, 0, pa, n - 1, pb)
    return walk_path(d, 0, pa, n - 1, pb)


def _try_rotation(t: TetraMetric, pp: int, qq: int, v: int, rotation: int):
    """(loop, development, report, reason); loop is None when this rotation fails."""
    d, seq = strip(t, pp, qq, rotation=rotation)
    rep = loop_in_strip(t, d, v)
    if not rep.ok:
        return None, d, rep, rep.outcome
    loop = curve_from_walk(d, rep, closed=True, loop_vertex=v, start_tag=("vertex", v), end_tag=("vertex", v))
    simple, wit = is_simple(loop)
    if not simple:
        return None, d, rep, f"not simple: {wit}"
    a, b = rep.first_face, rep.last_face
    if [e for e, _ in loop.crossings] != list(d.interior_edges[a:b]):
        return None, d, rep, "loop does not follow the strip"
    return loop, d, rep, "ok"


def vertex_loop(t: TetraMetric, p: int, q: int, vertex=1, with_geodesic: bool = True) -> LoopResult:
    """The simple geodesic loop of type (p, q) at ``vertex``.

    The strip is cut open at the start of the longest run of crossed edges
    through ``vertex``: the loop then winds once around the vertex at the
    seam.  Shorter runs are tried in turn only if that fails.
    """
    if t.kappa == Curvature.SPHERICAL:
        raise GeometryError("hyperbolic or flat only")
    v = parse_vertex(vertex)
    pp, qq, swapped = normalize_pq(p, q)
    seq = cutting_sequence(pp, qq)
    attempts = []
    found = None
    for r, run in vertex_runs(seq, v):
        loop, d, rep, why = _try_rotation(t, pp, qq, v, r)
        attempts.append({"rotation": r, "run": run, "outcome": why})
        if loop is not None:
            found = (r, loop, d, rep)
            break
    if found is None:
        first = attempts[0]["outcome"] if attempts else "no edge at vertex"
        kind = "vertex hit" if first == "vertex hit" else "loop construction failed"
        err = GeometryError(f"{kind}: {attempts}")
        err.attempts = attempts
        raise err
    r, loop, d, rep = found
    a, b = rep.first_face, rep.last_face
    skipped = tuple(d.interior_edges[:a]) + tuple(d.interior_edges[b:])
    geo = closed_geodesic(t, pp, qq) if (with_geodesic and t.kappa == Curvature.HYPERBOLIC) else None
    lsig = loop_signature(loop, anchor=base_edge(d))
    clearance = clearance_check(t, loop, d) if t.kappa == Curvature.HYPERBOLIC else []
    return LoopResult(
        loop=loop,
        closed_geodesic=geo,
        development=d,
        type=(pp, qq),
        loop_type=lsig.type,
        loop_length=loop.length,
        geodesic_length=None if geo is None else geo.length,
        clearance=clearance,
        vertex=v,
        swapped=swapped,
        skipped=skipped,
        extra={"rotation": r, "attempts": attempts},
    )


def general_vertex_loop(t: TetraMetric, p: int, q: int, vertex=1) -> LoopResult:
    """Loop construction for tetrahedra whose face angles are all at most pi/4."""
    _check_hyperbolic(t)
    if max(t.face_angles.values()) > math.pi / 4 + TOL.trig:
        raise GeometryError("outside the face-angle hypothesis (all face angles at most pi/4)")
    res = vertex_loop(t, p, q, vertex)
    if not is_convex(res.development):
        raise GeometryError("development is not convex")
    res.extra["convex"] = True
    return res


# ---------------------------------------------------------------------------
# checks


def shoot_closed_geodesic(t: TetraMetric, geo: ClosedGeodesic, slack: float = 1.0) -> SurfaceCurve:
    """Re-trace the closed geodesic with the surface tracer from A0."""
    d = geo.holonomy.development
    e0 = base_edge(d)
    s0 = dist_h(-1, d.chart_point(0, e0[0]), geo.start) / t.length(*e0)
    start = edge_point(t, e0, s0, face=d.faces[0])
    return shoot(t, start, geo.direction, max_length=geo.length + slack)


def alternative_matching(t: TetraMetric, p: int, q: int) -> str:
    """Outcome when the last base edge copy is glued with A1 and A2 exchanged."""
    pp, qq, _ = normalize_pq(p, q)
    d, _ = strip(t, pp, qq)
    try:
        hol = holonomy_of(d, flip_closing=True)
    except GeometryError as exc:
        return f"rejected: {exc}"
    if hol.kind != "hyperbolic":
        return f"rejected: {hol.kind}"
    return "hyperbolic"


def development_sweep(t: TetraMetric, p: int, q: int, vertex: int = 1, points: int = 100, rotation: int = 0) -> list:
    """Segments from the first image of ``vertex`` to points of the last base edge copy."""
    pp, qq, _ = normalize_pq(p, q)
    d, _ = strip(t, pp, qq, rotation=rotation)
    n = len(d.faces)
    e0 = base_edge(d)
    pa = d.chart_point(0, vertex)
    u = d.chart_point(n - 1, e0[0])
    w = d.chart_point(n - 1, e0[1])
    out = []
    for i in range(1, points + 1):
        lam = i / (points + 1)
        x = normalize_hom(-1, (1 - lam) * u + lam * w)
        rep = walk_path(d, 0, pa, n - 1, x)
        out.append((lam, rep.outcome))
    return out


@dataclass
class UniquenessReport:
    p: int
    q: int
    vertex: int
    samples: int
    max_length: float
    found: int
    classes: int
    matches_constructed: bool
    status: str  # "unique" | "not unique" | "inconclusive"
    traces: int = 0
    loop_lengths: list = field(default_factory=list)


STABILIZER_A1 = [
    {1: 1, 2: a, 3: b, 4: c}
    for a, b, c in ((2, 3, 4), (2, 4, 3), (3, 2, 4), (3, 4, 2), (4, 2, 3), (4, 3, 2))
]


def uniqueness_probe(t: TetraMetric, p: int, q: int, samples: int = 10000, length_factor: float = 1.5, max_length=None) -> UniquenessReport:
    """Sweep loops at A1 of type (p, q) and sort them into symmetry classes."""
    _check_hyperbolic(t)
    pp, qq, _ = normalize_pq(p, q)
    ref = vertex_loop(t, pp, qq, 1, with_geodesic=False)
    cap = length_factor * ref.loop_length if max_length is None else float(max_length)
    steps = 4 * (pp + qq)
    loops, res = sweep_loops(t, 1, samples, cap, steps)
    typed = [c for c in loops if loop_signature(c).type == (pp, qq)]
    classes = []
    for c in typed:
        if not any(symmetry_equivalent(c, o, STABILIZER_A1, TOL.close) for o in classes):
            classes.append(c)
    matches = bool(classes) and all(symmetry_equivalent(ref.loop, c, STABILIZER_A1, TOL.close) for c in classes)
    if cap < ref.loop_length or not typed:
        status = "inconclusive"
    elif len(classes) == 1 and matches:
        status = "unique"
    else:
        status = "not unique"
    return UniquenessReport(
        pp, qq, 1, samples, cap, len(typed), len(classes), matches, status, res.traces,
        sorted(c.length for c in classes),
    )


__all__ = [
    "Holonomy",
    "ClosedGeodesic",
    "LoopResult",
    "UniquenessReport",
    "holonomy",
    "holonomy_of",
    "axis_point",
    "closed_geodesic",
    "vertex_loop",
    "general_vertex_loop",
    "uniqueness_probe",
    "shoot_closed_geodesic",
    "alternative_matching",
    "development_sweep",
    "rotated_schedule",
    "vertex_runs",
    "base_edge",
]
