"""Two-dimensional geometry of constant curvature +1, 0 and -1.

All three model surfaces are handled through one linear-algebra picture:

* curvature +1: the unit sphere in R^3,
* curvature -1: the upper sheet of x^2 + y^2 - z^2 = -1,
* curvature 0: the plane z = 0.

Internally every point is carried as a *homogeneous* 3-vector: the ambient
coordinates on the sphere and hyperboloid, and ``(x, y, 1)`` for the plane.
With that convention

* geodesics are the traces of planes through the origin,
* isometries are 3x3 matrices acting linearly,
* ``cross(p, q) . x`` is a signed orientation test in all three models,
* the bilinear form ``diag(1, 1, kappa)`` measures tangent vectors.

Public objects (:class:`ModelPoint`, :class:`Isometry2`,
:class:`GeodesicSegment`) are immutable values; every function here is pure.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class GeometryError(ValueError):
    """Raised when a geometric precondition fails."""


class Curvature(IntEnum):
    SPHERICAL = 1
    FLAT = 0
    HYPERBOLIC = -1


@dataclass
class Tolerances:
    norm: float = 1e-10
    geom: float = 1e-9
    trig: float = 1e-8
    vertex: float = 1e-7
    close: float = 1e-7
    antipodal: float = 1e-7
    classify: float = 1e-8


#: Process-wide tolerances; read at call time so callers may adjust them.
TOL = Tolerances()

EPS_GEOM_ENV = "GEOLOOP_EPS_GEOM"


def apply_env_tolerances(env=None) -> dict:
    """Apply GEOLOOP_EPS_GEOM to ``TOL``; returns the overrides that took effect."""
    env = os.environ if env is None else env
    raw = env.get(EPS_GEOM_ENV)
    if raw is None or raw == "":
        return {}
    val = float(raw)
    if not (math.isfinite(val) and val > 0):
        raise ValueError(f"{EPS_GEOM_ENV} must be a positive number, got {raw!r}")
    TOL.geom = val
    return {"geom": val}


def as_curvature(kappa) -> Curvature:
    try:
        return Curvature(int(kappa))
    except ValueError:
        raise GeometryError(f"curvature must be one of +1, 0, -1, got {kappa!r}") from None


# ---------------------------------------------------------------------------
# scalar helpers


def S(kappa: int, x: float) -> float:
    """sin, identity or sinh according to the curvature."""
    if kappa > 0:
        return math.sin(x)
    if kappa < 0:
        return math.sinh(x)
    return x


def C(kappa: int, x: float) -> float:
    if kappa > 0:
        return math.cos(x)
    if kappa < 0:
        return math.cosh(x)
    return 1.0


def S_inv(kappa: int, y: float) -> float:
    if kappa > 0:
        return math.asin(max(-1.0, min(1.0, y)))
    if kappa < 0:
        return math.asinh(y)
    return y


def form_matrix(kappa: int) -> np.ndarray:
    return np.diag([1.0, 1.0, float(kappa)])


def form(kappa: int, u, v) -> float:
    """Bilinear form diag(1, 1, kappa); positive definite on tangent vectors."""
    return float(u[0] * v[0] + u[1] * v[1] + kappa * u[2] * v[2])


def tnorm(kappa: int, u) -> float:
    return math.sqrt(max(form(kappa, u, u), 0.0))


def cross(u, v) -> np.ndarray:
    return np.array(
        [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    )


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True, eq=False)
class ModelPoint:
    """Point of the model surface in ambient coordinates."""

    coords: np.ndarray
    kappa: Curvature

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).reshape(3).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "kappa", as_curvature(self.kappa))

    @property
    def hom(self) -> np.ndarray:
        if self.kappa == Curvature.FLAT:
            return np.array([self.coords[0], self.coords[1], 1.0])
        return np.array(self.coords)

    @classmethod
    def from_hom(cls, kappa, h) -> "ModelPoint":
        kappa = as_curvature(kappa)
        h = normalize_hom(kappa, h)
        if kappa == Curvature.FLAT:
            return cls(np.array([h[0], h[1], 0.0]), kappa)
        return cls(h, kappa)

    def residual(self) -> float:
        x = self.coords
        if self.kappa == Curvature.SPHERICAL:
            return abs(float(x @ x) - 1.0)
        if self.kappa == Curvature.HYPERBOLIC:
            r = abs(x[0] ** 2 + x[1] ** 2 - x[2] ** 2 + 1.0)
            return r if x[2] > 0 else math.inf
        return abs(x[2])

    def check(self) -> "ModelPoint":
        res = self.residual()
        if not res <= TOL.norm * max(1.0, float(np.abs(self.coords).max()) ** 2):
            raise GeometryError(f"point {self.coords} is off the model surface (residual {res:.3g})")
        return self

    def __repr__(self):
        x, y, z = self.coords
        return f"ModelPoint(({x:.9g}, {y:.9g}, {z:.9g}), kappa={int(self.kappa)})"


def normalize_hom(kappa: int, h) -> np.ndarray:
    """Project a homogeneous vector back onto the model surface."""
    h = np.asarray(h, dtype=float)
    if kappa > 0:
        return h / math.sqrt(float(h @ h))
    if kappa < 0:
        q = h[2] * h[2] - h[0] * h[0] - h[1] * h[1]
        if q <= 0:
            raise GeometryError("vector is not timelike; no hyperboloid point")
        h = h / math.sqrt(q)
        return h if h[2] > 0 else -h
    if abs(h[2]) < 1e-300:
        raise GeometryError("point at infinity in the flat model")
    return h / h[2]


def normalize_tangent(kappa: int, p, v) -> np.ndarray:
    """Remove the normal component of ``v`` at ``p`` and rescale to unit length."""
    v = np.asarray(v, dtype=float)
    if kappa != 0:
        # form(p, p) = kappa on the model
        v = v - (form(kappa, v, p) / kappa) * np.asarray(p)
    else:
        v = np.array([v[0], v[1], 0.0])
    n = tnorm(kappa, v)
    if n < 1e-300:
        raise GeometryError("zero tangent vector")
    return v / n


def model_point(kappa, coords, check: bool = True) -> ModelPoint:
    p = ModelPoint(np.asarray(coords, dtype=float), kappa)
    return p.check() if check else p


def origin(kappa) -> ModelPoint:
    kappa = as_curvature(kappa)
    return ModelPoint(np.array([0.0, 0.0, 0.0 if kappa == 0 else 1.0]), kappa)


def _same_kappa(*pts: ModelPoint) -> Curvature:
    k = pts[0].kappa
    for p in pts[1:]:
        if p.kappa != k:
            raise GeometryError("mixed curvature")
    return k


# ---------------------------------------------------------------------------
# metric


def dist_h(kappa: int, a, b) -> float:
    """Distance between two homogeneous vectors already on the model."""
    if kappa > 0:
        return math.atan2(float(np.linalg.norm(cross(a, b))), float(a @ b))
    if kappa < 0:
        ch = -form(-1, a, b)
        if ch > 2.0:
            # far apart: avoids cancellation when the coordinates are huge
            return math.acosh(ch)
        d = np.asarray(a) - np.asarray(b)
        return 2.0 * math.asinh(math.sqrt(max(form(-1, d, d), 0.0)) / 2.0)
    d = np.asarray(a) - np.asarray(b)
    return math.hypot(d[0], d[1])


def dist(p: ModelPoint, q: ModelPoint) -> float:
    k = _same_kappa(p, q)
    return dist_h(k, p.hom, q.hom)


def check_not_antipodal(p: ModelPoint, q: ModelPoint) -> None:
    if p.kappa == Curvature.SPHERICAL and dist(p, q) > math.pi - TOL.antipodal:
        raise GeometryError("antipodal pair")


def tangent_toward_h(kappa: int, a, b) -> np.ndarray:
    """Unit initial tangent at ``a`` of the geodesic from ``a`` to ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if kappa == 0:
        u = b - a
    else:
        u = b - (form(kappa, a, b) / kappa) * a
    n = tnorm(kappa, u)
    if n < 1e-300:
        raise GeometryError("degenerate angle")
    return u / n


def tangent_toward(p: ModelPoint, q: ModelPoint) -> np.ndarray:
    k = _same_kappa(p, q)
    if dist(p, q) < TOL.geom:
        raise GeometryError("degenerate angle")
    return tangent_toward_h(k, p.hom, q.hom)


def geodesic_point_h(kappa: int, a, d, t: float) -> np.ndarray:
    return C(kappa, t) * np.asarray(a) + S(kappa, t) * np.asarray(d)


def transport_h(kappa: int, a, d, t: float) -> np.ndarray:
    """Velocity at time ``t`` of the unit-speed geodesic a + d."""
    return -kappa * S(kappa, t) * np.asarray(a) + C(kappa, t) * np.asarray(d)


def _check_tangent(p: ModelPoint, direction) -> np.ndarray:
    k = p.kappa
    d = np.asarray(direction, dtype=float).reshape(3)
    h = p.hom
    if k == 0:
        if abs(d[2]) > TOL.norm:
            raise GeometryError("direction is not tangent to the plane")
    elif abs(form(k, d, h)) > TOL.norm:
        raise GeometryError("direction is not tangent at the point")
    if abs(tnorm(k, d) - 1.0) > TOL.norm:
        raise GeometryError("direction is not a unit vector")
    return d


def exp_point(p: ModelPoint, direction, t: float) -> ModelPoint:
    """Point at distance ``t`` from ``p`` along the geodesic with initial velocity ``direction``."""
    if t < 0:
        raise GeometryError("negative geodesic length")
    d = _check_tangent(p, direction)
    return ModelPoint.from_hom(p.kappa, geodesic_point_h(p.kappa, p.hom, d, t))


def transport(p: ModelPoint, direction, t: float) -> np.ndarray:
    """Parallel-transported direction at ``exp_point(p, direction, t)``."""
    d = _check_tangent(p, direction)
    q = geodesic_point_h(p.kappa, p.hom, d, t)
    return normalize_tangent(p.kappa, normalize_hom(p.kappa, q), transport_h(p.kappa, p.hom, d, t))


def left_normal_h(kappa: int, a, d) -> np.ndarray:
    """Unit tangent at ``a`` obtained by turning ``d`` a quarter turn counter-clockwise."""
    return form_matrix(kappa) @ cross(a, d)


def rotate_tangent_h(kappa: int, a, d, theta: float) -> np.ndarray:
    return math.cos(theta) * np.asarray(d) + math.sin(theta) * left_normal_h(kappa, a, d)


def angle_between_h(kappa: int, u, w) -> float:
    du = np.asarray(u) - np.asarray(w)
    su = np.asarray(u) + np.asarray(w)
    return 2.0 * math.atan2(tnorm(kappa, du), tnorm(kappa, su))


def angle_at(vertex: ModelPoint, p: ModelPoint, q: ModelPoint) -> float:
    """Angle at ``vertex`` between the geodesics towards ``p`` and ``q``, in [0, pi]."""
    k = _same_kappa(vertex, p, q)
    if dist(vertex, p) < TOL.geom or dist(vertex, q) < TOL.geom:
        raise GeometryError("degenerate angle")
    check_not_antipodal(vertex, p)
    check_not_antipodal(vertex, q)
    u = tangent_toward_h(k, vertex.hom, p.hom)
    w = tangent_toward_h(k, vertex.hom, q.hom)
    return angle_between_h(k, u, w)


# ---------------------------------------------------------------------------
# triangle solvers


def solve_angle_from_sides(a: float, b: float, c: float, kappa) -> float:
    """Angle opposite side ``a`` in a triangle with sides a, b, c.

    Uses the half-angle form of the law of cosines, which stays accurate for
    both tiny and nearly degenerate triangles.
    """
    kappa = as_curvature(kappa)
    if min(a, b, c) <= 0 or not all(map(math.isfinite, (a, b, c))):
        raise GeometryError("no such triangle")
    s = 0.5 * (a + b + c)
    if s - a <= 0 or s - b <= 0 or s - c <= 0:
        raise GeometryError("no such triangle")
    if kappa == Curvature.SPHERICAL and (s >= math.pi or max(a, b, c) >= math.pi):
        raise GeometryError("no such triangle")
    sin2 = S(kappa, s - b) * S(kappa, s - c)
    cos2 = S(kappa, s) * S(kappa, s - a)
    return 2.0 * math.atan2(math.sqrt(max(sin2, 0.0)), math.sqrt(max(cos2, 0.0)))


def solve_side_from_angles(alpha_i: float, alpha_j: float, alpha_k: float, kappa) -> float:
    """Side opposite ``alpha_i`` from the three angles (second law of cosines)."""
    kappa = as_curvature(kappa)
    if kappa == Curvature.FLAT:
        raise GeometryError("angles do not determine Euclidean side")
    angles = (alpha_i, alpha_j, alpha_k)
    if any(not (0.0 < x < math.pi) for x in angles):
        raise GeometryError("no such triangle")
    total = sum(angles)
    if (kappa > 0 and total <= math.pi) or (kappa < 0 and total >= math.pi):
        raise GeometryError("no such triangle")
    sig = 0.5 * total
    den = math.sin(alpha_j) * math.sin(alpha_k)
    # sin^2(a/2) on the sphere, sinh^2(a/2) in the hyperbolic plane
    half_s2 = -kappa * math.cos(sig) * math.cos(sig - alpha_i) / den
    half_c2 = math.cos(sig - alpha_j) * math.cos(sig - alpha_k) / den
    if half_s2 <= 0 or half_c2 <= 0:
        raise GeometryError("no such triangle")
    if kappa > 0:
        return 2.0 * math.atan2(math.sqrt(half_s2), math.sqrt(half_c2))
    return 2.0 * math.asinh(math.sqrt(half_s2))


# ---------------------------------------------------------------------------
# isometries


@dataclass(frozen=True, eq=False)
class Isometry2:
    """Isometry of a model surface as a 3x3 matrix on homogeneous vectors."""

    matrix: np.ndarray
    kappa: Curvature

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).reshape(3, 3).copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "kappa", as_curvature(self.kappa))

    @classmethod
    def identity(cls, kappa) -> "Isometry2":
        return cls(np.eye(3), kappa)

    def __matmul__(self, other: "Isometry2") -> "Isometry2":
        if other.kappa != self.kappa:
            raise GeometryError("mixed curvature")
        return Isometry2(self.matrix @ other.matrix, self.kappa)

    def __call__(self, p: ModelPoint) -> ModelPoint:
        if p.kappa != self.kappa:
            raise GeometryError("mixed curvature")
        return ModelPoint.from_hom(self.kappa, self.matrix @ p.hom)

    def apply_h(self, h) -> np.ndarray:
        return normalize_hom(self.kappa, self.matrix @ np.asarray(h))

    def apply_vector(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v)

    def inverse(self) -> "Isometry2":
        m = self.matrix
        if self.kappa == Curvature.SPHERICAL:
            inv = m.T
        elif self.kappa == Curvature.HYPERBOLIC:
            j = form_matrix(-1)
            inv = j @ m.T @ j
        else:
            inv = np.linalg.inv(m)
        return Isometry2(inv, self.kappa)

    @property
    def orientation(self) -> int:
        return 1 if np.linalg.det(self.matrix) > 0 else -1

    def residual(self) -> float:
        m = self.matrix
        if self.kappa == Curvature.SPHERICAL:
            return float(np.abs(m.T @ m - np.eye(3)).max())
        if self.kappa == Curvature.HYPERBOLIC:
            j = form_matrix(-1)
            r = float(np.abs(m.T @ j @ m - j).max())
            return r if m[2, 2] > 0 else math.inf
        r = m[:2, :2]
        return float(max(np.abs(r.T @ r - np.eye(2)).max(), np.abs(m[2] - [0, 0, 1]).max()))

    def check(self, tol: float | None = None) -> "Isometry2":
        tol = TOL.norm * max(1.0, float(np.abs(self.matrix).max()) ** 2) if tol is None else tol
        if not self.residual() <= tol:
            raise GeometryError("matrix is not an isometry of the model")
        return self


def frame_isometry_h(kappa: int, a, d, orientation: int = 1) -> Isometry2:
    """Isometry taking the origin and its e1 direction to ``a`` and ``d``."""
    n = left_normal_h(kappa, a, d)
    m = np.column_stack([d, orientation * n, a])
    return Isometry2(m, kappa)


def frame_isometry(p: ModelPoint, direction, orientation: int = 1) -> Isometry2:
    d = _check_tangent(p, direction)
    return frame_isometry_h(p.kappa, p.hom, d, orientation)


# ---------------------------------------------------------------------------
# segments


@dataclass(frozen=True, eq=False)
class GeodesicSegment:
    start: ModelPoint
    end: ModelPoint

    def __post_init__(self):
        _same_kappa(self.start, self.end)
        check_not_antipodal(self.start, self.end)

    @property
    def kappa(self) -> Curvature:
        return self.start.kappa

    @property
    def length(self) -> float:
        return dist(self.start, self.end)

    def point_at(self, t: float) -> ModelPoint:
        k = self.kappa
        d = tangent_toward_h(k, self.start.hom, self.end.hom)
        return ModelPoint.from_hom(k, geodesic_point_h(k, self.start.hom, d, t))


def line_normal_h(a, b) -> np.ndarray:
    """Normal of the plane through the origin containing both homogeneous vectors."""
    return cross(a, b)


def normal_norm(kappa: int, c) -> float:
    return math.sqrt(max(c[0] * c[0] + c[1] * c[1] + kappa * c[2] * c[2], 0.0))


def signed_distance_h(kappa: int, c, x) -> float:
    """Signed distance from ``x`` to the geodesic with plane normal ``c`` (left positive)."""
    return S_inv(kappa, float(np.dot(c, x)) / normal_norm(kappa, c))


def foot_h(kappa: int, c, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the geodesic with normal ``c``."""
    n2 = normal_norm(kappa, c) ** 2
    f = np.asarray(x) - (float(np.dot(c, x)) / n2) * (form_matrix(kappa) @ c)
    return normalize_hom(kappa, f)


def _between(kappa: int, a, x, b, eps: float) -> bool:
    """``x`` (on the geodesic through a, b) lies strictly inside segment ab."""
    dax = dist_h(kappa, a, x)
    dxb = dist_h(kappa, x, b)
    dab = dist_h(kappa, a, b)
    return dax > eps and dxb > eps and dax + dxb - dab < eps


def reflect_across(seg: GeodesicSegment) -> Isometry2:
    """Reflection in the geodesic supporting ``seg``."""
    k = seg.kappa
    if seg.length < TOL.geom:
        raise GeometryError("zero-length segment")
    a = seg.start.hom
    d = tangent_toward_h(k, a, seg.end.hom)
    f = frame_isometry_h(k, a, d)
    r = Isometry2(np.diag([1.0, -1.0, 1.0]), k)
    return f @ r @ f.inverse()


def intersect_segments(s1: GeodesicSegment, s2: GeodesicSegment) -> ModelPoint | None:
    """Transversal intersection point interior to both segments, if any."""
    k = _same_kappa(s1.start, s2.start)
    eps = TOL.geom
    if s1.length < eps or s2.length < eps:
        raise GeometryError("zero-length segment")
    a1, b1, a2, b2 = s1.start.hom, s1.end.hom, s2.start.hom, s2.end.hom
    c1 = line_normal_h(a1, b1)
    c2 = line_normal_h(a2, b2)
    sd = [abs(signed_distance_h(k, c1, x)) for x in (a2, b2)]
    if max(sd) < eps:
        # same supporting geodesic
        if any(_between(k, a1, x, b1, eps) for x in (a2, b2)) or any(
            _between(k, a2, x, b2, eps) for x in (a1, b1)
        ):
            raise GeometryError("collinear overlap")
        return None
    m = cross(c1, c2)
    candidates = []
    if k > 0:
        nm = float(np.linalg.norm(m))
        if nm < 1e-300:
            return None
        candidates = [m / nm, -m / nm]
    elif k < 0:
        if form(-1, m, m) >= 0:
            return None
        candidates = [normalize_hom(k, m)]
    else:
        if abs(m[2]) < 1e-300:
            return None
        candidates = [m / m[2]]
    for x in candidates:
        if _between(k, a1, x, b1, eps) and _between(k, a2, x, b2, eps):
            return ModelPoint.from_hom(k, x)
    return None


def point_segment_distance(p: ModelPoint, seg: GeodesicSegment) -> tuple[float, ModelPoint]:
    """Distance from ``p`` to ``seg`` and the nearest point of the segment."""
    k = _same_kappa(p, seg.start)
    x = p.hom
    a, b = seg.start.hom, seg.end.hom
    ends = [(dist_h(k, x, a), seg.start), (dist_h(k, x, b), seg.end)]
    best = min(ends, key=lambda e: e[0])
    if seg.length < TOL.geom:
        return best
    c = line_normal_h(a, b)
    if k > 0 and abs(abs(float(np.dot(c, x))) / normal_norm(k, c) - 1.0) < 1e-14:
        return best  # p is a pole of the supporting great circle
    f = foot_h(k, c, x)
    eps = TOL.geom
    if dist_h(k, f, a) <= eps:
        return ends[0]
    if dist_h(k, f, b) <= eps:
        return ends[1]
    if _between(k, a, f, b, eps):
        d = dist_h(k, x, f)
        if d < best[0]:
            return d, ModelPoint.from_hom(k, f)
    return best
