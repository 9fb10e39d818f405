"""Pure-Python geodesic tracer; same contract as the compiled ``_tracecore``.

A geodesic is followed face by face in canonical charts.  Inside a face the
exit time through each edge line has a closed form; crossing an edge applies
the precomputed chart change of that edge.

Stop codes: 0 max length, 1 vertex hit, 2 closed, 3 max steps, 4 error.
"""

import math

import numpy as np

EDGE_ENDS = ((0, 1), (0, 2), (1, 2))
STOP_MAX_LENGTH, STOP_VERTEX, STOP_CLOSED, STOP_MAX_STEPS, STOP_ERROR = range(5)


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _form(k, u, v):
    return u[0] * v[0] + u[1] * v[1] + k * u[2] * v[2]


def _dist(k, a, b):
    if k > 0:
        cx = a[1] * b[2] - a[2] * b[1]
        cy = a[2] * b[0] - a[0] * b[2]
        cz = a[0] * b[1] - a[1] * b[0]
        return math.atan2(math.sqrt(cx * cx + cy * cy + cz * cz), _dot(a, b))
    dx, dy, dz = a[0] - b[0], a[1] - b[1], a[2] - b[2]
    if k < 0:
        q = dx * dx + dy * dy - dz * dz
        return 2.0 * math.asinh(math.sqrt(q if q > 0 else 0.0) / 2.0)
    return math.hypot(dx, dy)


def _C(k, t):
    return math.cos(t) if k > 0 else (math.cosh(t) if k < 0 else 1.0)


def _S(k, t):
    return math.sin(t) if k > 0 else (math.sinh(t) if k < 0 else t)


def _exit_time(k, a, b):
    """First t > 0 where a C(t) + b S(t) turns negative, or inf."""
    if k > 0:
        t = math.atan2(b, a) + 0.5 * math.pi
        return t
    if b >= 0:
        return math.inf
    if k < 0:
        r = -a / b
        if r >= 1.0:
            return math.inf
        return math.atanh(r)
    return -a / b


def _normalize_point(k, x):
    if k > 0:
        n = math.sqrt(_dot(x, x))
        return [x[0] / n, x[1] / n, x[2] / n]
    if k < 0:
        n = math.sqrt(max(x[2] * x[2] - x[0] * x[0] - x[1] * x[1], 1e-300))
        s = 1.0 if x[2] > 0 else -1.0
        return [s * x[0] / n, s * x[1] / n, s * x[2] / n]
    return [x[0] / x[2], x[1] / x[2], 1.0]


def _normalize_dir(k, x, d):
    if k != 0:
        c = _form(k, d, x) / k
        d = [d[0] - c * x[0], d[1] - c * x[1], d[2] - c * x[2]]
    else:
        d = [d[0], d[1], 0.0]
    n = math.sqrt(max(_form(k, d, d), 1e-300))
    return [d[0] / n, d[1] / n, d[2] / n]


def _mat(m, v):
    return [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]


def trace(kappa, charts, normals, ginv, nbr, nbr_edge, face, x0, d0, max_length, max_steps, eps_vertex, eps_close):
    """Trace from ``x0`` in direction ``d0`` (chart of ``face``).

    Returns ``(code, faces, starts, ends, exits, total, hit)`` where ``exits``
    holds the local exit edge of each piece (-1 for a piece that stops inside
    a face) and ``hit`` the local index of the vertex hit (or -1).
    """
    k = int(kappa)
    charts = np.asarray(charts, dtype=float).tolist()
    normals = np.asarray(normals, dtype=float).tolist()
    ginv = np.asarray(ginv, dtype=float).tolist()
    nbr = np.asarray(nbr).tolist()
    nbr_edge = np.asarray(nbr_edge).tolist()
    f0 = int(face)
    xs = _normalize_point(k, list(map(float, x0)))
    ds = _normalize_dir(k, xs, list(map(float, d0)))
    f = f0
    x = xs
    d = ds
    m_in = -1
    total = 0.0
    faces, starts, ends, exits = [], [], [], []
    code = STOP_MAX_STEPS
    hit = -1
    for step in range(int(max_steps)):
        best_t = math.inf
        best_m = -1
        for m in range(3):
            if m == m_in:
                continue
            n = normals[f][m]
            a = _dot(n, x)
            b = _dot(n, d)
            t = _exit_time(k, a, b)
            if t < best_t:
                best_t = t
                best_m = m
        if best_m < 0 or not best_t > 0 or best_t == math.inf:
            code = STOP_ERROR
            break
        # closure: does this piece run through the start point with the start direction?
        if f == f0 and step > 0:
            cx = [x[1] * d[2] - x[2] * d[1], x[2] * d[0] - x[0] * d[2], x[0] * d[1] - x[1] * d[0]]
            nn = math.sqrt(max(cx[0] * cx[0] + cx[1] * cx[1] + k * cx[2] * cx[2], 1e-300))
            sd = abs(_dot(cx, xs)) / nn
            if sd < eps_close:
                if k > 0:
                    ts = math.atan2(_dot(xs, d), _dot(xs, x)) % (2 * math.pi)
                    if ts > 2 * math.pi - eps_close:
                        ts = 0.0
                elif k < 0:
                    ts = math.asinh(_form(-1, xs, d))
                else:
                    ts = (xs[0] - x[0]) * d[0] + (xs[1] - x[1]) * d[1]
                if -eps_close <= ts <= best_t + eps_close and total + ts <= max_length:
                    c, s = _C(k, ts), _S(k, ts)
                    dt = [-k * s * x[i] + c * d[i] for i in range(3)]
                    gap = [dt[i] - ds[i] for i in range(3)]
                    if math.sqrt(max(_form(k, gap, gap), 0.0)) < eps_close:
                        ts = max(ts, 0.0)
                        y = [c * x[i] + s * d[i] for i in range(3)]
                        faces.append(f)
                        starts.append(x)
                        ends.append(_normalize_point(k, y))
                        exits.append(-1)
                        total += ts
                        code = STOP_CLOSED
                        break
        if total + best_t >= max_length:
            t = max_length - total
            c, s = _C(k, t), _S(k, t)
            y = [c * x[i] + s * d[i] for i in range(3)]
            faces.append(f)
            starts.append(x)
            ends.append(_normalize_point(k, y))
            exits.append(-1)
            total = max_length
            code = STOP_MAX_LENGTH
            break
        t = best_t
        c, s = _C(k, t), _S(k, t)
        y = _normalize_point(k, [c * x[i] + s * d[i] for i in range(3)])
        dy = [-k * s * x[i] + c * d[i] for i in range(3)]
        faces.append(f)
        starts.append(x)
        ends.append(y)
        exits.append(best_m)
        total += t
        u, w = EDGE_ENDS[best_m]
        du = _dist(k, y, charts[f][u])
        dw = _dist(k, y, charts[f][w])
        if du < eps_vertex or dw < eps_vertex:
            hit = u if du <= dw else w
            code = STOP_VERTEX
            break
        g = ginv[f][best_m]
        nf = nbr[f][best_m]
        m_in = nbr_edge[f][best_m]
        x = _normalize_point(k, _mat(g, y))
        d = _normalize_dir(k, x, _mat(g, dy))
        f = nf
    return code, faces, starts, ends, exits, total, hit
