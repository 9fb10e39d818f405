# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geodesic tracer; mirrors ``_tracecore_py.trace`` exactly."""

from libc.math cimport atan2, sqrt, sin, cos, sinh, cosh, asinh, atanh, hypot, fmod, INFINITY, M_PI

import numpy as np

cdef int EDGE_U[3]
cdef int EDGE_W[3]
EDGE_U[:] = [0, 0, 1]
EDGE_W[:] = [1, 2, 2]


cdef inline double _dot(double* u, double* v) nogil:
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


cdef inline double _form(int k, double* u, double* v) nogil:
    return u[0] * v[0] + u[1] * v[1] + k * u[2] * v[2]


cdef inline double _C(int k, double t) nogil:
    if k > 0:
        return cos(t)
    if k < 0:
        return cosh(t)
    return 1.0


cdef inline double _S(int k, double t) nogil:
    if k > 0:
        return sin(t)
    if k < 0:
        return sinh(t)
    return t


cdef double _dist(int k, double* a, double* b) nogil:
    cdef double cx, cy, cz, dx, dy, dz, q
    if k > 0:
        cx = a[1] * b[2] - a[2] * b[1]
        cy = a[2] * b[0] - a[0] * b[2]
        cz = a[0] * b[1] - a[1] * b[0]
        return atan2(sqrt(cx * cx + cy * cy + cz * cz), _dot(a, b))
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    dz = a[2] - b[2]
    if k < 0:
        q = dx * dx + dy * dy - dz * dz
        if q < 0:
            q = 0
        return 2.0 * asinh(sqrt(q) / 2.0)
    return hypot(dx, dy)


cdef double _exit_time(int k, double a, double b) nogil:
    cdef double r
    if k > 0:
        return atan2(b, a) + 0.5 * M_PI
    if b >= 0:
        return INFINITY
    if k < 0:
        r = -a / b
        if r >= 1.0:
            return INFINITY
        return atanh(r)
    return -a / b


cdef void _normalize_point(int k, double* x) nogil:
    cdef double n, s
    if k > 0:
        n = sqrt(_dot(x, x))
        x[0] /= n
        x[1] /= n
        x[2] /= n
    elif k < 0:
        n = x[2] * x[2] - x[0] * x[0] - x[1] * x[1]
        if n < 1e-300:
            n = 1e-300
        n = sqrt(n)
        s = 1.0 if x[2] > 0 else -1.0
        x[0] = s * x[0] / n
        x[1] = s * x[1] / n
        x[2] = s * x[2] / n
    else:
        x[0] /= x[2]
        x[1] /= x[2]
        x[2] = 1.0


cdef void _normalize_dir(int k, double* x, double* d) nogil:
    cdef double c, n
    if k != 0:
        c = _form(k, d, x) / k
        d[0] -= c * x[0]
        d[1] -= c * x[1]
        d[2] -= c * x[2]
    else:
        d[2] = 0.0
    n = _form(k, d, d)
    if n < 1e-300:
        n = 1e-300
    n = sqrt(n)
    d[0] /= n
    d[1] /= n
    d[2] /= n


def trace(kappa, charts, normals, ginv, nbr, nbr_edge, face, x0, d0,
          double max_length, max_steps, double eps_vertex, double eps_close):
    cdef int k = int(kappa)
    cdef double[:, :, ::1] ch = np.ascontiguousarray(charts, dtype=np.float64)
    cdef double[:, :, ::1] nr = np.ascontiguousarray(normals, dtype=np.float64)
    cdef double[:, :, :, ::1] gi = np.ascontiguousarray(ginv, dtype=np.float64)
    cdef long[:, ::1] nb = np.ascontiguousarray(nbr, dtype=np.int64)
    cdef long[:, ::1] ne = np.ascontiguousarray(nbr_edge, dtype=np.int64)
    cdef int nmax = int(max_steps)
    out_faces = np.zeros(nmax, dtype=np.int64)
    out_starts = np.zeros((nmax, 3), dtype=np.float64)
    out_ends = np.zeros((nmax, 3), dtype=np.float64)
    out_exits = np.zeros(nmax, dtype=np.int64)
    cdef long[::1] of = out_faces
    cdef double[:, ::1] os_ = out_starts
    cdef double[:, ::1] oe = out_ends
    cdef long[::1] ox = out_exits

    cdef double xs[3]
    cdef double ds[3]
    cdef double x[3]
    cdef double d[3]
    cdef double y[3]
    cdef double dy[3]
    cdef double cx[3]
    cdef double gap[3]
    cdef double n[3]
    cdef double tmp[3]
    cdef int i, m, step, best_m, u, w
    cdef int f0 = int(face)
    cdef int f = f0
    cdef int m_in = -1
    cdef int count = 0
    cdef int code = 3
    cdef int hit = -1
    cdef double total = 0.0
    cdef double best_t, t, a, b, c, s, nn, sd, ts, du, dw

    for i in range(3):
        xs[i] = float(x0[i])
        ds[i] = float(d0[i])
    _normalize_point(k, xs)
    _normalize_dir(k, xs, ds)
    for i in range(3):
        x[i] = xs[i]
        d[i] = ds[i]

    with nogil:
        for step in range(nmax):
            best_t = INFINITY
            best_m = -1
            for m in range(3):
                if m == m_in:
                    continue
                for i in range(3):
                    n[i] = nr[f, m, i]
                a = _dot(n, x)
                b = _dot(n, d)
                t = _exit_time(k, a, b)
                if t < best_t:
                    best_t = t
                    best_m = m
            if best_m < 0 or not best_t > 0 or best_t == INFINITY:
                code = 4
                break
            if f == f0 and step > 0:
                cx[0] = x[1] * d[2] - x[2] * d[1]
                cx[1] = x[2] * d[0] - x[0] * d[2]
                cx[2] = x[0] * d[1] - x[1] * d[0]
                nn = cx[0] * cx[0] + cx[1] * cx[1] + k * cx[2] * cx[2]
                if nn < 1e-300:
                    nn = 1e-300
                nn = sqrt(nn)
                sd = _dot(cx, xs) / nn
                if sd < 0:
                    sd = -sd
                if sd < eps_close:
                    if k > 0:
                        ts = fmod(atan2(_dot(xs, d), _dot(xs, x)) + 2 * M_PI, 2 * M_PI)
                        if ts > 2 * M_PI - eps_close:
                            ts = 0.0
                    elif k < 0:
                        ts = asinh(_form(-1, xs, d))
                    else:
                        ts = (xs[0] - x[0]) * d[0] + (xs[1] - x[1]) * d[1]
                    if ts >= -eps_close and ts <= best_t + eps_close and total + ts <= max_length:
                        c = _C(k, ts)
                        s = _S(k, ts)
                        for i in range(3):
                            gap[i] = -k * s * x[i] + c * d[i] - ds[i]
                        nn = _form(k, gap, gap)
                        if nn < 0:
                            nn = 0
                        if sqrt(nn) < eps_close:
                            if ts < 0:
                                ts = 0.0
                            for i in range(3):
                                y[i] = c * x[i] + s * d[i]
                            _normalize_point(k, y)
                            of[count] = f
                            ox[count] = -1
                            for i in range(3):
                                os_[count, i] = x[i]
                                oe[count, i] = y[i]
                            count += 1
                            total += ts
                            code = 2
                            break
            if total + best_t >= max_length:
                t = max_length - total
                c = _C(k, t)
                s = _S(k, t)
                for i in range(3):
                    y[i] = c * x[i] + s * d[i]
                _normalize_point(k, y)
                of[count] = f
                ox[count] = -1
                for i in range(3):
                    os_[count, i] = x[i]
                    oe[count, i] = y[i]
                count += 1
                total = max_length
                code = 0
                break
            t = best_t
            c = _C(k, t)
            s = _S(k, t)
            for i in range(3):
                y[i] = c * x[i] + s * d[i]
                dy[i] = -k * s * x[i] + c * d[i]
            _normalize_point(k, y)
            of[count] = f
            ox[count] = best_m
            for i in range(3):
                os_[count, i] = x[i]
                oe[count, i] = y[i]
            count += 1
            total += t
            u = EDGE_U[best_m]
            w = EDGE_W[best_m]
            for i in range(3):
                tmp[i] = ch[f, u, i]
            du = _dist(k, y, tmp)
            for i in range(3):
                tmp[i] = ch[f, w, i]
            dw = _dist(k, y, tmp)
            if du < eps_vertex or dw < eps_vertex:
                hit = u if du <= dw else w
                code = 1
                break
            for i in range(3):
                x[i] = gi[f, best_m, i, 0] * y[0] + gi[f, best_m, i, 1] * y[1] + gi[f, best_m, i, 2] * y[2]
                d[i] = gi[f, best_m, i, 0] * dy[0] + gi[f, best_m, i, 1] * dy[1] + gi[f, best_m, i, 2] * dy[2]
            _normalize_point(k, x)
            _normalize_dir(k, x, d)
            m_in = ne[f, best_m]
            f = nb[f, best_m]

    return (code, out_faces[:count].tolist(), out_starts[:count].tolist(), out_ends[:count].tolist(),
            out_exits[:count].tolist(), total, hit)
