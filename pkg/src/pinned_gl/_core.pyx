# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: axisymmetric distance fields and lattice Dijkstra."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, fabs, M_PI, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "compiled"


cdef inline double _disk_inside(double ax, double ay, double bx, double by, double R) noexcept nogil:
    # length of segment a->b inside the closed disk |x| <= R
    cdef double dx = bx - ax, dy = by - ay
    cdef double A = dx * dx + dy * dy
    if A == 0.0:
        return 0.0
    cdef double B = ax * dx + ay * dy
    cdef double C = ax * ax + ay * ay - R * R
    cdef double disc = B * B - A * C
    if disc <= 0.0:
        return 0.0
    cdef double sq = sqrt(disc)
    cdef double t0 = (-B - sq) / A
    cdef double t1 = (-B + sq) / A
    if t0 < 0.0:
        t0 = 0.0
    if t1 > 1.0:
        t1 = 1.0
    if t1 <= t0:
        return 0.0
    return (t1 - t0) * sqrt(A)


cdef inline double _ball_inside(double ax, double ay, double az, double bx, double by, double bz,
                                double cx, double cy, double cz, double R) noexcept nogil:
    cdef double dx = bx - ax, dy = by - ay, dz = bz - az
    cdef double fx = ax - cx, fy = ay - cy, fz = az - cz
    cdef double A = dx * dx + dy * dy + dz * dz
    if A == 0.0:
        return 0.0
    cdef double B = fx * dx + fy * dy + fz * dz
    cdef double C = fx * fx + fy * fy + fz * fz - R * R
    cdef double disc = B * B - A * C
    if disc <= 0.0:
        return 0.0
    cdef double sq = sqrt(disc)
    cdef double t0 = (-B - sq) / A
    cdef double t1 = (-B + sq) / A
    if t0 < 0.0:
        t0 = 0.0
    if t1 > 1.0:
        t1 = 1.0
    if t1 <= t0:
        return 0.0
    return (t1 - t0) * sqrt(A)


cdef inline double _poly_inside(double ax, double ay, double az, double bx, double by, double bz,
                                const double[:, ::1] nrm, const double[::1] off) noexcept nogil:
    cdef double dx = bx - ax, dy = by - ay, dz = bz - az
    cdef double lo = 0.0, hi = 1.0, nd, na, t
    cdef Py_ssize_t i
    for i in range(nrm.shape[0]):
        nd = nrm[i, 0] * dx + nrm[i, 1] * dy + nrm[i, 2] * dz
        na = nrm[i, 0] * ax + nrm[i, 1] * ay + nrm[i, 2] * az
        if fabs(nd) < 1e-300:
            if na > off[i]:
                return 0.0
            continue
        t = (off[i] - na) / nd
        if nd > 0:
            if t < hi:
                hi = t
        else:
            if t > lo:
                lo = t
        if hi <= lo:
            return 0.0
    return (hi - lo) * sqrt(dx * dx + dy * dy + dz * dz)


def boundary_times(double sk, double rho, double R, double b2, int nphi):
    """Cost from the source ball (axis point ``sk``, radius ``rho``) to boundary points of the disk."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qx = np.empty(nphi)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] qy = np.empty(nphi)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d0 = np.empty(nphi)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] T = np.empty(nphi)
    cdef double[::1] vx = qx, vy = qy, vd = d0, vT = T
    cdef Py_ssize_t i, j
    cdef double phi, dx, dy, L, yx, yy, best, c, ex, ey
    with nogil:
        for i in range(nphi):
            phi = M_PI * i / (nphi - 1)
            vx[i] = R * cos(phi)
            vy[i] = R * sin(phi)
            dx = vx[i] - sk
            dy = vy[i]
            L = sqrt(dx * dx + dy * dy)
            if L <= rho:
                vd[i] = 0.0
            else:
                yx = sk + rho * dx / L
                yy = rho * dy / L
                vd[i] = (L - rho) - (1.0 - b2) * _disk_inside(yx, yy, vx[i], vy[i], R)
        for j in range(nphi):
            best = vd[j]
            for i in range(nphi):
                ex = vx[i] - vx[j]
                ey = vy[i] - vy[j]
                c = vd[i] + b2 * sqrt(ex * ex + ey * ey)
                if c < best:
                    best = c
            vT[j] = best
    return qx, qy, T


cdef inline double _via(const double[::1] qx, const double[::1] qy, const double[::1] T,
                        Py_ssize_t j, double s, double t, double w) noexcept nogil:
    cdef double dx = qx[j] - s, dy = qy[j] - t
    return T[j] + w * sqrt(dx * dx + dy * dy)


cdef double _point_value(const double[::1] qx, const double[::1] qy, const double[::1] T,
                         double s, double t, double sk, double rho, double R, double b2,
                         int stride) noexcept nogil:
    cdef Py_ssize_t n = qx.shape[0]
    cdef double w = b2 if s * s + t * t <= R * R else 1.0
    cdef double dx = s - sk, dy = t, L = sqrt(dx * dx + dy * dy)
    cdef double direct, yx, yy
    if L <= rho:
        return 0.0
    yx = sk + rho * dx / L
    yy = rho * dy / L
    direct = (L - rho) - (1.0 - b2) * _disk_inside(yx, yy, s, t, R)
    # coarse scan, keep the two best local minima
    cdef Py_ssize_t j, j1 = 0, j2 = -1, lo, hi, jb = 0
    cdef int rnd
    cdef double v, v1 = 1e300, v2 = 1e300, prev, nxt, best, fm, f0, fp, den
    j = 0
    while j < n:
        v = _via(qx, qy, T, j, s, t, w)
        prev = _via(qx, qy, T, j - stride, s, t, w) if j >= stride else 1e300
        nxt = _via(qx, qy, T, j + stride, s, t, w) if j + stride < n else 1e300
        if v <= prev and v <= nxt:
            if v < v1:
                if v1 < 1e300:  # demote only a genuine earlier minimum
                    v2 = v1
                    j2 = j1
                v1 = v
                j1 = j
            elif v < v2:
                v2 = v
                j2 = j
        j += stride
    best = direct
    for rnd in range(2):
        if rnd == 1:
            if j2 < 0:
                break
            j1 = j2
        lo = j1 - stride
        hi = j1 + stride
        if lo < 0:
            lo = 0
        if hi > n - 1:
            hi = n - 1
        v1 = 1e300
        j = lo
        while j <= hi:
            v = _via(qx, qy, T, j, s, t, w)
            if v < v1:
                v1 = v
                jb = j
            j += 1
        if jb > 0 and jb < n - 1:
            fm = _via(qx, qy, T, jb - 1, s, t, w)
            f0 = v1
            fp = _via(qx, qy, T, jb + 1, s, t, w)
            den = fm - 2.0 * f0 + fp
            if den > 0:
                v = f0 - 0.125 * (fp - fm) * (fp - fm) / den
                if v < v1 and v > v1 - 1e-3:
                    v1 = v
        if v1 < best:
            best = v1
    return best


def axisym_field(double[::1] s, double[::1] t, double sk, double rho, double R, double b2,
                 double[::1] qx, double[::1] qy, double[::1] T, int stride=16):
    """Distance from the source ball to planar points ``(s, t)`` (t >= 0)."""
    cdef Py_ssize_t m = s.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m)
    cdef double[::1] vo = out
    with nogil:
        for i in range(m):
            vo[i] = _point_value(qx, qy, T, s[i], t[i], sk, rho, R, b2, stride)
    return out


# ---------------------------------------------------------------- Dijkstra

cdef inline void _sift_up(double* key, int* heap, int* pos, int i) noexcept nogil:
    cdef int node = heap[i]
    cdef double k = key[node]
    cdef int parent
    while i > 0:
        parent = (i - 1) >> 1
        if key[heap[parent]] <= k:
            break
        heap[i] = heap[parent]
        pos[heap[i]] = i
        i = parent
    heap[i] = node
    pos[node] = i


cdef inline void _sift_down(double* key, int* heap, int* pos, int size, int i) noexcept nogil:
    cdef int node = heap[i]
    cdef double k = key[node]
    cdef int child
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        if child + 1 < size and key[heap[child + 1]] < key[heap[child]]:
            child += 1
        if key[heap[child]] >= k:
            break
        heap[i] = heap[child]
        pos[heap[i]] = i
        i = child
    heap[i] = node
    pos[node] = i


def lattice_dijkstra(int nx, int ny, int nz, double ox, double oy, double oz, double h,
                     const int[:, ::1] offsets, int incl_kind, const double[::1] ball,
                     const double[:, ::1] normals, const double[::1] hoffsets, double b2,
                     const long[::1] src_nodes, const double[::1] src_dist,
                     const long[::1] targets):
    """Single-source Dijkstra on a box lattice; stops once all ``targets`` are settled.

    ``incl_kind`` is 0 for a ball ``(cx, cy, cz, R)`` and 1 for a polytope.
    Returns the distance array (inf where unsettled).
    """
    cdef long N = <long> nx * ny * nz
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist_arr = np.full(N, np.inf)
    cdef double[::1] dist = dist_arr
    cdef int* heap = <int*> malloc(N * sizeof(int))
    cdef int* pos = <int*> malloc(N * sizeof(int))
    cdef char* done = <char*> malloc(N * sizeof(char))
    cdef char* is_target = <char*> malloc(N * sizeof(char))
    if heap == NULL or pos == NULL or done == NULL or is_target == NULL:
        free(heap); free(pos); free(done); free(is_target)
        raise MemoryError()
    cdef long i, u, v, remaining = 0
    cdef int size = 0, k, noff = offsets.shape[0]
    cdef int ui, uj, uk, vi, vj, vk
    cdef double du, nd, ax, ay, az, bx, by, bz, L, inside, r2, maxlen = 0.0, rad
    cdef double* olen = <double*> malloc(noff * sizeof(double))
    for k in range(noff):
        olen[k] = h * sqrt(<double>(offsets[k, 0] * offsets[k, 0] + offsets[k, 1] * offsets[k, 1]
                                   + offsets[k, 2] * offsets[k, 2]))
        if olen[k] > maxlen:
            maxlen = olen[k]
    try:
        with nogil:
            for i in range(N):
                pos[i] = -1
                done[i] = 0
                is_target[i] = 0
            for i in range(targets.shape[0]):
                if is_target[targets[i]] == 0:
                    is_target[targets[i]] = 1
                    remaining += 1
            for i in range(src_nodes.shape[0]):
                u = src_nodes[i]
                if src_dist[i] < dist[u]:
                    dist[u] = src_dist[i]
                    if pos[u] < 0:
                        heap[size] = <int> u
                        pos[u] = size
                        size += 1
                    _sift_up(&dist[0], heap, pos, pos[u])
            while size > 0 and remaining > 0:
                u = heap[0]
                size -= 1
                if size > 0:
                    heap[0] = heap[size]
                    pos[heap[0]] = 0
                    _sift_down(&dist[0], heap, pos, size, 0)
                pos[u] = -1
                done[u] = 1
                if is_target[u]:
                    remaining -= 1
                du = dist[u]
                uk = <int> (u // (<long> nx * ny))
                uj = <int> ((u // nx) % ny)
                ui = <int> (u % nx)
                ax = ox + ui * h
                ay = oy + uj * h
                az = oz + uk * h
                # phase zone of the whole stencil around u
                rad = -1.0
                if incl_kind == 0:
                    rad = sqrt((ax - ball[0]) ** 2 + (ay - ball[1]) ** 2 + (az - ball[2]) ** 2)
                for k in range(noff):
                    vi = ui + offsets[k, 0]
                    vj = uj + offsets[k, 1]
                    vk = uk + offsets[k, 2]
                    if vi < 0 or vi >= nx or vj < 0 or vj >= ny or vk < 0 or vk >= nz:
                        continue
                    v = vi + <long> nx * (vj + <long> ny * vk)
                    if done[v]:
                        continue
                    L = olen[k]
                    if incl_kind == 0 and rad > ball[3] + maxlen:
                        inside = 0.0
                    elif incl_kind == 0 and rad < ball[3] - maxlen:
                        inside = L
                    else:
                        bx = ox + vi * h
                        by = oy + vj * h
                        bz = oz + vk * h
                        if incl_kind == 0:
                            inside = _ball_inside(ax, ay, az, bx, by, bz, ball[0], ball[1], ball[2], ball[3])
                        else:
                            inside = _poly_inside(ax, ay, az, bx, by, bz, normals, hoffsets)
                    nd = du + L - (1.0 - b2) * inside
                    if nd < dist[v]:
                        dist[v] = nd
                        if pos[v] < 0:
                            heap[size] = <int> v
                            pos[v] = size
                            size += 1
                        _sift_up(&dist[0], heap, pos, pos[v])
            for i in range(N):
                if not done[i]:
                    dist[i] = INFINITY
    finally:
        free(heap); free(pos); free(done); free(is_target); free(olen)
    return dist_arr
