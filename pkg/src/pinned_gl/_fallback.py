"""Pure-Python/numpy versions of the compiled kernels (same signatures, same results)."""

from __future__ import annotations

import heapq

import numpy as np

BACKEND = "python"


def _disk_inside(ax, ay, bx, by, R):
    dx, dy = bx - ax, by - ay
    A = dx * dx + dy * dy
    B = ax * dx + ay * dy
    C = ax * ax + ay * ay - R * R
    disc = B * B - A * C
    with np.errstate(invalid="ignore", divide="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = np.clip((-B - sq) / A, 0.0, None)
        t1 = np.clip((-B + sq) / A, None, 1.0)
        out = np.where((disc > 0) & (A > 0) & (t1 > t0), (t1 - t0) * np.sqrt(A), 0.0)
    return np.nan_to_num(out)


def boundary_times(sk, rho, R, b2, nphi):
    phi = np.pi * np.arange(nphi) / (nphi - 1)
    qx, qy = R * np.cos(phi), R * np.sin(phi)
    dx, dy = qx - sk, qy
    L = np.hypot(dx, dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        yx = np.where(L > 0, sk + rho * dx / L, sk)
        yy = np.where(L > 0, rho * dy / L, 0.0)
    d0 = np.where(L <= rho, 0.0, (L - rho) - (1.0 - b2) * _disk_inside(yx, yy, qx, qy, R))
    T = np.empty(nphi)
    for j0 in range(0, nphi, 512):
        j1 = min(nphi, j0 + 512)
        chord = np.hypot(qx[:, None] - qx[None, j0:j1], qy[:, None] - qy[None, j0:j1])
        T[j0:j1] = np.minimum(d0[j0:j1], np.min(d0[:, None] + b2 * chord, axis=0))
    return qx, qy, T


def axisym_field(s, t, sk, rho, R, b2, qx, qy, T, stride=16):
    s = np.asarray(s, float)
    t = np.asarray(t, float)
    out = np.empty(len(s))
    for c0 in range(0, len(s), 4096):
        c1 = min(len(s), c0 + 4096)
        out[c0:c1] = _chunk(s[c0:c1], t[c0:c1], sk, rho, R, b2, qx, qy, T, stride)
    return out


def _chunk(s, t, sk, rho, R, b2, qx, qy, T, stride):
    n = len(qx)
    m = len(s)
    w = np.where(s * s + t * t <= R * R, b2, 1.0)
    dx, dy = s - sk, t
    L = np.hypot(dx, dy)
    with np.errstate(invalid="ignore", divide="ignore"):
        yx = np.where(L > 0, sk + rho * dx / L, sk)
        yy = np.where(L > 0, rho * dy / L, 0.0)
    direct = (L - rho) - (1.0 - b2) * _disk_inside(yx, yy, s, t, R)

    def via(idx):
        return T[idx] + w[:, None] * np.hypot(qx[idx] - s[:, None], qy[idx] - t[:, None])

    J = np.arange(0, n, stride)
    F = via(np.broadcast_to(J, (m, len(J))))
    big = np.full((m, 1), 1e300)
    prev = np.hstack([big, F[:, :-1]])
    nxt = np.hstack([F[:, 1:], big])
    Floc = np.where((F <= prev) & (F <= nxt), F, 1e300)
    order = np.argsort(Floc, axis=1, kind="stable")[:, :2]
    best = direct.copy()
    rows = np.arange(m)
    for r in range(2):
        cand = order[:, r]
        valid = Floc[rows, cand] < 1e300 if r == 1 else np.ones(m, bool)
        centre = J[cand]
        win = centre[:, None] + np.arange(-stride, stride + 1)[None, :]
        win = np.clip(win, 0, n - 1)
        Fw = via(win)
        a = np.argmin(Fw, axis=1)
        jb = win[rows, a]
        v1 = Fw[rows, a]
        inner = (jb > 0) & (jb < n - 1)
        jm = np.clip(jb - 1, 0, n - 1)
        jp = np.clip(jb + 1, 0, n - 1)
        fm = via(jm[:, None])[:, 0]
        fp = via(jp[:, None])[:, 0]
        den = fm - 2 * v1 + fp
        with np.errstate(invalid="ignore", divide="ignore"):
            v = v1 - 0.125 * (fp - fm) ** 2 / den
        ok = inner & (den > 0) & (v < v1) & (v > v1 - 1e-3)
        v1 = np.where(ok, v, v1)
        best = np.where(valid, np.minimum(best, v1), best)
    return np.where(L <= rho, 0.0, best)


def _seg_inside(a, b, incl_kind, ball, normals, hoffsets):
    d = b - a
    if incl_kind == 0:
        f = a - ball[:3]
        A = d @ d
        if A == 0:
            return 0.0
        B = f @ d
        C = f @ f - ball[3] ** 2
        disc = B * B - A * C
        if disc <= 0:
            return 0.0
        sq = np.sqrt(disc)
        t0, t1 = max((-B - sq) / A, 0.0), min((-B + sq) / A, 1.0)
        return (t1 - t0) * np.sqrt(A) if t1 > t0 else 0.0
    lo, hi = 0.0, 1.0
    nd = normals @ d
    na = normals @ a
    for k in range(len(nd)):
        if abs(nd[k]) < 1e-300:
            if na[k] > hoffsets[k]:
                return 0.0
            continue
        tt = (hoffsets[k] - na[k]) / nd[k]
        if nd[k] > 0:
            hi = min(hi, tt)
        else:
            lo = max(lo, tt)
        if hi <= lo:
            return 0.0
    return (hi - lo) * np.linalg.norm(d)


def lattice_dijkstra(nx, ny, nz, ox, oy, oz, h, offsets, incl_kind, ball, normals, hoffsets, b2,
                     src_nodes, src_dist, targets):
    N = nx * ny * nz
    dist = np.full(N, np.inf)
    done = np.zeros(N, bool)
    offsets = np.asarray(offsets)
    olen = h * np.linalg.norm(offsets, axis=1)
    ball = np.asarray(ball, float)
    heap = []
    for u, d0 in zip(src_nodes, src_dist):
        if d0 < dist[u]:
            dist[u] = d0
            heapq.heappush(heap, (d0, int(u)))
    remaining = set(int(t) for t in targets)
    while heap and remaining:
        du, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        remaining.discard(u)
        uk, rem = divmod(u, nx * ny)
        uj, ui = divmod(rem, nx)
        a = np.array([ox + ui * h, oy + uj * h, oz + uk * h])
        for (di, dj, dk), L in zip(offsets, olen):
            vi, vj, vk = ui + di, uj + dj, uk + dk
            if not (0 <= vi < nx and 0 <= vj < ny and 0 <= vk < nz):
                continue
            v = vi + nx * (vj + ny * vk)
            if done[v]:
                continue
            bpt = np.array([ox + vi * h, oy + vj * h, oz + vk * h])
            nd = du + L - (1.0 - b2) * _seg_inside(a, bpt, incl_kind, ball, normals, hoffsets)
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    dist[~done] = np.inf
    return dist
