"""Weighted lengths, geodesics of d_{a^2} and its dilated variants, d^K, and a lattice oracle."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import _kernels
from .errors import DegenerateEndpoints, OutOfBox
from .geometry import MEMBERSHIP_TOL, ConvexBody, Scene, as_point

TIE_TOL = 1e-10
ARC_VERTICES = 64


@dataclass
class Geodesic:
    vertices: np.ndarray
    phase_tags: list
    weighted_length: float
    kind: str
    non_unique: bool = False
    certified: bool = True

    @property
    def euclidean_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)))

    def reversed(self) -> "Geodesic":
        return Geodesic(self.vertices[::-1].copy(), self.phase_tags[::-1], self.weighted_length, self.kind,
                        self.non_unique, self.certified)

    def to_json(self) -> dict:
        return {"value": self.weighted_length, "kind": self.kind, "vertices": self.vertices.tolist(),
                "phases": list(self.phase_tags), "non_unique": self.non_unique, "certified": self.certified}


@dataclass
class KCurve:
    components: list
    through_K: bool
    value: float = 0.0
    anchors: list = field(default_factory=list)


# ------------------------------------------------------------ weighted length

def _inclusion(scene: Scene, delta: float) -> ConvexBody:
    return scene.inclusion_at(delta)


def segment_inside_length(body: ConvexBody, a, b) -> float:
    iv = body.segment_interval(a, b)
    if iv is None:
        return 0.0
    return (iv[1] - iv[0]) * float(np.linalg.norm(np.asarray(b, float) - np.asarray(a, float)))


def weighted_length(scene: Scene, polyline, delta: float = 0.0) -> float:
    """Exact long_f of a polyline, f = b^2 on the (dilated) inclusion and 1 elsewhere."""
    pts = np.asarray(polyline, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("polyline needs at least two points")
    body = _inclusion(scene, delta)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        L = float(np.linalg.norm(b - a))
        total += L - (1.0 - scene.b2) * segment_inside_length(body, a, b)
    return total


def ball_inside_lengths(A: np.ndarray, B: np.ndarray, center, R: float) -> np.ndarray:
    """Vectorised length of segments A_i -> B_i inside a closed ball."""
    d = B - A
    f = A - np.asarray(center, float)
    a = np.einsum("ij,ij->i", d, d)
    bq = np.einsum("ij,ij->i", f, d)
    c = np.einsum("ij,ij->i", f, f) - R * R
    disc = bq * bq - a * c
    with np.errstate(invalid="ignore", divide="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = np.clip((-bq - sq) / a, 0.0, None)
        t1 = np.clip((-bq + sq) / a, None, 1.0)
        out = np.where((disc > 0) & (a > 0) & (t1 > t0), (t1 - t0) * np.sqrt(a), 0.0)
    return np.nan_to_num(out)


def segment_weights(scene: Scene, A: np.ndarray, B: np.ndarray, delta: float = 0.0) -> np.ndarray:
    """Vectorised weighted lengths of many segments."""
    body = _inclusion(scene, delta)
    L = np.linalg.norm(B - A, axis=1)
    if body.is_ball:
        inside = ball_inside_lengths(A, B, body.center, body.radius)
    else:
        inside = np.array([segment_inside_length(body, a, b) for a, b in zip(A, B)])
    return L - (1.0 - scene.b2) * inside


def split_polyline(body: ConvexBody, pts: np.ndarray) -> tuple[np.ndarray, list]:
    """Insert vertices where segments cross the body boundary; tag each piece inside/outside."""
    out = [pts[0]]
    tags = []
    for a, b in zip(pts[:-1], pts[1:]):
        iv = body.segment_interval(a, b)
        cuts = [0.0, 1.0]
        if iv is not None:
            cuts = sorted(set([0.0, 1.0] + [t for t in iv if 1e-12 < t < 1 - 1e-12]))
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            p = a + t1 * (b - a)
            mid = a + 0.5 * (t0 + t1) * (b - a)
            if np.linalg.norm(p - out[-1]) < 1e-14:
                continue
            tags.append("inside" if (iv is not None and iv[0] - 1e-12 <= 0.5 * (t0 + t1) <= iv[1] + 1e-12
                                     and body.contains(mid)) else "outside")
            out.append(p)
    return np.array(out), tags


_KINDS = {1: "straight", 2: "two_segment", 3: "three_segment"}


def _make_geodesic(scene: Scene, body: ConvexBody, pts, non_unique=False, certified=True) -> Geodesic:
    verts, tags = split_polyline(body, np.asarray(pts, float))
    # merge collinear pieces of equal phase
    keep = [0]
    for i in range(1, len(verts) - 1):
        u = verts[i] - verts[keep[-1]]
        v = verts[i + 1] - verts[i]
        cross = np.linalg.norm(np.cross(u, v))
        same = tags[len(keep) - 1] == tags[i] if len(keep) - 1 < len(tags) else False
        if cross <= 1e-14 * max(1.0, np.linalg.norm(u) * np.linalg.norm(v)) and same:
            continue
        keep.append(i)
    keep.append(len(verts) - 1)
    new_tags = []
    for a, b in zip(keep[:-1], keep[1:]):
        new_tags.append(tags[a])
    verts = verts[keep]
    w = sum(np.linalg.norm(q - p) * (scene.b2 if t == "inside" else 1.0)
            for p, q, t in zip(verts[:-1], verts[1:], new_tags))
    kind = _KINDS.get(len(new_tags), "polyline")
    return Geodesic(verts, new_tags, float(w), kind, non_unique, certified)


# ------------------------------------------------------------ planar geodesics (ball inclusion)

def _frame(c, x, y):
    e1 = x - c
    n1 = np.linalg.norm(e1)
    if n1 < 1e-14:
        e1 = y - c
        n1 = np.linalg.norm(e1)
    e1 = e1 / n1
    v = (y - c) - ((y - c) @ e1) * e1
    nv = np.linalg.norm(v)
    if nv < 1e-13 * max(1.0, np.linalg.norm(y - c)):
        v = np.cross(e1, [1.0, 0.0, 0.0])
        if np.linalg.norm(v) < 0.5:
            v = np.cross(e1, [0.0, 1.0, 0.0])
        nv = np.linalg.norm(v)
    return e1, v / nv


def _arcdist(A, q):
    return np.hypot(q[..., 0] - A[0], q[..., 1] - A[1])


def _circle(R, phi):
    phi = np.asarray(phi, float)
    return np.stack([R * np.cos(phi), R * np.sin(phi)], axis=-1)


def _df(A, R, phi):
    """value, first and second derivative of |q(phi) - A|."""
    c, s = math.cos(phi), math.sin(phi)
    ux, uy = R * c - A[0], R * s - A[1]
    r = math.hypot(ux, uy)
    if r < 1e-300:
        return 0.0, 0.0, 0.0
    ud = R * (-ux * s + uy * c)
    g = ud / r
    hss = (R * R - R * (ux * c + uy * s)) / r - ud * ud / (r * r * r)
    return r, g, hss


def _newton1(fun, phi, iters=50):
    f, g, hss = fun(phi)
    for _ in range(iters):
        step = -g / hss if hss > 0 else -np.sign(g) * 1e-3
        t = 1.0
        while t > 1e-12:
            f2, g2, h2 = fun(phi + t * step)
            if f2 <= f:
                break
            t *= 0.5
        else:
            break
        phi, f, g, hss = phi + t * step, f2, g2, h2
        if abs(t * step) < 1e-15:
            break
    return phi, f


def _two_segment(X, Y, R, b2, inner_first=True, nscan=1024):
    """min over phi of b2 |X - q| + |q - Y| with X inside the disk."""

    def fun(phi):
        r1, g1, h1 = _df(X, R, phi)
        r2, g2, h2 = _df(Y, R, phi)
        return b2 * r1 + r2, b2 * g1 + g2, b2 * h1 + h2

    phis = np.linspace(-np.pi, np.pi, nscan, endpoint=False)
    q = _circle(R, phis)
    vals = b2 * _arcdist(X, q) + _arcdist(Y, q)
    loc = np.where((vals <= np.roll(vals, 1)) & (vals <= np.roll(vals, -1)))[0]
    loc = loc[np.argsort(vals[loc])][:3]
    results = []
    for i in loc:
        lo, hi = phis[i] - 2 * np.pi / nscan, phis[i] + 2 * np.pi / nscan
        phi, f = _newton1(fun, float(phis[i]))
        if abs(fun(phi)[1]) > 1e-8 or not lo - 0.1 <= phi <= hi + 0.1:
            r = minimize_scalar(lambda p: fun(p)[0], bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            phi, f = _newton1(fun, float(r.x))
        results.append((f, phi))
    results.sort()
    return results


def _three_fun(X, Y, R, b2):
    def fun(p):
        f1, g1, h1 = _df(X, R, p[0])
        f3, g3, h3 = _df(Y, R, p[1])
        d = p[0] - p[1]
        s = math.sin(d / 2)
        sg = 1.0 if s >= 0 else -1.0
        c = 2 * R * abs(s)
        dc = R * math.cos(d / 2) * sg
        ddc = -c / 4
        f = f1 + b2 * c + f3
        g = (g1 + b2 * dc, g3 - b2 * dc)
        H = (h1 + b2 * ddc, -b2 * ddc, h3 + b2 * ddc)
        return f, g, H
    return fun


def _newton2(fun, p, iters=60):
    p0, p1 = float(p[0]), float(p[1])
    f, g, H = fun((p0, p1))
    for _ in range(iters):
        a, b, d = H
        det = a * d - b * b
        if a > 0 and det > 0:
            s0 = -(d * g[0] - b * g[1]) / det
            s1 = -(a * g[1] - b * g[0]) / det
        else:
            s0, s1 = -g[0] * 1e-2, -g[1] * 1e-2
        t = 1.0
        while t > 1e-12:
            f2, g2, H2 = fun((p0 + t * s0, p1 + t * s1))
            if f2 <= f:
                break
            t *= 0.5
        else:
            break
        p0, p1, f, g, H = p0 + t * s0, p1 + t * s1, f2, g2, H2
        if max(abs(t * s0), abs(t * s1)) < 1e-15:
            break
    return np.array([p0, p1]), f


def _three_segment(X, Y, R, b2, nscan=256, restarts=8, seed=0):
    phis = np.linspace(-np.pi, np.pi, nscan, endpoint=False)
    q = _circle(R, phis)
    a = _arcdist(X, q)
    c = _arcdist(Y, q)
    chord = np.hypot(q[:, None, 0] - q[None, :, 0], q[:, None, 1] - q[None, :, 1])
    G = a[:, None] + b2 * chord + c[None, :]
    ismin = np.ones_like(G, bool)
    for di, dj in itertools.product((-1, 0, 1), repeat=2):
        if di or dj:
            ismin &= G <= np.roll(np.roll(G, di, 0), dj, 1)
    idx = np.argwhere(ismin)
    order = np.argsort(G[ismin])[:4]
    starts = [np.array([phis[i], phis[j]]) for i, j in idx[order]]
    nloc = len(starts)
    rng = np.random.default_rng(seed)
    starts += [rng.uniform(-np.pi, np.pi, 2) for _ in range(restarts)]
    fun = _three_fun(X, Y, R, b2)
    results = []
    for n, s in enumerate(starts):
        p, f = _newton2(fun, s)
        if max(abs(v) for v in fun(p)[1]) > 1e-8:
            if n >= nloc:
                continue
            # Newton stalled (kink or indefinite region): derivative-free pass, then polish
            nm = minimize(lambda z: fun(z)[0], p, method="Nelder-Mead",
                          options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 400})
            p, f = _newton2(fun, nm.x)
        results.append((f, (p + np.pi) % (2 * np.pi) - np.pi))
    results.sort(key=lambda r: r[0])
    return results


def _tangent_arc(X, Y, R, side):
    """Around-the-disk path: tangent from X, arc on the given side, tangent into Y."""
    def tangents(P):
        d = np.hypot(*P)
        base = np.arctan2(P[1], P[0])
        off = np.arccos(min(1.0, R / d))
        return base + off, base - off

    tx, ty = tangents(X), tangents(Y)
    a0 = tx[0] if side > 0 else tx[1]
    a1 = ty[1] if side > 0 else ty[0]
    span = (a1 - a0) % (2 * np.pi) if side > 0 else -((a0 - a1) % (2 * np.pi))
    if abs(span) > np.pi:
        return None
    arc = _circle(R, a0 + span * np.linspace(0.0, 1.0, ARC_VERTICES))
    return np.vstack([X[None], arc, Y[None]])


def _ball_geodesic(scene: Scene, body: ConvexBody, x, y, restarts: int) -> Geodesic:
    c, R, b2 = body.center, body.radius, scene.b2
    e1, e2 = _frame(c, x, y)

    def lift(P):
        return c + P[0] * e1 + P[1] * e2

    X = np.array([(x - c) @ e1, (x - c) @ e2])
    Y = np.array([(y - c) @ e1, (y - c) @ e2])
    x_in = np.hypot(*X) <= R + MEMBERSHIP_TOL
    y_in = np.hypot(*Y) <= R + MEMBERSHIP_TOL
    straight = np.array([x, y])
    w_straight = weighted_length(scene, straight) if body is scene.inclusion else _wl_body(scene, body, straight)
    if x_in and y_in:
        return _make_geodesic(scene, body, straight)
    cands = []
    if x_in or y_in:
        A, B = (X, Y) if x_in else (Y, X)
        for f, phi in _two_segment(A, B, R, b2):
            q = lift(_circle(R, phi))
            pts = [x, q, y]
            cands.append((f, np.array(pts)))
    else:
        seed = int(abs(hash((round(float(X[0]), 12), round(float(X[1]), 12),
                             round(float(Y[0]), 12), round(float(Y[1]), 12)))) % (2 ** 32))
        for f, p in _three_segment(X, Y, R, b2, restarts=restarts, seed=seed):
            q1, q2 = lift(_circle(R, p[0])), lift(_circle(R, p[1]))
            cands.append((f, np.array([x, q1, q2, y])))
        if body.segment_interval(x, y) is not None:
            for side in (1, -1):
                path = _tangent_arc(X, Y, R, side)
                if path is not None:
                    P3 = np.array([lift(p) for p in path])
                    cands.append((_wl_body(scene, body, P3), P3))
    # exact values of the candidate polylines
    scored = sorted(((_wl_body(scene, body, pts), i, pts) for i, (f, pts) in enumerate(cands)),
                    key=lambda r: (r[0], r[1]))
    best_val, _, best_pts = scored[0]
    non_unique = False
    on_line = _on_segment(best_pts, x, y)
    if best_val >= w_straight - TIE_TOL:
        if abs(best_val - w_straight) < TIE_TOL and not on_line:
            non_unique = True
        return _make_geodesic(scene, body, straight, non_unique=non_unique)
    for val, _, pts in scored[1:]:
        if val - best_val < TIE_TOL and _polyline_gap(pts, best_pts) > 1e-7:
            non_unique = True
            break
    return _make_geodesic(scene, body, best_pts, non_unique=non_unique)


def _on_segment(pts, x, y):
    d = y - x
    L2 = d @ d
    for p in pts[1:-1]:
        t = np.clip((p - x) @ d / L2, 0, 1)
        if np.linalg.norm(x + t * d - p) > 1e-7:
            return False
    return True


def _polyline_gap(P, Q):
    """Hausdorff-type distance between two polylines via vertex-to-polyline distances."""
    def pt_poly(p, Z):
        best = np.inf
        for a, b in zip(Z[:-1], Z[1:]):
            d = b - a
            t = np.clip((p - a) @ d / max(d @ d, 1e-300), 0, 1)
            best = min(best, np.linalg.norm(a + t * d - p))
        return best
    return max(max(pt_poly(p, Q) for p in P), max(pt_poly(q, P) for q in Q))


def _wl_body(scene: Scene, body: ConvexBody, pts) -> float:
    pts = np.asarray(pts, float)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        total += float(np.linalg.norm(b - a)) - (1.0 - scene.b2) * segment_inside_length(body, a, b)
    return total


# ------------------------------------------------------------ generic (polytope) inclusion

def _generic_geodesic(scene: Scene, body: ConvexBody, x, y, restarts: int) -> Geodesic:
    x_in, y_in = body.contains(x), body.contains(y)
    straight = np.array([x, y])
    if x_in and y_in:
        return _make_geodesic(scene, body, straight, certified=False)
    best_pts, best_val = straight, _wl_body(scene, body, straight)
    verts = body.vertices()
    centre = verts.mean(axis=0) if len(verts) else body.project(0.5 * (x + y))
    rng = np.random.default_rng(restarts)
    seeds = [body.project(0.5 * (x + y), boundary=True), body.project(x, boundary=True),
             body.project(y, boundary=True)]
    seeds += [body.project(centre + rng.normal(size=3), boundary=True) for _ in range(restarts)]

    def onb(z):
        return body.project(z, boundary=True)

    if x_in or y_in:
        def obj(z):
            return _wl_body(scene, body, [x, onb(z), y])
        for s in seeds:
            r = minimize(obj, s, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 3000})
            if r.fun < best_val:
                best_val, best_pts = float(r.fun), np.array([x, onb(r.x), y])
    else:
        def obj(z):
            return _wl_body(scene, body, [x, onb(z[:3]), onb(z[3:]), y])
        for s1, s2 in zip(seeds, seeds[1:] + seeds[:1]):
            r = minimize(obj, np.concatenate([s1, s2]), method="Nelder-Mead",
                         options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 6000})
            if r.fun < best_val - TIE_TOL:
                best_val = float(r.fun)
                best_pts = np.array([x, onb(r.x[:3]), onb(r.x[3:]), y])
    return _make_geodesic(scene, body, best_pts, certified=False)


# ------------------------------------------------------------ public API

def geodesic(scene: Scene, x, y, delta: float = 0.0, restarts: int = 8) -> Geodesic:
    """A minimizing polyline for d_{alpha_delta}(x, y) (at most three segments)."""
    x, y = as_point(x), as_point(y)
    if np.linalg.norm(x - y) < 1e-12:
        raise DegenerateEndpoints("endpoints coincide", x=x.tolist())
    body = _inclusion(scene, delta)
    if body.is_ball:
        return _ball_geodesic(scene, body, x, y, restarts)
    return _generic_geodesic(scene, body, x, y, restarts)


def distance(scene: Scene, x, y, delta: float = 0.0) -> float:
    x, y = as_point(x), as_point(y)
    if np.linalg.norm(x - y) < 1e-12:
        return 0.0
    # symmetric by construction: order endpoints canonically
    if tuple(x) > tuple(y):
        x, y = y, x
    return geodesic(scene, x, y, delta=delta, restarts=2).weighted_length


def distance_matrix(scene: Scene, A, B, delta: float = 0.0) -> np.ndarray:
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    return np.array([[distance(scene, a, b, delta) for b in B] for a in A])


def dilated_distance_bracket(scene: Scene, x, y, delta: float, delta_prime: float, constant: float = 4.0):
    """(d_{alpha_delta'}, d_{alpha_delta'} + constant |delta' - delta|) with the checked value inside."""
    lower = distance(scene, x, y, delta_prime)
    upper = lower + constant * abs(delta_prime - delta)
    value = distance(scene, x, y, delta)
    holds = lower - 1e-10 <= value <= upper + 1e-10
    return BracketResult(lower, upper, value, holds)


@dataclass
class BracketResult:
    lower: float
    upper: float
    value: float
    holds: bool

    def __iter__(self):
        return iter((self.lower, self.upper))


# ------------------------------------------------------------ distance fields (axisymmetric kernel)

@lru_cache(maxsize=64)
def _boundary_table(sk: float, rho: float, R: float, b2: float, nphi: int, backend: str):
    kern = _kernels.get(backend)
    return kern.boundary_times(sk, rho, R, b2, nphi)


def distance_field(scene: Scene, source, points, delta: float = 0.0, rho: float = 0.0,
                   nphi: int = 2048, backend: str | None = None) -> np.ndarray:
    """d_{alpha_delta}(points, B(source, rho)) for many points at once (ball inclusions only).

    Reduces to the meridian half-plane through the source and the inclusion
    centre, tabulates the cost to the inclusion boundary, then minimises over
    the last boundary break point for every query point.
    """
    body = _inclusion(scene, delta)
    if not body.is_ball:
        raise NotImplementedError("distance fields need a ball inclusion")
    kern = _kernels.get(backend) if backend else _kernels.backend
    name = kern.BACKEND
    P = np.asarray(points, float).reshape(-1, 3)
    k = as_point(source)
    c, R = body.center, body.radius
    axis = k - c
    sk = float(np.linalg.norm(axis))
    e = axis / sk if sk > 1e-15 else np.array([1.0, 0.0, 0.0])
    rel = P - c
    s = rel @ e
    t = np.linalg.norm(rel - s[:, None] * e[None, :], axis=1)
    qx, qy, T = _boundary_table(sk, float(rho), float(R), float(scene.b2), int(nphi), name)
    nthreads = _kernels.threads()
    s = np.ascontiguousarray(s)
    t = np.ascontiguousarray(t)
    if nthreads > 1 and len(s) > 20000:
        chunks = np.array_split(np.arange(len(s)), nthreads * 4)
        with ThreadPoolExecutor(nthreads) as ex:
            parts = list(ex.map(lambda idx: kern.axisym_field(s[idx].copy(), t[idx].copy(), sk, float(rho), float(R),
                                                               float(scene.b2), qx, qy, T), chunks))
        out = np.concatenate(parts)
    else:
        out = kern.axisym_field(s, t, sk, float(rho), float(R), float(scene.b2), qx, qy, T)
    return out.reshape(np.asarray(points).shape[:-1])


# ------------------------------------------------------------ distance to a ball, pseudometric

def _single_phase_weight(scene: Scene, body: ConvexBody, center, radius):
    """Weight of the phase containing all of B(center, radius), or None when it straddles."""
    if body.is_ball:
        r = np.linalg.norm(center - body.center)
        if r + radius < body.radius:
            return scene.b2
        if r - radius > body.radius:
            return 1.0
        return None
    if body.signed_distance(center) < -radius:
        return scene.b2
    if body.signed_distance(center) > radius:
        return 1.0
    return None


def distance_to_set(scene: Scene, x, K: tuple, delta: float = 0.0, return_point: bool = False):
    """d(x, K) for a closed ball K = (center, radius)."""
    x = as_point(x)
    kc, kr = as_point(K[0]), float(K[1])
    if np.linalg.norm(x - kc) <= kr:
        return (0.0, x) if return_point else 0.0
    body = _inclusion(scene, delta)
    w = _single_phase_weight(scene, body, kc, kr)
    if w is not None:
        g = geodesic(scene, x, kc, delta=delta, restarts=2)
        val = g.weighted_length - w * kr
        if not return_point:
            return val
        # where the geodesic enters K
        pts = g.vertices
        arc = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            iv = ConvexBody.ball(kc, kr).segment_interval(a, b)
            if iv is not None:
                return val, a + iv[0] * (b - a)
            arc += 1
        return val, kc + kr * (x - kc) / np.linalg.norm(x - kc)
    ref = body.center if body.is_ball else body.project(kc)
    e1 = ref - kc
    if np.linalg.norm(e1) < 1e-14:
        e1 = x - kc
    e1 = e1 / np.linalg.norm(e1)
    v = (x - kc) - ((x - kc) @ e1) * e1
    if np.linalg.norm(v) < 1e-13:
        v = np.cross(e1, [1.0, 0.0, 0.0])
        if np.linalg.norm(v) < 0.5:
            v = np.cross(e1, [0.0, 1.0, 0.0])
    e2 = v / np.linalg.norm(v)

    def point(psi):
        return kc + kr * (np.cos(psi) * e1 + np.sin(psi) * e2)

    def f(psi):
        return distance(scene, x, point(psi), delta)

    psis = np.linspace(0.0, np.pi, 49)
    vals = np.array([f(p) for p in psis])
    i = int(np.argmin(vals))
    lo, hi = psis[max(i - 1, 0)], psis[min(i + 1, len(psis) - 1)]
    r = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    val, psi = (float(r.fun), float(r.x)) if r.fun < vals[i] else (float(vals[i]), float(psis[i]))
    return (val, point(psi)) if return_point else val


def pseudo_distance(scene: Scene, K: tuple, x, y, delta: float = 0.0) -> tuple[float, KCurve]:
    """d^K(x, y) = min(d(x, y), d(x, K) + d(y, K)) and a realizing K-curve."""
    x, y = as_point(x), as_point(y)
    if np.linalg.norm(x - y) < 1e-12:
        return 0.0, KCurve([], False, 0.0)
    dxy = distance(scene, x, y, delta)
    dx, px = distance_to_set(scene, x, K, delta, return_point=True)
    dy, py = distance_to_set(scene, y, K, delta, return_point=True)
    if dx + dy < dxy:
        comps = []
        for a, b in ((x, px), (y, py)):
            if np.linalg.norm(a - b) > 1e-12:
                comps.append(geodesic(scene, a, b, delta=delta, restarts=2))
        return dx + dy, KCurve(comps, True, dx + dy, [px, py])
    return dxy, KCurve([geodesic(scene, x, y, delta=delta, restarts=2)], False, dxy)


def set_distances(scene: Scene, K: tuple, pts, delta: float = 0.0) -> np.ndarray:
    """d(x, K) for many points; uses the field kernel when the inclusion is a ball."""
    P = np.atleast_2d(np.asarray(pts, float))
    if _inclusion(scene, delta).is_ball:
        return distance_field(scene, K[0], P, delta, rho=float(K[1]))
    return np.array([distance_to_set(scene, p, K, delta) for p in P])


def pseudo_distance_matrix(scene: Scene, K: tuple, A, B, delta: float = 0.0) -> np.ndarray:
    """Matrix of d^K(a, b) = min(d(a, b), d(a, K) + d(b, K))."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    dA, dB = set_distances(scene, K, A, delta), set_distances(scene, K, B, delta)
    D = distance_matrix(scene, A, B, delta)
    same = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2) < 1e-12
    return np.where(same, 0.0, np.minimum(D, dA[:, None] + dB[None, :]))


# ------------------------------------------------------------ lattice oracle

def stencil_offsets(stencil) -> np.ndarray:
    """Neighbour offsets: 6, 18, 26, 74 (knight moves) or 'extended' (primitive vectors in [-4,4]^3)."""
    key = str(stencil)
    if key == "extended":
        from math import gcd
        offs = [v for v in itertools.product(range(-4, 5), repeat=3)
                if any(v) and gcd(gcd(abs(v[0]), abs(v[1])), abs(v[2])) == 1]
        return np.array(offs, dtype=np.int32)
    shapes = {"6": [(0, 0, 1)], "18": [(0, 0, 1), (0, 1, 1)], "26": [(0, 0, 1), (0, 1, 1), (1, 1, 1)],
              "74": [(0, 0, 1), (0, 1, 1), (1, 1, 1), (0, 1, 2), (1, 1, 2)]}
    if key not in shapes:
        raise ValueError(f"unknown stencil {stencil!r}")
    offs = [v for v in itertools.product(range(-2, 3), repeat=3)
            if tuple(sorted(map(abs, v))) in shapes[key]]
    return np.array(offs, dtype=np.int32)


@dataclass
class Lattice:
    origin: np.ndarray
    h: float
    dims: tuple

    def node_index(self, ijk):
        i, j, k = ijk
        return i + self.dims[0] * (j + self.dims[1] * k)

    def node_point(self, ijk):
        return self.origin + self.h * np.asarray(ijk, float)

    def near_nodes(self, x, radius):
        g = (x - self.origin) / self.h
        lo = np.maximum(np.floor(g - radius / self.h).astype(int), 0)
        hi = np.minimum(np.ceil(g + radius / self.h).astype(int), np.array(self.dims) - 1)
        ijk = np.array(list(itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi)))))
        pts = self.origin + self.h * ijk
        keep = np.linalg.norm(pts - x, axis=1) <= radius + 1e-12
        return ijk[keep], pts[keep]


def oracle_lattice(scene: Scene, h: float) -> Lattice:
    om = scene.omega
    if om.is_ball:
        lo, hi = om.center - om.radius, om.center + om.radius
    else:
        v = om.vertices()
        lo, hi = v.min(axis=0) - om.rounding, v.max(axis=0) + om.rounding
    lo = lo - 2 * h
    hi = hi + 2 * h
    dims = tuple(int(np.ceil((b - a) / h - 1e-9)) + 1 for a, b in zip(lo, hi))
    return Lattice(lo, h, dims)


def lattice_oracle_distances(scene: Scene, x, targets, h: float, stencil="extended", delta: float = 0.0,
                             backend: str | None = None) -> np.ndarray:
    """Lattice shortest-path distances from ``x`` to each target (edge weight = exact weighted length)."""
    x = as_point(x)
    targets = np.atleast_2d(np.asarray(targets, float))
    lat = oracle_lattice(scene, h)
    hi = lat.origin + h * (np.array(lat.dims) - 1)
    for p in np.vstack([x[None], targets]):
        if np.any(p < lat.origin - 1e-12) or np.any(p > hi + 1e-12):
            raise OutOfBox("point outside the oracle lattice", point=p.tolist())
    body = _inclusion(scene, delta)
    offs = stencil_offsets(stencil)
    # endpoints attach to every node within this radius by exact straight edges
    radius = 4 * h
    ijk, pts = lat.near_nodes(x, radius)
    src_nodes = np.array([lat.node_index(v) for v in ijk], dtype=np.int64)
    src_dist = segment_weights(scene, np.repeat(x[None], len(pts), 0), pts, delta)
    tgt_sets = []
    all_t = []
    for y in targets:
        tj, tp = lat.near_nodes(y, radius)
        nodes = np.array([lat.node_index(v) for v in tj], dtype=np.int64)
        tgt_sets.append((nodes, segment_weights(scene, tp, np.repeat(y[None], len(tp), 0), delta)))
        all_t.append(nodes)
    if body.is_ball:
        kind, ball = 0, np.array([*body.center, body.radius])
        normals, hoff = np.zeros((1, 3)), np.zeros(1)
    elif body.kind == "polytope":
        kind, ball = 1, np.zeros(4)
        normals, hoff = np.ascontiguousarray(body.normals), np.ascontiguousarray(body.offsets)
    else:
        raise NotImplementedError("lattice oracle supports balls and polytopes")
    kern = _kernels.get(backend) if backend else _kernels.backend
    D = kern.lattice_dijkstra(int(lat.dims[0]), int(lat.dims[1]), int(lat.dims[2]),
                              float(lat.origin[0]), float(lat.origin[1]), float(lat.origin[2]), float(h),
                              np.ascontiguousarray(offs), kind, ball, normals, hoff, float(scene.b2),
                              src_nodes, np.ascontiguousarray(src_dist), np.concatenate(all_t))
    out = []
    for y, (nodes, w) in zip(targets, tgt_sets):
        direct = weighted_length(scene, [x, y], delta) if np.linalg.norm(x - y) <= 2 * radius else np.inf
        out.append(min(float(np.min(D[nodes] + w)), direct))
    return np.array(out)


def lattice_oracle_distance(scene: Scene, x, y, h: float, stencil="extended", delta: float = 0.0,
                            backend: str | None = None) -> float:
    return float(lattice_oracle_distances(scene, x, [y], h, stencil, delta, backend)[0])
