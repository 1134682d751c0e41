"""Minimal connections, dual potentials, geodesic links and K-avoiding connections."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import metric
from .errors import GapPositive, KTouchesSingularity, NegativeEntry, NonSquare
from .geometry import MEMBERSHIP_TOL, Scene, SingularityData, pinning

LIP_TOL = 1e-9


@dataclass
class Connection:
    sigma: tuple
    length: float
    pair_distances: np.ndarray
    row_duals: np.ndarray = field(repr=False, default=None)
    col_duals: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {"sigma": [int(s) + 1 for s in self.sigma], "length": self.length,
                "pairs": [[i + 1, int(s) + 1, float(d)] for i, (s, d) in
                          enumerate(zip(self.sigma, self.pair_distances))]}


@dataclass
class DualPotential:
    positives: np.ndarray
    negatives: np.ndarray
    gap: float
    lipschitz_slack: float

    def values(self) -> np.ndarray:
        return np.concatenate([self.positives, self.negatives])

    def to_json(self) -> dict:
        return {"positive": self.positives.tolist(), "negative": self.negatives.tolist(), "gap": self.gap,
                "lipschitz_slack": self.lipschitz_slack}


@dataclass
class GeodesicLink:
    connection: Connection
    curves: list
    unique_flag: str

    def to_json(self) -> dict:
        out = self.connection.to_json()
        out["curves"] = [c.to_json() for c in self.curves]
        out["unique"] = self.unique_flag
        return out


# ------------------------------------------------------------ assignment

def _hungarian(C: np.ndarray):
    """Shortest augmenting path assignment; returns (col of each row, row duals, col duals)."""
    n = C.shape[0]
    INF = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: row matched to column j (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, INF)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = C[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col = np.zeros(n, dtype=int)
    for j in range(1, n + 1):
        col[p[j] - 1] = j - 1
    return col, u[1:].copy(), v[1:].copy()


def _check_matrix(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] == 0:
        raise NonSquare("distance matrix must be square and nonempty", shape=list(D.shape))
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise NegativeEntry("distance matrix entries must be finite and nonnegative")
    return D


def minimal_connection(distances) -> Connection:
    """Optimal pairing; ties broken towards the lexicographically smallest permutation."""
    D = _check_matrix(distances)
    n = len(D)
    col, u, v = _hungarian(D)
    best = float(D[np.arange(n), col].sum())
    tol = 1e-12 * max(1.0, best)
    big = 10.0 * (D.max() + 1.0) * n
    fixed: list[int] = []
    for i in range(n):
        for j in range(n):
            if j in fixed:
                continue
            M = D.copy()
            for r, c in enumerate(fixed + [j]):
                keep = M[r, c]
                M[r, :] = big
                M[:, c] = big
                M[r, c] = keep
            c2, _, _ = _hungarian(M)
            val = float(M[np.arange(n), c2].sum())
            if val <= best + tol:
                fixed.append(j)
                break
    sigma = tuple(fixed)
    pd = D[np.arange(n), list(sigma)]
    return Connection(sigma, float(pd.sum()), pd.copy(), u, v)


def brute_force_connection(distances) -> tuple[tuple, float]:
    D = _check_matrix(distances)
    n = len(D)
    best, arg = np.inf, None
    for perm in itertools.permutations(range(n)):
        val = float(D[np.arange(n), perm].sum())
        if val < best - 1e-15:
            best, arg = val, perm
    return arg, best


# ------------------------------------------------------------ duality

def bipartite_closure(D: np.ndarray) -> np.ndarray:
    """Shortest-path metric on the 2k points induced by the p-n distances only."""
    k = len(D)
    M = np.full((2 * k, 2 * k), np.inf)
    np.fill_diagonal(M, 0.0)
    M[:k, k:] = D
    M[k:, :k] = D.T
    for m in range(2 * k):
        M = np.minimum(M, M[:, m:m + 1] + M[m:m + 1, :])
    return M


def lipschitz_slack(values: np.ndarray, M: np.ndarray) -> float:
    """min over pairs of M(u,v) - |phi(u) - phi(v)|."""
    diff = np.abs(values[:, None] - values[None, :])
    return float(np.min(M - diff))


def dual_potential(distances, connection: Connection, full_metric=None) -> DualPotential:
    """1-Lipschitz potential on the 2k points with zero duality gap, normalised by xi(n_1) = 0.

    ``full_metric`` is the 2k x 2k distance matrix (positives first); without it
    the metric induced by the p-n distances is used.
    """
    D = _check_matrix(distances)
    k = len(D)
    M = bipartite_closure(D) if full_metric is None else np.asarray(full_metric, float)
    if M.shape != (2 * k, 2 * k):
        raise NonSquare("full metric must be 2k x 2k", shape=list(M.shape))
    u, v = connection.row_duals, connection.col_duals
    if u is None:
        c2 = minimal_connection(D)
        u, v = c2.row_duals, c2.col_duals
    xi = np.concatenate([u, -v])
    L = connection.length
    sigma = np.array(connection.sigma)

    def gap_of(phi):
        return float(np.sum(phi[:k] - phi[k + sigma]))

    # shortest-path tightening over all points, then the negatives-anchored variant
    candidates = [np.min(xi[None, :] + M, axis=1), np.min(xi[None, k:] + M[:, k:], axis=1)]
    for phi in candidates:
        if abs(gap_of(phi) - L) <= LIP_TOL * max(1.0, L) and lipschitz_slack(phi, M) >= -LIP_TOL:
            phi = phi - phi[k]
            return DualPotential(phi[:k].copy(), phi[k:].copy(), gap_of(phi), lipschitz_slack(phi, M))
    raise GapPositive("potential repair lost optimality; the connection is not optimal",
                      gap=gap_of(candidates[-1]), length=L)


# ------------------------------------------------------------ links

def connection_matrix(scene: Scene, sing: SingularityData, delta: float = 0.0) -> np.ndarray:
    return metric.distance_matrix(scene, sing.positives, sing.negatives, delta)


def full_metric(scene: Scene, sing: SingularityData, delta: float = 0.0) -> np.ndarray:
    pts = sing.points()
    n = len(pts)
    M = np.zeros((n, n))
    for i, j in itertools.combinations(range(n), 2):
        M[i, j] = M[j, i] = metric.distance(scene, pts[i], pts[j], delta)
    return M


def geodesic_link(scene: Scene, sing: SingularityData, probe: bool = True, trials: int = 6) -> GeodesicLink:
    D = connection_matrix(scene, sing)
    conn = minimal_connection(D)
    curves = [metric.geodesic(scene, sing.positives[i], sing.negatives[j]) for i, j in enumerate(conn.sigma)]
    flag = uniqueness_probe(scene, sing, trials=trials, _base=(D, conn, curves)) if probe else "unknown"
    return GeodesicLink(conn, curves, flag)


def _second_best_gap(D: np.ndarray, sigma) -> float:
    k = len(D)
    L = float(D[np.arange(k), list(sigma)].sum())
    if k == 1:
        return np.inf
    if k <= 8:
        vals = [float(D[np.arange(k), p].sum()) for p in itertools.permutations(range(k)) if tuple(p) != tuple(sigma)]
        return min(vals) - L
    best = np.inf
    for i in range(k):
        M = D.copy()
        M[i, sigma[i]] = np.inf if False else M[i, sigma[i]] + 1e6 * (D.max() + 1)
        c = minimal_connection(M)
        best = min(best, float(D[np.arange(k), list(c.sigma)].sum()) - L)
    return best


def _min_curve_separation(curves) -> float:
    best = np.inf
    for a, b in itertools.combinations(curves, 2):
        best = min(best, polyline_distance(a.vertices, b.vertices))
    return best


def polyline_distance(P: np.ndarray, Q: np.ndarray) -> float:
    """Minimum distance between two polylines (segment-segment distances)."""
    best = np.inf
    for a0, a1 in zip(P[:-1], P[1:]):
        for b0, b1 in zip(Q[:-1], Q[1:]):
            best = min(best, _seg_seg(a0, a1, b0, b1))
    return best


def _seg_seg(p1, q1, p2, q2) -> float:
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    c = d1 @ r
    b = d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0, 1) if denom > 1e-300 else 0.0
    t = (b * s + f) / e if e > 1e-300 else 0.0
    if t < 0:
        t, s = 0.0, np.clip(-c / a, 0, 1) if a > 1e-300 else 0.0
    elif t > 1:
        t, s = 1.0, np.clip((b - c) / a, 0, 1) if a > 1e-300 else 0.0
    return float(np.linalg.norm(p1 + s * d1 - (p2 + t * d2)))


def uniqueness_probe(scene: Scene, sing: SingularityData, trials: int = 6, jitter: float = 1e-6,
                     seed: int = 0, _base=None) -> str:
    """'unique', 'non_unique' or 'unknown' from ties, jittered re-solves and geodesic restarts."""
    if _base is None:
        D = connection_matrix(scene, sing)
        conn = minimal_connection(D)
        curves = [metric.geodesic(scene, sing.positives[i], sing.negatives[j]) for i, j in enumerate(conn.sigma)]
    else:
        D, conn, curves = _base
    if _second_best_gap(D, conn.sigma) < metric.TIE_TOL or any(c.non_unique for c in curves):
        return "non_unique"
    rng = np.random.default_rng(seed)
    stable = True
    for t in range(trials):
        Dj = D * (1.0 + jitter * rng.uniform(-1, 1, D.shape))
        if minimal_connection(Dj).sigma != conn.sigma:
            stable = False
            break
        i = t % len(conn.sigma)
        g = metric.geodesic(scene, sing.positives[i], sing.negatives[conn.sigma[i]], restarts=8 + t)
        if g.vertices.shape != curves[i].vertices.shape or np.max(np.abs(g.vertices - curves[i].vertices)) > 1e-8:
            stable = False
            break
    if stable and len(curves) > 1 and _min_curve_separation(curves) <= 0:
        return "unknown"
    return "unique" if stable else "unknown"


# ------------------------------------------------------------ compact-avoiding connections

@dataclass
class AvoidingReport:
    case: str
    expected: float
    computed: float
    abs_error: float
    base_length: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def connection_avoiding(scene: Scene, sing: SingularityData, K: tuple, link: GeodesicLink | None = None,
                        delta: float = 0.0):
    """L(C, d^K) and a comparison with the closed form for K centred on/off the link."""
    kc, kr = np.asarray(K[0], float), float(K[1])
    pts = sing.points()
    if np.any(np.linalg.norm(pts - kc, axis=1) <= kr + MEMBERSHIP_TOL):
        raise KTouchesSingularity("K meets a singular point", center=kc.tolist(), radius=kr)
    k = sing.k
    D = np.array([[metric.pseudo_distance(scene, (kc, kr), p, n, delta)[0] for n in sing.negatives]
                  for p in sing.positives])
    conn = minimal_connection(D)
    if link is None:
        link = geodesic_link(scene, sing, probe=False)
    on_link = min(_point_polyline(kc, c.vertices) for c in link.curves) <= 1e-9
    on_boundary = abs(float(scene.inclusion.signed_distance(kc))) <= 1e-9
    L = link.connection.length
    if not on_link:
        case, expected = "off_link", L
    elif on_boundary:
        case, expected = "on_link_boundary", L - (1 + scene.b2) * kr
    else:
        a = pinning(scene, kc)
        case, expected = "on_link_interior", L - 2 * a * a * kr
    return conn, AvoidingReport(case, float(expected), conn.length, abs(conn.length - expected), L)


def _point_polyline(p, V) -> float:
    best = np.inf
    for a, b in zip(V[:-1], V[1:]):
        d = b - a
        t = np.clip((p - a) @ d / max(d @ d, 1e-300), 0, 1)
        best = min(best, float(np.linalg.norm(a + t * d - p)))
    return best


def stability_threshold(scene: Scene, sing: SingularityData, tol: float = 1e-3, delta_max: float | None = None):
    """Largest delta (to ``tol``) below which the alpha_delta-optimal pairing equals the undilated one."""
    sigma0 = minimal_connection(connection_matrix(scene, sing)).sigma
    hi = delta_max if delta_max is not None else 0.5 * scene.clearance * (1 - 1e-9)
    if minimal_connection(connection_matrix(scene, sing, hi)).sigma == sigma0:
        return hi, sigma0
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if minimal_connection(connection_matrix(scene, sing, mid)).sigma == sigma0:
            lo = mid
        else:
            hi = mid
    return lo, sigma0
