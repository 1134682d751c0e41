"""Structure functions on grids, the dumbbell function and the coarea bound."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage
from scipy.integrate import quad
from scipy.optimize import brentq

from . import connection as conn_mod
from . import metric
from .errors import (EtaBudgetInfeasible, InfeasiblePotential, KernelWiderThanMargin, KTouchesSingularity,
                     MOnAxis, OutOfBox, ValidationError)
from .geometry import MEMBERSHIP_TOL, Scene, SingularityData, as_point

BRACKET_SHRINK = 2.0  # delta' = BRACKET_SHRINK * delta


# ------------------------------------------------------------ grids

@dataclass
class GridSpec:
    origin: np.ndarray
    h: float
    dims: tuple  # (nx, ny, nz)

    @staticmethod
    def around(scene: Scene, h: float, margin: float | None = None) -> "GridSpec":
        margin = 2 * h if margin is None else margin
        om = scene.omega
        if om.is_ball:
            lo, hi = om.center - om.radius, om.center + om.radius
        else:
            V = om.vertices()
            lo, hi = V.min(axis=0) - om.rounding, V.max(axis=0) + om.rounding
        lo = lo - margin
        dims = tuple(int(np.ceil((hi[i] + margin - lo[i]) / h - 1e-9)) + 1 for i in range(3))
        return GridSpec(np.asarray(lo, float), float(h), dims)

    @property
    def margin_box(self):
        return self.origin, self.origin + self.h * (np.array(self.dims) - 1)

    def axes(self):
        return [self.origin[i] + self.h * np.arange(self.dims[i]) for i in range(3)]

    def nodes(self) -> np.ndarray:
        """All node coordinates, x fastest."""
        x, y, z = self.axes()
        Z, Y, X = np.meshgrid(z, y, x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def node(self, flat: np.ndarray) -> np.ndarray:
        nx, ny, _ = self.dims
        k, rem = np.divmod(flat, nx * ny)
        j, i = np.divmod(rem, nx)
        return self.origin + self.h * np.column_stack([i, j, k])


@dataclass
class ScalarFieldGrid:
    origin: np.ndarray
    h: float
    dims: tuple
    values: np.ndarray  # shape (nz, ny, nx)
    certificate: dict = field(default_factory=dict)
    point_values: dict = field(default_factory=dict)  # exact values at the singular points

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.origin, self.h, self.dims)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def sample(self, pts) -> np.ndarray:
        """Trilinear interpolation."""
        P = (np.atleast_2d(np.asarray(pts, float)) - self.origin) / self.h
        coords = P[:, ::-1].T  # (z, y, x) order
        return ndimage.map_coordinates(self.values, coords, order=1, mode="nearest")

    def to_json(self) -> dict:
        return {"origin": self.origin.tolist(), "h": self.h, "dims": list(self.dims),
                "certificate": self.certificate,
                "point_values": {k: list(map(float, v)) for k, v in self.point_values.items()}}


# ------------------------------------------------------------ steps of the pipeline

class PotentialExtension:
    """x -> max_i { xi0(p_i) - d'(x, p_i) } where d' is d_{alpha_delta} or its K-pseudometric."""

    def __init__(self, scene: Scene, sing: SingularityData, xi0: conn_mod.DualPotential, delta: float,
                 K: tuple | None = None, nphi: int = 2048):
        self.scene, self.sing, self.delta, self.K, self.nphi = scene, sing, float(delta), K, nphi
        self.xi0 = xi0
        self.M = _metric_on_points(scene, sing, delta, K)
        vals = xi0.values()
        if conn_mod.lipschitz_slack(vals, self.M) < -conn_mod.LIP_TOL:
            raise InfeasiblePotential("potential is not 1-Lipschitz for the dilated metric",
                                      slack=conn_mod.lipschitz_slack(vals, self.M))
        if K is not None:
            self.k_dist = metric.set_distances(scene, K, sing.positives, delta)

    def at_points(self) -> np.ndarray:
        """Exact values at the 2k singular points (positives first)."""
        k = self.sing.k
        return np.max(self.xi0.positives[:, None] - self.M[:k, :], axis=0)

    def __call__(self, pts) -> np.ndarray:
        P = np.atleast_2d(np.asarray(pts, float))
        out = np.full(len(P), -np.inf)
        dK = None
        if self.K is not None:
            dK = metric.distance_field(self.scene, self.K[0], P, self.delta, rho=self.K[1], nphi=self.nphi)
        for i, p in enumerate(self.sing.positives):
            D = metric.distance_field(self.scene, p, P, self.delta, nphi=self.nphi)
            if dK is not None:
                D = np.minimum(D, dK + self.k_dist[i])
            np.maximum(out, self.xi0.positives[i] - D, out=out)
        return out


def _metric_on_points(scene, sing, delta, K=None) -> np.ndarray:
    pts = sing.points()
    if K is not None:
        M = metric.pseudo_distance_matrix(scene, K, pts, pts, delta)
    else:
        M = metric.distance_matrix(scene, pts, pts, delta)
    return np.minimum(M, M.T)


def extend_potential(scene: Scene, sing: SingularityData, xi0: conn_mod.DualPotential, delta: float,
                     K: tuple | None = None) -> PotentialExtension:
    return PotentialExtension(scene, sing, xi0, delta, K)


def bump_weights(t: float, h: float) -> np.ndarray:
    """Quartic bump (1-|x/t|^2)^2 sampled on the lattice and normalised to unit mass."""
    m = int(np.floor(t / h))
    o = np.arange(-m, m + 1) * h
    Z, Y, X = np.meshgrid(o, o, o, indexing="ij")
    q = (X * X + Y * Y + Z * Z) / (t * t)
    w = np.where(q < 1, (1 - q) ** 2, 0.0)
    return w / w.sum()


def mollify(field_: ScalarFieldGrid, t: float, beta: float, margin: float | None = None) -> ScalarFieldGrid:
    """(1 - beta) * (field * rho_t) on the lattice; when t < h only the centre weight survives."""
    margin = 2 * field_.h if margin is None else margin
    if t > margin:
        raise KernelWiderThanMargin("smoothing radius exceeds the grid margin", t=t, margin=margin)
    if not (0 < beta < 1):
        raise ValidationError("beta must lie in (0,1)", beta=beta)
    w = bump_weights(t, field_.h)
    vals = ndimage.convolve(field_.values, w, mode="nearest") if w.size > 1 else field_.values.copy()
    cert = dict(field_.certificate, t=t, beta=beta, kernel_points=int(w.size))
    return ScalarFieldGrid(field_.origin.copy(), field_.h, field_.dims, (1 - beta) * vals, cert,
                           dict(field_.point_values))


def mollified_point_values(ext: Callable, pts: np.ndarray, t: float, beta: float, n: int = 9) -> np.ndarray:
    """(1 - beta) (xi * rho_t)(x) at given points by tensor quadrature of the continuous bump."""
    u = (np.arange(n) + 0.5) / n * 2 - 1
    Z, Y, X = np.meshgrid(u, u, u, indexing="ij")
    U = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    q = np.sum(U * U, axis=1)
    keep = q < 1
    U, w = U[keep], (1 - q[keep]) ** 2
    w = w / w.sum()
    out = []
    for p in np.atleast_2d(pts):
        out.append(float(np.dot(w, ext(p + t * U))))
    return (1 - beta) * np.array(out)


# ------------------------------------------------------------ certificates

def lipschitz_certificate(scene: Scene, fld: ScalarFieldGrid, delta: float, npairs: int = 500, seed: int = 0,
                          K: tuple | None = None) -> float:
    """max over sampled node pairs of |xi(x) - xi(y)| - d(x,y), clipped at 0 (half near pairs, half far)."""
    rng = np.random.default_rng(seed)
    spec = fld.spec
    P = spec.nodes()
    inside = np.flatnonzero(np.asarray(scene.omega.contains(P)))
    vals = fld.flat()
    pairs = []
    for m in range(npairs):
        i = int(rng.choice(inside))
        if m % 2 == 0:
            j = int(rng.choice(inside))
        else:
            step = rng.integers(-3, 4, size=3)
            q = P[i] + spec.h * step
            j = int(np.round((q - spec.origin) / spec.h) @ np.array([1, spec.dims[0], spec.dims[0] * spec.dims[1]]))
            if not (0 <= j < len(P)) or j == i or not scene.omega.contains(P[j]):
                continue
        if i != j:
            pairs.append((i, j))
    I = np.array([p[0] for p in pairs])
    J = np.array([p[1] for p in pairs])
    d = np.array([metric.distance(scene, P[i], P[j], delta) for i, j in pairs])
    if K is not None:
        dK = metric.set_distances(scene, K, np.vstack([P[I], P[J]]), delta)
        d = np.minimum(d, dK[:len(I)] + dK[len(I):])
    return float(max(0.0, np.max(np.abs(vals[I] - vals[J]) - d)))


def _weights_on_nodes(scene: Scene, fld: ScalarFieldGrid, delta: float) -> np.ndarray:
    body = scene.inclusion_at(delta)
    inside = np.asarray(body.interior(fld.spec.nodes())).reshape(fld.values.shape)
    return np.where(inside, scene.b2, 1.0)


def gradient_excess(scene: Scene, fld: ScalarFieldGrid, scale: float, delta: float = 0.0) -> float:
    """max over all lattice edges of |difference| / h - scale * (larger weight at the two ends)."""
    v, h = fld.values, fld.h
    a = _weights_on_nodes(scene, fld, delta)
    worst = -np.inf
    for ax in range(3):
        g = np.abs(np.diff(v, axis=ax)) / h
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax], hi[ax] = slice(None, -1), slice(1, None)
        amax = np.maximum(a[tuple(lo)], a[tuple(hi)])
        worst = max(worst, float(np.max(g - scale * amax)))
    return worst


def _fd_gradient_norm(fld: ScalarFieldGrid) -> np.ndarray:
    v, h = fld.values, fld.h
    gx = (v[:-1, :-1, 1:] - v[:-1, :-1, :-1]) / h
    gy = (v[:-1, 1:, :-1] - v[:-1, :-1, :-1]) / h
    gz = (v[1:, :-1, :-1] - v[:-1, :-1, :-1]) / h
    return np.sqrt(gx * gx + gy * gy + gz * gz)


def profile_gradient_check(fld: ScalarFieldGrid, profile_U: Callable, eps: float, center=(0, 0, 0)) -> float:
    """max over lattice edges of |difference| / h - 2h - min(1, U^2 + eps^4) (larger end value)."""
    v, h = fld.values, fld.h
    r = np.linalg.norm(fld.spec.nodes() - np.asarray(center, float), axis=1)
    U = np.asarray(profile_U(r), float).reshape(v.shape)
    bound = np.minimum(1.0, U * U + eps ** 4)
    worst = -np.inf
    for ax in range(3):
        g = np.abs(np.diff(v, axis=ax)) / h
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax], hi[ax] = slice(None, -1), slice(1, None)
        worst = max(worst, float(np.max(g - 2 * h - np.maximum(bound[tuple(lo)], bound[tuple(hi)]))))
    return worst


# ------------------------------------------------------------ tuning

def _connection_length(scene, sing, delta, K=None) -> float:
    if K is None:
        D = conn_mod.connection_matrix(scene, sing, delta)
    else:
        D = metric.pseudo_distance_matrix(scene, K, sing.positives, sing.negatives, delta)
    return conn_mod.minimal_connection(D).length


def choose_delta(scene: Scene, sing: SingularityData, eta: float, target: float, K: tuple | None = None,
                 rel_tol: float = 1e-3) -> float:
    """Largest delta (bisection) with L(C, d_{alpha_delta'}) >= target - eta/2, delta' = 2 delta.

    For the compact variant the K-pseudometric uses K1 = ball(center, r + 2 delta).
    """
    dmax = 0.5 * scene.clearance / BRACKET_SHRINK * (1 - 1e-9)

    def ok(d):
        K1 = None if K is None else (K[0], K[1] + 2 * d)
        return _connection_length(scene, sing, BRACKET_SHRINK * d, K1) >= target - eta / 2

    if ok(dmax):
        return dmax
    lo, hi = 0.0, dmax
    while hi - lo > rel_tol * dmax:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    if lo <= 0:
        raise EtaBudgetInfeasible("no positive delta meets the eta budget", eta=eta)
    return lo


# ------------------------------------------------------------ structure functions

def structure_function(scene: Scene, sing: SingularityData, eta: float, delta: float | None = None,
                       h: float = 1 / 64, npairs: int = 500, seed: int = 0, K: tuple | None = None,
                       target: float | None = None) -> ScalarFieldGrid:
    """Grid potential with gap >= target - eta and discrete metric-Lipschitz slack (certified).

    Pipeline: optimal dual potential for d_{alpha_delta'} on the singular
    points, extension by the max formula, mollification with t = delta/4 and
    shrink beta = delta/8.  ``target`` defaults to L(C, d_{a^2}) (or its
    K-pseudometric version when K is given).
    """
    if not eta > 0:
        raise ValidationError("eta must be positive", eta=eta)
    if target is None:
        target = _connection_length(scene, sing, 0.0, K)
    if delta is None:
        delta = choose_delta(scene, sing, eta, target, K)
    dprime = BRACKET_SHRINK * delta
    K1 = None if K is None else (as_point(K[0]), float(K[1]) + 2 * delta)
    # step 1: optimal pairing and potential for the dilated metric
    M = _metric_on_points(scene, sing, dprime, K1)
    k = sing.k
    D = M[:k, k:]
    c = conn_mod.minimal_connection(D)
    xi0 = conn_mod.dual_potential(D, c, full_metric=M)
    # step 2: extension to the grid
    ext = PotentialExtension(scene, sing, xi0, dprime, K1)
    spec = GridSpec.around(scene, h)
    vals = ext(spec.nodes()).reshape(spec.dims[::-1])
    fld = ScalarFieldGrid(spec.origin, spec.h, spec.dims, vals)
    # step 3: mollification
    t, beta = delta / 4, delta / 8
    fld = mollify(fld, t, beta)
    pv = mollified_point_values(ext, sing.points(), t, beta)
    fld.point_values = {"positive": pv[:k], "negative": pv[k:]}
    if K is not None:
        _flatten_on_ball(fld, K[0], float(K[1]) + delta)
    gap = float(np.sum(pv[:k] - pv[k:]))
    slack = lipschitz_certificate(scene, fld, delta, npairs, seed, None if K is None else (K[0], K[1]))
    fld.certificate = {"lipschitz_metric_slack": slack, "gap": gap, "eta": eta, "delta": delta,
                       "delta_prime": dprime, "t": t, "beta": beta, "target": target,
                       "gap_ok": gap >= target - eta, "slack_ok": slack <= 2 * h,
                       "length_dilated": c.length,
                       "gradient_excess": gradient_excess(scene, fld, 1 - beta, delta),
                       "fd_gradient_norm_max": float(np.max(_fd_gradient_norm(fld)))}
    if K is not None:
        fld.certificate["K"] = [list(map(float, K[0])), float(K[1])]
        fld.certificate["constant_on_K"] = constant_on_ball(fld, K[0], K[1])
    if gap < target - eta:
        raise EtaBudgetInfeasible("gap certificate failed", gap=gap, target=target, eta=eta)
    return fld


def structure_function_constant_on_K(scene: Scene, sing: SingularityData, K: tuple, eta: float,
                                     delta: float | None = None, h: float = 1 / 64, npairs: int = 500,
                                     seed: int = 0, target: float | None = None) -> ScalarFieldGrid:
    kc, kr = as_point(K[0]), float(K[1])
    if np.any(np.linalg.norm(sing.points() - kc, axis=1) <= kr + MEMBERSHIP_TOL):
        raise KTouchesSingularity("K meets a singular point", center=kc.tolist(), radius=kr)
    spec = GridSpec.around(scene, h)
    lo, hi = spec.margin_box
    if np.any(kc - 2 * kr < lo) or np.any(kc + 2 * kr > hi):
        raise OutOfBox("2K must lie in the grid box")
    return structure_function(scene, sing, eta, delta, h, npairs, seed, (kc, kr), target)


def _ball_mask(fld: ScalarFieldGrid, c, r) -> np.ndarray:
    P = fld.spec.nodes()
    return (np.linalg.norm(P - np.asarray(c, float), axis=1) <= r).reshape(fld.values.shape)


def _flatten_on_ball(fld: ScalarFieldGrid, c, r) -> None:
    mask = _ball_mask(fld, c, r)
    if mask.any():
        fld.values[mask] = float(np.mean(fld.values[mask]))


def constant_on_ball(fld: ScalarFieldGrid, c, r) -> bool:
    vals = fld.values[_ball_mask(fld, c, r)]
    return bool(vals.size == 0 or np.all(vals == vals[0]))


# ------------------------------------------------------------ dumbbell

class DumbbellFunction:
    """Level-set construction with spheres about 2p and 2n for a radial nondecreasing weight U."""

    def __init__(self, p, M, U: Callable | None = None, breakpoints=(), x0_tol: float = 1e-9):
        self.p = as_point(p)
        nrm = np.linalg.norm(self.p)
        if abs(nrm - 1) > 1e-9:
            raise ValidationError("p must lie on the unit sphere", norm=float(nrm))
        self.n = -self.p
        self.M = as_point(M)
        self.x0 = float(self.M @ self.p)
        perp = np.linalg.norm(self.M - self.x0 * self.p)
        if perp <= x0_tol or abs(self.x0) >= 1:
            raise MOnAxis("M must lie off the segment [p, n] inside the unit ball", x0=self.x0, offaxis=float(perp))
        self.U = U
        self._bp = sorted(float(b) for b in breakpoints if 0 < b < 1)
        self._nodal = None
        if hasattr(U, "mesh") and isinstance(getattr(U, "U", None), np.ndarray):
            r, u = np.asarray(U.mesh, float), np.asarray(U.U, float)
            cell = np.diff(r) / 3 * (u[:-1] ** 2 + u[:-1] * u[1:] + u[1:] ** 2)
            self._nodal = (r, u, np.concatenate([[0.0], np.cumsum(cell)]))
        self.B_plus = (2 * self.p, 2 - self.x0)
        self.B_minus = (2 * self.n, 2 + self.x0)

    def _F(self, r: float) -> float:
        """int_0^r U(t)^2 dt for 0 <= r <= 1."""
        if self.U is None:
            return r
        if self._nodal is not None:
            # piecewise linear weight: integrate U^2 exactly cell by cell
            nodes, u, cum = self._nodal
            if r >= nodes[-1]:
                return float(cum[-1] + (r - nodes[-1]))
            i = max(int(np.searchsorted(nodes, r, side="right")) - 1, 0)
            ur = float(np.interp(r, nodes, u))
            return float(cum[i] + (r - nodes[i]) / 3 * (u[i] ** 2 + u[i] * ur + ur ** 2))
        pts = [b for b in self._bp if b < r]
        val, _ = quad(lambda t: float(self.U(t)) ** 2, 0.0, r, points=pts or None, limit=400,
                      epsabs=1e-13, epsrel=1e-13)
        return val

    def xi0(self, s: float) -> float:
        """int_{x0}^s U^2(|t|) dt."""
        def G(u):
            return np.sign(u) * self._F(abs(u))
        return float(G(s) - G(self.x0))

    @property
    def top(self) -> float:
        return self.xi0(1.0)

    @property
    def bottom(self) -> float:
        return self.xi0(-1.0)

    def __call__(self, pts) -> np.ndarray:
        P = np.atleast_2d(np.asarray(pts, float))
        rp = np.linalg.norm(P - 2 * self.p, axis=1)
        rn = np.linalg.norm(P - 2 * self.n, axis=1)
        out = np.zeros(len(P))
        for m in range(len(P)):
            if rp[m] <= 1:
                out[m] = self.top
            elif rp[m] < 2 - self.x0:
                out[m] = self.xi0(2 - rp[m])
            elif rn[m] <= 1:
                out[m] = self.bottom
            elif rn[m] < 2 + self.x0:
                out[m] = self.xi0(rn[m] - 2)
        return out

    def level_radius(self, t: float) -> tuple[str, float]:
        """Sphere carrying the level t: ('+', r) about 2p or ('-', r) about 2n."""
        if 0 < t < self.top:
            return "+", 2 - brentq(lambda s: self.xi0(s) - t, self.x0, 1.0, xtol=1e-14)
        if self.bottom < t < 0:
            return "-", 2 + brentq(lambda s: self.xi0(s) - t, -1.0, self.x0, xtol=1e-14)
        raise ValidationError("not a regular value", t=t)

    def zero_neighbourhood_radius(self) -> float:
        """Radius of a ball about M outside both B+ and B- (where xi vanishes identically)."""
        return float(min(np.linalg.norm(self.M - self.B_plus[0]) - self.B_plus[1],
                         np.linalg.norm(self.M - self.B_minus[0]) - self.B_minus[1]))

    def axis_integral(self) -> float:
        return 2 * self._F(1.0)

    def to_json(self) -> dict:
        return {"p": self.p.tolist(), "n": self.n.tolist(), "M": self.M.tolist(), "x0": self.x0,
                "B_plus": [self.B_plus[0].tolist(), self.B_plus[1]],
                "B_minus": [self.B_minus[0].tolist(), self.B_minus[1]],
                "xi_p": self.top, "xi_n": self.bottom, "gap": self.top - self.bottom,
                "axis_integral": self.axis_integral(), "zero_radius": self.zero_neighbourhood_radius()}


def dumbbell(scene: Scene | None, M, profile=None, p=(1.0, 0.0, 0.0)) -> DumbbellFunction:
    """``profile`` is None (U = 1), a callable U(r), or an object with ``U`` callable and ``breakpoints``."""
    if scene is not None:
        om, inc = scene.omega, scene.inclusion
        if not (om.is_ball and inc.is_ball and np.allclose(om.center, 0) and abs(om.radius - 1) < 1e-12
                and np.allclose(inc.center, 0)):
            raise ValidationError("dumbbell needs the unit ball with a concentric ball inclusion")
    if profile is None:
        return DumbbellFunction(p, M)
    U = profile if callable(profile) else profile.U
    return DumbbellFunction(p, M, U, getattr(profile, "breakpoints", ()))


# ------------------------------------------------------------ coarea bound

@dataclass
class CoareaBound:
    integral: float
    bound: float
    holds: bool
    breakpoints: list
    chain_target: float | None = None
    chain_holds: bool | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def coarea_degree_bound(xi_p, xi_n, rho: float, eta: float | None = None, L: float | None = None) -> CoareaBound:
    """Exact integral of S(t) = sum 1{xi(p_i) >= t + rho} - 1{xi(n_i) >= t - rho}.

    S is piecewise constant with jumps at xi(p_i) - rho and xi(n_i) + rho and
    vanishes outside them, so the integral is a finite sum over the pieces.
    With ``eta`` and ``L`` the chain ``>= L - eta (8k^2 + 3k + 1)`` is also checked.
    """
    xp = np.asarray(xi_p, float).ravel()
    xn = np.asarray(xi_n, float).ravel()
    k = len(xp)
    bps = np.unique(np.concatenate([xp - rho, xn + rho]))
    total = 0.0
    for a, b in zip(bps[:-1], bps[1:]):
        t = 0.5 * (a + b)
        S = int(np.sum(xp >= t + rho)) - int(np.sum(xn >= t - rho))
        total += S * (b - a)
    bound = float(np.sum(xp - xn) - 2 * k * rho)
    holds = total >= bound - 1e-12 * max(1.0, abs(bound))
    out = CoareaBound(float(total), bound, bool(holds), bps.tolist())
    if eta is not None and L is not None:
        out.chain_target = float(L - eta * (8 * k * k + 3 * k + 1))
        out.chain_holds = bool(total >= out.chain_target)
    return out
