"""Radial special solution, heteroclinic interface cost, and the discrete decoupling identity."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .errors import FitDegenerate, MeshTooCoarse, NoConvergence, ShapeMismatch, TraceNotUnimodular, ValidationError
from .geometry import Scene

GRADING_RATIO = 1.05
NODES_PER_EPS = 20


# ------------------------------------------------------------ mesh

def graded_mesh(r0: float, eps: float, ratio: float = GRADING_RATIO, per_eps: int = NODES_PER_EPS,
                hmax: float = 0.01) -> np.ndarray:
    """Nodes on [0, 1] clustered geometrically at r0 (r0 itself is a node)."""
    h0 = eps / (1.5 * per_eps)  # the grading still leaves >= per_eps nodes within r0 +- eps/2
    hmax = max(hmax, h0)

    def side(length):
        steps, h = [], h0
        total = 0.0
        while total < length:
            steps.append(h)
            total += h
            h = min(h * ratio, hmax)
        pts = np.cumsum(steps)
        pts = pts[pts < length - 0.25 * steps[-1]]
        return np.append(pts, length)

    right = r0 + side(1.0 - r0)
    left = r0 - side(r0)
    mesh = np.concatenate([left[::-1], [r0], right])
    mesh[0], mesh[-1] = 0.0, 1.0
    return mesh


def _check_mesh(mesh, r0, eps):
    near = mesh[np.abs(mesh - r0) <= 0.5 * eps]
    if len(near) < NODES_PER_EPS:
        raise MeshTooCoarse("mesh must carry at least 20 nodes per eps around r0", nodes=int(len(near)))


# ------------------------------------------------------------ radial solve

@dataclass
class RadialProfile:
    r0: float
    b: float
    epsilon: float
    mesh: np.ndarray
    U: np.ndarray
    energy: float
    iterations: int = 0
    residual: float = 0.0
    fit: dict = field(default_factory=dict)

    @property
    def breakpoints(self):
        return (self.r0,)

    def __call__(self, r) -> np.ndarray:
        """Piecewise linear U(r); equal to 1 beyond the unit radius."""
        r = np.asarray(r, float)
        return np.interp(r, self.mesh, self.U, right=1.0)

    def U_of(self, r):
        return self(r)

    def to_json(self) -> dict:
        return {"r0": self.r0, "b": self.b, "epsilon": self.epsilon, "nodes": int(len(self.mesh)),
                "energy": self.energy, "eps_energy": self.epsilon * self.energy, "iterations": self.iterations,
                "residual": self.residual, **{k: v for k, v in self.fit.items()}}


class _RadialEnergy:
    """E/(2 pi) = sum_cells m_i (dU)^2 / h_i + sum_nodes [wb (b^2 - U^2)^2 + w1 (1 - U^2)^2] / (2 eps^2)."""

    def __init__(self, mesh, r0, b, eps):
        self.mesh, self.b2, self.eps2 = mesh, b * b, eps * eps
        h = np.diff(mesh)
        self.h = h
        self.m = (mesh[1:] ** 3 - mesh[:-1] ** 3) / (3 * h)  # int r^2 over the cell / h
        mid = np.concatenate([[0.0], 0.5 * (mesh[1:] + mesh[:-1]), [1.0]])
        lo, hi = mid[:-1], mid[1:]
        cut_lo, cut_hi = np.minimum(lo, r0), np.minimum(hi, r0)
        self.wb = (cut_hi ** 3 - cut_lo ** 3) / 3
        self.w1 = (hi ** 3 - lo ** 3) / 3 - self.wb
        self.W = self.wb + self.w1

    def value(self, U):
        dU = np.diff(U)
        grad = np.sum(self.m * dU * dU / self.h)
        pot = np.sum(self.wb * (self.b2 - U * U) ** 2 + self.w1 * (1 - U * U) ** 2) / (2 * self.eps2)
        return grad + pot

    def gradient(self, U):
        c = self.m / self.h
        dU = np.diff(U)
        g = np.zeros_like(U)
        g[:-1] -= 2 * c * dU
        g[1:] += 2 * c * dU
        g += -4 * U * (self.wb * (self.b2 - U * U) + self.w1 * (1 - U * U)) / (2 * self.eps2)
        return g

    def hessian_bands(self, U, convexify=False):
        c = self.m / self.h
        diag = np.zeros_like(U)
        diag[:-1] += 2 * c
        diag[1:] += 2 * c
        p2 = (-4 * (self.wb * (self.b2 - U * U) + self.w1 * (1 - U * U)) + 8 * U * U * self.W) / (2 * self.eps2)
        if convexify:
            p2 = np.maximum(p2, 0.0)
        diag = diag + p2
        off = -2 * c
        return diag, off


def solve_radial(r0: float, b: float, eps: float, mesh=None, U0=None, tol: float = 1e-10,
                 max_iter: int = 200) -> RadialProfile:
    """Minimise the radial energy with U(1) = 1 by projected, damped Newton on [b, 1]."""
    if not (0 < r0 < 1 and 0 < b <= 1 and eps > 0):
        raise ValidationError("need 0<r0<1, 0<b<=1, eps>0", r0=r0, b=b, eps=eps)
    mesh = graded_mesh(r0, eps) if mesh is None else np.asarray(mesh, float)
    _check_mesh(mesh, r0, eps)
    En = _RadialEnergy(mesh, r0, b, eps)
    n = len(mesh)
    if U0 is None:
        d = (mesh - r0) / eps
        U = np.where(d < 0, b + (1 - b) * 0.5 * np.exp(np.sqrt(2) * b * np.minimum(d, 0)),
                     1 - (1 - b) * 0.5 * np.exp(-np.sqrt(2) * np.maximum(d, 0)))
    else:
        U = np.clip(np.asarray(U0, float).copy(), b, 1.0)
    U[-1] = 1.0
    free = np.arange(n - 1)
    scale = eps * eps
    res = np.inf
    for it in range(1, max_iter + 1):
        g = En.gradient(U)
        res = float(np.max(np.abs(g[free]) / En.W[free]) * scale)
        if res < tol:
            break
        E0 = En.value(U)
        step = None
        for convexify in (False, True):
            diag, off = En.hessian_bands(U, convexify)
            ab = np.zeros((3, n - 1))
            ab[0, 1:] = off[:n - 2]
            ab[1] = diag[:n - 1]
            ab[2, :-1] = off[:n - 2]
            try:
                d = -solve_banded((1, 1), ab, g[:n - 1])
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(d)) and d @ g[:n - 1] < 0:
                step = d
                break
        if step is None:
            step = -g[:n - 1] / np.maximum(En.W[:n - 1], 1e-300) * scale
        # projected backtracking on the energy
        t = 1.0
        while True:
            Un = U.copy()
            Un[:-1] = np.clip(U[:-1] + t * step, b, 1.0)
            En_ = En.value(Un)
            if En_ <= E0 + 1e-4 * t * (step @ g[:n - 1]) or En_ <= E0 and t < 1e-6:
                break
            t *= 0.5
            if t < 1e-14:
                Un = U
                break
        if np.array_equal(Un, U):
            # bounds active with no descent left: stationary in the projected sense
            res_proj = _projected_residual(U, g, b) * scale
            if res_proj < tol:
                res = res_proj
                break
            raise NoConvergence("line search stalled", iterations=it, residual=res)
        U = Un
    else:
        raise NoConvergence("Newton iteration limit reached", iterations=max_iter, residual=res)
    energy = 2 * np.pi * En.value(U)
    return RadialProfile(float(r0), float(b), float(eps), mesh, U, float(energy), it, res)


def _projected_residual(U, g, b):
    gg = g[:-1].copy()
    gg[(U[:-1] <= b) & (gg > 0)] = 0
    gg[(U[:-1] >= 1) & (gg < 0)] = 0
    return float(np.max(np.abs(gg)))


def profile_properties(p: RadialProfile, tol: float = 1e-9) -> dict:
    dec = float(np.max(np.maximum(-np.diff(p.U), 0.0)))
    return {"min": float(p.U.min()), "max": float(p.U.max()), "in_range": bool(p.U.min() >= p.b - tol and p.U.max() <= 1 + tol),
            "U1": float(p.U[-1]), "monotone": dec <= tol, "max_decrease": dec}


# ------------------------------------------------------------ heteroclinic oracle

def heteroclinic_cost_oracle(b: float) -> float:
    """Cost of the flat interface between u = b and u = 1 (unit-width layer).

    On each half-line the optimal orbit satisfies u'^2 = W(u) = (a^2 - u^2)^2 / 2,
    so its cost is the phase-plane integral of sqrt(W) du.  The junction value
    comes from matching slopes; both integrals are done by quadrature.
    """
    if not (0 < b < 1):
        return 0.0
    b2 = b * b
    u0 = brentq(lambda u: (u * u - b2) - (1 - u * u), b, 1.0, xtol=1e-15)
    left, _ = quad(lambda u: (u * u - b2) / np.sqrt(2), b, u0, epsabs=1e-14, epsrel=1e-14)
    right, _ = quad(lambda u: (1 - u * u) / np.sqrt(2), u0, 1.0, epsabs=1e-14, epsrel=1e-14)
    return float(left + right)


def heteroclinic_cost_closed_form(b: float) -> float:
    u0 = np.sqrt((1 + b * b) / 2)
    return float(((u0 ** 3 - b ** 3) / 3 - b * b * (u0 - b) + (1 - u0) - (1 - u0 ** 3) / 3) / np.sqrt(2))


# ------------------------------------------------------------ fit and concentration

def exponential_fit(p: RadialProfile, floor: float = 1e-12) -> dict:
    """Per side of r0: regress log|U - a| on dist/eps outside the 2 eps band; gamma = min, r2 = min."""
    d = np.abs(p.mesh - p.r0) / p.epsilon
    a = np.where(p.mesh < p.r0, p.b, 1.0)
    dev = np.abs(p.U - a)
    out = {}
    for name, side in (("inner", p.mesh < p.r0), ("outer", p.mesh > p.r0)):
        sel = side & (d >= 2) & (dev > floor)
        if np.count_nonzero(sel) < 5:
            continue
        x, y = d[sel], np.log(dev[sel])
        A = np.column_stack([np.ones_like(x), x])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        pred = A @ coef
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 0.0
        out[name] = {"gamma": float(-coef[1]), "C": float(np.exp(coef[0])), "r2": float(r2),
                     "points": int(np.count_nonzero(sel))}
    if not out:
        raise FitDegenerate("|U - a| underflows on both sides of r0")
    res = {"gamma": min(v["gamma"] for v in out.values()), "C": max(v["C"] for v in out.values()),
           "r2": min(v["r2"] for v in out.values()), "sides": out}
    p.fit = {"gamma": res["gamma"], "C": res["C"], "r2": res["r2"]}
    return res


def energy_density(p: RadialProfile) -> np.ndarray:
    """Per-node share of E (gradient split evenly to the cell ends)."""
    En = _RadialEnergy(p.mesh, p.r0, p.b, p.epsilon)
    dU = np.diff(p.U)
    cell = En.m * dU * dU / En.h
    e = (En.wb * (En.b2 - p.U ** 2) ** 2 + En.w1 * (1 - p.U ** 2) ** 2) / (2 * En.eps2)
    e[:-1] += 0.5 * cell
    e[1:] += 0.5 * cell
    return 2 * np.pi * e


def concentration(p: RadialProfile, eta: float | None = None) -> dict:
    eta = 10 * p.epsilon * abs(np.log(p.epsilon)) if eta is None else eta
    e = energy_density(p)
    frac = float(np.sum(e[np.abs(p.mesh - p.r0) < eta]) / np.sum(e))
    return {"eta": eta, "fraction": frac, "concentrated": frac >= 0.95}


# ------------------------------------------------------------ 3D discrete energies

@dataclass
class GridField3D:
    origin: np.ndarray
    h: float
    dims: tuple
    values: np.ndarray  # complex, shape (nz, ny, nx)

    @staticmethod
    def from_callable(origin, h, dims, f: Callable) -> "GridField3D":
        x, y, z = (origin[i] + h * np.arange(dims[i]) for i in range(3))
        Z, Y, X = np.meshgrid(z, y, x, indexing="ij")
        vals = np.asarray(f(np.stack([X, Y, Z], axis=-1)), dtype=complex)
        return GridField3D(np.asarray(origin, float), float(h), tuple(dims), vals)

    def nodes(self) -> np.ndarray:
        x, y, z = (self.origin[i] + self.h * np.arange(self.dims[i]) for i in range(3))
        Z, Y, X = np.meshgrid(z, y, x, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)


def scene_grid(scene: Scene, h: float):
    from .structure import GridSpec
    spec = GridSpec.around(scene, h, margin=h)
    return spec.origin, spec.h, spec.dims


def cell_fractions(scene: Scene, origin, h, dims, sub: int = 3) -> np.ndarray:
    """Fraction of each cell inside the domain by sub^3 point sampling (exact 0/1 away from the boundary)."""
    nx, ny, nz = dims
    x = origin[0] + h * (np.arange(nx - 1) + 0.5)
    y = origin[1] + h * (np.arange(ny - 1) + 0.5)
    z = origin[2] + h * (np.arange(nz - 1) + 0.5)
    Z, Y, X = np.meshgrid(z, y, x, indexing="ij")
    C = np.stack([X, Y, Z], axis=-1)
    sd = np.asarray(scene.omega.signed_distance(C.reshape(-1, 3))).reshape(C.shape[:-1])
    frac = (sd < 0).astype(float)
    edge = np.abs(sd) <= h * np.sqrt(3) / 2 * 1.001
    if edge.any():
        off = (np.arange(sub) + 0.5) / sub - 0.5
        O = np.stack(np.meshgrid(off, off, off, indexing="ij"), axis=-1).reshape(-1, 3) * h
        Ce = C[edge]
        S = (Ce[:, None, :] + O[None, :, :]).reshape(-1, 3)
        ins = np.asarray(scene.omega.contains(S)).reshape(len(Ce), -1)
        frac[edge] = ins.mean(axis=1)
    return frac


def _cell_mean(f: np.ndarray) -> np.ndarray:
    return 0.125 * (f[:-1, :-1, :-1] + f[:-1, :-1, 1:] + f[:-1, 1:, :-1] + f[:-1, 1:, 1:]
                    + f[1:, :-1, :-1] + f[1:, :-1, 1:] + f[1:, 1:, :-1] + f[1:, 1:, 1:])


def _edge_cell_sum(e: np.ndarray, axis: int) -> np.ndarray:
    """Average of the four edges parallel to ``axis`` bounding each cell; e has one fewer entry along axis."""
    if axis == 0:  # z-edges, varying (y, x)
        return 0.25 * (e[:, :-1, :-1] + e[:, :-1, 1:] + e[:, 1:, :-1] + e[:, 1:, 1:])
    if axis == 1:
        return 0.25 * (e[:-1, :, :-1] + e[:-1, :, 1:] + e[1:, :, :-1] + e[1:, :, 1:])
    return 0.25 * (e[:-1, :-1, :] + e[:-1, 1:, :] + e[1:, :-1, :] + e[1:, 1:, :])


def discrete_energy(scene: Scene, fld: GridField3D, eps: float, weight: Callable | None = None,
                    frac: np.ndarray | None = None) -> float:
    """E_eps of the field, or F_eps when ``weight`` (a radial U(r) about the inclusion centre) is given.

    Cells carry forward differences along their 12 edges and midpoint values
    for the potential; partial cells are weighted by their inside fraction.
    """
    origin, h, dims = scene_grid(scene, fld.h)
    if tuple(dims) != tuple(fld.dims) or not np.allclose(origin, fld.origin):
        raise ShapeMismatch("field grid does not match the scene grid", expected=list(dims), got=list(fld.dims))
    if frac is None:
        frac = cell_fractions(scene, origin, h, dims)
    u = fld.values
    P = fld.nodes()
    c = scene.inclusion.center if scene.inclusion.is_ball else np.zeros(3)
    grad = np.zeros(frac.shape)
    if weight is None:
        for ax in range(3):
            du = np.diff(u, axis=ax)
            grad += _edge_cell_sum(np.abs(du) ** 2, ax) / h ** 2
        mid = _cell_mean(u)
        Mpts = np.stack([_cell_mean(P[..., i]) for i in range(3)], axis=-1).reshape(-1, 3)
        inside = np.asarray(scene.inclusion.interior(Mpts)).reshape(frac.shape)
        a2 = np.where(inside, scene.b2, 1.0)
        pot = (a2 - np.abs(mid) ** 2) ** 2 / (2 * eps * eps)
    else:
        U2 = np.asarray(weight(np.linalg.norm(P - c, axis=-1))) ** 2
        for ax in range(3):
            dv = np.diff(u, axis=ax)
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[ax], hi[ax] = slice(None, -1), slice(1, None)
            w = 0.5 * (U2[tuple(lo)] + U2[tuple(hi)])
            grad += _edge_cell_sum(w * np.abs(dv) ** 2, ax) / h ** 2
        Um2 = _cell_mean(np.sqrt(U2)) ** 2
        mid = _cell_mean(u)
        pot = Um2 * Um2 * (1 - np.abs(mid) ** 2) ** 2 / (2 * eps * eps)
    return float(0.5 * np.sum(frac * (grad + pot)) * h ** 3)


def check_trace(scene: Scene, v: Callable, n: int = 2000, tol: float = 1e-9) -> float:
    """max | |v| - 1 | over a Fibonacci point set on the domain boundary (ball domains)."""
    om = scene.omega
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    th = np.pi * (1 + 5 ** 0.5) * i
    S = np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])
    if om.is_ball:
        pts = om.center + om.radius * S
    else:
        c = om.vertices().mean(axis=0)
        pts = np.array([om.project(c + 10 * s, boundary=True) for s in S])
    dev = float(np.max(np.abs(np.abs(np.asarray(v(pts))) - 1)))
    if dev > tol:
        raise TraceNotUnimodular("|v| differs from 1 on the boundary", deviation=dev)
    return dev


def decoupling_residual(scene: Scene, profile: RadialProfile, v: Callable, eps: float, hs=(1 / 32, 1 / 48, 1 / 64)):
    """|E(Uv) - E(U) - F(v)| on each grid and the least-squares order in h."""
    check_trace(scene, v)
    c = scene.inclusion.center
    rows = []
    for h in hs:
        origin, hh, dims = scene_grid(scene, h)
        frac = cell_fractions(scene, origin, hh, dims)

        def U3(X):
            return profile(np.linalg.norm(X - c, axis=-1))

        fU = GridField3D.from_callable(origin, hh, dims, U3)
        fv = GridField3D.from_callable(origin, hh, dims, v)
        fUv = GridField3D(fU.origin, hh, dims, fU.values * fv.values)
        E_Uv = discrete_energy(scene, fUv, eps, frac=frac)
        E_U = discrete_energy(scene, fU, eps, frac=frac)
        F_v = discrete_energy(scene, fv, eps, weight=profile, frac=frac)
        rows.append({"h": hh, "E_Uv": E_Uv, "E_U": E_U, "F_v": F_v, "residual": abs(E_Uv - E_U - F_v)})
    res = np.array([r["residual"] for r in rows])
    H = np.array([r["h"] for r in rows])
    if np.all(res > 0) and len(rows) > 1:
        order = float(np.polyfit(np.log(H), np.log(res), 1)[0])
    else:
        order = float("inf")
    return {"rows": rows, "order": order}


# ------------------------------------------------------------ test fields

def planar_phase(k=(2.0, 1.0, -1.0)) -> Callable:
    kv = np.asarray(k, float)
    return lambda X: np.exp(1j * (np.asarray(X) @ kv))


def vortex_ring(R: float = 0.75, core: float = 0.15) -> Callable:
    """Unit-modulus away from a ring of radius R in the z = 0 plane; modulus ramps to 0 on the ring."""
    def v(X):
        X = np.asarray(X, float)
        s = np.hypot(X[..., 0], X[..., 1])
        w = (s - R) + 1j * X[..., 2]
        rho = np.abs(w)
        t = np.minimum(rho / core, 1.0)
        f = 1 - (1 - t) ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            phase = np.where(rho > 0, w / np.where(rho > 0, rho, 1), 0)
        return f * phase
    return v
