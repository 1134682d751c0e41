"""Convex bodies, scenes, pinning field and singularity data."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import DeltaTooLarge, InvalidScene, InvalidSingularities

MEMBERSHIP_TOL = 1e-9
NORMAL_TOL = 1e-12


def as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(3)
    if not np.all(np.isfinite(p)):
        raise InvalidScene("non-finite coordinate", point=list(map(float, p)))
    return p


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """A ball, a polytope ``{x : n_i . x <= o_i}``, or a polytope rounded by ``rounding``.

    The rounded kind is what dilating a polytope produces: the Minkowski sum
    of the polytope with a ball of radius ``rounding``.
    """

    kind: str
    center: np.ndarray | None = None
    radius: float = 0.0
    normals: np.ndarray | None = None
    offsets: np.ndarray | None = None
    rounding: float = 0.0
    _vertices: list = field(default_factory=list, repr=False)

    # construction ---------------------------------------------------------
    @staticmethod
    def ball(center, radius: float) -> "ConvexBody":
        radius = float(radius)
        if not radius > 0:
            raise InvalidScene("ball radius must be positive", radius=radius)
        return ConvexBody("ball", center=as_point(center), radius=radius)

    @staticmethod
    def polytope(halfspaces: Sequence[Sequence[float]]) -> "ConvexBody":
        hs = np.asarray(halfspaces, dtype=float)
        if hs.ndim != 2 or hs.shape[1] != 4 or len(hs) < 4:
            raise InvalidScene("polytope needs at least 4 halfspaces [nx,ny,nz,offset]")
        normals, offsets = hs[:, :3].copy(), hs[:, 3].copy()
        norms = np.linalg.norm(normals, axis=1)
        if np.any(np.abs(norms - 1.0) > NORMAL_TOL):
            raise InvalidScene("halfspace normals must be unit vectors", max_dev=float(np.max(np.abs(norms - 1))))
        body = ConvexBody("polytope", normals=normals, offsets=offsets)
        body._check_polytope()
        return body

    def _check_polytope(self) -> None:
        n, o = self.normals, self.offsets
        # Chebyshev ball: maximise s with n_i.x + s <= o_i
        res = linprog(c=[0, 0, 0, -1], A_ub=np.hstack([n, np.ones((len(n), 1))]), b_ub=o,
                      bounds=[(None, None)] * 3 + [(None, 1e6)], method="highs")
        if res.status != 0 or res.x[3] <= MEMBERSHIP_TOL:
            raise InvalidScene("polytope has empty interior")
        for j, s in itertools.product(range(3), (1.0, -1.0)):
            c = np.zeros(3)
            c[j] = -s
            r = linprog(c=c, A_ub=n, b_ub=o, bounds=[(None, None)] * 3, method="highs")
            if r.status != 0:
                raise InvalidScene("polytope is unbounded")

    # basic queries --------------------------------------------------------
    @property
    def is_ball(self) -> bool:
        return self.kind == "ball"

    @property
    def strictly_convex(self) -> bool:
        return self.kind == "ball"

    def vertices(self) -> np.ndarray:
        """Vertices of the underlying polytope (empty for balls)."""
        if self.kind == "ball":
            return np.zeros((0, 3))
        if not self._vertices:
            n, o = self.normals, self.offsets
            pts = []
            for i, j, k in itertools.combinations(range(len(n)), 3):
                A = n[[i, j, k]]
                if abs(np.linalg.det(A)) < 1e-12:
                    continue
                v = np.linalg.solve(A, o[[i, j, k]])
                if np.all(n @ v <= o + 1e-9):
                    if not any(np.linalg.norm(v - w) < 1e-9 for w in pts):
                        pts.append(v)
            self._vertices.extend(pts)
        return np.array(self._vertices)

    def support(self, u) -> float:
        u = np.asarray(u, dtype=float)
        if self.kind == "ball":
            return float(self.center @ u + self.radius * np.linalg.norm(u))
        return float(np.max(self.vertices() @ u) + self.rounding * np.linalg.norm(u))

    def max_distance_from(self, p) -> float:
        p = as_point(p)
        if self.kind == "ball":
            return float(np.linalg.norm(self.center - p) + self.radius)
        return float(np.max(np.linalg.norm(self.vertices() - p, axis=1)) + self.rounding)

    def contains(self, x, tol: float = MEMBERSHIP_TOL):
        """Closure membership with tolerance; vectorised over leading axes."""
        return self.distance(x) <= tol

    def interior(self, x, tol: float = MEMBERSHIP_TOL):
        """Strict interior: farther than ``tol`` inside the boundary."""
        return self.signed_distance(x) < -tol

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "ball":
            return np.linalg.norm(x - self.center, axis=-1) - self.radius
        if self.kind == "polytope":
            s = x @ self.normals.T - self.offsets
            out = np.max(s, axis=-1)
            outside = out > 0
            if np.any(outside):
                d = self._euclid_distance(x)
                out = np.where(outside, d, out)
            return out
        d = self._euclid_distance(x)
        s = np.max(x @ self.normals.T - self.offsets, axis=-1)
        return np.where(d > 0, d, s) - self.rounding

    def distance(self, x):
        return np.maximum(self.signed_distance(x), 0.0)

    def _euclid_distance(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 3)
        out = np.array([np.linalg.norm(p - _project_polytope(self.normals, self.offsets, p)) for p in flat])
        return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])

    def project(self, x, boundary: bool = False) -> np.ndarray:
        """Nearest point of the closure, or of the boundary when ``boundary`` is set."""
        x = as_point(x)
        if self.kind == "ball":
            v = x - self.center
            r = np.linalg.norm(v)
            if r <= self.radius and not boundary:
                return x
            if r == 0.0:
                v, r = np.array([1.0, 0.0, 0.0]), 1.0
            return self.center + self.radius * v / r
        inside = bool(np.all(self.normals @ x <= self.offsets)) if self.kind == "polytope" else None
        if self.kind == "polytope":
            if inside and not boundary:
                return x
            if inside:
                slack = self.offsets - self.normals @ x
                i = int(np.argmin(slack))
                return x + slack[i] * self.normals[i]
            return _project_polytope(self.normals, self.offsets, x)
        # rounded polytope
        q = _project_polytope(self.normals, self.offsets, x)
        v = x - q
        d = np.linalg.norm(v)
        if d <= self.rounding and not boundary:
            return x
        if d > 0:
            return q + self.rounding * v / d
        slack = self.offsets - self.normals @ x
        i = int(np.argmin(slack))
        return x + (slack[i] + self.rounding) * self.normals[i]

    def dilate(self, delta: float) -> "ConvexBody":
        delta = float(delta)
        if delta < 0:
            raise DeltaTooLarge("delta must be nonnegative", delta=delta)
        if delta == 0:
            return self
        if self.kind == "ball":
            return ConvexBody.ball(self.center, self.radius + delta)
        return ConvexBody("rounded", normals=self.normals, offsets=self.offsets,
                          rounding=self.rounding + delta, _vertices=list(self._vertices))

    def segment_interval(self, a, b) -> tuple[float, float] | None:
        """Parameter interval ``[t0, t1]`` of ``a + t (b - a)`` lying in the closure, clipped to [0, 1]."""
        a, b = np.asarray(a, float), np.asarray(b, float)
        d = b - a
        if self.kind == "ball":
            f = a - self.center
            A = d @ d
            if A == 0.0:
                return (0.0, 1.0) if f @ f <= self.radius ** 2 else None
            B = f @ d
            C = f @ f - self.radius ** 2
            disc = B * B - A * C
            if disc <= 0:
                return None
            sq = np.sqrt(disc)
            # numerically stable roots
            q = -(B + np.copysign(sq, B))
            t0, t1 = sorted((q / A, C / q if q != 0 else -B / A))
            lo, hi = max(t0, 0.0), min(t1, 1.0)
            return (lo, hi) if hi > lo else None
        if self.kind == "polytope":
            lo, hi = 0.0, 1.0
            nd = self.normals @ d
            na = self.normals @ a
            for k in range(len(nd)):
                if abs(nd[k]) < 1e-300:
                    if na[k] > self.offsets[k]:
                        return None
                    continue
                t = (self.offsets[k] - na[k]) / nd[k]
                if nd[k] > 0:
                    hi = min(hi, t)
                else:
                    lo = max(lo, t)
                if hi <= lo:
                    return None
            return lo, hi
        return _rounded_interval(self, a, b)

    def to_json(self) -> dict:
        if self.kind == "ball":
            return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}
        hs = np.hstack([self.normals, self.offsets[:, None]]).tolist()
        out = {"type": "polytope", "halfspaces": hs}
        if self.kind == "rounded":
            out["rounding"] = self.rounding
        return out

    @staticmethod
    def from_json(obj: dict) -> "ConvexBody":
        t = obj.get("type")
        if t == "ball":
            return ConvexBody.ball(obj["center"], obj["radius"])
        if t == "polytope":
            body = ConvexBody.polytope(obj["halfspaces"])
            if obj.get("rounding"):
                body = body.dilate(obj["rounding"])
            return body
        raise InvalidScene(f"unknown body type {t!r}")


def _project_polytope(normals: np.ndarray, offsets: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Exact projection onto ``{n.y <= o}`` by enumerating faces, edges and vertices."""
    if np.all(normals @ x <= offsets + 1e-15):
        return x.copy()
    best, best_d = None, np.inf
    m = len(normals)
    for size in (1, 2, 3):
        for idx in itertools.combinations(range(m), size):
            N = normals[list(idx)]
            G = N @ N.T
            if abs(np.linalg.det(G)) < 1e-14:
                continue
            lam = np.linalg.solve(G, N @ x - offsets[list(idx)])
            if np.any(lam < -1e-14):
                continue
            y = x - N.T @ lam
            if np.all(normals @ y <= offsets + 1e-10):
                d = np.linalg.norm(x - y)
                if d < best_d:
                    best, best_d = y, d
        if best is not None and size == 1:
            # a single active face with feasible foot is optimal
            return best
    return best


def _rounded_interval(body: ConvexBody, a, b):
    base = ConvexBody("polytope", normals=body.normals, offsets=body.offsets)

    def g(t):
        return float(base.distance(a + t * (b - a))) - body.rounding

    ts = np.linspace(0.0, 1.0, 65)
    vals = np.array([g(t) for t in ts])
    i = int(np.argmin(vals))
    if vals[i] > 0:
        from scipy.optimize import minimize_scalar
        r = minimize_scalar(g, bounds=(ts[max(i - 1, 0)], ts[min(i + 1, 64)]), method="bounded",
                            options={"xatol": 1e-13})
        if r.fun > 0:
            return None
        tm = float(r.x)
    else:
        tm = float(ts[i])

    def edge(lo, hi):
        # lo inside, hi outside (or the other way); bisect to machine precision
        glo = g(lo)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if (g(mid) <= 0) == (glo <= 0):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    t0 = 0.0 if g(0.0) <= 0 else edge(tm, 0.0)
    t1 = 1.0 if g(1.0) <= 0 else edge(tm, 1.0)
    return (t0, t1) if t1 > t0 else None


@dataclass(frozen=True, eq=False)
class Scene:
    omega: ConvexBody
    inclusion: ConvexBody
    b: float

    @property
    def b2(self) -> float:
        return self.b * self.b

    @property
    def clearance(self) -> float:
        return clearance(self.omega, self.inclusion)

    def inclusion_at(self, delta: float = 0.0) -> ConvexBody:
        if delta == 0:
            return self.inclusion
        return dilate_inclusion(self, delta)

    def to_json(self) -> dict:
        return {"omega": self.omega.to_json(), "inclusion": self.inclusion.to_json(), "b": self.b}


@dataclass(frozen=True)
class SingularityData:
    positives: np.ndarray
    negatives: np.ndarray

    @property
    def k(self) -> int:
        return len(self.positives)

    def points(self) -> np.ndarray:
        """All 2k points, positives first."""
        return np.vstack([self.positives, self.negatives])

    def to_json(self) -> dict:
        return {"positive": self.positives.tolist(), "negative": self.negatives.tolist()}


@dataclass
class ValidationReport:
    valid: bool
    clearance: float
    b: float
    convex: bool
    contained: bool
    strictly_convex_inclusion: bool
    warnings: list

    def to_json(self) -> dict:
        return dict(self.__dict__)


def clearance(big: ConvexBody, small: ConvexBody) -> float:
    """dist(boundary small, boundary big) for ``small`` inside ``big``; negative when not contained."""
    if big.kind == "ball":
        return big.radius - small.max_distance_from(big.center)
    if big.kind == "polytope":
        return float(min(o - small.support(n) for n, o in zip(big.normals, big.offsets)))
    return float(min(o - small.support(n) for n, o in zip(big.normals, big.offsets))) + big.rounding


def validate_scene(scene: Scene, raise_on_error: bool = True) -> ValidationReport:
    warns = []
    problems = []
    if not (0.0 < scene.b < 1.0):
        problems.append(f"b={scene.b} outside (0,1)")
    c = clearance(scene.omega, scene.inclusion)
    contained = c > MEMBERSHIP_TOL
    if not contained:
        problems.append("inclusion closure not inside the domain interior")
    if not scene.inclusion.strictly_convex:
        warns.append("inclusion is not strictly convex; geodesic classification is not certified")
    report = ValidationReport(valid=not problems, clearance=float(c), b=float(scene.b), convex=True,
                              contained=contained, strictly_convex_inclusion=scene.inclusion.strictly_convex,
                              warnings=warns + problems)
    if problems and raise_on_error:
        raise InvalidScene("; ".join(problems), clearance=float(c), b=float(scene.b))
    for w in warns:
        warnings.warn(w, stacklevel=2)
    return report


def make_scene(omega: ConvexBody, inclusion: ConvexBody, b: float) -> Scene:
    scene = Scene(omega, inclusion, float(b))
    validate_scene(scene)
    return scene


def pinning(scene: Scene, x) -> np.ndarray | float:
    """a(x): ``b`` strictly inside the inclusion, 1 elsewhere (the boundary counts as outside)."""
    inside = scene.inclusion.interior(x)
    out = np.where(inside, scene.b, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def dilate_inclusion(scene: Scene, delta: float) -> ConvexBody:
    if delta < 0 or delta >= scene.clearance / 2:
        raise DeltaTooLarge("delta must lie in [0, clearance/2)", delta=float(delta),
                            clearance=float(scene.clearance))
    return scene.inclusion.dilate(delta)


def project_boundary(body: ConvexBody, x, boundary: bool = False) -> np.ndarray:
    return body.project(x, boundary=boundary)


def make_singularities(scene: Scene, positives, negatives, tol: float = MEMBERSHIP_TOL) -> SingularityData:
    P = np.atleast_2d(np.asarray(positives, dtype=float))
    N = np.atleast_2d(np.asarray(negatives, dtype=float))
    if P.shape[1:] != (3,) or N.shape[1:] != (3,):
        raise InvalidSingularities("points must be 3-vectors")
    if len(P) != len(N) or len(P) < 1:
        raise InvalidSingularities("need equal positive and negative counts, k >= 1",
                                   positives=len(P), negatives=len(N))
    pts = np.vstack([P, N])
    off = np.abs(np.asarray(scene.omega.signed_distance(pts)))
    if np.any(off > tol):
        raise InvalidSingularities("singularities must lie on the domain boundary",
                                   max_offset=float(np.max(off)))
    pts = np.array([scene.omega.project(p, boundary=True) for p in pts])
    for i, j in itertools.combinations(range(len(pts)), 2):
        if np.linalg.norm(pts[i] - pts[j]) < tol:
            raise InvalidSingularities("singularities must be pairwise distinct", i=i, j=j)
    k = len(P)
    return SingularityData(pts[:k], pts[k:])


def scene_from_json(obj: dict) -> tuple[Scene, SingularityData | None]:
    try:
        omega = ConvexBody.from_json(obj["omega"])
        incl = ConvexBody.from_json(obj["inclusion"])
        b = float(obj["b"])
    except KeyError as exc:
        raise InvalidScene(f"missing key {exc.args[0]!r}") from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scene = make_scene(omega, incl, b)
    sing = None
    if "singularities" in obj:
        s = obj["singularities"]
        sing = make_singularities(scene, s.get("positive", []), s.get("negative", []))
    return scene, sing


def scene_to_json(scene: Scene, sing: SingularityData | None = None) -> dict:
    out = scene.to_json()
    if sing is not None:
        out["singularities"] = sing.to_json()
    return out


def symmetric_scene(r0: float = 0.5, b: float = 0.5) -> tuple[Scene, SingularityData]:
    """Unit ball with a concentric inclusion and the antipodal pair (1,0,0), (-1,0,0)."""
    scene = make_scene(ConvexBody.ball([0, 0, 0], 1.0), ConvexBody.ball([0, 0, 0], r0), b)
    return scene, make_singularities(scene, [[1, 0, 0]], [[-1, 0, 0]])


def _unit(v) -> list:
    v = np.asarray(v, float)
    return (v / np.linalg.norm(v)).tolist()


def two_pair_scene(b: float = 0.5) -> tuple[Scene, SingularityData]:
    """Unit ball, off-centre inclusion, two dipoles; one link curve refracts through the inclusion."""
    scene = make_scene(ConvexBody.ball([0, 0, 0], 1.0), ConvexBody.ball([0.12, 0.08, 0.05], 0.42), b)
    sing = make_singularities(scene, [_unit([1, 0.35, 0.3]), _unit([0.6, -0.6, -0.5])],
                              [_unit([-1, 0.2, 0.35]), _unit([-0.7, -0.5, -0.45])])
    return scene, sing
