"""Semi-analytic energy of the vortex-tube test function around a geodesic link."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import connection as conn_mod
from . import metric
from .errors import ProfileUnavailable, StripConditionFailed, TubesOverlap, ValidationError
from .geometry import ConvexBody, Scene, SingularityData

POLICIES = ("exact-profile", "a2-strip")
STRIP_C_MAX = 20.0
_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


@dataclass
class TubeTestFunction:
    scene: Scene
    curves: list  # polylines (m_i, 3) with normal end segments of length eta
    eta: float
    epsilon: float
    strip_policy: str
    strip_lengths: list = field(default_factory=list)
    strip_constants: list = field(default_factory=list)
    profile: object = None

    def to_json(self) -> dict:
        return {"eta": self.eta, "epsilon": self.epsilon, "strip_policy": self.strip_policy,
                "strip_lengths": self.strip_lengths, "strip_constants": self.strip_constants,
                "curves": [c.tolist() for c in self.curves]}


@dataclass
class EnergyBreakdown:
    tube_log_term: float
    core_term: float
    cap_bound: float
    strip_correction: float
    total_upper: float
    weighted_length: float  # int over the middle portions of w ds
    cap_constant: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return dict(self.__dict__)


# ------------------------------------------------------------ polyline helpers

def _arclength(P: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))])


def _point_at(P: np.ndarray, s: float) -> np.ndarray:
    S = _arclength(P)
    return np.array([np.interp(s, S, P[:, i]) for i in range(3)])


def sub_polyline(P: np.ndarray, s0: float, s1: float) -> np.ndarray:
    S = _arclength(P)
    inner = P[(S > s0) & (S < s1)]
    return np.vstack([_point_at(P, s0), inner, _point_at(P, s1)])


def _inward_normal(omega: ConvexBody, p: np.ndarray) -> np.ndarray:
    if omega.is_ball:
        n = omega.center - p
    else:
        act = np.abs(omega.normals @ p - omega.offsets) < 1e-9
        n = -omega.normals[act].sum(axis=0) if act.any() else omega.vertices().mean(axis=0) - p
    return n / np.linalg.norm(n)


def with_normal_ends(omega: ConvexBody, P: np.ndarray, eta: float) -> np.ndarray:
    """Replace the first and last 2 eta of arclength by a normal segment of length eta plus a joining chord."""
    P = np.asarray(P, float)
    L = _arclength(P)[-1]
    if L <= 4 * eta:
        raise TubesOverlap("curve too short for two caps", length=float(L), eta=eta)
    a, b = P[0], P[-1]
    qa = a + eta * _inward_normal(omega, a)
    qb = b + eta * _inward_normal(omega, b)
    mid = sub_polyline(P, 2 * eta, L - 2 * eta)
    return np.vstack([a, qa, mid, qb, b])


def miter_ok(P: np.ndarray, eta: float) -> bool:
    """At every kink the inner-side overlap eta tan(theta/2) fits in half of both adjacent segments."""
    seg = np.diff(P, axis=0)
    ln = np.linalg.norm(seg, axis=1)
    seg, ln = seg[ln > 1e-14], ln[ln > 1e-14]
    for i in range(1, len(seg)):
        u, v = seg[i - 1] / ln[i - 1], seg[i] / ln[i]
        theta = np.arccos(np.clip(u @ v, -1, 1))
        if theta > 1e-9 and eta * np.tan(min(theta, np.pi - 1e-9) / 2) > 0.5 * min(ln[i - 1], ln[i]):
            return False
    return True


# ------------------------------------------------------------ strip measurement

def _shell_length(body: ConvexBody, a, b, s: float) -> float:
    """Length of [a, b] within distance s of the boundary of ``body``."""
    outer = body.dilate(s)
    out_len = _interval_len(outer, a, b)
    if body.is_ball:
        inner = ConvexBody.ball(body.center, body.radius - s) if body.radius > s else None
    elif body.kind == "polytope":
        inner = ConvexBody("polytope", normals=body.normals, offsets=body.offsets - s)
    else:
        inner = None
    in_len = _interval_len(inner, a, b) if inner is not None else 0.0
    return max(0.0, out_len - in_len)


def _interval_len(body, a, b) -> float:
    iv = body.segment_interval(a, b)
    if iv is None:
        return 0.0
    return (iv[1] - iv[0]) * float(np.linalg.norm(np.asarray(b) - np.asarray(a)))


def strip_length(scene: Scene, P: np.ndarray, eps: float) -> float:
    """H^1 of the polyline within distance sqrt(eps) of the inclusion boundary."""
    s = np.sqrt(eps)
    return float(sum(_shell_length(scene.inclusion, a, b, s) for a, b in zip(P[:-1], P[1:])))


def strip_check(scene: Scene, P: np.ndarray, eps: float, c_max: float = STRIP_C_MAX) -> dict:
    """Measured C = strip / sqrt(eps) and the ratio of strips at eps/100 and eps (1/10 for transversal crossings)."""
    S1 = strip_length(scene, P, eps)
    S2 = strip_length(scene, P, eps / 100)
    C = S1 / np.sqrt(eps)
    ratio = S2 / S1 if S1 > 0 else 0.0
    ok = C <= c_max and ratio <= 0.5
    return {"strip": S1, "strip_eps_over_100": S2, "C": float(C), "ratio": float(ratio), "ok": bool(ok)}


# ------------------------------------------------------------ construction

def _is_symmetric(scene: Scene) -> bool:
    om, inc = scene.omega, scene.inclusion
    return (om.is_ball and inc.is_ball and np.allclose(om.center, 0) and abs(om.radius - 1) < 1e-12
            and np.allclose(inc.center, 0))


def build_tube(scene: Scene, link, eta: float, eps: float, strip_policy: str = "a2-strip",
               profile=None, c_max: float = STRIP_C_MAX) -> TubeTestFunction:
    """``link`` is a GeodesicLink or a list of polylines from positive to negative points."""
    if strip_policy not in POLICIES:
        raise ValidationError("unknown strip policy", policy=strip_policy)
    curves = [np.asarray(c.vertices if hasattr(c, "vertices") else c, float)
              for c in (link.curves if hasattr(link, "curves") else link)]
    if not (0 < eps < eta / 10):
        raise ValidationError("need 0 < epsilon < eta/10", eta=eta, epsilon=eps)
    if eta >= scene.clearance / 2:
        raise ValidationError("eta must be below clearance/2", eta=eta, clearance=scene.clearance)
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            sep = conn_mod.polyline_distance(curves[i], curves[j])
            if sep <= 2 * eta:
                raise TubesOverlap("tubes around two curves overlap", i=i, j=j, separation=sep, eta=eta)
    built = [with_normal_ends(scene.omega, c, eta) for c in curves]
    for i, c in enumerate(built):
        L = _arclength(c)[-1]
        if not miter_ok(sub_polyline(c, eta, L - eta), eta):  # the cap joints belong to the cap bound
            raise TubesOverlap("tube self-overlaps at a kink", curve=i, eta=eta)
    lengths, consts = [], []
    for i, c in enumerate(built):
        chk = strip_check(scene, c, eps, c_max)
        if not chk["ok"]:
            raise StripConditionFailed("curve runs along the inclusion boundary", curve=i, **chk)
        lengths.append(chk["strip"])
        consts.append(chk["C"])
    if strip_policy == "exact-profile":
        if not _is_symmetric(scene):
            raise ProfileUnavailable("exact profile needs the unit ball with a concentric ball inclusion")
        if profile is None:
            from .profile import solve_radial
            profile = solve_radial(scene.inclusion.radius, scene.b, eps)
    return TubeTestFunction(scene, built, float(eta), float(eps), strip_policy, lengths, consts, profile)


# ------------------------------------------------------------ weights along curves

def _a2_integral(scene: Scene, P: np.ndarray) -> tuple[float, float]:
    """(int a^2 ds, int a^4 ds) along a polyline, exactly."""
    w2 = w4 = 0.0
    for a, b in zip(P[:-1], P[1:]):
        L = float(np.linalg.norm(b - a))
        ins = metric.segment_inside_length(scene.inclusion, a, b)
        w2 += L - (1 - scene.b2) * ins
        w4 += L - (1 - scene.b2 ** 2) * ins
    return w2, w4


def _profile_integral(profile, P: np.ndarray, center) -> tuple[float, float]:
    """(int U^2 ds, int U^4 ds) along a polyline with U radial about ``center``.

    Each segment is cut where |x - center| crosses a mesh node of the profile, so
    the integrand is smooth on every piece; 6-point Gauss-Legendre per piece.
    """
    w2 = w4 = 0.0
    c = np.asarray(center, float)
    for a, b in zip(P[:-1], P[1:]):
        d = b - a
        L = float(np.linalg.norm(d))
        if L == 0:
            continue
        e = d / L
        f = a - c
        t_star = float(np.clip(-(f @ e), 0, L))
        r_perp2 = max(float(f @ f - (f @ e) ** 2), 0.0)
        cuts = [0.0, t_star, L]
        for r in profile.mesh:
            if r * r > r_perp2:
                q = np.sqrt(r * r - r_perp2)
                for t in (-(f @ e) - q, -(f @ e) + q):
                    if 0 < t < L:
                        cuts.append(float(t))
        cuts = np.unique(cuts)
        lo, hi = cuts[:-1], cuts[1:]
        T = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * _GL_X[None, :]
        X = a + T[..., None] * e
        U = profile(np.linalg.norm(X - c, axis=-1))
        wts = 0.5 * (hi - lo)[:, None] * _GL_W[None, :]
        w2 += float(np.sum(wts * U ** 2))
        w4 += float(np.sum(wts * U ** 4))
    return w2, w4


def tube_energy(tube: TubeTestFunction, cap_constant: float | None = None) -> EnergyBreakdown:
    """Log term, core term and the cap bound of the tube test function.

    Along the middle portion (arclength eta to length - eta) the cross
    sections give pi w ln(eta/eps) from the annulus and pi w + pi w^2 / 12
    from the linear modulus ramp in the core; each curve's two caps
    contribute at most 2 pi eta |ln eps| + C.
    """
    scene, eta, eps = tube.scene, tube.eta, tube.epsilon
    lg = np.log(eta / eps)
    C = 2 * np.pi * eta if cap_constant is None else float(cap_constant)
    w2 = w4 = 0.0
    for P in tube.curves:
        L = _arclength(P)[-1]
        mid = sub_polyline(P, eta, L - eta)
        if tube.strip_policy == "exact-profile":
            a2, a4 = _profile_integral(tube.profile, mid, scene.inclusion.center)
        else:
            a2, a4 = _a2_integral(scene, mid)
        w2 += a2
        w4 += a4
    log_term = np.pi * lg * w2
    core = np.pi * w2 + np.pi * w4 / 12
    ncurves = len(tube.curves)
    caps = ncurves * (2 * np.pi * eta * abs(np.log(eps)) + C)
    strip = 0.0
    if tube.strip_policy == "a2-strip":
        strip = np.pi * (1 - scene.b2) * float(sum(tube.strip_lengths)) * lg
    total = log_term + core + caps + strip
    return EnergyBreakdown(float(log_term), float(core), float(caps), float(strip), float(total), float(w2), C,
                           {"cap_constant_kind": "model bound (degree-one half-ball map), not a value",
                            "strip_lengths": list(tube.strip_lengths), "strip_C": list(tube.strip_constants),
                            "curves": ncurves})


# ------------------------------------------------------------ ladders and scans

def asymptotic_slope(scene: Scene, sing: SingularityData, eps_ladder, eta: float, strip_policy: str = "a2-strip",
                     link=None) -> dict:
    eps_ladder = sorted((float(e) for e in eps_ladder), reverse=True)
    if len(eps_ladder) < 3 or eps_ladder[0] / eps_ladder[-1] < 100 * (1 - 1e-12):
        raise ValidationError("need at least 3 epsilons spanning 2 decades", ladder=eps_ladder)
    if link is None:
        link = conn_mod.geodesic_link(scene, sing, probe=False)
    rows = []
    for eps in eps_ladder:
        tube = build_tube(scene, link, eta, eps, strip_policy)
        eb = tube_energy(tube)
        rows.append({"eps": eps, "ln_term": eb.tube_log_term, "core": eb.core_term, "caps": eb.cap_bound,
                     "strip": eb.strip_correction, "total": eb.total_upper})
    x = np.array([abs(np.log(r["eps"])) for r in rows])
    y = np.array([r["total"] for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    target = np.pi * link.connection.length
    gaps = y / x - target
    return {"slope": float(slope), "intercept": float(intercept), "target": float(target),
            "rel_err": float(abs(slope - target) / target), "residuals": resid.tolist(), "table": rows,
            "normalized_gaps": gaps.tolist(),
            "bounded": bool(np.ptp(gaps) < 2 * abs(gaps[0])) if len(gaps) else True}


def eta_scan(scene: Scene, link, eps: float, etas, strip_policy: str = "a2-strip") -> dict:
    """total_upper over eta at fixed eps; reports the minimiser and whether it is interior."""
    rows = []
    for eta in etas:
        try:
            eb = tube_energy(build_tube(scene, link, eta, eps, strip_policy))
        except (ValidationError, TubesOverlap, StripConditionFailed) as exc:
            rows.append({"eta": float(eta), "total": None, "error": type(exc).__name__})
            continue
        rows.append({"eta": float(eta), "total": eb.total_upper, "ln_term": eb.tube_log_term, "caps": eb.cap_bound})
    valid = [r for r in rows if r["total"] is not None]
    if not valid:
        return {"rows": rows, "argmin": None, "interior": False}
    i = int(np.argmin([r["total"] for r in valid]))
    return {"rows": rows, "argmin": valid[i]["eta"], "interior": 0 < i < len(valid) - 1}
