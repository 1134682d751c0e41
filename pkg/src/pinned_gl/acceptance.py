"""The eleven acceptance checks, shared by the CLI and the test suite."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from . import connection as conn_mod
from . import energy, metric, profile, structure
from .geometry import ConvexBody, Scene, SingularityData, make_scene, symmetric_scene, two_pair_scene


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    runtime: float
    limit: float
    details: dict = field(default_factory=dict)

    @property
    def within_time(self) -> bool:
        return self.runtime <= self.limit

    def line(self) -> str:
        status = "PASS" if self.passed and self.within_time else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name} ({self.runtime:.2f}s / {self.limit:.0f}s)"

    def to_json(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "runtime": self.runtime,
                "limit": self.limit, "within_time": self.within_time, "details": self.details}


def _timed(number, name, limit):
    def deco(fn):
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            passed, details = fn(*args, **kwargs)
            return CriterionResult(number, name, bool(passed), time.perf_counter() - t0, limit, details)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return deco


def _rand_ball(rng, n, center, radius):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return np.asarray(center) + radius * v * rng.uniform(0, 1, n)[:, None] ** (1 / 3)


def _detour(body: ConvexBody, x, y, n: int = 4096) -> float:
    """min over z in the ball of |x - z| + |z - y| - |x - y| (planar scan, slightly underestimated)."""
    c, R = body.center, body.radius
    u = x - c
    w = y - c
    e1 = u / np.linalg.norm(u)
    w_perp = w - (w @ e1) * e1
    e2 = w_perp / np.linalg.norm(w_perp) if np.linalg.norm(w_perp) > 1e-12 else np.cross(e1, [1, 0, 0])
    if np.linalg.norm(e2) < 1e-12:
        e2 = np.cross(e1, [0, 1, 0])
    e2 /= np.linalg.norm(e2)
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
    Z = c + R * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    val = np.linalg.norm(Z - x, axis=1) + np.linalg.norm(Z - y, axis=1)
    slack = 2 * R * (1 - np.cos(np.pi / n))  # scan resolution
    return float(val.min() - slack - np.linalg.norm(x - y))


def straight_certified_pairs(scene: Scene, n: int, rng) -> list:
    """Pairs whose straight segment is provably optimal: detour around the inclusion >= (1 - b^2) diam."""
    body = scene.inclusion
    need = (1 - scene.b2) * 2 * body.radius
    out = []
    om = scene.omega
    while len(out) < n:
        x = _rand_ball(rng, 1, om.center, om.radius)[0]
        y = x + rng.normal(size=3) * rng.uniform(0.05, 0.5)
        if not om.contains(y) or body.segment_interval(x, y) is not None:
            continue
        if _detour(body, x, y) >= need + 1e-9:
            out.append((x, y))
    return out


# ------------------------------------------------------------ 1-4: metric and assignment

@_timed(1, "metric exactness (inside / straight-certified pairs)", 1.0)
def criterion_1(seed: int = 0):
    rng = np.random.default_rng(seed)
    scene, _ = symmetric_scene()
    body = scene.inclusion
    worst_in = worst_out = 0.0
    for _ in range(20):
        x, y = _rand_ball(rng, 2, body.center, body.radius)
        if rng.uniform() < 0.25:
            x = body.center + body.radius * (x - body.center) / np.linalg.norm(x - body.center)
        worst_in = max(worst_in, abs(metric.distance(scene, x, y) - scene.b2 * np.linalg.norm(x - y)))
    for x, y in straight_certified_pairs(scene, 20, rng):
        worst_out = max(worst_out, abs(metric.distance(scene, x, y) - np.linalg.norm(x - y)))
    return worst_in <= 1e-10 and worst_out <= 1e-10, {"max_err_inside": worst_in, "max_err_straight": worst_out}


def oracle_scene(b: float) -> Scene:
    return make_scene(ConvexBody.ball([0, 0, 0], 1.0), ConvexBody.ball([0.1, 0.0, 0.05], 0.45), b)


@_timed(2, "lattice oracle equivalence (h=1/64, extended stencil)", 120.0)
def criterion_2(seed: int = 0, h: float = 1 / 64, counts=(17, 17, 16)):
    rng = np.random.default_rng(seed)
    worst, rows = 0.0, []
    for b, m in zip((0.3, 0.6, 0.9), counts):
        scene = oracle_scene(b)
        x = _rand_ball(rng, 1, [0, 0, 0], 0.95)[0]
        ys = []
        while len(ys) < m:
            y = _rand_ball(rng, 1, [0, 0, 0], 0.95)[0]
            if np.linalg.norm(y - x) >= 0.3:
                ys.append(y)
        ys = np.array(ys)
        D = metric.lattice_oracle_distances(scene, x, ys, h)
        A = np.array([metric.distance(scene, x, y) for y in ys])
        rel = np.abs(D - A) / A
        worst = max(worst, float(rel.max()))
        rows.append({"b": b, "pairs": m, "max_rel": float(rel.max()), "mean_rel": float(rel.mean())})
    return worst <= 0.02, {"max_rel": worst, "scenes": rows}


@_timed(3, "pseudometric identities for K on / off the geodesic", 10.0)
def criterion_3(seed: int = 0):
    scene, sing = symmetric_scene()
    link = conn_mod.geodesic_link(scene, sing, probe=False)
    rows, worst = [], 0.0
    for r in (1e-2, 5e-3):
        for c in ((0.2, 0, 0), (0.75, 0, 0), (0.5, 0, 0), (0, 0.6, 0), (0.3, 0.2, 0.1)):
            _, rep = conn_mod.connection_avoiding(scene, sing, (c, r), link=link)
            worst = max(worst, rep.abs_error)
            rows.append({"r": r, "center": list(c), "case": rep.case, "expected": rep.expected,
                         "computed": rep.computed, "abs_error": rep.abs_error})
    scene2, sing2 = two_pair_scene()
    link2 = conn_mod.geodesic_link(scene2, sing2, probe=False)
    g = link2.curves[0]
    for r in (1e-2, 5e-3):
        for t in (0.25, 0.5):
            k = int(np.argmax([np.linalg.norm(b - a) for a, b in zip(g.vertices[:-1], g.vertices[1:])]))
            c = (1 - t) * g.vertices[k] + t * g.vertices[k + 1]
            _, rep = conn_mod.connection_avoiding(scene2, sing2, (c, r), link=link2)
            worst = max(worst, rep.abs_error)
            rows.append({"r": r, "center": c.tolist(), "case": rep.case, "expected": rep.expected,
                         "computed": rep.computed, "abs_error": rep.abs_error, "scene": "two_pair"})
    cases = {row["case"] for row in rows}
    ok = worst <= 1e-6 and {"on_link_interior", "on_link_boundary", "off_link"} <= cases
    return ok, {"max_abs_error": worst, "rows": rows}


def random_metric_instance(rng, k: int) -> np.ndarray:
    X = rng.uniform(0.1, 1.0, (2 * k, 2 * k))
    X = X + X.T
    np.fill_diagonal(X, 0.0)
    for m in range(2 * k):
        X = np.minimum(X, X[:, m:m + 1] + X[m:m + 1, :])
    return X


@_timed(4, "assignment vs brute force, zero duality gap", 30.0)
def criterion_4(seed: int = 0, n: int = 100):
    rng = np.random.default_rng(seed)
    mismatches = 0
    worst_gap = worst_lip = 0.0
    for t in range(n):
        k = 1 + t % 7
        M = random_metric_instance(rng, k)
        D = M[:k, k:]
        c = conn_mod.minimal_connection(D)
        best = min(float(D[np.arange(k), p].sum()) for p in permutations(range(k)))
        if abs(best - c.length) > 1e-12 * max(1, best):
            mismatches += 1
        pot = conn_mod.dual_potential(D, c, full_metric=M)
        worst_gap = max(worst_gap, abs(pot.gap - c.length))
        worst_lip = min(worst_lip, pot.lipschitz_slack)
    ok = mismatches == 0 and worst_gap <= 1e-9 and worst_lip >= -1e-9
    return ok, {"mismatches": mismatches, "max_gap_error": worst_gap, "min_lipschitz_slack": worst_lip}


# ------------------------------------------------------------ 5-6: structure functions

def _structure_fields(cache: dict, h: float, seed: int):
    if "fields" in cache:
        return cache["fields"]
    out = []
    eta = 0.05
    for name, (scene, sing) in (("symmetric", symmetric_scene()), ("two_pair", two_pair_scene())):
        L = conn_mod.minimal_connection(conn_mod.connection_matrix(scene, sing)).length
        f = structure.structure_function(scene, sing, eta, h=h, seed=seed)
        out.append({"scene": name, "variant": "global", "L": L, "target": L, "field": f, "k": sing.k})
    scene, sing = symmetric_scene()
    link = conn_mod.geodesic_link(scene, sing, probe=False)
    r = 0.01
    for c in ((0.0, 0.6, 0.0), (0.2, 0.0, 0.0), (0.5, 0.0, 0.0)):
        _, rep = conn_mod.connection_avoiding(scene, sing, (c, r), link=link)
        f = structure.structure_function_constant_on_K(scene, sing, (c, r), eta, h=h, seed=seed, target=rep.expected)
        out.append({"scene": "symmetric", "variant": rep.case, "L": link.connection.length, "target": rep.expected,
                    "field": f, "k": 1, "K": (c, r)})
    cache["fields"] = out
    return out


@_timed(5, "structure function certificates (global and constant on K)", 300.0)
def criterion_5(seed: int = 0, h: float = 1 / 64, cache: dict | None = None):
    cache = {} if cache is None else cache
    rows, ok = [], True
    for item in _structure_fields(cache, h, seed):
        cert = item["field"].certificate
        good = cert["lipschitz_metric_slack"] <= 2 * h and cert["gap"] >= item["target"] - cert["eta"]
        if "K" in item:
            good = good and cert["constant_on_K"]
        ok = ok and good
        rows.append({"scene": item["scene"], "variant": item["variant"], "gap": cert["gap"],
                     "target": item["target"], "slack": cert["lipschitz_metric_slack"], "delta": cert["delta"],
                     "constant_on_K": cert.get("constant_on_K"), "passed": good})
    return ok, {"rows": rows}


@_timed(6, "coarea inner bound on every generated field", 5.0)
def criterion_6(seed: int = 0, h: float = 1 / 64, cache: dict | None = None):
    if cache is None or "fields" not in cache:
        raise RuntimeError("criterion 6 integrates the fields produced by criterion 5; run it first")
    rows, ok = [], True
    for item in cache["fields"]:
        pv = item["field"].point_values
        for rho in (0.1, 0.01):
            cb = structure.coarea_degree_bound(pv["positive"], pv["negative"], rho, eta=0.05, L=item["target"])
            ok = ok and cb.holds
            rows.append({"scene": item["scene"], "variant": item["variant"], "rho": rho,
                         "integral": cb.integral, "bound": cb.bound, "holds": cb.holds, "chain": cb.chain_holds})
    return ok, {"rows": rows}


# ------------------------------------------------------------ 7-8: profile

@_timed(7, "radial profile: range, monotonicity, energy, exponential fit", 60.0)
def criterion_7(seed: int = 0, r0: float = 0.5, b: float = 0.5):
    c = profile.heteroclinic_cost_oracle(b)
    target = c * 4 * np.pi * r0 * r0
    rows, ok = [], True
    for eps in (4e-3, 2e-3, 1e-3):
        p = profile.solve_radial(r0, b, eps)
        props = profile.profile_properties(p)
        fit = profile.exponential_fit(p)
        rel = abs(eps * p.energy - target) / target
        good = props["in_range"] and props["monotone"] and props["U1"] == 1.0 and rel <= 0.1 \
            and fit["gamma"] > 0 and fit["r2"] > 0.99
        ok = ok and good
        rows.append({"eps": eps, "eps_energy": eps * p.energy, "target": target, "rel_err": rel,
                     "gamma": fit["gamma"], "r2": fit["r2"], **props})
    return ok, {"c_b": c, "rows": rows}


@_timed(8, "decoupling identity residual order in h", 180.0)
def criterion_8(seed: int = 0, eps: float = 0.05):
    scene, _ = symmetric_scene()
    p = profile.solve_radial(0.5, 0.5, eps)
    out, ok = {}, True
    for name, v in (("planar_phase", profile.planar_phase()), ("vortex_ring", profile.vortex_ring())):
        res = profile.decoupling_residual(scene, p, v, eps)
        out[name] = {"order": res["order"], "residuals": [r["residual"] for r in res["rows"]]}
        ok = ok and res["order"] >= 0.9
    return ok, out


# ------------------------------------------------------------ 9-11: energy and dumbbell

@_timed(9, "energy slope, symmetric scene (exact profile)", 10.0)
def criterion_9(seed: int = 0, eta: float = 0.12):
    scene, sing = symmetric_scene()
    d = metric.distance(scene, sing.positives[0], sing.negatives[0])
    res = energy.asymptotic_slope(scene, sing, [1e-2, 1e-3, 1e-4], eta, "exact-profile")
    target = np.pi * d
    rel = abs(res["slope"] - target) / target
    return rel <= 0.05 and res["bounded"], {"slope": res["slope"], "target": target, "rel_err": rel,
                                            "bounded": res["bounded"], "normalized_gaps": res["normalized_gaps"]}


@_timed(10, "energy slope, two-dipole scene with a refracted link", 60.0)
def criterion_10(seed: int = 0, eta: float = 0.02):
    scene, sing = two_pair_scene()
    link = conn_mod.geodesic_link(scene, sing, probe=False)
    ladder = [1e-4, 1e-5, 1e-6]
    res = energy.asymptotic_slope(scene, sing, ladder, eta, "a2-strip", link=link)
    tube = energy.build_tube(scene, link, eta, ladder[0])
    checks = [energy.strip_check(scene, c, ladder[0]) for c in tube.curves]
    ok = res["rel_err"] <= 0.05 and all(c["ok"] for c in checks)
    return ok, {"slope": res["slope"], "target": res["target"], "rel_err": res["rel_err"],
                "strip_C": [c["C"] for c in checks], "strip_ratio": [c["ratio"] for c in checks],
                "curve_kinds": [c.kind for c in link.curves]}


def _axis_integral_exact(p: profile.RadialProfile) -> float:
    """2 int_0^1 U^2 for the piecewise linear U: Simpson per cell is exact for quadratics."""
    r, U = p.mesh, p.U
    hcell = np.diff(r)
    Um = 0.5 * (U[:-1] + U[1:])
    return float(2 * np.sum(hcell / 6 * (U[:-1] ** 2 + 4 * Um ** 2 + U[1:] ** 2)))


@_timed(11, "dumbbell function", 5.0)
def criterion_11(seed: int = 0):
    rng = np.random.default_rng(seed)
    scene, _ = symmetric_scene()
    p = profile.solve_radial(0.5, 0.5, 1e-2)
    rows, ok = [], True
    for label, prof, exact in (("U=1", None, 2.0), ("U_eps", p, _axis_integral_exact(p))):
        for M in ((0.2, 0.5, 0.1), (-0.4, 0.0, 0.6)):
            db = structure.dumbbell(scene, M, prof)
            gap = float(db(np.array([db.p]))[0] - db(np.array([db.n]))[0])
            zr = db.zero_neighbourhood_radius()
            Q = _rand_ball(rng, 300, db.M, zr * (1 - 1e-9))
            zero_ok = bool(np.all(db(Q) == 0.0)) and zr > 0
            ts = np.concatenate([np.linspace(db.bottom, 0, 12)[1:-1], np.linspace(0, db.top, 12)[1:-1]])
            radii = [db.level_radius(t)[1] for t in ts]
            good = abs(gap - exact) <= 1e-6 and zero_ok and min(radii) >= 1.0
            ok = ok and good
            rows.append({"profile": label, "M": list(M), "gap": gap, "axis_integral": exact,
                         "abs_err": abs(gap - exact), "zero_radius": zr, "zero_ok": zero_ok,
                         "min_level_radius": float(min(radii))})
    return ok, {"rows": rows}


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11]
SUITES = {"symmetric": [1, 3, 7, 9, 11], "general": [2, 4, 5, 6, 8, 10], "all": list(range(1, 12))}


def run(numbers=None, seed: int = 0, echo=None) -> list[CriterionResult]:
    numbers = list(range(1, 12)) if numbers is None else sorted(numbers)
    if 6 in numbers and 5 not in numbers:
        numbers = sorted(numbers + [5])
    cache: dict = {}
    results = []
    for n in numbers:
        fn = CRITERIA[n - 1]
        res = fn(seed=seed, cache=cache) if n in (5, 6) else fn(seed=seed)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
