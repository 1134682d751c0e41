import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from pinned_gl import metric
from pinned_gl.acceptance import oracle_scene, straight_certified_pairs
from pinned_gl.geometry import ConvexBody, make_scene


def sphere_point(c, R, ang):
    th, ph = ang
    return c + R * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])


def brute_refraction(scene, x, y, starts=24, seed=0):
    """Best of straight, one-crossing and two-crossing paths, each optimized over sphere angles."""
    body = scene.inclusion
    c, R, b2 = body.center, body.radius, scene.b2
    rng = np.random.default_rng(seed)
    best = metric.weighted_length(scene, np.array([x, y]))
    wy = b2 if body.contains(y) else 1.0
    for _ in range(starts):
        if wy < 1:
            a0 = rng.uniform([0, 0], [np.pi, 2 * np.pi])
            f1 = minimize(lambda a: np.linalg.norm(x - sphere_point(c, R, a)) + wy * np.linalg.norm(
                sphere_point(c, R, a) - y), a0, method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
            best = min(best, f1.fun)
        a1 = rng.uniform([0, 0, 0, 0], [np.pi, 2 * np.pi, np.pi, 2 * np.pi])

        def f(a):
            z1, z2 = sphere_point(c, R, a[:2]), sphere_point(c, R, a[2:])
            return np.linalg.norm(x - z1) + b2 * np.linalg.norm(z1 - z2) + np.linalg.norm(z2 - y)
        best = min(best, minimize(f, a1, method="Nelder-Mead",
                                  options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 8000}).fun)
    return best


def test_symmetric_axis_values(sym):
    scene, sing = sym
    assert metric.distance(scene, sing.positives[0], sing.negatives[0]) == pytest.approx(1.25, abs=1e-12)
    assert metric.distance(scene, [-0.9, 0, 0], [0.9, 0, 0]) == pytest.approx(1.05, abs=1e-12)
    assert metric.distance(scene, [0, 0, 0], [1, 0, 0]) == pytest.approx(0.625, abs=1e-12)


def test_inside_pairs_scale_by_b2(sym, rng):
    scene, _ = sym
    for _ in range(10):
        x, y = rng.uniform(-0.28, 0.28, (2, 3))
        assert metric.distance(scene, x, y) == pytest.approx(0.25 * np.linalg.norm(x - y), abs=1e-12)


def test_certified_straight_pairs(sym, rng):
    scene, _ = sym
    for x, y in straight_certified_pairs(scene, 5, rng):
        g = metric.geodesic(scene, x, y)
        assert g.kind == "straight"
        assert g.weighted_length == pytest.approx(np.linalg.norm(x - y), abs=1e-12)


@pytest.mark.parametrize("x,y", [([0.9, 0.3, 0.1], [0.1, -0.2, 0.05]), ([0.8, 0.5, 0.0], [-0.7, 0.4, 0.3]),
                                 ([0.2, 0.9, -0.3], [0.0, -0.9, 0.2])])
def test_geodesic_matches_brute_force_refraction(x, y):
    scene = oracle_scene(0.6)
    x, y = np.array(x), np.array(y)
    d = metric.distance(scene, x, y)
    ref = brute_refraction(scene, x, y)
    assert d <= ref + 1e-9
    assert d == pytest.approx(ref, abs=1e-7)


def test_geodesic_value_is_its_length(two_pair):
    scene, sing = two_pair
    g = metric.geodesic(scene, sing.positives[0], sing.negatives[0])
    assert metric.weighted_length(scene, g.vertices) == pytest.approx(g.weighted_length, abs=1e-12)
    assert g.phase_tags[0] == "outside"


def test_cube_through_centre():
    with pytest.warns(UserWarning):
        scene = make_scene(ConvexBody.ball([0, 0, 0], 1.0), ConvexBody.polytope(
            [[1, 0, 0, 0.3], [-1, 0, 0, 0.3], [0, 1, 0, 0.3], [0, -1, 0, 0.3], [0, 0, 1, 0.3], [0, 0, -1, 0.3]]), 0.6)
    assert metric.distance(scene, [-0.9, 0, 0], [0.9, 0, 0]) == pytest.approx(0.6 + 0.36 * 0.6 + 0.6, abs=1e-9)


points = st.tuples(*[st.floats(-0.55, 0.55, allow_nan=False)] * 3).map(np.array)


@settings(max_examples=25, deadline=None)
@given(points, points, points)
def test_triangle_inequality_and_symmetry(x, y, z):
    scene = oracle_scene(0.6)
    dxy, dyx = metric.distance(scene, x, y), metric.distance(scene, y, x)
    assert dxy == pytest.approx(dyx, abs=1e-9)
    assert dxy <= metric.distance(scene, x, z) + metric.distance(scene, z, y) + 1e-9
    assert 0.36 * np.linalg.norm(x - y) - 1e-12 <= dxy <= np.linalg.norm(x - y) + 1e-12


def test_distance_field_matches_pointwise(two_pair, rng):
    scene, sing = two_pair
    src = sing.positives[1]
    P = rng.uniform(-0.7, 0.7, (40, 3))
    F = metric.distance_field(scene, src, P)
    ref = np.array([metric.distance(scene, src, p) for p in P])
    np.testing.assert_allclose(F, ref, atol=1e-6)


def test_set_distance_field_matches_scan(sym, rng):
    scene, _ = sym
    K = (np.array([0.0, 0.6, 0.0]), 0.05)
    P = rng.uniform(-0.7, 0.7, (10, 3))
    ref = np.array([metric.distance_to_set(scene, p, K) for p in P])
    np.testing.assert_allclose(metric.set_distances(scene, K, P), ref, atol=1e-6)


def test_pseudo_distance_uses_free_ball(sym):
    scene, _ = sym
    K = ((0.0, 0.0, 0.0), 0.1)
    val, curve = metric.pseudo_distance(scene, K, (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0))
    assert val == pytest.approx(1.25 - 2 * 0.25 * 0.1, abs=1e-9)
    assert curve.through_K


@pytest.mark.parametrize("name,count", [("6", 6), ("18", 18), ("26", 26), ("74", 74), ("extended", 578)])
def test_stencil_sizes(name, count):
    offs = metric.stencil_offsets(name)
    assert len(offs) == count
    assert len({tuple(o) for o in offs}) == count


def test_lattice_oracle_close_to_analytic():
    scene = oracle_scene(0.6)
    x, y = np.array([0.7, 0.1, 0.0]), np.array([-0.6, -0.1, 0.1])
    d = metric.distance(scene, x, y)
    assert metric.lattice_oracle_distance(scene, x, y, 1 / 24) == pytest.approx(d, rel=0.03)


def test_dilated_bracket(two_pair):
    scene, sing = two_pair
    res = metric.dilated_distance_bracket(scene, sing.positives[0], sing.negatives[0], 0.01, 0.02)
    assert res.holds
    assert metric.distance(scene, sing.positives[0], sing.negatives[0], 0.02) <= metric.distance(
        scene, sing.positives[0], sing.negatives[0], 0.0) + 1e-12
