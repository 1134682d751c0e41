import numpy as np
import pytest

from pinned_gl.errors import DeltaTooLarge, InvalidScene, InvalidSingularities
from pinned_gl.geometry import (ConvexBody, clearance, dilate_inclusion, make_scene, make_singularities, pinning,
                                scene_from_json, scene_to_json, validate_scene)

CUBE = [[1, 0, 0, 0.3], [-1, 0, 0, 0.3], [0, 1, 0, 0.3], [0, -1, 0, 0.3], [0, 0, 1, 0.3], [0, 0, -1, 0.3]]


def test_ball_projection_and_signed_distance():
    B = ConvexBody.ball([1, 0, 0], 0.5)
    assert B.signed_distance([2.0, 0, 0]) == pytest.approx(0.5)
    assert B.signed_distance([1.0, 0, 0]) == pytest.approx(-0.5)
    np.testing.assert_allclose(B.project([3.0, 0, 0]), [1.5, 0, 0])
    np.testing.assert_allclose(B.project([1.1, 0, 0], boundary=True), [1.5, 0, 0])


def test_cube_distance_to_corner():
    C = ConvexBody.polytope(CUBE)
    assert C.distance([1.3, 1.3, 1.3]) == pytest.approx(np.sqrt(3))
    assert C.signed_distance([0, 0, 0]) == pytest.approx(-0.3)
    np.testing.assert_allclose(C.project([1.0, 0.1, -2.0]), [0.3, 0.1, -0.3])
    assert len(C.vertices()) == 8


def test_cube_dilation_is_rounded():
    C = ConvexBody.polytope(CUBE).dilate(0.1)
    corner = np.array([0.3, 0.3, 0.3]) + 0.1 / np.sqrt(3)
    assert abs(C.signed_distance(corner)) < 1e-12


def test_segment_interval_ball():
    B = ConvexBody.ball([0, 0, 0], 0.5)
    t0, t1 = B.segment_interval([-1, 0, 0], [1, 0, 0])
    assert (t0, t1) == pytest.approx((0.25, 0.75))
    assert B.segment_interval([-1, 0.6, 0], [1, 0.6, 0]) is None


def test_pinning_boundary_counts_as_outside(sym):
    scene, _ = sym
    assert pinning(scene, [0, 0, 0]) == 0.5
    assert pinning(scene, [0.5, 0, 0]) == 1.0
    np.testing.assert_allclose(pinning(scene, [[0, 0, 0], [0.9, 0, 0]]), [0.5, 1.0])


def test_clearance_and_dilation_limit(sym):
    scene, _ = sym
    assert clearance(scene.omega, scene.inclusion) == pytest.approx(0.5)
    assert dilate_inclusion(scene, 0.1).radius == pytest.approx(0.6)
    with pytest.raises(DeltaTooLarge):
        dilate_inclusion(scene, 0.25)


@pytest.mark.parametrize("incl,b", [(ConvexBody.ball([0, 0, 0], 1.2), 0.5), (ConvexBody.ball([0.6, 0, 0], 0.5), 0.5),
                                    (ConvexBody.ball([0, 0, 0], 0.5), 1.0), (ConvexBody.ball([0, 0, 0], 0.5), 0.0)])
def test_invalid_scenes(incl, b):
    with pytest.raises(InvalidScene):
        make_scene(ConvexBody.ball([0, 0, 0], 1.0), incl, b)


def test_polytope_inclusion_warns_not_strict():
    with pytest.warns(UserWarning):
        scene = make_scene(ConvexBody.ball([0, 0, 0], 1.0), ConvexBody.polytope(CUBE), 0.6)
    with pytest.warns(UserWarning):
        rep = validate_scene(scene)
    assert rep.valid and not rep.strictly_convex_inclusion


def test_singularity_validation(sym):
    scene, _ = sym
    with pytest.raises(InvalidSingularities):
        make_singularities(scene, [[1, 0, 0]], [[0.5, 0, 0]])
    with pytest.raises(InvalidSingularities):
        make_singularities(scene, [[1, 0, 0]], [[-1, 0, 0], [0, 1, 0]])
    with pytest.raises(InvalidSingularities):
        make_singularities(scene, [[1, 0, 0]], [[1, 0, 0]])


def test_scene_json_roundtrip(two_pair):
    scene, sing = two_pair
    s2, g2 = scene_from_json(scene_to_json(scene, sing))
    assert s2.b == scene.b
    np.testing.assert_array_equal(g2.positives, sing.positives)
    np.testing.assert_array_equal(g2.negatives, sing.negatives)


def test_scene_json_missing_key():
    with pytest.raises(InvalidScene):
        scene_from_json({"omega": {"type": "ball", "center": [0, 0, 0], "radius": 1}})
