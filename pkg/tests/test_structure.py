import numpy as np
import pytest

from scipy.integrate import trapezoid

from pinned_gl import connection as cm
from pinned_gl import metric, structure
from pinned_gl.errors import (EtaBudgetInfeasible, KernelWiderThanMargin, KTouchesSingularity, MOnAxis,
                              ValidationError)
from pinned_gl.profile import solve_radial
from pinned_gl.structure import GridSpec, ScalarFieldGrid

H = 1 / 32


@pytest.fixture(scope="module")
def sym_field(sym):
    scene, sing = sym
    return structure.structure_function(scene, sing, 0.05, h=H, npairs=200)


def test_grid_nodes_are_x_fastest(sym):
    scene, _ = sym
    spec = GridSpec.around(scene, 0.25)
    P = spec.nodes()
    assert len(P) == np.prod(spec.dims)
    assert P[1, 0] - P[0, 0] == pytest.approx(0.25)
    assert P[1, 1] == P[0, 1]
    np.testing.assert_allclose(spec.node(np.arange(len(P))), P)
    lo, hi = spec.margin_box
    assert np.all(lo <= -1.0 - 0.5 + 1e-12) and np.all(hi >= 1.0 + 0.5 - 1e-12)


def test_sample_is_exact_for_affine_fields():
    spec = GridSpec(np.zeros(3), 0.1, (6, 5, 4))
    P = spec.nodes()
    vals = (P @ [1.0, -2.0, 0.5] + 3).reshape(4, 5, 6)
    fld = ScalarFieldGrid(spec.origin, spec.h, spec.dims, vals)
    q = np.array([[0.23, 0.17, 0.05], [0.41, 0.33, 0.29]])
    np.testing.assert_allclose(fld.sample(q), q @ [1.0, -2.0, 0.5] + 3, atol=1e-12)


def test_bump_has_unit_mass_and_symmetry():
    w = structure.bump_weights(0.1, 0.025)
    assert w.shape == (9, 9, 9)
    assert w.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(w, w[::-1, ::-1, ::-1])
    assert structure.bump_weights(0.01, 0.025).shape == (1, 1, 1)


def test_mollify_rules():
    spec = GridSpec(np.zeros(3), 0.1, (5, 5, 5))
    fld = ScalarFieldGrid(spec.origin, spec.h, spec.dims, np.ones((5, 5, 5)))
    out = structure.mollify(fld, 0.05, 0.25)
    np.testing.assert_allclose(out.values, 0.75)
    out = structure.mollify(fld, 0.15, 0.5)
    np.testing.assert_allclose(out.values, 0.5)
    with pytest.raises(KernelWiderThanMargin):
        structure.mollify(fld, 0.5, 0.1)
    with pytest.raises(ValidationError):
        structure.mollify(fld, 0.05, 1.5)


def test_symmetric_field_certificates(sym_field):
    cert = sym_field.certificate
    assert cert["gap_ok"] and cert["slack_ok"]
    assert cert["gap"] >= 1.25 - 0.05
    assert cert["gap"] <= 1.25 + 1e-9
    assert cert["lipschitz_metric_slack"] <= 2 * H
    assert cert["gradient_excess"] <= 1e-9
    assert cert["delta_prime"] == pytest.approx(2 * cert["delta"])


def test_field_is_metric_lipschitz_on_random_pairs(sym, sym_field, rng):
    scene, _ = sym
    d = sym_field.certificate["delta"]
    P = rng.uniform(-0.9, 0.9, (30, 3))
    P = P[np.linalg.norm(P, axis=1) < 0.95]
    v = sym_field.sample(P)
    for i in range(len(P) - 1):
        assert abs(v[i] - v[i + 1]) <= metric.distance(scene, P[i], P[i + 1], d) + 2 * H


def test_extension_is_exact_at_points(sym):
    scene, sing = sym
    M = structure._metric_on_points(scene, sing, 0.0)
    c = cm.minimal_connection(M[:1, 1:])
    xi0 = cm.dual_potential(M[:1, 1:], c, full_metric=M)
    ext = structure.PotentialExtension(scene, sing, xi0, 0.0)
    np.testing.assert_allclose(ext(sing.points()), ext.at_points(), atol=1e-9)
    np.testing.assert_allclose(ext.at_points(), xi0.values(), atol=1e-12)


def test_eta_budget_failure(sym):
    scene, sing = sym
    with pytest.raises(EtaBudgetInfeasible):
        structure.structure_function(scene, sing, 0.01, delta=0.1, h=1 / 16, npairs=20)


def test_compact_variant_is_constant_on_K(sym):
    scene, sing = sym
    K = ((0.0, 0.6, 0.0), 0.05)
    fld = structure.structure_function_constant_on_K(scene, sing, K, 0.05, h=H, npairs=100)
    assert fld.certificate["constant_on_K"]
    assert structure.constant_on_ball(fld, *K)
    with pytest.raises(KTouchesSingularity):
        structure.structure_function_constant_on_K(scene, sing, ((0.95, 0, 0), 0.1), 0.05, h=H)


def test_coarea_piecewise_integral_by_hand():
    cb = structure.coarea_degree_bound([1.0], [0.0], 0.1)
    # S = 1 on (0.1, 0.9), zero elsewhere
    assert cb.integral == pytest.approx(0.8)
    assert cb.bound == pytest.approx(0.8)
    assert cb.holds
    cb = structure.coarea_degree_bound([1.0, 3.0], [0.5, 2.0], 0.01)
    assert cb.integral == pytest.approx(1.5 - 0.04)
    assert cb.holds


def test_coarea_on_field(sym_field):
    pv = sym_field.point_values
    for rho in (0.1, 0.01):
        cb = structure.coarea_degree_bound(pv["positive"], pv["negative"], rho, eta=0.05, L=1.25)
        assert cb.holds and cb.chain_holds


def test_dumbbell_constant_weight():
    db = structure.dumbbell(None, (0.2, 0.5, 0.1))
    assert db.top - db.bottom == pytest.approx(2.0)
    assert db.x0 == pytest.approx(0.2)
    assert db(np.array([db.M]))[0] == 0.0
    side, r = db.level_radius(0.5)
    assert side == "+" and r == pytest.approx(2 - 0.7)
    with pytest.raises(MOnAxis):
        structure.dumbbell(None, (0.3, 0.0, 0.0))


def test_dumbbell_with_profile_gap_is_axis_integral(sym):
    scene, _ = sym
    p = solve_radial(0.5, 0.5, 1e-2)
    db = structure.dumbbell(scene, (-0.4, 0.0, 0.6), p)
    r = np.linspace(0, 1, 200001)
    ref = 2 * trapezoid(p(r) ** 2, r)
    assert db.top - db.bottom == pytest.approx(ref, abs=1e-6)
    assert db.top - db.bottom < 2.0
