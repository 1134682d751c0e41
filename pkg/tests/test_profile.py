import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinned_gl import profile
from pinned_gl.errors import MeshTooCoarse, NoConvergence, ShapeMismatch, TraceNotUnimodular


@pytest.fixture(scope="module")
def prof():
    return profile.solve_radial(0.5, 0.5, 2e-3)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95))
def test_heteroclinic_oracle_matches_closed_form(b):
    assert profile.heteroclinic_cost_oracle(b) == pytest.approx(profile.heteroclinic_cost_closed_form(b), abs=1e-12)


def test_heteroclinic_limits():
    assert profile.heteroclinic_cost_oracle(1.0) == 0.0
    # b -> 0 tends to the half-line costs of u^2/sqrt2 on [0, u0] and (1-u^2)/sqrt2 on [u0, 1], u0 = 1/sqrt2
    u0 = 1 / np.sqrt(2)
    c0 = (u0 ** 3 / 3 + (1 - u0) - (1 - u0 ** 3) / 3) / np.sqrt(2)
    assert profile.heteroclinic_cost_oracle(1e-6) == pytest.approx(c0, abs=1e-9)


def test_graded_mesh_contains_r0_and_is_monotone():
    m = profile.graded_mesh(0.5, 1e-3)
    assert m[0] == 0.0 and m[-1] == 1.0
    assert np.any(m == 0.5)
    assert np.all(np.diff(m) > 0)
    assert np.sum(np.abs(m - 0.5) <= 5e-4) >= 20


def test_profile_properties(prof):
    props = profile.profile_properties(prof)
    assert props["in_range"] and props["monotone"]
    assert props["U1"] == 1.0
    assert prof.residual < 1e-10
    assert prof(0.0) == pytest.approx(0.5, abs=1e-6)
    assert prof(2.0) == 1.0


def test_energy_approaches_interface_cost(prof):
    target = profile.heteroclinic_cost_oracle(0.5) * 4 * np.pi * 0.25
    assert prof.epsilon * prof.energy == pytest.approx(target, rel=0.01)


def test_random_initial_guesses_agree(prof, rng):
    for _ in range(3):
        U0 = rng.uniform(0.5, 1.0, len(prof.mesh))
        q = profile.solve_radial(0.5, 0.5, 2e-3, mesh=prof.mesh, U0=U0)
        np.testing.assert_allclose(q.U, prof.U, atol=1e-8)


def test_exponential_fit_and_concentration(prof):
    fit = profile.exponential_fit(prof)
    assert fit["gamma"] > 0 and fit["r2"] > 0.99
    assert set(fit["sides"]) == {"inner", "outer"}
    assert profile.concentration(prof)["concentrated"]


def test_mesh_too_coarse():
    with pytest.raises(MeshTooCoarse):
        profile.solve_radial(0.5, 0.5, 1e-3, mesh=np.linspace(0, 1, 101))


def test_iteration_budget():
    with pytest.raises(NoConvergence):
        profile.solve_radial(0.5, 0.5, 1e-3, max_iter=1)


def test_b_equal_one_gives_constant():
    p = profile.solve_radial(0.5, 1.0, 1e-2)
    np.testing.assert_allclose(p.U, 1.0, atol=1e-12)
    assert p.energy == pytest.approx(0.0, abs=1e-14)


def test_planar_phase_dirichlet_energy(sym):
    scene, _ = sym
    h = 1 / 32
    origin, hh, dims = profile.scene_grid(scene, h)
    f = profile.GridField3D.from_callable(origin, hh, dims, profile.planar_phase((1.0, 0.0, 0.0)))
    F = profile.discrete_energy(scene, f, 1.0, weight=lambda r: np.ones_like(r))
    assert F == pytest.approx(0.5 * 4 * np.pi / 3, rel=0.01)


def test_shape_mismatch(sym):
    scene, _ = sym
    f = profile.GridField3D.from_callable(np.zeros(3), 0.1, (3, 3, 3), lambda X: np.ones(X.shape[:-1]))
    with pytest.raises(ShapeMismatch):
        profile.discrete_energy(scene, f, 0.1)


def test_trace_check(sym):
    scene, _ = sym
    assert profile.check_trace(scene, profile.vortex_ring()) < 1e-12
    with pytest.raises(TraceNotUnimodular):
        profile.check_trace(scene, lambda X: 0.5 * np.ones(len(X)))


def test_decoupling_is_exact_for_constant_phase(sym):
    scene, _ = sym
    p = profile.solve_radial(0.5, 0.5, 0.05)
    res = profile.decoupling_residual(scene, p, lambda X: np.ones(np.shape(X)[:-1], complex), 0.05,
                                      hs=(1 / 16, 1 / 24))
    assert max(r["residual"] for r in res["rows"]) < 1e-12
