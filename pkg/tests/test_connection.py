from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from pinned_gl import connection as cm
from pinned_gl.acceptance import random_metric_instance
from pinned_gl.errors import KTouchesSingularity, NegativeEntry, NonSquare


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_matches_brute_force_and_scipy(k, seed):
    rng = np.random.default_rng(seed)
    D = rng.uniform(0, 1, (k, k))
    c = cm.minimal_connection(D)
    _, best = cm.brute_force_connection(D)
    r, col = linear_sum_assignment(D)
    assert c.length == pytest.approx(best, abs=1e-12)
    assert c.length == pytest.approx(D[r, col].sum(), abs=1e-12)
    assert sorted(c.sigma) == list(range(k))


def test_ties_pick_lexicographic_smallest():
    assert cm.minimal_connection(np.ones((3, 3))).sigma == (0, 1, 2)
    D = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert cm.minimal_connection(D).sigma == (0, 1)
    D = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
    opt = min(p for p in permutations(range(3)) if D[np.arange(3), p].sum() == 3.0)
    assert cm.minimal_connection(D).sigma == opt


def test_invalid_matrices():
    with pytest.raises(NonSquare):
        cm.minimal_connection(np.ones((2, 3)))
    with pytest.raises(NegativeEntry):
        cm.minimal_connection(np.array([[1.0, -1.0], [0.0, 1.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_dual_potential_zero_gap(k, seed):
    M = random_metric_instance(np.random.default_rng(seed), k)
    D = M[:k, k:]
    c = cm.minimal_connection(D)
    for full in (None, M):
        pot = cm.dual_potential(D, c, full_metric=full)
        assert pot.gap == pytest.approx(c.length, abs=1e-9)
        assert pot.lipschitz_slack >= -1e-9
        assert pot.negatives[0] == 0.0


def test_bipartite_closure_is_a_metric():
    D = np.array([[1.0, 3.0], [2.0, 1.0]])
    M = cm.bipartite_closure(D)
    assert M[0, 1] == pytest.approx(3.0)  # p1 -> n1 -> p2
    assert M[2, 3] == pytest.approx(3.0)  # n1 -> p2 -> n2
    assert np.all(M[:, None, :] <= M[:, :, None] + M[None, :, :] + 1e-12)


def test_symmetric_link(sym):
    scene, sing = sym
    link = cm.geodesic_link(scene, sing, probe=True, trials=3)
    assert link.connection.length == pytest.approx(1.25, abs=1e-12)
    assert link.unique_flag == "unique"
    assert link.curves[0].kind == "three_segment"


def test_two_pair_link(two_pair):
    scene, sing = two_pair
    link = cm.geodesic_link(scene, sing, probe=False)
    brute = cm.brute_force_connection(cm.connection_matrix(scene, sing))
    assert link.connection.sigma == brute[0]
    assert link.connection.length == pytest.approx(brute[1], abs=1e-12)
    assert sum(c.kind != "straight" for c in link.curves) >= 1


@pytest.mark.parametrize("centre,case,expected", [((0.2, 0, 0), "on_link_interior", 1.2),
                                                  ((0.5, 0, 0), "on_link_boundary", 1.125),
                                                  ((0.75, 0, 0), "on_link_interior", 1.05),
                                                  ((0, 0.6, 0), "off_link", 1.25)])
def test_avoiding_closed_forms(sym, centre, case, expected):
    scene, sing = sym
    _, rep = cm.connection_avoiding(scene, sing, (centre, 0.1))
    assert rep.case == case
    assert rep.expected == pytest.approx(expected, abs=1e-12)
    assert rep.computed == pytest.approx(expected, abs=1e-6)


def test_avoiding_rejects_singular_points(sym):
    scene, sing = sym
    with pytest.raises(KTouchesSingularity):
        cm.connection_avoiding(scene, sing, ((0.95, 0, 0), 0.1))


def test_polyline_distance():
    P = np.array([[0.0, 0, 0], [1.0, 0, 0]])
    Q = np.array([[0.5, 1.0, 0.0], [0.5, 2.0, 0.0]])
    assert cm.polyline_distance(P, Q) == pytest.approx(1.0)
    R = np.array([[0.5, -1.0, 1.0], [0.5, 1.0, 1.0]])
    assert cm.polyline_distance(P, R) == pytest.approx(1.0)


def test_stability_threshold_symmetric(sym):
    scene, sing = sym
    delta, sigma = cm.stability_threshold(scene, sing, tol=1e-2)
    assert sigma == (0,)
    assert delta > 0
