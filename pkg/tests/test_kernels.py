import numpy as np
import pytest

from pinned_gl import _kernels, metric
from pinned_gl.acceptance import oracle_scene

compiled = pytest.importorskip("pinned_gl._core")


def test_backend_selected_at_import():
    assert _kernels.BACKEND in ("compiled", "python")
    assert _kernels.get("python").BACKEND == "python"
    assert _kernels.get("compiled").BACKEND == "compiled"


def test_distance_field_backends_agree(sym, rng):
    scene, sing = sym
    P = rng.uniform(-1, 1, (3000, 3))
    a = metric.distance_field(scene, sing.positives[0], P, backend="compiled")
    b = metric.distance_field(scene, sing.positives[0], P, backend="python")
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_ball_source_backends_agree(two_pair, rng):
    scene, _ = two_pair
    P = rng.uniform(-1, 1, (2000, 3))
    kw = dict(rho=0.05, nphi=1024)
    a = metric.distance_field(scene, [0.0, 0.7, 0.1], P, backend="compiled", **kw)
    b = metric.distance_field(scene, [0.0, 0.7, 0.1], P, backend="python", **kw)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_lattice_backends_agree():
    scene = oracle_scene(0.3)
    T = np.array([[-0.5, 0.2, 0.0], [0.1, -0.6, 0.3]])
    a = metric.lattice_oracle_distances(scene, [0.6, 0.0, 0.0], T, 0.2, stencil="26", backend="compiled")
    b = metric.lattice_oracle_distances(scene, [0.6, 0.0, 0.0], T, 0.2, stencil="26", backend="python")
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_thread_count_from_environment(monkeypatch, sym, rng):
    scene, sing = sym
    P = rng.uniform(-1, 1, (30000, 3))
    one = metric.distance_field(scene, sing.positives[0], P)
    monkeypatch.setenv("PINNED_GL_THREADS", "4")
    assert _kernels.threads() == 4
    np.testing.assert_array_equal(metric.distance_field(scene, sing.positives[0], P), one)
    monkeypatch.setenv("PINNED_GL_THREADS", "junk")
    assert _kernels.threads() == 1
