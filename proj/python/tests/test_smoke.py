"""Smoke tests for the python bindings.

The heavyweight verification lives in the C++ suites; these check that the
bound operations are wired up and return sane values.
"""

import math

import numpy as np
import pytest

import defsurf


def test_icosphere_counts():
    v, f = defsurf.icosphere(0)
    assert v.shape == (12, 3)
    assert f.shape[0] == 20
    v4, _ = defsurf.icosphere(4)
    assert v4.shape[0] == 2562
    assert np.allclose(np.linalg.norm(v4, axis=1), 1.0, atol=1e-12)


def test_subdivide_counts():
    v, f = defsurf.icosphere(0)
    v2, f2 = defsurf.subdivide(v, f, True)
    assert v2.shape[0] == 42
    assert f2.shape[0] == 80


def test_quad_sphere():
    v, f = defsurf.quad_sphere(16)
    assert v.shape[0] == 6 * 16 * 16 + 2
    assert f.shape == (6 * 16 * 16, 4)
    assert defsurf.euler_characteristic(v, f) == 2


def test_triangle_icr():
    r, big_r, icr = defsurf.triangle_icr(
        np.array([0.0, 0.0, 0.0]),
        np.array([1.0, 0.0, 0.0]),
        np.array([0.5, math.sqrt(3.0) / 2.0, 0.0]),
    )
    assert icr == pytest.approx(1.0)
    assert big_r == pytest.approx(1.0 / math.sqrt(3.0))


def test_chamfer():
    p = np.random.default_rng(0).normal(size=(50, 3))
    assert defsurf.chamfer_l1(p, p) == 0.0
    q = p + np.array([0.0, 0.0, 1.0])
    assert defsurf.chamfer_l1(p, q) <= 1.0


def test_eigenbasis_sphere_spectrum():
    v, f = defsurf.icosphere(2)
    lam, phi = defsurf.eigenbasis(v, f, 9)
    assert lam[0] == pytest.approx(0.0, abs=1e-8)
    # l = 1 triplet near l(l+1) = 2
    assert np.allclose(lam[1:4], 2.0, rtol=0.03)
    assert phi.shape == (v.shape[0], 9)


def test_rff_encode_bounds():
    x = np.random.default_rng(1).normal(size=(10, 3))
    enc = defsurf.rff_encode(x, 32, 0.5, 7)
    assert enc.shape == (10, 32)
    assert np.all(np.abs(enc) <= 1.0)
    pair_sum = enc[:, 0::2] ** 2 + enc[:, 1::2] ** 2
    assert np.allclose(pair_sum, 1.0, atol=1e-12)


def test_octave_encode_width():
    x = np.zeros((2, 3))
    enc = defsurf.octave_encode(x, 4)
    assert enc.shape == (2, 24)
    assert np.allclose(enc[:, 0::2], 1.0)


def test_delta_schedule():
    assert defsurf.delta_schedule(500, 500) == 0.0
    assert defsurf.delta_schedule(550, 500) == pytest.approx(0.05)
    assert defsurf.delta_schedule(10000, 500) == pytest.approx(0.1)


def test_pipeline_roundtrip(tmp_path):
    scene_dir = tmp_path / "scene"
    out = defsurf.gen_scene("ellipsoid", views=6, resolution=24,
                            out_dir=scene_dir, seed=3)
    assert out["views"] == 6

    config = """
    {
      "schedule": {"coarse_iters": 3, "fine_iters": 3, "coarse_mesh_level": 1,
                    "fine_mesh_level": 2, "views_per_step": 3},
      "encoder": {"basis_mesh_level": 2, "eigen_count": 16, "low_band": 12,
                   "high_begin": 12, "high_end": 16,
                   "coarse_rff_width": 8, "fine_rff_width": 8},
      "shader": {"z_width": 4, "hidden": 8, "hidden_layers": 1}
    }
    """
    run_dir = tmp_path / "run"
    result = defsurf.train(scene_dir, run_dir, config_json=config)
    assert result["steps"] == 6

    obj = tmp_path / "mesh.obj"
    report = defsurf.extract(result["checkpoint"], obj, tri_level=2)
    assert report["vertices"] == 162
    assert report["euler_characteristic"] == 2
    v, f = defsurf.import_obj(obj)
    assert v.shape[0] == 162

    metrics = defsurf.evaluate(result["checkpoint"], scene_dir, tri_level=2)
    assert metrics["chamfer_l1"] > 0.0
    assert "psnr_mean" in metrics
