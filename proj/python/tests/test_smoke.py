import json

import numpy as np
import pytest

import rsmap


def test_grid_boundaries():
    grid = json.dumps({"x_min": 0.0, "y_min": 0.0, "cell_size_x": 0.5, "cell_size_y": 0.5,
                       "cols": 4, "rows": 4})
    assert rsmap.grid_index(0.0, 0.0, grid) == (0, 0)
    assert rsmap.grid_index(0.5, 0.0, grid) == (1, 0)
    assert rsmap.grid_index(2.0, 0.0, grid) is None


def test_mean_intensity_cell():
    grid = json.dumps({"x_min": 0.0, "y_min": 0.0, "cell_size_x": 1.0, "cell_size_y": 1.0,
                       "cols": 2, "rows": 1})
    pts = np.array([[0.2, 0.5, 0, 100], [0.7, 0.5, 0, 200]])
    img = rsmap.mean_intensity(pts, grid)
    assert img.shape == (1, 2)
    assert img[0, 0] == 150.0
    assert img[0, 1] == 0.0


def test_extract_ground_partitions():
    rng = np.random.default_rng(3)
    plane = np.column_stack([rng.uniform(-10, 10, (700, 2)), rng.normal(0, 0.01, 700)])
    outliers = np.column_stack([rng.uniform(-10, 10, (300, 2)), rng.uniform(1, 5, 300)])
    ground, rest, (nx, ny, nz, d) = rsmap.extract_ground(np.vstack([plane, outliers]), seed=1)
    assert len(ground) + len(rest) == 1000
    assert abs(nz) > np.cos(np.radians(1.0))
    assert np.all(np.abs(ground[:, 2]) < 0.05)


def test_alpha_shape_rectangle():
    xs, ys = np.meshgrid(np.linspace(0, 3, 61), np.linspace(0, 2, 41))
    ring = rsmap.alpha_shape(np.column_stack([xs.ravel(), ys.ravel()]), 0.5)
    x, y = ring[:, 0], ring[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert area == pytest.approx(6.0, rel=0.05)


def test_fit_line_and_clusters():
    t = np.linspace(0, 5, 20)
    seg = rsmap.fit_line_segment(np.column_stack([t, 2 * t + 1]))
    assert sorted(seg[:, 0].tolist()) == pytest.approx([0.0, 5.0], abs=1e-9)
    blobs = np.vstack([np.zeros((12, 2)) + [0, 0], np.zeros((12, 2)) + [10, 0]])
    blobs += np.random.default_rng(0).normal(0, 0.05, blobs.shape)
    assert len(rsmap.cluster_nn(blobs, 0.5, 10)) == 2


def test_metrics():
    assert rsmap.average_precision_from_ranking([True, False], 2) == 0.5
    a = np.array([[0.0, 1.0], [3.0, 1.0]])
    b = np.array([[0.0, 0.0], [3.0, 0.0]])
    assert rsmap.chamfer_one_way(a, b) == pytest.approx(1.0, abs=1e-12)


def test_errors_carry_code():
    with pytest.raises(rsmap.RsmapError) as info:
        rsmap.chamfer_one_way(np.zeros((0, 2)), np.zeros((2, 2)))
    assert info.value.code == "EmptyGeometry"


def test_pipeline_round_trip(tmp_path):
    spec = json.dumps({"image_width": 640, "image_height": 360, "focal_px": 320,
                       "frame_count": 2})
    rsmap.synth(tmp_path / "scene", spec)
    report = json.loads(rsmap.run_pipeline(tmp_path / "scene", tmp_path / "out"))
    assert set(report) >= {"image_only", "pointcloud_only", "multimodal"}
    pred = (tmp_path / "out" / "multimodal.geojson").read_text()
    gt = (tmp_path / "scene" / "gt.geojson").read_text()
    again = json.loads(rsmap.evaluate(pred, gt))
    assert again["miou"] == pytest.approx(report["multimodal"]["miou"])
