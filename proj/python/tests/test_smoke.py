import numpy as np
import pytest

import clickmask as cm


def two_tone(h=24, w=32, split=16):
    img = np.full((h, w), 30, dtype=np.uint8)
    img[:, split:] = 220
    return img


def test_engines_listed():
    assert set(cm.engines()) == {"graphcut", "randomwalker", "geodesic"}


def test_segment_two_tone():
    mask, conf, edge = cm.segment(two_tone(), [(5, 12, True), (26, 12, False)], seed_radius=2)
    assert mask.shape == (24, 32)
    expected = np.zeros((24, 32), dtype=np.uint16)
    expected[:, :16] = 1
    np.testing.assert_array_equal(mask, expected)
    assert conf.shape == edge.shape == (24, 32)
    assert ((conf >= 0.5) == (mask == 1)).all()
    again, _, _ = cm.segment(two_tone(), [(5, 12, True), (26, 12, False)], seed_radius=2, prior=edge)
    assert again[12, 5] == 1


def test_errors_raise():
    with pytest.raises(cm.ClickmaskError):
        cm.segment(two_tone(), [(5, 12, False)])
    with pytest.raises(cm.ClickmaskError):
        cm.segment(two_tone(), [(5, 12, True)], engine="magic")


def test_polygon_round_trip():
    rng = np.random.default_rng(0)
    mask = (rng.random((20, 30)) < 0.4).astype(np.uint16)
    polys = cm.extract_polygons(mask, epsilon=1.0)
    np.testing.assert_array_equal(cm.rasterize(polys, 30, 20), mask)
    square = np.zeros((10, 10), dtype=np.uint16)
    square[2:7, 3:8] = 1
    (poly,) = cm.extract_polygons(square, epsilon=0.0)
    assert poly["vertices"] == [(3.0, 2.0), (8.0, 2.0), (8.0, 7.0), (3.0, 7.0)]


def test_session_and_clicks():
    img = two_tone(32, 32, 16)
    gt = np.zeros((32, 32), dtype=np.uint16)
    gt[:, :16] = 1
    assert cm.first_click(gt)[2] is True
    trace = cm.run_session(img, gt, max_clicks=5, seed_radius=2)
    assert len(trace["iou"]) == 5
    assert trace["noc"][0.9] <= 3
    assert cm.iou(gt, gt) == 1.0


def test_io_round_trip(tmp_path):
    rgb = np.random.default_rng(1).integers(0, 256, (12, 9, 3), dtype=np.uint8)
    cm.save_png(rgb, tmp_path / "a.png")
    np.testing.assert_array_equal(cm.load_image(tmp_path / "a.png"), rgb)
    deep = np.arange(60, dtype=np.uint16).reshape(6, 10) * 1000
    cm.save_png(deep, tmp_path / "d.png")
    back = cm.load_image(tmp_path / "d.png")
    assert back.dtype == np.uint16
    np.testing.assert_array_equal(back, deep)
    mask = np.array([[0, 1, 2], [2, 1, 0]], dtype=np.uint16)
    cm.write_mask(mask, tmp_path / "m.png", pseudocolor=True)
    np.testing.assert_array_equal(cm.read_mask(tmp_path / "m.png"), mask)
    assert cm.apply_window(np.array([[40]], dtype=np.uint16), 40, 400)[0, 0] == 128
    assert len(cm.grid_layout(4096, 3000)) == 20


def test_propagate_identical_frames():
    frame = np.full((40, 48, 3), 30, dtype=np.uint8)
    frame[8:22, 8:22] = 210
    ref = np.zeros((40, 48), dtype=np.uint16)
    ref[8:22, 8:22] = 1
    out = cm.propagate([frame] * 4, {0: ref})
    assert len(out) == 4
    for m in out:
        np.testing.assert_array_equal(m, ref)
