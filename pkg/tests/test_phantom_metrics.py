import numpy as np
import pytest

from tvbseg.metrics import box_or_full, dice, expand_box
from tvbseg.numerics import RngStream
from tvbseg.phantom import PhantomConfig, synth_dataset, synth_phantom


class TestDice:
    def test_identical(self):
        m = (np.random.default_rng(0).random((16, 16)) > 0.5).astype(np.uint8)
        assert dice(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((8, 8), np.uint8)
        b = np.zeros((8, 8), np.uint8)
        a[:2] = 1
        b[6:] = 1
        assert dice(a, b) == 0.0

    def test_empty_empty_is_one(self):
        z = np.zeros((8, 8), np.uint8)
        assert dice(z, z) == 1.0

    def test_empty_vs_nonempty_zero(self):
        z = np.zeros((8, 8), np.uint8)
        o = np.ones((8, 8), np.uint8)
        assert dice(z, o) == 0.0

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = (rng.random((12, 12)) > rng.random()).astype(np.uint8)
            b = (rng.random((12, 12)) > rng.random()).astype(np.uint8)
            d1, d2 = dice(a, b), dice(b, a)
            assert d1 == d2
            assert 0.0 <= d1 <= 1.0

    def test_known_value(self):
        a = np.zeros((4, 4), np.uint8)
        b = np.zeros((4, 4), np.uint8)
        a[0, :2] = 1          # |A| = 2
        b[0, :4] = 1          # |B| = 4, overlap 2
        assert dice(a, b) == pytest.approx(2 * 2 / (2 + 4))


class TestExpandBox:
    def test_tight_box(self):
        m = np.zeros((20, 20), np.uint8)
        m[5:9, 7:12] = 1
        box = expand_box(m, 0)
        assert (box.x0, box.y0, box.x1, box.y1) == (7, 5, 12, 9)

    def test_expansion_and_clip(self):
        m = np.zeros((20, 20), np.uint8)
        m[5:9, 7:12] = 1
        box = expand_box(m, 10)
        assert (box.x0, box.y0) == (0, 0)
        assert (box.x1, box.y1) == (20, 19)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            expand_box(np.zeros((8, 8), np.uint8), 1)

    def test_box_or_full_fallback(self):
        full = box_or_full(np.zeros((8, 10), np.uint8), 2)
        assert (full.x0, full.y0, full.x1, full.y1) == (0, 0, 10, 8)
        m = np.zeros((8, 10), np.uint8)
        m[2, 3] = 1
        assert box_or_full(m, 0).x1 == expand_box(m, 0).x1


class TestPhantom:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            PhantomConfig(axis_range=(0.0, 8.0)).validate()
        with pytest.raises(ValueError):
            PhantomConfig(axis_range=(9.0, 8.0)).validate()
        with pytest.raises(ValueError):
            PhantomConfig(height=32, width=32, axis_range=(16.0, 20.0)).validate()
        PhantomConfig().validate()

    def test_same_stream_reproducible(self):
        cfg = PhantomConfig(height=64, width=64, axis_range=(8.0, 16.0), seed=4)
        i1, m1 = synth_phantom(cfg, RngStream(4, 0))
        i2, m2 = synth_phantom(cfg, RngStream(4, 0))
        assert np.array_equal(i1, i2)
        assert dice(m1, m2) == 1.0

    def test_dataset_items_differ(self):
        cfg = PhantomConfig(height=64, width=64, axis_range=(8.0, 16.0), seed=4)
        data = synth_dataset(cfg, 3)
        assert len(data) == 3
        assert not np.array_equal(data[0][1], data[1][1])

    def test_image_properties(self):
        cfg = PhantomConfig(height=64, width=64, axis_range=(8.0, 16.0), seed=5)
        for image, mask in synth_dataset(cfg, 4):
            assert image.dtype == np.float32
            assert image.min() >= 0.0 and image.max() <= 1.0
            assert mask.dtype == np.uint8
            assert 0 < mask.sum() < mask.size

    def test_lesion_darker_than_background(self):
        cfg = PhantomConfig(height=64, width=64, axis_range=(10.0, 16.0),
                            blur_range=(1.0, 1.5), speckle_range=(0.05, 0.05),
                            seed=6)
        image, mask = synth_phantom(cfg, RngStream(6, 0))
        inside = image[mask == 1].mean()
        outside = image[mask == 0].mean()
        assert inside < outside

    def test_ellipse_within_frame(self):
        cfg = PhantomConfig(height=48, width=48, axis_range=(6.0, 12.0), seed=7)
        for image, mask in synth_dataset(cfg, 6):
            border = np.concatenate([mask[0], mask[-1], mask[:, 0], mask[:, -1]])
            assert border.sum() == 0
