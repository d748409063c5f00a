import numpy as np
import pytest

import tvbseg
from tvbseg.decoder import (
    BoxPrompt,
    combination_multiplies_per_pixel,
    constant_token_model,
    count_parameters,
    encode,
    extract_patches,
    generate_token,
    init_model,
    mask_from_weights,
    static_weight_model,
    verify_error_bound,
)
from tvbseg.numerics import F32, sigmoid


class TestBoxPrompt:
    def test_normalized(self):
        box = BoxPrompt(10, 20, 30, 60)
        np.testing.assert_allclose(box.normalized(100, 200),
                                   [10 / 200, 20 / 100, 30 / 200, 60 / 100])

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            BoxPrompt(10, 10, 10, 20)

    def test_out_of_frame_rejected(self):
        box = BoxPrompt(0, 0, 40, 40)
        with pytest.raises(ValueError):
            box.validate(32, 32)
        box.validate(40, 40)


class TestInitModel:
    def test_deterministic(self):
        a = init_model(seed=3)
        b = init_model(seed=3)
        assert np.array_equal(a.hyper.w1, b.hyper.w1)
        assert np.array_equal(a.patch_embed_w, b.patch_embed_w)

    def test_seed_changes_weights(self):
        a = init_model(seed=0)
        b = init_model(seed=1)
        assert not np.array_equal(a.hyper.w1, b.hyper.w1)

    def test_default_dims(self):
        m = init_model(seed=0)
        assert (m.d, m.m, m.c, m.patch, m.hidden) == (256, 32, 64, 8, 64)
        assert m.hyper.w1.shape == (m.d, m.hidden)
        assert m.hyper.w2.shape == (m.hidden, m.m)
        assert m.prune_mask.sum() == m.m

    def test_kan_variant_shares_frozen_base(self):
        m = init_model(seed=0, variant="kan")
        ref = init_model(seed=0, variant="mlp")
        assert m.hyper.variant == "kan"
        assert np.array_equal(m.hyper.kan.base_weight,
                              np.ascontiguousarray(ref.hyper.w2.T))
        assert np.array_equal(m.hyper.kan.base_bias, ref.hyper.b2)

    def test_parameter_count(self, small_model):
        counts = count_parameters(small_model)
        assert counts["total"] > 0
        assert counts["trainable"] == 0  # mlp variant: everything frozen


class TestEncode:
    def test_patch_grid(self):
        image = np.arange(64, dtype=F32).reshape(8, 8) / 64
        patches = extract_patches(image, 4)
        assert patches.shape == (4, 16)
        np.testing.assert_allclose(patches[0], image[:4, :4].reshape(-1))

    def test_shapes(self, small_model, small_image, small_box):
        ctx, q = encode(small_model, small_image, small_box)
        assert ctx.shape == (small_model.c,)
        assert q.shape == (small_image.size, small_model.m)

    def test_image_shape_validation(self, small_model, small_box):
        with pytest.raises(ValueError):
            encode(small_model, np.zeros((22, 24), F32), small_box)
        with pytest.raises(ValueError):
            encode(small_model, np.zeros((4, 4), F32), BoxPrompt(0, 0, 2, 2))

    def test_box_sensitivity(self, small_model, small_image):
        t1 = generate_token(small_model,
                            encode(small_model, small_image, BoxPrompt(0, 0, 8, 8))[0])
        t2 = generate_token(small_model,
                            encode(small_model, small_image, BoxPrompt(8, 8, 24, 24))[0])
        assert not np.array_equal(t1, t2)


class TestStaticEquivalence:
    def test_static_weight_mask_reproduced(self, small_model, small_image,
                                           small_box):
        rng = np.random.default_rng(0)
        for _ in range(5):
            w = rng.standard_normal(small_model.m).astype(F32)
            frozen = static_weight_model(small_model, w)
            got = tvbseg.deterministic_mask(frozen, small_image, small_box)
            _, q = encode(small_model, small_image, small_box)
            want = mask_from_weights(w, q, small_model.prune_mask,
                                     small_image.shape)
            assert got.tobytes() == want.tobytes()

    def test_constant_token_reproduced(self, small_model, small_image,
                                       small_box):
        rng = np.random.default_rng(1)
        t = rng.standard_normal(small_model.d).astype(F32)
        pinned = constant_token_model(small_model, t)
        ctx, _ = encode(pinned, small_image, small_box)
        assert np.array_equal(generate_token(pinned, ctx), t)


class TestErrorBound:
    def test_lhs_definition(self):
        rng = np.random.default_rng(2)
        t = rng.uniform(-3, 3, (4, 6)).astype(F32)
        w = rng.uniform(-3, 3, (4, 6)).astype(F32)
        q = rng.uniform(-3, 3, (9, 6)).astype(F32)
        lhs, rhs, holds = verify_error_bound(t, w, q)
        a64 = t.astype(np.float64) @ q.astype(np.float64).T
        b64 = w.astype(np.float64) @ q.astype(np.float64).T
        ref = np.linalg.norm(sigmoid(a64.astype(F32)).astype(np.float64)
                             - sigmoid(b64.astype(F32)).astype(np.float64))
        assert lhs == pytest.approx(ref, rel=1e-4)
        assert holds == (lhs <= rhs + 1e-5)

    def test_identical_inputs_zero(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(-1, 1, (3, 5)).astype(F32)
        q = rng.uniform(-1, 1, (7, 5)).astype(F32)
        lhs, rhs, holds = verify_error_bound(t, t.copy(), q)
        assert lhs == 0.0 and rhs == 0.0 and holds


class TestOpCount:
    def test_multiplies_follow_prune_mask(self, small_model):
        assert combination_multiplies_per_pixel(small_model) == small_model.m
        masked = small_model.copy()
        masked.prune_mask = np.zeros(small_model.m, dtype=bool)
        masked.prune_mask[:2] = True
        assert combination_multiplies_per_pixel(masked) == 2
