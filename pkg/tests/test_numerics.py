import numpy as np
import pytest

from tvbseg.numerics import (
    F32,
    RngStream,
    affine,
    box_muller,
    column_mean_std,
    frobenius_norm,
    matmul,
    sigmoid,
    tanh,
)


class TestRngStream:
    def test_same_seed_same_draws(self):
        a = RngStream(42, 3).uniform(16)
        b = RngStream(42, 3).uniform(16)
        assert np.array_equal(a, b)

    def test_different_stream_different_draws(self):
        a = RngStream(42, 0).uniform(16)
        b = RngStream(42, 1).uniform(16)
        assert not np.array_equal(a, b)

    def test_child_offsets_stream(self):
        base = RngStream(9, 100)
        child = base.child(5)
        direct = RngStream(9, 105)
        assert np.array_equal(child.uniform(8), direct.uniform(8))

    def test_uniform_in_range(self):
        draws = RngStream(1, 0).uniform_in(-2.0, 3.0, 1000)
        assert draws.min() >= -2.0 and draws.max() < 3.0

    def test_normal_is_float32(self):
        z = RngStream(5, 0).normal(7)
        assert z.dtype == F32 and z.shape == (7,)

    def test_normal_moments(self):
        z = RngStream(8, 0).normal(200_000).astype(np.float64)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            RngStream(-1, 0)
        with pytest.raises(ValueError):
            RngStream(0, 2**64)


class TestBoxMuller:
    def test_matches_formula(self):
        u1 = np.array([0.3, 0.7, 0.9999], dtype=np.float64)
        u2 = np.array([0.1, 0.5, 0.25], dtype=np.float64)
        z0, z1 = box_muller(u1, u2)
        r = np.sqrt(-2.0 * np.log(u1))
        assert np.allclose(z0, (r * np.cos(2 * np.pi * u2)).astype(F32))
        assert np.allclose(z1, (r * np.sin(2 * np.pi * u2)).astype(F32))

    def test_u1_zero_guarded(self):
        z0, z1 = box_muller(np.zeros(4), np.full(4, 0.25))
        assert np.all(np.isfinite(z0)) and np.all(np.isfinite(z1))


class TestMatmul:
    def test_matches_numpy(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((13, 21)).astype(F32)
        b = rng.standard_normal((21, 9)).astype(F32)
        got = matmul(a, b)
        assert got.dtype == F32
        np.testing.assert_allclose(got, a.astype(np.float64) @ b.astype(np.float64),
                                   rtol=1e-5, atol=1e-5)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            matmul(np.zeros((2, 3), F32), np.zeros((4, 2), F32))

    def test_affine_adds_bias_after_sum(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((5, 4)).astype(F32)
        w = rng.standard_normal((4, 6)).astype(F32)
        b = rng.standard_normal(6).astype(F32)
        expect = matmul(x, w) + b[None, :]
        assert np.array_equal(affine(x, w, b), expect)


class TestPointwise:
    def test_sigmoid_range_and_symmetry(self):
        x = np.linspace(-30, 30, 101, dtype=F32)
        y = sigmoid(x)
        assert np.all(y >= 0) and np.all(y <= 1)
        np.testing.assert_allclose(y + sigmoid(-x), 1.0, atol=1e-6)

    def test_sigmoid_extremes_stable(self):
        y = sigmoid(np.array([-1e4, 1e4], dtype=F32))
        assert np.all(np.isfinite(y))
        assert y[0] == 0.0 and y[1] == 1.0

    def test_sigmoid_matches_reference(self):
        x = np.linspace(-8, 8, 33, dtype=F32)
        ref = 1.0 / (1.0 + np.exp(-x.astype(np.float64)))
        np.testing.assert_allclose(sigmoid(x), ref, atol=1e-6)

    def test_tanh(self):
        x = np.linspace(-5, 5, 21, dtype=F32)
        np.testing.assert_allclose(tanh(x), np.tanh(x.astype(np.float64)),
                                   atol=1e-6)


class TestReductions:
    def test_column_mean_std_population(self):
        rng = np.random.default_rng(11)
        rows = rng.standard_normal((40, 7)).astype(F32)
        mean, std = column_mean_std(rows)
        ref64 = rows.astype(np.float64)
        np.testing.assert_allclose(mean, ref64.mean(axis=0), atol=1e-6)
        # population convention: divide by N, not N-1
        np.testing.assert_allclose(std, ref64.std(axis=0, ddof=0), atol=1e-6)

    def test_column_std_single_row_is_zero(self):
        mean, std = column_mean_std(np.array([[1.5, -2.0]], dtype=F32))
        assert np.array_equal(std, np.zeros(2, F32))

    def test_frobenius(self):
        a = np.array([[3.0, 0.0], [0.0, 4.0]], dtype=F32)
        assert frobenius_norm(a) == pytest.approx(5.0)
