"""Ideal and memristive compute backends."""

import numpy as np
import pytest

from memhtm.backend import IdealBackend, MemristiveBackend, make_backend
from memhtm.core import RngStream
from memhtm.device import DevicePreset


class TestIdeal:
    def test_dot_and_program(self):
        rng = np.random.default_rng(0)
        m, x = rng.random((3, 5)), rng.random(5)
        b = IdealBackend()
        np.testing.assert_array_equal(b.dot(m, x), m @ x)
        np.testing.assert_array_equal(b.program(m).dot(x), m @ x)

    def test_update_clips(self):
        out = IdealBackend().apply_update(np.array([0.95, 0.05, 0.5]), np.array([0.1, -0.1, 0.2]))
        np.testing.assert_allclose(out, [1.0, 0.0, 0.7])

    def test_memory_is_exact(self):
        mem = IdealBackend().memory(3)
        mem.store([0.1, 0.2, 0.3])
        np.testing.assert_array_equal(mem.recall(), [0.1, 0.2, 0.3])
        with pytest.raises(ValueError):
            mem.store([1.1, 0, 0])


class TestMemristive:
    def test_ideal_devices_reproduce_product(self):
        rng = np.random.default_rng(1)
        b = MemristiveBackend(DevicePreset(levels=None), seed=0)
        for _ in range(50):
            m, x = rng.random((6, 9)), rng.random(9)
            np.testing.assert_allclose(b.program(m).dot(x), m @ x, rtol=1e-9, atol=1e-12)

    def test_zero_input(self):
        b = MemristiveBackend("ideal256")
        np.testing.assert_array_equal(b.program(np.ones((2, 3))).dot(np.zeros(3)), np.zeros(2))

    def test_quantized_product_error_bound(self):
        rng = np.random.default_rng(2)
        m, x = rng.random((4, 8)), rng.random(8)
        got = MemristiveBackend("ideal256").dot(m, x)
        assert np.max(np.abs(got - m @ x)) <= x.sum() / 510 + 1e-12

    def test_noisy_product_unbiased(self):
        rng = np.random.default_rng(3)
        m = (rng.random((3, 16)) < 0.5).astype(float)
        x = rng.random(16)
        prod = MemristiveBackend("multilevel256", seed=0).program(m, RngStream(0))
        reads = np.array([prod.dot(x, RngStream(1, 0, (k,))) for k in range(4000)])
        np.testing.assert_allclose(reads.mean(axis=0), m @ x, atol=0.05)

    def test_reference_column(self):
        prod = MemristiveBackend("ideal256").program(np.ones((2, 3)))
        assert prod.xbar.shape == (3, 3)
        assert np.all(prod.xbar.state[:, -1] == 0)

    def test_quantize(self):
        b = MemristiveBackend(DevicePreset(levels=5))
        np.testing.assert_allclose(b.quantize([0.1, 0.4, 1.3]), [0.0, 0.5, 1.0])

    def test_update_deterministic_switching(self):
        b = MemristiveBackend(DevicePreset(levels=11, p_switch=1.0))
        out = b.apply_update(np.array([0.5, 0.9, 0.1]), np.array([0.2, 0.3, -0.3]))
        np.testing.assert_allclose(out, [0.7, 1.0, 0.0])

    def test_update_stochastic_switching_never_overshoots(self):
        b = MemristiveBackend(DevicePreset(levels=101, p_switch=0.5), seed=1)
        v = np.full(5000, 0.5)
        out = b.apply_update(v, 0.1, RngStream(4))
        assert np.all(out >= 0.5) and np.all(out <= 0.6 + 1e-12)
        assert abs((out - 0.5).mean() - 0.05) < 0.003

    def test_memory_bank(self):
        mem = MemristiveBackend(DevicePreset(sigma_r=0.0, p_switch=0.9)).memory(4)
        mem.store(np.array([0.0, 0.25, 0.5, 1.0]), RngStream(0))
        np.testing.assert_allclose(mem.recall(RngStream(1)), [0.0, 0.25, 0.5, 1.0], atol=1 / 510)

    def test_describe(self):
        d = MemristiveBackend("multilevel256").describe()
        assert d["backend"] == "memristive" and d["levels"] == 256 and d["p_switch"] == 0.95


class TestFactory:
    def test_names(self):
        assert isinstance(make_backend("ideal"), IdealBackend)
        assert isinstance(make_backend("memristive", "binary"), MemristiveBackend)
        with pytest.raises(ValueError):
            make_backend("analog")
