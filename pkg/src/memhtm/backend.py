"""Interchangeable compute backends.

Both backends expose the same operations used by the algorithms:

``program(matrix, rng)`` / ``dot(matrix, x, rng)``
    ``matrix @ x`` for a matrix with entries in [0, 1]; ``program`` returns a
    handle whose ``dot(x, rng)`` reuses the stored matrix.
``apply_update(values, delta, rng)``
    Permanence update ``clip(values + delta, 0, 1)``.
``quantize(values)``
    Snap values to what the storage can hold.
``memory(size)``
    A bank of analog storage cells with ``store`` / ``recall``.

:class:`IdealBackend` does exact float arithmetic.  :class:`MemristiveBackend`
routes products through freshly programmed crossbars (with a reference
column at ``r_off`` subtracted from every read), applies updates as pulse
trains on the device ladder, and keeps analog values in multilevel memory
cells.
"""

from __future__ import annotations

import numpy as np

from .core import RngStream
from .crossbar import SINGLE_COLUMN, map_weights
from .device import DevicePreset, MemoryArray, get_preset


class ExactMemory:
    """Float storage with the :class:`~memhtm.device.MemoryArray` interface."""

    def __init__(self, size: int):
        self.values = np.zeros(int(size))
        self.pulse_count = 0

    @property
    def size(self) -> int:
        return self.values.size

    def store(self, values, rng=None, index=None) -> int:
        v = np.asarray(values, dtype=float)
        if np.any((v < 0) | (v > 1)):
            raise ValueError("stored values must lie in [0, 1]")
        if index is None:
            self.values[:] = v
        else:
            self.values[index] = v
        return 0

    def recall(self, rng=None, index=None) -> np.ndarray:
        return self.values.copy() if index is None else self.values[index].copy()

    def stored_values(self) -> np.ndarray:
        return self.values.copy()


class ExactProduct:
    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))

    def dot(self, x, rng=None) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)


class CrossbarProduct:
    """Matrix held in a crossbar; ``dot`` drives the rows with voltages
    proportional to ``x`` and decodes column currents against the reference
    column."""

    def __init__(self, xbar):
        self.xbar = xbar

    def dot(self, x, rng: RngStream | None = None) -> np.ndarray:
        xbar = self.xbar
        x = np.asarray(x, dtype=float)
        scale = float(np.max(np.abs(x))) if x.size else 0.0
        if scale == 0.0:
            return np.zeros(xbar.shape[1] - 1)
        currents = xbar.matvec(x / scale * xbar.v_read, rng)
        signal = currents[:-1] - currents[-1]
        p = xbar.preset
        return signal / (xbar.v_read * (p.g_on - p.g_off)) * scale


class IdealBackend:
    name = "ideal"

    def program(self, matrix, rng=None) -> ExactProduct:
        return ExactProduct(matrix)

    def dot(self, matrix, x, rng=None) -> np.ndarray:
        return np.asarray(matrix, dtype=float) @ np.asarray(x, dtype=float)

    def apply_update(self, values, delta, rng=None) -> np.ndarray:
        return np.clip(np.asarray(values) + delta, 0.0, 1.0)

    def quantize(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float)

    def memory(self, size: int) -> ExactMemory:
        return ExactMemory(size)

    def describe(self) -> dict:
        return {"backend": self.name}


class MemristiveBackend:
    name = "memristive"

    def __init__(self, preset: DevicePreset | str = "multilevel256", seed: int = 0, memory_levels: int = 256,
                 branch_count: int = 4, access_mode: str = SINGLE_COLUMN):
        self.preset = get_preset(preset) if isinstance(preset, str) else preset
        self.memory_levels = memory_levels
        self.branch_count = branch_count
        self.access_mode = access_mode
        self._rng = RngStream(seed, stream_id=7)

    def _stream(self, rng):
        return self._rng if rng is None else rng

    def program(self, matrix, rng: RngStream | None = None) -> "CrossbarProduct":
        """Program ``matrix`` (entries in [0, 1]) into a new crossbar, one
        crossbar column per matrix row plus an all-``r_off`` reference column."""
        rng = self._stream(rng)
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        weights = np.concatenate([m.T, np.zeros((m.shape[1], 1))], axis=1)
        return CrossbarProduct(map_weights(weights, self.preset, rng, self.access_mode))

    def dot(self, matrix, x, rng: RngStream | None = None) -> np.ndarray:
        rng = self._stream(rng)
        return self.program(matrix, rng.substream(0)).dot(x, rng.substream(1))

    def quantize(self, values) -> np.ndarray:
        v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
        if self.preset.levels is None:
            return v
        n = self.preset.levels - 1
        return np.rint(v * n) / n

    def apply_update(self, values, delta, rng: RngStream | None = None) -> np.ndarray:
        """Move each device by ``round(delta * (levels - 1))`` pulses, each
        succeeding with probability ``p_switch``."""
        rng = self._stream(rng)
        p = self.preset
        values = np.asarray(values, dtype=float)
        delta = np.broadcast_to(np.asarray(delta, dtype=float), values.shape)
        if p.levels is None:
            if p.p_switch >= 1.0:
                return np.clip(values + delta, 0.0, 1.0)
            ok = rng.uniform(values.shape) < p.p_switch
            return np.clip(values + np.where(ok, delta, 0.0), 0.0, 1.0)
        n = p.levels - 1
        level = np.rint(values * n).astype(np.int64)
        steps = np.rint(delta * n).astype(np.int64)
        if p.p_switch < 1.0:
            moved = rng.generator.binomial(np.abs(steps), p.p_switch)
            steps = np.sign(steps) * moved
        return np.clip(level + steps, 0, n) / n

    def memory(self, size: int) -> MemoryArray:
        return MemoryArray(size, self.preset, self.memory_levels, self.branch_count)

    def describe(self) -> dict:
        p = self.preset
        return {
            "backend": self.name,
            "r_on": p.r_on,
            "r_off": p.r_off,
            "levels": p.levels,
            "v_th": p.v_th,
            "t_set": p.t_set,
            "p_switch": p.p_switch,
            "sigma_r": p.sigma_r,
            "memory_levels": self.memory_levels,
            "branch_count": self.branch_count,
            "access_mode": self.access_mode,
        }


def make_backend(name: str, preset: DevicePreset | str | None = None, seed: int = 0, **kwargs):
    if name == "ideal":
        return IdealBackend()
    if name == "memristive":
        return MemristiveBackend(preset if preset is not None else "multilevel256", seed=seed, **kwargs)
    raise ValueError(f"unknown backend {name!r}; expected 'ideal' or 'memristive'")
