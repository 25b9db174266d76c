"""Memristor crossbar: weight mapping, column reads, matrix-vector products and
a sneak-path severity estimate.

All devices in an array share one :class:`~memhtm.device.DevicePreset`; the
array keeps their ladder states in a single numpy array.
"""

from __future__ import annotations

import numpy as np

from .core import RngStream
from .device import DevicePreset, MemristorDevice, ProgrammingError, pulses_to_move

SINGLE_COLUMN = "single_column"
ALL_COLUMNS = "all_columns"


class CrossbarArray:
    def __init__(self, rows: int, cols: int, preset: DevicePreset, access_mode: str = SINGLE_COLUMN,
                 v_read: float | None = None):
        if rows < 1 or cols < 1:
            raise ValueError("crossbar needs at least one row and one column")
        if access_mode not in (SINGLE_COLUMN, ALL_COLUMNS):
            raise ValueError(f"unknown access mode {access_mode!r}")
        self.preset = preset
        self.access_mode = access_mode
        self.v_read = 0.5 * preset.v_th if v_read is None else float(v_read)
        if abs(self.v_read) >= preset.v_th:
            raise ValueError("read voltage must stay below the switching threshold")
        dtype = float if preset.ideal else np.int64
        self.state = np.zeros((rows, cols), dtype=dtype)
        self.read_slots = 0
        self.write_slots = 0
        self.pulse_count = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.state.shape

    @property
    def conductance(self) -> np.ndarray:
        return self.preset.conductance(self.state)

    @property
    def weights(self) -> np.ndarray:
        """Noise-free read-back of the stored weights in [0, 1]."""
        return self.preset.fraction(self.conductance)

    def device(self, r: int, c: int) -> MemristorDevice:
        return MemristorDevice(self.preset, self.state[r, c])

    def program(self, weights, rng: RngStream, max_pulses: int = 100_000) -> int:
        """Program every device to the ladder state nearest its weight.

        Columns are written one at a time (one write slot each).  Returns the
        total number of pulses.
        """
        w = np.asarray(weights, dtype=float)
        if w.shape != self.shape:
            raise ValueError(f"weight shape {w.shape} does not match crossbar {self.shape}")
        if np.any((w < 0) | (w > 1)) or not np.all(np.isfinite(w)):
            raise ValueError("crossbar weights must lie in [0, 1]")
        target = self.preset.level_of(w)
        if self.preset.ideal:
            changed = target != self.state
            pulses = changed.astype(np.int64)
            if self.preset.p_switch < 1.0:
                extra = rng.generator.geometric(self.preset.p_switch, size=self.shape) - 1
                pulses = np.where(changed, 1 + extra, 0)
        else:
            pulses = pulses_to_move(np.abs(target - self.state), self.preset.p_switch, rng)
        over = pulses > max_pulses
        if np.any(over):
            r, c = np.argwhere(over)[0]
            raise ProgrammingError(f"device ({r}, {c}): pulse budget {max_pulses} exhausted",
                                   where=(int(r), int(c)))
        self.state = target.astype(self.state.dtype)
        self.write_slots += self.shape[1]
        spent = int(pulses.sum())
        self.pulse_count += spent
        return spent

    def _check_inputs(self, v_in) -> np.ndarray:
        v = np.asarray(v_in, dtype=float)
        if v.shape != (self.shape[0],):
            raise ValueError(f"input vector must have length {self.shape[0]}")
        if np.any(np.abs(v) >= self.preset.v_th):
            raise ValueError(f"input voltage reaches the switching threshold {self.preset.v_th} V")
        return v

    def _noisy_conductance(self, rng, cols=slice(None)) -> np.ndarray:
        g = self.conductance[:, cols]
        sigma = self.preset.sigma_r
        if sigma > 0:
            if rng is None:
                raise ValueError("a noisy crossbar needs an rng to read")
            # column-major draw order: reading all columns at once consumes the
            # stream exactly like successive single-column reads
            g = g * (1.0 + rng.normal(sigma, g.shape[::-1]).T)
        return g

    def read_column(self, j: int, v_in, rng: RngStream | None = None) -> float:
        """Column current ``sum_k v_k G_kj``; unselected columns are grounded."""
        if not 0 <= j < self.shape[1]:
            raise IndexError(f"column {j} out of range [0, {self.shape[1]})")
        v = self._check_inputs(v_in)
        g = self._noisy_conductance(rng, slice(j, j + 1))[:, 0]
        self.read_slots += 1
        return float(v @ g)

    def matvec(self, v_in, rng: RngStream | None = None) -> np.ndarray:
        """All column currents.

        ``single_column`` mode is the sequence of :meth:`read_column` calls
        for columns ``0..cols-1`` (one read slot each, same noise draws);
        ``all_columns`` reads every column in a single slot.
        """
        v = self._check_inputs(v_in)
        currents = v @ self._noisy_conductance(rng)
        self.read_slots += self.shape[1] if self.access_mode == SINGLE_COLUMN else 1
        return currents

    def sneak_ratio(self, selected: tuple[int, int]) -> float:
        return sneak_ratio(self, selected)


def map_weights(weights, preset: DevicePreset, rng: RngStream | None = None, access_mode: str = SINGLE_COLUMN,
                v_read: float | None = None, max_pulses: int = 100_000) -> CrossbarArray:
    """Fresh crossbar (all devices at ``r_off``) programmed to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-D matrix")
    xbar = CrossbarArray(w.shape[0], w.shape[1], preset, access_mode, v_read)
    xbar.program(w, rng if rng is not None else RngStream(0), max_pulses)
    return xbar


def read_column(xbar: CrossbarArray, j: int, v_in, rng: RngStream | None = None) -> float:
    return xbar.read_column(j, v_in, rng)


def matvec(xbar: CrossbarArray, v_in, rng: RngStream | None = None) -> np.ndarray:
    return xbar.matvec(v_in, rng)


def sneak_ratio(xbar: CrossbarArray, selected: tuple[int, int]) -> float:
    """Worst-case sneak-to-signal current ratio for reading ``selected``.

    With every line biased (``all_columns``), the strongest parasitic route
    is a three-device series path ``(r, c') -> (r', c') -> (r', c)``; its
    current is compared with the selected device's.  Grounding unselected
    columns (``single_column``) removes the path, so the ratio is 0.
    """
    rows, cols = xbar.shape
    if rows < 2 or cols < 2:
        raise ValueError("sneak paths need at least a 2x2 array")
    if xbar.access_mode == SINGLE_COLUMN:
        return 0.0
    r, c = selected
    if not (0 <= r < rows and 0 <= c < cols):
        raise IndexError(f"selected device {selected} outside {xbar.shape}")
    res = 1.0 / xbar.conductance
    other_r = np.delete(np.arange(rows), r)
    other_c = np.delete(np.arange(cols), c)
    # path resistance for every (r', c') pair
    path = res[r, other_c][None, :] + res[np.ix_(other_r, other_c)] + res[other_r, c][:, None]
    return float(res[r, c] / path.min())
