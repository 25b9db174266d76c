"""Behavioral memristor and multilevel memory-cell models.

Devices sit on a ladder of ``levels`` conductance states spaced uniformly
between ``1/r_off`` and ``1/r_on``.  A supra-threshold pulse moves the state
one level with probability ``p_switch``; reads are non-destructive and carry
relative Gaussian noise ``sigma_r``.  ``levels=None`` gives a continuous
(ideal) device whose state is a fraction in [0, 1].
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, RngStream


class ProgrammingError(RuntimeError):
    """A device could not reach its target state within the pulse budget."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


@dataclass(frozen=True)
class DevicePreset:
    r_on: float = 1e3
    r_off: float = 1e5
    levels: int | None = 256
    v_th: float = 1.0
    t_set: float = 1e-7
    p_switch: float = 1.0
    sigma_r: float = 0.0

    def __post_init__(self):
        if not 0 < self.r_on < self.r_off:
            raise ConfigError(f"need 0 < r_on < r_off, got r_on={self.r_on}, r_off={self.r_off}")
        if self.levels is not None and self.levels < 2:
            raise ConfigError(f"levels must be >= 2 or None, got {self.levels}")
        if self.v_th <= 0 or self.t_set < 0:
            raise ConfigError("v_th must be > 0 and t_set >= 0")
        if not 0.0 <= self.p_switch <= 1.0:
            raise ConfigError(f"p_switch must lie in [0, 1], got {self.p_switch}")
        if self.sigma_r < 0:
            raise ConfigError(f"sigma_r must be >= 0, got {self.sigma_r}")

    @property
    def g_on(self) -> float:
        return 1.0 / self.r_on

    @property
    def g_off(self) -> float:
        return 1.0 / self.r_off

    @property
    def ideal(self) -> bool:
        return self.levels is None

    def replace(self, **changes) -> "DevicePreset":
        return dataclasses.replace(self, **changes)

    def conductance(self, state) -> np.ndarray:
        """Conductance of a level index (or of a fraction for continuous devices)."""
        frac = np.asarray(state, dtype=float)
        if self.levels is not None:
            frac = frac / (self.levels - 1)
        return self.g_off + (self.g_on - self.g_off) * frac

    def fraction(self, conductance) -> np.ndarray:
        """Inverse of :meth:`conductance` as a fraction of the conductance window."""
        return (np.asarray(conductance, dtype=float) - self.g_off) / (self.g_on - self.g_off)

    def level_of(self, weight) -> np.ndarray:
        """Nearest ladder state for a weight in [0, 1]."""
        w = np.clip(np.asarray(weight, dtype=float), 0.0, 1.0)
        if self.levels is None:
            return w
        return np.rint(w * (self.levels - 1)).astype(np.int64)


# calibrate_sigma(0.095, samples=100_000): a 4-branch 256-level cell recalls
# with mean error just under 10% of range at this read noise.
CALIBRATED_SIGMA_256 = 0.3875

PRESETS = {
    "ideal": DevicePreset(levels=None, p_switch=1.0, sigma_r=0.0),
    "ideal256": DevicePreset(levels=256, p_switch=1.0, sigma_r=0.0),
    "multilevel256": DevicePreset(levels=256, p_switch=0.95, sigma_r=CALIBRATED_SIGMA_256),
    "multilevel64": DevicePreset(levels=64, p_switch=0.95, sigma_r=CALIBRATED_SIGMA_256),
    "multilevel16": DevicePreset(levels=16, p_switch=0.95, sigma_r=CALIBRATED_SIGMA_256),
    "binary": DevicePreset(levels=2, p_switch=0.95, sigma_r=0.02),
}


def get_preset(name: str, **overrides) -> DevicePreset:
    try:
        preset = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown device preset {name!r}; known: {sorted(PRESETS)}") from None
    return preset.replace(**overrides) if overrides else preset


def pulses_to_move(distance, p_switch: float, rng: RngStream) -> np.ndarray:
    """Pulse count needed to move ``distance`` levels when each pulse succeeds
    with probability ``p_switch``: ``distance`` successes plus a
    negative-binomial number of failures."""
    d = np.asarray(distance, dtype=np.int64)
    if p_switch >= 1.0:
        return d.copy()
    if p_switch <= 0.0:
        return np.where(d > 0, np.iinfo(np.int64).max, 0)
    failures = rng.generator.negative_binomial(np.maximum(d, 1), p_switch)
    return np.where(d > 0, d + failures, 0)


class MemristorDevice:
    """Single programmable device.

    >>> dev = MemristorDevice(DevicePreset(levels=4))
    >>> dev.program_to_level(3, RngStream(0))
    3
    >>> dev.state
    3
    """

    def __init__(self, preset: DevicePreset, state=0):
        self.preset = preset
        self.state = float(state) if preset.ideal else int(state)
        if preset.ideal and not 0.0 <= self.state <= 1.0:
            raise ValueError("continuous device state must lie in [0, 1]")
        if not preset.ideal and not 0 <= self.state < preset.levels:
            raise ValueError(f"state {state} outside [0, {preset.levels - 1}]")

    @property
    def conductance(self) -> float:
        return float(self.preset.conductance(self.state))

    @property
    def resistance(self) -> float:
        return 1.0 / self.conductance

    def program_pulse(self, v: float, dt: float, rng: RngStream) -> bool:
        """Apply one write pulse; returns True when the state moved.

        Pulses at or below ``v_th``, or shorter than ``t_set``, leave the
        device untouched.  Positive voltage raises conductance.
        """
        p = self.preset
        if p.ideal:
            raise ValueError("continuous devices have no level ladder; use program_to_level")
        if abs(v) <= p.v_th or dt < p.t_set:
            return False
        if p.p_switch < 1.0 and rng.generator.random() >= p.p_switch:
            return False
        new = min(p.levels - 1, self.state + 1) if v > 0 else max(0, self.state - 1)
        moved = new != self.state
        self.state = new
        return moved

    def program_to_level(self, target, rng: RngStream, max_pulses: int = 100_000) -> int:
        """Pulse until the state equals ``target`` (verify after every write).

        Returns the number of pulses spent; raises :class:`ProgrammingError`
        when ``max_pulses`` is exhausted.
        """
        p = self.preset
        pulses = 0
        if p.ideal:
            target = float(target)
            if not 0.0 <= target <= 1.0:
                raise ValueError(f"target {target} outside [0, 1]")
            while self.state != target:
                if pulses >= max_pulses:
                    raise ProgrammingError(f"pulse budget {max_pulses} exhausted")
                pulses += 1
                if p.p_switch >= 1.0 or rng.generator.random() < p.p_switch:
                    self.state = target
            return pulses

        target = int(target)
        if not 0 <= target < p.levels:
            raise ValueError(f"target level {target} outside [0, {p.levels - 1}]")
        v = 1.5 * p.v_th
        while self.state != target:
            if pulses >= max_pulses:
                raise ProgrammingError(f"pulse budget {max_pulses} exhausted at level {self.state}, target {target}")
            self.program_pulse(v if target > self.state else -v, p.t_set, rng)
            pulses += 1
        return pulses

    def read_current(self, v_read: float, rng: RngStream | None = None) -> float:
        """Non-destructive read: ``I = V * G * (1 + noise)``."""
        p = self.preset
        if abs(v_read) >= p.v_th:
            raise ValueError(f"read voltage {v_read} V would disturb the device (v_th={p.v_th} V)")
        noise = 0.0
        if p.sigma_r > 0:
            if rng is None:
                raise ValueError("a noisy device needs an rng to read")
            noise = rng.generator.normal(0.0, p.sigma_r)
        return v_read * self.conductance * (1.0 + noise)

    def __repr__(self):
        return f"MemristorDevice(state={self.state}, R={self.resistance:.4g} ohm)"


# ---------------------------------------------------------------------------
# Multilevel memory
# ---------------------------------------------------------------------------


def branch_radices(levels: int, branch_count: int) -> list[int]:
    """Split ``levels`` into per-branch device level counts whose product is
    ``levels``, as evenly as the prime factors allow.  Least significant
    branch first."""
    if branch_count < 1:
        raise ValueError("branch_count must be >= 1")
    primes = []
    n, f = int(levels), 2
    while n > 1:
        while n % f == 0:
            primes.append(f)
            n //= f
        f += 1
    radices = [1] * branch_count
    for q in sorted(primes, reverse=True):
        k = int(np.argmin(radices))
        radices[k] *= q
    if any(r < 2 for r in radices):
        raise ConfigError(f"{levels} levels cannot be split over {branch_count} branches")
    return sorted(radices)


class MemoryArray:
    """Bank of multilevel analog memory cells.

    Each cell stores one value in [0, 1] as a code of ``levels`` steps spread
    mixed-radix over ``branch_count`` devices; branch ``b`` carries weight
    equal to its place value, so all branch weights differ.  Recall reads
    every branch below threshold, decodes each to its nearest level and
    recombines.
    """

    def __init__(self, size: int, preset: DevicePreset, levels: int = 256, branch_count: int = 4,
                 v_read: float | None = None, max_pulses: int = 100_000):
        if branch_count not in (3, 4):
            raise ConfigError(f"branch_count must be 3 or 4, got {branch_count}")
        self.levels = int(levels)
        self.radices = branch_radices(self.levels, branch_count)
        self.places = np.cumprod([1] + self.radices[:-1])
        self.branch_presets = [preset.replace(levels=r) for r in self.radices]
        self.preset = preset
        self.v_read = 0.5 * preset.v_th if v_read is None else float(v_read)
        self.max_pulses = max_pulses
        self.digits = np.zeros((int(size), branch_count), dtype=np.int64)
        self.pulse_count = 0

    @property
    def size(self) -> int:
        return self.digits.shape[0]

    @property
    def branch_weights(self) -> np.ndarray:
        return self.places.copy()

    def encode(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if np.any((v < 0) | (v > 1)) or not np.all(np.isfinite(v)):
            raise ValueError("stored values must lie in [0, 1]")
        code = np.rint(v * (self.levels - 1)).astype(np.int64)
        return (code[:, None] // self.places[None, :]) % np.asarray(self.radices)[None, :]

    def store(self, values, rng: RngStream, index=None) -> int:
        """Program cells (all, or those at ``index``) to hold ``values``; returns pulses spent."""
        idx = np.arange(self.size) if index is None else np.atleast_1d(np.asarray(index))
        target = self.encode(np.atleast_1d(values))
        current = self.digits[idx]
        pulses = pulses_to_move(np.abs(target - current), self.preset.p_switch, rng)
        over = pulses > self.max_pulses
        if np.any(over):
            cell, branch = np.argwhere(over)[0]
            raise ProgrammingError(
                f"cell {idx[cell]} branch {branch}: pulse budget {self.max_pulses} exhausted",
                where=(int(idx[cell]), int(branch)),
            )
        self.digits[idx] = target
        spent = int(pulses.sum())
        self.pulse_count += spent
        return spent

    def stored_values(self) -> np.ndarray:
        """Noise-free decoded contents."""
        return (self.digits @ self.places) / (self.levels - 1)

    def recall(self, rng: RngStream, index=None) -> np.ndarray:
        idx = np.arange(self.size) if index is None else np.atleast_1d(np.asarray(index))
        digits = self.digits[idx]
        sigma = self.preset.sigma_r
        noise = rng.normal(sigma, digits.shape) if sigma > 0 else np.zeros(digits.shape)
        return self._decode(digits, noise)

    def _decode(self, digits, noise) -> np.ndarray:
        if abs(self.v_read) >= self.preset.v_th:
            raise ValueError("read voltage must stay below the switching threshold")
        est = np.empty_like(digits)
        for b, bp in enumerate(self.branch_presets):
            g = bp.conductance(digits[:, b])
            current = self.v_read * g * (1.0 + noise[:, b])
            frac = bp.fraction(current / self.v_read)
            est[:, b] = np.clip(np.rint(frac * (bp.levels - 1)), 0, bp.levels - 1)
        return (est @ self.places) / (self.levels - 1)

    def branch_devices(self, i: int) -> list[MemristorDevice]:
        return [MemristorDevice(bp, int(d)) for bp, d in zip(self.branch_presets, self.digits[i])]


class MemoryCell:
    """One multilevel cell (3 or 4 branches)."""

    def __init__(self, preset: DevicePreset, levels: int = 256, branch_count: int = 4, **kwargs):
        self._bank = MemoryArray(1, preset, levels, branch_count, **kwargs)

    @property
    def levels(self) -> int:
        return self._bank.levels

    @property
    def branch_count(self) -> int:
        return len(self._bank.radices)

    @property
    def branch_weights(self) -> np.ndarray:
        return self._bank.branch_weights

    @property
    def branches(self) -> list[MemristorDevice]:
        return self._bank.branch_devices(0)

    @property
    def pulse_count(self) -> int:
        return self._bank.pulse_count

    def store(self, value: float, rng: RngStream) -> int:
        return self._bank.store([value], rng)

    def recall(self, rng: RngStream) -> float:
        return float(self._bank.recall(rng)[0])


def cell_store(cell: MemoryCell, value: float, rng: RngStream) -> MemoryCell:
    cell.store(value, rng)
    return cell


def cell_recall(cell: MemoryCell, rng: RngStream) -> float:
    return cell.recall(rng)


def recall_error(preset: DevicePreset, levels: int, sigma: float, samples: int = 10_000, seed: int = 0,
                 branch_count: int = 4) -> float:
    """Mean |recall - stored| over ``samples`` uniform values at read noise ``sigma``."""
    bank = MemoryArray(samples, preset.replace(sigma_r=sigma, p_switch=1.0), levels, branch_count)
    rng = RngStream(seed)
    v = rng.substream(0).uniform(samples)
    bank.store(v, rng.substream(1))
    z = rng.substream(2).normal(1.0, bank.digits.shape)
    return float(np.mean(np.abs(bank._decode(bank.digits, sigma * z) - v)))


def calibrate_sigma(target_error: float = 0.10, levels: int = 256, preset: DevicePreset | None = None,
                    samples: int = 10_000, seed: int = 0, branch_count: int = 4, tol: float = 1e-4) -> float:
    """Largest read noise whose mean recall error stays at or below ``target_error``.

    Bisection with common random numbers, so the error curve is monotone in
    the noise scale.
    """
    preset = preset or DevicePreset()
    lo, hi = 0.0, 1.0
    while recall_error(preset, levels, hi, samples, seed, branch_count) <= target_error:
        lo, hi = hi, hi * 2
        if hi > 64:
            return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if recall_error(preset, levels, mid, samples, seed, branch_count) <= target_error:
            lo = mid
        else:
            hi = mid
    return lo
