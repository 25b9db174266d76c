"""Shared types for the HTM simulator: configuration, seeded random streams and
input/column geometry."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration value or file is invalid."""


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


class RngStream:
    """Counter-based random substream keyed by ``(seed, stream_id, *key)``.

    Every stream owns an independent Philox generator, so draws taken from
    one stream never depend on how many draws were taken from another.  This
    is what keeps per-column / per-device randomness identical under any
    evaluation order or thread count.
    """

    def __init__(self, seed: int, stream_id: int = 0, key: tuple[int, ...] = ()):
        if seed < 0 or stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative")
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self.stream_id = int(stream_id)
        self.key = tuple(int(k) for k in key)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.key))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def substream(self, *key: int) -> "RngStream":
        """Child stream; independent of this stream's draw position."""
        return RngStream(self.seed, self.stream_id, self.key + tuple(key))

    def uniform(self, size=None):
        return self.generator.random(size)

    def normal(self, scale: float = 1.0, size=None):
        return self.generator.normal(0.0, scale, size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, key={self.key})"


def uniform_draw(stream: RngStream) -> float:
    """Next U[0, 1) draw from ``stream``."""
    return float(stream.generator.random())


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HtmConfig:
    """Algorithm parameters shared by the spatial pooler, temporal memory and
    the recognition pipeline.

    Field names double as the keys of the flat config file format.
    """

    theta_c: float = 0.5  # connected-permanence threshold
    theta_s: float = 1.0  # stimulus threshold (overlap count)
    s: float = 0.02  # target activation density
    rho_plus: float = 0.05
    rho_minus: float = 0.02
    T: int = 1000  # activity averaging window
    eta: float = 1.0  # boost adaptation strength
    theta_seg: int = 1  # segment activation threshold (strict >)
    s1: float = 0.02  # TM winning-column fraction
    rho_tilde_minus: float = 0.001  # TM long-term decay
    gamma_tm: float = 0.5  # class template binarization threshold

    def __post_init__(self):
        self.validate()

    def validate(self):
        def check(ok, msg):
            if not ok:
                raise ConfigError(msg)

        check(0.0 <= self.theta_c <= 1.0, f"theta_c must lie in [0, 1], got {self.theta_c}")
        check(self.theta_s >= 0, f"theta_s must be >= 0, got {self.theta_s}")
        check(0.0 < self.s < 1.0, f"s must lie in (0, 1), got {self.s}")
        check(0.0 < self.rho_plus < 1.0, f"rho_plus must lie in (0, 1), got {self.rho_plus}")
        check(0.0 < self.rho_minus < 1.0, f"rho_minus must lie in (0, 1), got {self.rho_minus}")
        check(int(self.T) == self.T and self.T >= 1, f"T must be an integer >= 1, got {self.T}")
        check(self.eta >= 0, f"eta must be >= 0, got {self.eta}")
        check(self.theta_seg >= 0, f"theta_seg must be >= 0, got {self.theta_seg}")
        check(0.0 < self.s1 < 1.0, f"s1 must lie in (0, 1), got {self.s1}")
        check(
            0.0 <= self.rho_tilde_minus < self.rho_minus,
            f"rho_tilde_minus must lie in [0, rho_minus), got {self.rho_tilde_minus}",
        )
        check(math.isfinite(self.gamma_tm), "gamma_tm must be finite")

    def replace(self, **changes) -> "HtmConfig":
        return dataclasses.replace(self, **changes)


def _coerce(value: str, target_type):
    text = value.strip()
    tname = target_type if isinstance(target_type, str) else getattr(target_type, "__name__", str(target_type))
    if "None" in tname and text.lower() in ("none", "inf", ""):
        return None
    if tname.startswith("int"):
        return int(text)
    if tname.startswith("str"):
        return text
    return float(text)


def parse_config_text(text: str, *schemas) -> list[dict]:
    """Parse flat ``key = value`` text into one dict per dataclass schema.

    Blank lines and ``#`` comments are ignored.  A key that belongs to none of
    ``schemas`` is an error, as is a repeated key.
    """
    owners = {}
    for idx, schema in enumerate(schemas):
        for f in dataclasses.fields(schema):
            owners.setdefault(f.name, (idx, f.type))
    out = [dict() for _ in schemas]
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = line.split("=", 1)
        elif ":" in line:
            key, value = line.split(":", 1)
        else:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key not in owners:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        seen.add(key)
        idx, ftype = owners[key]
        try:
            out[idx][key] = _coerce(value, ftype)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {value.strip()!r}") from exc
    return out


def load_config(path, *schemas) -> list[dict]:
    """Read a UTF-8 config file; see :func:`parse_config_text`."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return parse_config_text(text, *schemas)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    """Input grid, mini-column grid and the receptive-field / inhibition
    geometry that connects them.

    Inputs are indexed row-major, ``j = row * input_width + col``; columns
    likewise on a ``column_width x column_height`` grid.  Receptive fields
    are axis-aligned boxes (Chebyshev distance ``<= hypercube_edge / 2``)
    clipped at the input borders.

    ``inhibition_radius`` defaults to ``hypercube_edge`` when both grids have
    the same shape (and must equal it in that case); otherwise it defaults
    to the receptive-field span scaled by the column-per-input ratio.
    """

    input_width: int
    input_height: int
    column_width: int
    column_height: int
    hypercube_edge: float = 1.0
    potential_fraction: float = 1.0
    inhibition_radius: float | None = None
    _neighbors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("input_width", "input_height", "column_width", "column_height"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.hypercube_edge < 1:
            raise ConfigError(f"hypercube_edge must be >= 1, got {self.hypercube_edge}")
        if not 0.0 < self.potential_fraction <= 1.0:
            raise ConfigError(f"potential_fraction must lie in (0, 1], got {self.potential_fraction}")
        same_shape = (self.input_width, self.input_height) == (self.column_width, self.column_height)
        radius = self.inhibition_radius
        if radius is None:
            if same_shape:
                radius = float(self.hypercube_edge)
            else:
                ratio = math.sqrt(self.column_count / self.input_count)
                radius = float(self.hypercube_edge) * ratio
            object.__setattr__(self, "inhibition_radius", radius)
        if radius < 0:
            raise ConfigError(f"inhibition_radius must be >= 0, got {radius}")
        if same_shape and radius != self.hypercube_edge:
            raise ConfigError("inhibition_radius must equal hypercube_edge when input and column grids match")

        xy = self.column_layout
        d = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
        nb = d < radius
        np.fill_diagonal(nb, False)
        nb.setflags(write=False)
        object.__setattr__(self, "_neighbors", nb)

    @classmethod
    def line(cls, n_columns: int, inhibition_radius: float, n_inputs: int = 1, hypercube_edge: float = 1.0,
             potential_fraction: float = 1.0) -> "Topology":
        """1-D column row over a 1-D input row (handy for small experiments)."""
        return cls(n_inputs, 1, n_columns, 1, hypercube_edge, potential_fraction, inhibition_radius)

    @property
    def input_count(self) -> int:
        return self.input_width * self.input_height

    @property
    def column_count(self) -> int:
        return self.column_width * self.column_height

    @property
    def column_layout(self) -> np.ndarray:
        """(column_count, 2) array of (x, y) grid coordinates."""
        idx = np.arange(self.column_count)
        return np.stack([idx % self.column_width, idx // self.column_width], axis=1).astype(float)

    def input_xy(self, j: int) -> tuple[int, int]:
        if not 0 <= j < self.input_count:
            raise IndexError(f"input index {j} out of range [0, {self.input_count})")
        return j % self.input_width, j // self.input_width

    def hypercube_center_of(self, i: int) -> tuple[int, int]:
        """Input-grid coordinate at the centre of column ``i``'s receptive field."""
        if not 0 <= i < self.column_count:
            raise IndexError(f"column index {i} out of range [0, {self.column_count})")
        cx, cy = i % self.column_width, i // self.column_width

        def scale(c, n_col, n_in):
            return min(n_in - 1, int(math.floor((c + 0.5) * n_in / n_col)))

        return scale(cx, self.column_width, self.input_width), scale(cy, self.column_height, self.input_height)

    def hypercube(self, i: int) -> np.ndarray:
        """Sorted input indices inside column ``i``'s clipped receptive field."""
        cx, cy = self.hypercube_center_of(i)
        half = self.hypercube_edge / 2.0
        r = int(math.floor(half))
        xs = np.arange(max(0, cx - r), min(self.input_width - 1, cx + r) + 1)
        ys = np.arange(max(0, cy - r), min(self.input_height - 1, cy + r) + 1)
        return (ys[:, None] * self.input_width + xs[None, :]).ravel()

    def neighborhood(self, i: int) -> np.ndarray:
        """Columns within Euclidean distance ``< inhibition_radius`` of ``i``, excluding ``i``."""
        if not 0 <= i < self.column_count:
            raise IndexError(f"column index {i} out of range [0, {self.column_count})")
        return np.flatnonzero(self._neighbors[i])

    @property
    def neighbor_mask(self) -> np.ndarray:
        """Read-only (columns, columns) boolean adjacency of :meth:`neighborhood`."""
        return self._neighbors


def in_hypercube(j: int, i: int, topo: Topology) -> bool:
    """True iff input ``j`` lies in column ``i``'s receptive field."""
    x, y = topo.input_xy(j)
    cx, cy = topo.hypercube_center_of(i)
    return max(abs(x - cx), abs(y - cy)) <= topo.hypercube_edge / 2.0
