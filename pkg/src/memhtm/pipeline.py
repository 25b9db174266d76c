"""System-level pattern recognition: preprocessing, mean-threshold spatial
pooling over image blocks, class-template training, XOR matching with
winner-take-all classification, and an area/power cost model.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

import numpy as np
from scipy import ndimage

from .backend import IdealBackend
from .core import ConfigError, HtmConfig, RngStream

_WEIGHT_STREAM = 11
_READ_STREAM = 12
_MEMORY_STREAM = 13


@dataclass(frozen=True)
class PipelineConfig:
    """Block geometry of the encoder.  Field names are config-file keys."""

    block_size: int = 3  # S: block edge in pixels
    region_blocks: int = 2  # inhibition region edge in blocks
    iterations: int = 4  # j: random weight draws averaged per block
    weight_threshold: float = 0.5  # binarization threshold for the random weights

    def __post_init__(self):
        if self.block_size < 1 or self.region_blocks < 1 or self.iterations < 1:
            raise ConfigError("block_size, region_blocks and iterations must be >= 1")
        if not 0.0 <= self.weight_threshold <= 1.0:
            raise ConfigError("weight_threshold must lie in [0, 1]")

    @property
    def region_pixels(self) -> int:
        return self.block_size * self.region_blocks


@dataclass(frozen=True)
class ImagePattern:
    pixels: np.ndarray  # (height, width) gray values in [0, 1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class ClassTemplate:
    class_id: int
    accumulator: np.ndarray
    bits: np.ndarray


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------


def grayscale(img) -> np.ndarray:
    """Average the channels of an (H, W, C) image; 2-D input passes through."""
    a = np.asarray(img, dtype=float)
    if a.size == 0:
        raise ValueError("empty image")
    if a.ndim == 2:
        return a
    if a.ndim == 3:
        return a.mean(axis=2)
    raise ValueError(f"expected a 2-D or 3-D image, got shape {a.shape}")


def normalize(x) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant image maps to zeros."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def std_filter(x, size: int = 3) -> np.ndarray:
    """Local population standard deviation over a ``size x size`` window,
    replicating border pixels."""
    x = np.asarray(x, dtype=float)
    mean = ndimage.uniform_filter(x, size=size, mode="nearest")
    sq = ndimage.uniform_filter(x * x, size=size, mode="nearest")
    return np.sqrt(np.maximum(sq - mean * mean, 0.0))


def preprocess(img) -> ImagePattern:
    return ImagePattern(std_filter(normalize(grayscale(img))))


# ---------------------------------------------------------------------------
# Spatial pooling
# ---------------------------------------------------------------------------


def _block_view(pixels: np.ndarray, s: int) -> np.ndarray:
    """(blocks_y, blocks_x, s*s) view of non-overlapping s x s blocks."""
    h, w = pixels.shape
    return pixels.reshape(h // s, s, w // s, s).transpose(0, 2, 1, 3).reshape(h // s, w // s, s * s)


class SpEncoder:
    """Mean-inhibition spatial pooler for one image geometry.

    Each block owns ``iterations`` binarized random ``S x S`` weight masks,
    drawn once from the block's own substream.  A block's value is the mean
    over iterations of ``mean(W * block)``; a block fires when its value
    strictly exceeds the mean block value of its inhibition region.
    """

    def __init__(self, height: int, width: int, cfg: PipelineConfig, rng: RngStream, backend=None):
        r = cfg.region_pixels
        if height % r or width % r:
            raise ConfigError(
                f"image {height}x{width} is not divisible into {r}x{r}-pixel inhibition regions "
                f"(block_size={cfg.block_size}, region_blocks={cfg.region_blocks})"
            )
        self.cfg = cfg
        self.shape = (height, width)
        self.backend = backend if backend is not None else IdealBackend()
        self.grid = (height // cfg.block_size, width // cfg.block_size)
        s2 = cfg.block_size ** 2
        n_blocks = self.grid[0] * self.grid[1]
        self.weights = np.empty((n_blocks, cfg.iterations, s2))
        for k in range(n_blocks):
            w = rng.substream(_WEIGHT_STREAM, k).uniform((cfg.iterations, s2))
            self.weights[k] = (w >= cfg.weight_threshold).astype(float)
        wstream = rng.substream(_WEIGHT_STREAM, n_blocks)
        self.products = [self.backend.program(self.weights[k], wstream.substream(k)) for k in range(n_blocks)]

    @property
    def n_bits(self) -> int:
        return self.grid[0] * self.grid[1]

    def block_values(self, image: ImagePattern, rng: RngStream | None = None, order=None) -> np.ndarray:
        px = np.asarray(image.pixels, dtype=float)
        if px.shape != self.shape:
            raise ValueError(f"image shape {px.shape} does not match encoder shape {self.shape}")
        blocks = _block_view(px, self.cfg.block_size).reshape(self.n_bits, -1)
        s2 = blocks.shape[1]
        values = np.empty(self.n_bits)
        keys = range(self.n_bits) if order is None else order
        for k in keys:
            read_rng = None if rng is None else rng.substream(_READ_STREAM, k)
            per_iter = self.products[k].dot(blocks[k], read_rng) / s2
            values[k] = per_iter.mean()
        return values.reshape(self.grid)

    def encode(self, image: ImagePattern, rng: RngStream | None = None, order=None) -> np.ndarray:
        """Binary block image, flattened row-major."""
        values = self.block_values(image, rng, order)
        rb = self.cfg.region_blocks
        gy, gx = self.grid
        regions = values.reshape(gy // rb, rb, gx // rb, rb)
        threshold = regions.mean(axis=(1, 3), keepdims=True)
        bits = (regions > threshold).astype(np.uint8)
        return bits.reshape(gy, gx).ravel()


def sp_encode(x: ImagePattern, cfg: PipelineConfig, rng: RngStream, backend=None,
              read_rng: RngStream | None = None) -> np.ndarray:
    """One-shot encoding; see :class:`SpEncoder`."""
    enc = SpEncoder(x.height, x.width, cfg, rng, backend)
    return enc.encode(x, read_rng if read_rng is not None else rng.substream(_READ_STREAM))


# ---------------------------------------------------------------------------
# Templates and matching
# ---------------------------------------------------------------------------


def train_template(patterns, cfg: HtmConfig, class_id: int = 0, backend=None,
                   rng: RngStream | None = None) -> ClassTemplate:
    """Accumulate a class template from binary patterns.

    The accumulator starts as the first pattern; every further pattern adds
    ``rho_plus`` on its active bits and subtracts ``rho_minus`` on the rest,
    clamped to [0, 1].  The accumulator is written to and read back from
    the backend's memory after every update.  Bits strictly above
    ``gamma_tm`` form the template.
    """
    pats = [np.asarray(p).astype(bool) for p in patterns]
    if not pats:
        raise ValueError("need at least one training pattern")
    n = pats[0].size
    if any(p.size != n for p in pats):
        raise ValueError("training patterns differ in length")
    backend = backend if backend is not None else IdealBackend()
    rng = rng if rng is not None else RngStream(0, stream_id=class_id)
    mem = backend.memory(n)
    mem.store(pats[0].astype(float), rng.substream(_MEMORY_STREAM, 0))
    acc = mem.recall(rng.substream(_MEMORY_STREAM, 0, 1))
    for t, p in enumerate(pats[1:], start=1):
        acc = np.clip(acc + np.where(p, cfg.rho_plus, -cfg.rho_minus), 0.0, 1.0)
        mem.store(acc, rng.substream(_MEMORY_STREAM, t))
        acc = mem.recall(rng.substream(_MEMORY_STREAM, t, 1))
    return ClassTemplate(class_id, acc, (acc > cfg.gamma_tm).astype(np.uint8))


def _bits(t) -> np.ndarray:
    return np.asarray(t.bits if isinstance(t, ClassTemplate) else t).astype(bool)


def match_score(template, x) -> int:
    """Hamming distance (sum of XOR) between a template and a pattern."""
    a, b = _bits(template), np.asarray(x).astype(bool)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: template {a.size} vs input {b.size}")
    return int(np.count_nonzero(a ^ b))


def classify(templates, x) -> int:
    """Class id of the nearest template; ties go to the lowest id."""
    if isinstance(templates, dict):
        items = sorted(templates.items())
    else:
        items = sorted(((t.class_id if isinstance(t, ClassTemplate) else i), t) for i, t in enumerate(templates))
    if not items:
        raise ValueError("need at least one template")
    best_id, best = None, None
    for cid, t in items:
        score = match_score(t, x)
        if best is None or score < best:
            best_id, best = cid, score
    return best_id


class RecognitionPipeline:
    """Preprocess, encode, train one template per class, classify."""

    def __init__(self, htm: HtmConfig, cfg: PipelineConfig, backend=None, seed: int = 0):
        self.htm = htm
        self.cfg = cfg
        self.backend = backend if backend is not None else IdealBackend()
        self.seed = seed
        self.encoder: SpEncoder | None = None
        self.templates: dict[int, ClassTemplate] = {}

    def _encoder_for(self, pattern: ImagePattern) -> SpEncoder:
        if self.encoder is None:
            self.encoder = SpEncoder(pattern.height, pattern.width, self.cfg, RngStream(self.seed, 1), self.backend)
        return self.encoder

    def encode(self, image, image_id: int) -> np.ndarray:
        pattern = preprocess(image)
        enc = self._encoder_for(pattern)
        return enc.encode(pattern, RngStream(self.seed, 2, (image_id,)))

    def train_class(self, class_id: int, sdrs) -> ClassTemplate:
        """Template for one class; independent of every other class."""
        return train_template(sdrs, self.htm, class_id, self.backend, RngStream(self.seed, 3, (class_id,)))

    def fit_encoded(self, sdrs_by_class: dict[int, list]):
        self.templates = {cid: self.train_class(cid, sdrs) for cid, sdrs in sorted(sdrs_by_class.items())}
        return self

    def predict_encoded(self, sdr) -> int:
        return classify(self.templates, sdr)


# ---------------------------------------------------------------------------
# Cost model
# ---------------------------------------------------------------------------


def _dec(x) -> Decimal:
    return x if isinstance(x, Decimal) else Decimal(str(x))


@dataclass(frozen=True)
class CostTable:
    """Per-block area (um^2) and power (uW) of the analog building blocks."""

    sp_block_area: Decimal = Decimal("19.96")  # SP receptor block, 1x4
    sp_block_power: Decimal = Decimal("365.88")
    tm_cell_area: Decimal = Decimal("23.85")  # TM, 1x1
    tm_cell_power: Decimal = Decimal("442.26")
    matcher_area: Decimal = Decimal("1.18")  # pattern matcher, 1x1
    matcher_power: Decimal = Decimal("69.44")

    def __post_init__(self):
        for name in ("sp_block_area", "sp_block_power", "tm_cell_area", "tm_cell_power", "matcher_area",
                     "matcher_power"):
            value = _dec(getattr(self, name))
            if value <= 0:
                raise ConfigError(f"{name} must be strictly positive")
            object.__setattr__(self, name, value)


def estimate_cost(counts: dict, table: CostTable | None = None) -> dict:
    """Linear area/power estimate.

    ``counts`` keys: ``sp_blocks_1x4``, ``tm_cells_1x1``, ``matcher_cells_1x1``
    (missing keys count as zero).  Sums are exact decimals rounded once to
    float, so unit counts reproduce the table entries exactly.
    """
    table = table or CostTable()
    known = {"sp_blocks_1x4", "tm_cells_1x1", "matcher_cells_1x1"}
    unknown = set(counts) - known
    if unknown:
        raise ValueError(f"unknown cost keys: {sorted(unknown)}")
    n_sp = int(counts.get("sp_blocks_1x4", 0))
    n_tm = int(counts.get("tm_cells_1x1", 0))
    n_m = int(counts.get("matcher_cells_1x1", 0))
    if min(n_sp, n_tm, n_m) < 0:
        raise ValueError("counts must be non-negative")
    area = n_sp * table.sp_block_area + n_tm * table.tm_cell_area + n_m * table.matcher_area
    power = n_sp * table.sp_block_power + n_tm * table.tm_cell_power + n_m * table.matcher_power
    return {"area_um2": float(area), "power_uw": float(power)}


def pipeline_counts(n_pixels: int, n_bits: int, n_classes: int) -> dict:
    """Hardware block counts for a pipeline: one 1x4 SP block per four input
    pixels, one TM cell per template bit and class, one matcher per bit and
    class."""
    return {
        "sp_blocks_1x4": -(-int(n_pixels) // 4),
        "tm_cells_1x1": int(n_bits) * int(n_classes),
        "matcher_cells_1x1": int(n_bits) * int(n_classes),
    }
