"""Labeled image folders (PGM or CSV) and the synthetic binary-pattern suite."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import RngStream


class DatasetError(ValueError):
    """Malformed or unreadable dataset content; the message names the file."""


@dataclass
class Dataset:
    images: list  # 2-D float arrays in [0, 1]
    labels: np.ndarray  # int class index per image
    class_names: list
    files: list

    def __len__(self):
        return len(self.images)

    def split(self, train_fraction: float):
        """Per-class split in file order: the first ``round(f * n)`` files of
        each class train, the rest test.  Returns index arrays."""
        if not 0.0 < train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        train, test = [], []
        for c in range(len(self.class_names)):
            idx = np.flatnonzero(self.labels == c)
            k = int(round(train_fraction * idx.size))
            train.extend(idx[:k])
            test.extend(idx[k:])
        return np.array(train, dtype=int), np.array(test, dtype=int)


def _pgm_tokens(data: bytes, path):
    """Yield header tokens, skipping comments; returns the offset after maxval."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise DatasetError(f"{path}: truncated PGM header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    """Decode a P2 (ASCII) or P5 (binary) PGM to floats in [0, 1] (value / maxval)."""
    path = Path(path)
    data = path.read_bytes()
    tokens, offset = _pgm_tokens(data, path)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise DatasetError(f"{path}: not a P2/P5 PGM (magic {magic!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise DatasetError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise DatasetError(f"{path}: malformed PGM header (width={width}, height={height}, maxval={maxval})")
    n = width * height
    if magic == b"P2":
        body = data[offset:].split()
        if len(body) != n:
            raise DatasetError(f"{path}: expected {n} pixels, found {len(body)}")
        try:
            pixels = np.array([int(v) for v in body], dtype=float)
        except ValueError:
            raise DatasetError(f"{path}: non-integer pixel value") from None
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        body = data[offset:]
        if len(body) != n * dtype.itemsize:
            raise DatasetError(f"{path}: expected {n * dtype.itemsize} bytes of pixel data, found {len(body)}")
        pixels = np.frombuffer(body, dtype=dtype).astype(float)
    if np.any(pixels > maxval):
        raise DatasetError(f"{path}: pixel value exceeds maxval {maxval}")
    return (pixels / maxval).reshape(height, width)


def write_pgm(path, image, maxval: int = 255, binary: bool = False):
    """Write an image in [0, 1] as P2 (default) or P5 PGM."""
    img = np.asarray(image, dtype=float)
    q = np.rint(np.clip(img, 0, 1) * maxval).astype(int)
    h, w = q.shape
    path = Path(path)
    if binary:
        if maxval > 255:
            raise ValueError("binary PGM writer supports maxval <= 255")
        path.write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + q.astype(np.uint8).tobytes())
        return
    lines = [f"P2\n{w} {h}\n{maxval}"] + [" ".join(str(v) for v in row) for row in q]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def read_csv_image(path) -> np.ndarray:
    """Comma-separated gray matrix; values above 1 are taken as 0-255."""
    path = Path(path)
    rows = []
    width = None
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: non-numeric value") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DatasetError(f"{path}:{lineno}: ragged row ({len(row)} values, expected {width})")
        rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: empty CSV image")
    a = np.array(rows)
    if a.min() < 0:
        raise DatasetError(f"{path}: negative pixel value")
    return a / 255.0 if a.max() > 1.0 else a


_READERS = {".pgm": read_pgm, ".csv": read_csv_image}


def load_dataset(path) -> Dataset:
    """Load ``path/<class>/<image>.{pgm,csv}``; classes and files sorted by name."""
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"{root}: dataset directory not found")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DatasetError(f"{root}: no class subfolders")
    images, labels, files = [], [], []
    for c, d in enumerate(class_dirs):
        members = sorted(p for p in d.iterdir() if p.suffix.lower() in _READERS)
        if not members:
            raise DatasetError(f"{d}: empty class (no .pgm or .csv images)")
        for f in members:
            images.append(_READERS[f.suffix.lower()](f))
            labels.append(c)
            files.append(f)
    return Dataset(images, np.array(labels, dtype=int), [d.name for d in class_dirs], files)


def dataset_digest(path) -> str:
    """SHA-256 over relative file names and bytes, in sorted order."""
    root = Path(path)
    h = hashlib.sha256()
    for f in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(f.relative_to(root).as_posix().encode("utf-8") + b"\0")
        h.update(f.read_bytes())
    return h.hexdigest()


def flip_bits(pattern, n_flips: int, rng: RngStream) -> np.ndarray:
    """Copy of a binary pattern with exactly ``n_flips`` distinct bits inverted."""
    p = np.asarray(pattern).astype(np.uint8).copy()
    flat = p.ravel()
    idx = rng.generator.choice(flat.size, size=n_flips, replace=False)
    flat[idx] ^= 1
    return p


def synthetic_suite(n_classes: int = 10, per_class: int = 40, size: int = 16, noise: float = 0.05,
                    seed: int = 42):
    """Random binary base patterns and noisy copies.

    Returns ``(bases, images, labels)``; each image flips
    ``round(noise * size**2)`` pixels of its class base.
    """
    rng = RngStream(seed, stream_id=21)
    bases = [(rng.substream(0, c).uniform((size, size)) < 0.5).astype(np.uint8) for c in range(n_classes)]
    n_flips = int(round(noise * size * size))
    images, labels = [], []
    for c in range(n_classes):
        for k in range(per_class):
            images.append(flip_bits(bases[c], n_flips, rng.substream(1, c, k)))
            labels.append(c)
    return bases, images, np.array(labels, dtype=int)


def generate_dataset(out_dir, n_classes: int = 10, per_class: int = 40, size: int = 16, noise: float = 0.05,
                     seed: int = 42, binary: bool = False) -> Path:
    """Write :func:`synthetic_suite` as ``class_XX/img_YYY.pgm`` files."""
    out = Path(out_dir)
    _, images, labels = synthetic_suite(n_classes, per_class, size, noise, seed)
    counters = {}
    for img, c in zip(images, labels):
        d = out / f"class_{int(c):02d}"
        d.mkdir(parents=True, exist_ok=True)
        k = counters.get(c, 0)
        counters[c] = k + 1
        write_pgm(d / f"img_{k:03d}.pgm", img, binary=binary)
    return out
