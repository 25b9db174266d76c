"""End-to-end experiments: load a labeled image folder, encode, train class
templates, classify the held-out images and emit a structured report.

The report is a pure function of the dataset bytes and the spec.  Wall-clock
timings live in a separate sidecar so that reports stay byte-identical
between runs and across thread counts.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backend import make_backend
from .core import ConfigError, HtmConfig, parse_config_text
from .datasets import DatasetError, dataset_digest, load_dataset
from .device import DevicePreset, get_preset
from .pipeline import PipelineConfig, RecognitionPipeline, estimate_cost, pipeline_counts

REPORT_VERSION = 1

# Template and encoder settings used for the synthetic suite.  Each pixel is
# its own block so that single-pixel bit flips stay local, 64 weight draws
# average out the read noise of a memristive crossbar, and the low template
# threshold keeps saturated accumulator bits on when a noisy memory recall
# pulls them down.
SUITE_HTM = HtmConfig(rho_plus=0.2, rho_minus=0.2, gamma_tm=0.2)
SUITE_PIPELINE = PipelineConfig(block_size=1, region_blocks=4, iterations=64, weight_threshold=0.5)


class ExperimentError(RuntimeError):
    """Failure inside an experiment, annotated with the phase it happened in."""

    def __init__(self, phase: str, message: str, path=None):
        super().__init__(f"[{phase}] {message}")
        self.phase = phase
        self.message = message
        self.path = None if path is None else str(path)

    def to_dict(self) -> dict:
        out = {"error": type(self).__name__, "phase": self.phase, "message": self.message}
        if self.path is not None:
            out["path"] = self.path
        return out


@dataclass(frozen=True)
class RunKeys:
    """Experiment-level config-file keys (the rest belong to HtmConfig,
    PipelineConfig and DevicePreset)."""

    dataset: str = ""
    backend: str = "ideal"
    preset: str = "multilevel256"
    seed: int = 42
    train_fraction: float = 0.5
    threads: int = 1
    memory_levels: int = 256
    branch_count: int = 4
    access_mode: str = "single_column"


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str
    backend: str = "ideal"
    preset: str = "multilevel256"
    device_overrides: dict = field(default_factory=dict)
    seed: int = 42
    train_fraction: float = 0.5
    out: str | None = None
    threads: int = 1
    memory_levels: int = 256
    branch_count: int = 4
    access_mode: str = "single_column"
    htm: HtmConfig = SUITE_HTM
    pipeline: PipelineConfig = SUITE_PIPELINE

    def __post_init__(self):
        if self.backend not in ("ideal", "memristive"):
            raise ConfigError(f"unknown backend {self.backend!r}; expected 'ideal' or 'memristive'")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        self.device()  # validates preset name and overrides

    @property
    def test_fraction(self) -> float:
        return 1.0 - self.train_fraction

    def device(self) -> DevicePreset:
        return get_preset(self.preset, **self.device_overrides)

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)

    def with_setting(self, key: str, value: str) -> "ExperimentSpec":
        """Copy with one config-file key set from its text value."""
        return spec_from_text(f"{key} = {value}", base=self)

    def to_dict(self) -> dict:
        """Everything that determines the report (thread count and output
        path excluded)."""
        return {
            "dataset": self.dataset,
            "backend": self.backend,
            "preset": self.preset,
            "device_overrides": dict(sorted(self.device_overrides.items())),
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "memory_levels": self.memory_levels,
            "branch_count": self.branch_count,
            "access_mode": self.access_mode,
            "htm": dataclasses.asdict(self.htm),
            "pipeline": dataclasses.asdict(self.pipeline),
        }


_SCHEMAS = (RunKeys, HtmConfig, PipelineConfig, DevicePreset)


def spec_from_text(text: str, base: ExperimentSpec | None = None, **overrides) -> ExperimentSpec:
    """Apply flat ``key = value`` text on top of ``base`` (or the suite defaults)."""
    run, htm, pipe, dev = parse_config_text(text, *_SCHEMAS)
    base = base if base is not None else ExperimentSpec(dataset="")
    try:
        changes = dict(run)
        if htm:
            changes["htm"] = base.htm.replace(**htm)
        if pipe:
            changes["pipeline"] = dataclasses.replace(base.pipeline, **pipe)
        if dev:
            changes["device_overrides"] = {**base.device_overrides, **dev}
        changes.update(overrides)
        return base.replace(**changes)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def spec_from_file(path, **overrides) -> ExperimentSpec:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: config file not found")
    try:
        return spec_from_text(p.read_text(encoding="utf-8"), **overrides)
    except ConfigError as exc:
        raise ConfigError(f"{p}: {exc}") from exc


def _density_stats(sdrs: np.ndarray) -> dict:
    d = sdrs.mean(axis=1)
    return {"mean": float(d.mean()), "std": float(d.std()), "min": float(d.min()), "max": float(d.max())}


def _map(fn, items, threads: int):
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_experiment(spec: ExperimentSpec) -> tuple[dict, dict]:
    """Run one experiment.  Returns ``(report, timings)``."""
    timings = {}
    t0 = time.perf_counter()
    phase = "load"
    try:
        data = load_dataset(spec.dataset)
        digest = dataset_digest(spec.dataset)
    except DatasetError as exc:
        raise ExperimentError(phase, str(exc), spec.dataset) from exc
    try:
        train_idx, test_idx = data.split(spec.train_fraction)
    except ValueError as exc:
        raise ExperimentError(phase, str(exc), spec.dataset) from exc
    shapes = {img.shape for img in data.images}
    if len(shapes) != 1:
        raise ExperimentError(phase, f"images differ in shape: {sorted(shapes)}", spec.dataset)
    if test_idx.size == 0 or train_idx.size == 0:
        raise ExperimentError(phase, "split leaves the train or test set empty", spec.dataset)
    timings[phase] = time.perf_counter() - t0

    phase = "encode"
    t0 = time.perf_counter()
    try:
        if spec.backend == "memristive":
            backend = make_backend("memristive", spec.device(), seed=spec.seed, memory_levels=spec.memory_levels,
                                   branch_count=spec.branch_count, access_mode=spec.access_mode)
        else:
            backend = make_backend("ideal")
        pipe = RecognitionPipeline(spec.htm, spec.pipeline, backend, spec.seed)
        # build the shared encoder before any worker touches it
        pipe.encode(data.images[0], 0)
        sdrs = np.array(_map(lambda i: pipe.encode(data.images[i], i), range(len(data)), spec.threads))
    except (ConfigError, ValueError, RuntimeError) as exc:
        raise ExperimentError(phase, str(exc)) from exc
    timings[phase] = time.perf_counter() - t0

    phase = "train"
    t0 = time.perf_counter()
    n_classes = len(data.class_names)
    by_class = {c: [sdrs[i] for i in train_idx if data.labels[i] == c] for c in range(n_classes)}
    by_class = {c: v for c, v in by_class.items() if v}
    try:
        trained = _map(lambda c: pipe.train_class(c, by_class[c]), sorted(by_class), spec.threads)
    except (ValueError, RuntimeError) as exc:
        raise ExperimentError(phase, str(exc)) from exc
    pipe.templates = {t.class_id: t for t in trained}
    timings[phase] = time.perf_counter() - t0

    phase = "classify"
    t0 = time.perf_counter()
    predictions = np.array(_map(lambda i: pipe.predict_encoded(sdrs[i]), test_idx, spec.threads), dtype=int)
    truth = data.labels[test_idx]
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(confusion, (truth, predictions), 1)
    timings[phase] = time.perf_counter() - t0

    per_class = {}
    for c, name in enumerate(data.class_names):
        total = int(confusion[c].sum())
        per_class[name] = None if total == 0 else confusion[c, c] / total
    templates = np.array([pipe.templates[c].bits for c in sorted(pipe.templates)])
    h, w = data.images[0].shape
    counts = pipeline_counts(h * w, sdrs.shape[1], n_classes)
    report = {
        "report_version": REPORT_VERSION,
        "spec": spec.to_dict(),
        "dataset": {
            "digest_sha256": digest,
            "classes": list(data.class_names),
            "image_shape": [h, w],
            "train_count": int(train_idx.size),
            "test_count": int(test_idx.size),
        },
        "backend": backend.describe(),
        "accuracy": float(np.trace(confusion) / confusion.sum()),
        "per_class_accuracy": {k: (None if v is None else float(v)) for k, v in per_class.items()},
        "confusion_matrix": confusion.tolist(),
        "sdr_density": _density_stats(sdrs),
        "template_density": _density_stats(templates),
        "cost": {"counts": counts, **estimate_cost(counts)},
    }
    return report, {k: round(v, 6) for k, v in timings.items()}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def confusion_csv(report: dict) -> str:
    names = report["dataset"]["classes"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["true\\predicted", *names])
    for name, row in zip(names, report["confusion_matrix"]):
        writer.writerow([name, *row])
    return buf.getvalue()


def write_report(report: dict, timings: dict, out_dir) -> Path:
    """Write ``report.json``, ``confusion.csv`` and the ``timings.json`` sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_json(report), encoding="utf-8")
    (out / "confusion.csv").write_text(confusion_csv(report), encoding="utf-8")
    (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def parse_sweep(items) -> list[tuple[str, list[str]]]:
    """``["levels=16,64", "sigma_r=0,0.1"]`` -> ``[("levels", ["16", "64"]), ...]``."""
    axes = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"sweep axis {item!r} must look like KEY=v1,v2,...")
        key, values = item.split("=", 1)
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            raise ConfigError(f"sweep axis {key!r} has no values")
        if key.strip() in (k for k, _ in axes):
            raise ConfigError(f"sweep axis {key!r} given twice")
        axes.append((key.strip(), vals))
    if not axes:
        raise ConfigError("sweep needs at least one KEY=v1,v2,... axis")
    return axes


def run_sweep(spec: ExperimentSpec, axes, workers: int = 1) -> tuple[dict, list]:
    """Run the Cartesian grid over ``axes``; points are independent and run on
    ``workers`` threads.  Returns ``(summary, [(report, timings), ...])``."""
    keys = [k for k, _ in axes]
    grid = list(itertools.product(*(v for _, v in axes)))
    specs = []
    for values in grid:
        s = spec
        for k, v in zip(keys, values):
            s = s.with_setting(k, v)
        specs.append(s)
    results = _map(run_experiment, specs, workers)
    points = [
        {"settings": dict(zip(keys, values)), "accuracy": rep["accuracy"], "report": f"point_{i:03d}"}
        for i, (values, (rep, _)) in enumerate(zip(grid, results))
    ]
    summary = {"report_version": REPORT_VERSION, "base_spec": spec.to_dict(), "axes": dict(axes), "points": points}
    return summary, results
