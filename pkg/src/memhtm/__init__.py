"""Hierarchical temporal memory on simulated memristive hardware.

Spatial pooler and temporal memory kernels (:mod:`memhtm.spatial_pooler`,
:mod:`memhtm.temporal_memory`), a behavioral multilevel memristor model and
crossbar (:mod:`memhtm.device`, :mod:`memhtm.crossbar`), interchangeable ideal
and memristive compute backends (:mod:`memhtm.backend`), and the image
recognition pipeline with its cost model (:mod:`memhtm.pipeline`).
"""

from .backend import IdealBackend, MemristiveBackend, make_backend
from .core import ConfigError, HtmConfig, RngStream, Topology, load_config
from .crossbar import ALL_COLUMNS, SINGLE_COLUMN, CrossbarArray, map_weights, sneak_ratio
from .datasets import Dataset, DatasetError, generate_dataset, load_dataset, synthetic_suite
from .device import (CALIBRATED_SIGMA_256, PRESETS, DevicePreset, MemoryArray, MemoryCell, MemristorDevice,
                     ProgrammingError, calibrate_sigma, get_preset, recall_error)
from .experiment import ExperimentError, ExperimentSpec, run_experiment, run_sweep
from .pipeline import (ClassTemplate, CostTable, ImagePattern, PipelineConfig, RecognitionPipeline, SpEncoder,
                       classify, estimate_cost, match_score, preprocess, sp_encode, train_template)
from .spatial_pooler import SpatialPooler
from .temporal_memory import TemporalMemory

__version__ = "0.1.0"
