"""Temporal memory: predictive cells from dendrite segments, column
activation with bursting, segment reinforcement and long-term decay.

Activation and predictive matrices have shape ``(cells_per_column,
columns)``.  Segment permanences live in one array of shape ``(cells,
columns, segments, cells, columns)``: entry ``[i, j, d]`` is the lateral
synapse matrix of segment ``d`` on cell ``i`` of column ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import HtmConfig, RngStream

_SEGMENT_STREAM = 3


@dataclass(frozen=True)
class SegmentSet:
    permanence: np.ndarray
    theta_c: float

    @property
    def shape(self):
        cells, columns, segments = self.permanence.shape[:3]
        return cells, columns, segments

    @property
    def connected(self) -> np.ndarray:
        return (self.permanence >= self.theta_c).astype(np.uint8)

    @property
    def positive(self) -> np.ndarray:
        return (self.permanence > 0).astype(np.uint8)


@dataclass(frozen=True)
class TmState:
    active: np.ndarray
    predictive: np.ndarray
    prev_active: np.ndarray
    prev_predictive: np.ndarray

    @classmethod
    def initial(cls, cells: int, columns: int) -> "TmState":
        z = np.zeros((cells, columns), dtype=np.uint8)
        return cls(z, z.copy(), z.copy(), z.copy())


def init_segments(cells: int, columns: int, rng: RngStream, theta_c: float, segments: int = 1,
                  synapse_fraction: float = 0.5) -> SegmentSet:
    """Random lateral segments: each segment samples ``synapse_fraction`` of
    the other cells and gives them U(0, 1) permanences; all remaining
    entries are exactly zero.  Each cell draws from its own substream."""
    perm = np.zeros((cells, columns, segments, cells, columns))
    for i in range(cells):
        for j in range(columns):
            stream = rng.substream(_SEGMENT_STREAM, j, i)
            z = stream.uniform((segments, cells, columns))
            values = stream.uniform((segments, cells, columns))
            chosen = z < synapse_fraction
            chosen[:, i, j] = False  # no self-synapse
            perm[i, j] = np.where(chosen, values, 0.0)
    return SegmentSet(perm, float(theta_c))


def segment_activity(segs: SegmentSet, active) -> np.ndarray:
    """Connected-synapse overlap of every segment with ``active``; shape (cells, columns, segments)."""
    a = np.asarray(active, dtype=np.int64)
    return np.einsum("ijdxy,xy->ijd", segs.connected.astype(np.int64), a)


def predictive_state(segs: SegmentSet, active, theta_seg) -> np.ndarray:
    """A cell is predictive when some segment's overlap with ``active`` exceeds ``theta_seg``."""
    if segs.permanence.shape[2] == 0:
        return np.zeros(segs.permanence.shape[:2], dtype=np.uint8)
    return (segment_activity(segs, active) > theta_seg).any(axis=-1).astype(np.uint8)


def winners_from_sp(sp_active) -> np.ndarray:
    """Indices of the active SP columns."""
    return np.flatnonzero(np.asarray(sp_active))


def winners_from_scores(scores, s1: float) -> np.ndarray:
    """Top ``s1`` fraction of columns by score (at least one), ties to lower index."""
    scores = np.asarray(scores, dtype=float)
    k = max(1, int(np.ceil(np.round(s1 * scores.size, 9))))
    order = np.lexsort((np.arange(scores.size), -scores))
    return np.sort(order[:k])


def _winner_mask(winners, columns: int) -> np.ndarray:
    mask = np.zeros(columns, dtype=bool)
    mask[np.asarray(list(winners), dtype=int)] = True
    return mask


def active_state(winners, prev_predictive) -> np.ndarray:
    """Activate previously predictive cells of winning columns; a winning
    column with no predictive cell bursts (all its cells activate)."""
    pi = np.asarray(prev_predictive).astype(bool)
    win = _winner_mask(winners, pi.shape[1])
    burst = win & ~pi.any(axis=0)
    a = (pi & win[None, :]) | burst[None, :]
    return a.astype(np.uint8)


def bursting_columns(winners, prev_predictive) -> np.ndarray:
    pi = np.asarray(prev_predictive).astype(bool)
    win = _winner_mask(winners, pi.shape[1])
    return np.flatnonzero(win & ~pi.any(axis=0))


def _apply(segs: SegmentSet, delta: np.ndarray, backend) -> SegmentSet:
    if backend is None:
        perm = np.clip(segs.permanence + delta, 0.0, 1.0)
    else:
        perm = backend.apply_update(segs.permanence, delta)
    return replace(segs, permanence=perm)


def reinforce(segs: SegmentSet, prev_active, rho_plus: float, rho_minus: float, qualifying=None,
              backend=None) -> SegmentSet:
    """Hebbian segment update toward the previous activation.

    Positive synapses onto cells active at t-1 gain ``rho_plus``; the other
    positive synapses lose ``rho_minus``.  ``qualifying`` selects the
    segments to update, either per cell ``(cells, columns)`` or per segment
    ``(cells, columns, segments)``; ``None`` updates every segment.
    """
    cells, columns, segments = segs.shape
    a_prev = np.asarray(prev_active, dtype=float)
    if qualifying is None:
        q = np.ones((cells, columns, segments), dtype=bool)
    else:
        q = np.asarray(qualifying).astype(bool)
        if q.ndim == 2:
            q = np.repeat(q[:, :, None], segments, axis=2)
    if not q.any():
        return segs
    pos = segs.positive.astype(float)
    delta = rho_plus * pos * a_prev - rho_minus * pos * (1.0 - a_prev)
    delta = delta * q[..., None, None]
    return _apply(segs, delta, backend)


def decay(segs: SegmentSet, active, prev_active, theta_seg, rho_tilde_minus: float, backend=None) -> SegmentSet:
    """Small depression of segments that were active at t-1 on cells that are inactive now."""
    a = np.asarray(active).astype(bool)
    was_active = segment_activity(segs, prev_active) > theta_seg
    q = was_active & ~a[:, :, None]
    if not q.any():
        return segs
    delta = -rho_tilde_minus * segs.positive.astype(float) * q[..., None, None]
    return _apply(segs, delta, backend)


def tm_step(state: TmState, segs: SegmentSet, sp_active, config: HtmConfig, learn: bool = True,
            backend=None) -> tuple[TmState, SegmentSet]:
    """One time step: winners, activation, reinforcement, decay, prediction.

    The incoming ``state.active`` / ``state.predictive`` are the t-1 values.
    Reinforcement targets segments that were active at t-1 on cells that
    were predictive and became active.
    """
    a_prev = state.active
    pi_prev = state.predictive
    winners = winners_from_sp(sp_active)
    a = active_state(winners, pi_prev)
    if learn:
        was_active = segment_activity(segs, a_prev) > config.theta_seg
        correct = (a.astype(bool) & pi_prev.astype(bool))[:, :, None] & was_active
        reinforced = reinforce(segs, a_prev, config.rho_plus, config.rho_minus, correct, backend=backend)
        segs = decay(reinforced, a, a_prev, config.theta_seg, config.rho_tilde_minus, backend=backend) \
            if config.rho_tilde_minus > 0 else reinforced
    pi = predictive_state(segs, a, config.theta_seg)
    return TmState(a, pi, a_prev, pi_prev), segs


class TemporalMemory:
    """Stateful temporal memory driven by SP output, one call per time step."""

    def __init__(self, columns: int, cells_per_column: int, config: HtmConfig, seed: int = 0,
                 segments_per_cell: int = 1, synapse_fraction: float = 0.5, backend=None):
        self.config = config
        self.backend = backend
        self.segments = init_segments(cells_per_column, columns, RngStream(seed), config.theta_c,
                                      segments_per_cell, synapse_fraction)
        if backend is not None:
            self.segments = replace(self.segments, permanence=backend.quantize(self.segments.permanence))
        self.state = TmState.initial(cells_per_column, columns)
        self.last_bursting = np.zeros(0, dtype=int)

    def compute(self, sp_active, learn: bool = True) -> np.ndarray:
        winners = winners_from_sp(sp_active)
        self.last_bursting = bursting_columns(winners, self.state.predictive)
        self.state, self.segments = tm_step(self.state, self.segments, sp_active, self.config, learn,
                                            backend=self.backend)
        return self.state.active

    def reset(self):
        cells, columns = self.state.active.shape
        self.state = TmState.initial(cells, columns)
