"""Spatial pooler: potential pools, permanences, overlap, local k-WTA
inhibition, Hebbian learning and boosting."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import HtmConfig, RngStream, Topology

# Stream tags keep the potential-pool and permanence draws independent.
_POTENTIAL_STREAM = 1
_PERMANENCE_STREAM = 2


@dataclass(frozen=True)
class PotentialMap:
    """Boolean (columns, inputs) mask; row ``i`` is the potential pool PI(i)."""

    mask: np.ndarray

    def pool(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.mask[i])


@dataclass(frozen=True)
class PermanenceMatrix:
    permanence: np.ndarray  # (columns, inputs), zero outside the potential pool
    potential: np.ndarray  # boolean (columns, inputs)
    theta_c: float

    @property
    def connected(self) -> np.ndarray:
        """Binary connected-synapse matrix (permanence >= theta_c on potential synapses)."""
        return ((self.permanence >= self.theta_c) & self.potential).astype(np.uint8)


@dataclass(frozen=True)
class ActivityStats:
    mean_activity: np.ndarray  # time-averaged activity per column
    boost: np.ndarray
    T: int
    eta: float

    @classmethod
    def initial(cls, n_columns: int, T: int, eta: float) -> "ActivityStats":
        return cls(np.zeros(n_columns), np.ones(n_columns), int(T), float(eta))


def init_potential(topo: Topology, rng: RngStream) -> PotentialMap:
    """Draw each column's potential pool from its clipped receptive field.

    Input ``j`` joins PI(i) when a uniform draw from column ``i``'s own
    substream falls below ``potential_fraction``; draws are taken in
    ascending input order.
    """
    mask = np.zeros((topo.column_count, topo.input_count), dtype=bool)
    for i in range(topo.column_count):
        cube = topo.hypercube(i)
        z = rng.substream(_POTENTIAL_STREAM, i).uniform(cube.size)
        mask[i, cube[z < topo.potential_fraction]] = True
    return PotentialMap(mask)


def init_permanence(pm: PotentialMap, rng: RngStream, theta_c: float) -> PermanenceMatrix:
    """Uniform permanences on potential synapses and exact zeros elsewhere."""
    perm = np.zeros(pm.mask.shape)
    for i in range(pm.mask.shape[0]):
        pool = pm.pool(i)
        perm[i, pool] = rng.substream(_PERMANENCE_STREAM, i).uniform(pool.size)
    return PermanenceMatrix(perm, pm.mask.copy(), float(theta_c))


def neighborhood(i: int, topo: Topology) -> np.ndarray:
    return topo.neighborhood(i)


def overlap(pm: PermanenceMatrix, inputs, boost, backend=None) -> np.ndarray:
    """Boosted count of active connected synapses per column.

    ``boost`` may be an :class:`ActivityStats` or a per-column array.  When a
    ``backend`` is given the connected-matrix product is delegated to its
    ``dot`` method (e.g. a crossbar read).
    """
    z = np.asarray(inputs)
    if z.ndim != 1 or z.size != pm.permanence.shape[1]:
        raise ValueError(f"input length {z.size} does not match input count {pm.permanence.shape[1]}")
    beta = boost.boost if isinstance(boost, ActivityStats) else np.asarray(boost, dtype=float)
    b = pm.connected
    raw = b @ z.astype(float) if backend is None else backend.dot(b, z.astype(float))
    return beta * raw


def winner_quota(s: float, pool_size) -> np.ndarray:
    """``ceil(s * m)`` guarded against float noise such as 0.1 * 30."""
    return np.ceil(np.round(s * np.asarray(pool_size, dtype=float), 9)).astype(int)


def inhibit(o, topo: Topology, s: float, theta_s: float) -> np.ndarray:
    """Local k-winners-take-all.

    A column is a candidate when fewer than ``ceil(s*m)`` members of its pool
    ``N(i) + {i}`` outrank it (higher overlap, or equal overlap and lower
    index) and its overlap reaches ``theta_s``.  Candidates are then admitted
    in global rank order as long as no pool exceeds its quota, which only
    matters when neighborhoods overlap without being global.
    """
    o = np.asarray(o, dtype=float)
    n = o.size
    if n != topo.column_count:
        raise ValueError(f"overlap length {n} does not match column count {topo.column_count}")
    if not np.all(np.isfinite(o)):
        raise ValueError("overlaps must be finite")
    pool = topo.neighbor_mask | np.eye(n, dtype=bool)
    quota = winner_quota(s, pool.sum(axis=1))

    idx = np.arange(n)
    # outranks[i, j]: column j beats column i
    outranks = (o[None, :] > o[:, None]) | ((o[None, :] == o[:, None]) & (idx[None, :] < idx[:, None]))
    beaten_by = (outranks & pool).sum(axis=1)
    candidate = (beaten_by < quota) & (o >= theta_s)

    active = np.zeros(n, dtype=np.uint8)
    if np.all((pool & candidate[None, :]).sum(axis=1) <= quota):
        active[candidate] = 1
        return active
    count = np.zeros(n, dtype=int)
    order = np.lexsort((idx, -o))
    for i in order:
        if not candidate[i]:
            continue
        holders = pool[:, i]
        if np.all(count[holders] < quota[holders]):
            active[i] = 1
            count[holders] += 1
    return active


def learn(pm: PermanenceMatrix, inputs, active, rho_plus: float, rho_minus: float) -> PermanenceMatrix:
    """Hebbian update on the potential synapses of active columns.

    Synapses from active inputs gain ``rho_plus``; the rest lose
    ``rho_minus``; values are clamped to [0, 1].
    """
    z = np.asarray(inputs).astype(bool)
    a = np.asarray(active).astype(bool)
    if z.size != pm.permanence.shape[1] or a.size != pm.permanence.shape[0]:
        raise ValueError("input/active lengths do not match the permanence matrix")
    if not a.any():
        return pm
    perm = pm.permanence.copy()
    step = np.where(z, rho_plus, -rho_minus)
    rows = perm[a]
    pot = pm.potential[a]
    rows = np.where(pot, np.clip(rows + step[None, :], 0.0, 1.0), 0.0)
    perm[a] = rows
    return replace(pm, permanence=perm)


def update_activity(stats: ActivityStats, active) -> ActivityStats:
    """Sliding-window average ``((T-1) * mean + active) / T``."""
    a = np.asarray(active, dtype=float)
    T = stats.T
    mean = ((T - 1) * stats.mean_activity + a) / T
    return replace(stats, mean_activity=mean)


def neighborhood_mean(values, topo: Topology) -> np.ndarray:
    """Mean of ``values`` over each column's neighborhood; a column with an
    empty neighborhood gets its own value."""
    v = np.asarray(values, dtype=float)
    nb = topo.neighbor_mask
    size = nb.sum(axis=1)
    total = nb.astype(float) @ v
    return np.where(size > 0, total / np.maximum(size, 1), v)


def neighborhood_deviation(values, topo: Topology) -> np.ndarray:
    """``values_i`` minus its neighborhood mean, averaged over pairwise
    differences so that equal values give exactly zero."""
    v = np.asarray(values, dtype=float)
    nb = topo.neighbor_mask
    size = nb.sum(axis=1)
    diff = np.where(nb, v[:, None] - v[None, :], 0.0).sum(axis=1)
    return np.where(size > 0, diff / np.maximum(size, 1), 0.0)


def update_boost(stats: ActivityStats, topo: Topology) -> ActivityStats:
    """``boost_i = exp(-eta * (mean_i - neighborhood mean_i))``."""
    boost = np.exp(-stats.eta * neighborhood_deviation(stats.mean_activity, topo))
    return replace(stats, boost=boost)


class SpatialPooler:
    """Stateful wrapper running overlap, inhibition, learning and boosting in
    order for each input.

    >>> topo = Topology(4, 4, 4, 4, hypercube_edge=3)
    >>> sp = SpatialPooler(topo, HtmConfig(s=0.25, theta_s=0), seed=1)
    >>> int(sp.compute(np.ones(16, dtype=np.uint8)).sum()) > 0
    True
    """

    def __init__(self, topology: Topology, config: HtmConfig, seed: int = 0, backend=None):
        self.topology = topology
        self.config = config
        self.backend = backend
        rng = RngStream(seed)
        self.potential = init_potential(topology, rng)
        self.permanences = init_permanence(self.potential, rng, config.theta_c)
        self.stats = ActivityStats.initial(topology.column_count, config.T, config.eta)
        self.iteration = 0

    def compute(self, inputs, learn_enabled: bool = True) -> np.ndarray:
        cfg = self.config
        o = overlap(self.permanences, inputs, self.stats, backend=self.backend)
        active = inhibit(o, self.topology, cfg.s, cfg.theta_s)
        if learn_enabled:
            self.permanences = learn(self.permanences, inputs, active, cfg.rho_plus, cfg.rho_minus)
            self.stats = update_boost(update_activity(self.stats, active), self.topology)
        self.iteration += 1
        return active
