"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test records a pass/fail line that is printed in the terminal summary
under "acceptance criteria".
"""

import math

import numpy as np
import pytest

from memhtm.backend import MemristiveBackend
from memhtm.core import HtmConfig, RngStream, Topology
from memhtm.crossbar import ALL_COLUMNS, map_weights, sneak_ratio
from memhtm.datasets import generate_dataset
from memhtm.device import CALIBRATED_SIGMA_256, DevicePreset, get_preset, recall_error
from memhtm.experiment import ExperimentSpec, report_json, run_experiment
from memhtm.pipeline import estimate_cost
from memhtm.spatial_pooler import (ActivityStats, PermanenceMatrix, inhibit, learn, update_boost, winner_quota)
from memhtm.temporal_memory import (SegmentSet, TemporalMemory, active_state, decay, predictive_state, reinforce)


@pytest.fixture(scope="module")
def suite_dataset(tmp_path_factory):
    # 10 classes of 16x16 binary patterns, 40 noisy copies each (20 train + 20 test)
    out = tmp_path_factory.mktemp("suite")
    return str(generate_dataset(out, n_classes=10, per_class=40, size=16, noise=0.05, seed=42))


@pytest.fixture(scope="module")
def suite_spec(suite_dataset):
    return ExperimentSpec(dataset=suite_dataset, seed=42, train_fraction=0.5, threads=4)


@pytest.fixture(scope="module")
def memristive_run(suite_spec):
    spec = suite_spec.replace(backend="memristive", preset="multilevel256")
    return spec, run_experiment(spec)[0]


def test_criterion_01_boost_identities(acceptance):
    rng = np.random.default_rng(1)
    topo = Topology(1, 1, 6, 4, inhibition_radius=2.0)
    exact_one = True
    for _ in range(200):
        act = rng.random(24)
        eta_zero = update_boost(ActivityStats(act, np.ones(24), 100, 0.0), topo).boost
        flat = update_boost(ActivityStats(np.full(24, act[0]), np.ones(24), 100, 5.0), topo).boost
        exact_one &= bool(np.all(eta_zero == 1.0) and np.all(flat == 1.0))
    line = Topology(1, 1, 3, 1, inhibition_radius=5.0)
    beta = update_boost(ActivityStats(np.array([0.3, 0.2, 0.2]), np.ones(3), 10, 10.0), line).boost[0]
    err = abs(beta - math.exp(-1))
    ok = acceptance(1, "boost identities", exact_one and err <= 1e-12, f"|beta - 1/e| = {err:.1e}")
    assert ok


def test_criterion_02_sp_sparsity(acceptance):
    exact = True
    for n in (4, 16, 100):
        topo = Topology.line(n, inhibition_radius=float(n + 1), n_inputs=n + 1)
        o = np.random.default_rng(n).permutation(n).astype(float)
        for s in (0.02, 0.25):
            exact &= int(inhibit(o, topo, s, 0).sum()) == math.ceil(s * n)
    rng = np.random.default_rng(2)
    violations = 0
    for _ in range(1000):
        w, h = int(rng.integers(2, 8)), int(rng.integers(1, 6))
        topo = Topology(1, 1, w, h, inhibition_radius=float(rng.uniform(0.5, 3.0)))
        s = float(rng.uniform(0.02, 0.6))
        active = inhibit(rng.integers(0, 5, w * h).astype(float), topo, s, 0).astype(bool)
        pool = topo.neighbor_mask | np.eye(w * h, dtype=bool)
        violations += int(np.any((pool & active[None, :]).sum(1) > winner_quota(s, pool.sum(1))))
    ok = acceptance(2, "SP sparsity", exact and violations == 0, f"cap violations {violations}/1000")
    assert ok


def test_criterion_03_permanence_bounds(acceptance):
    rng = np.random.default_rng(3)
    pot = rng.random((12, 20)) < 0.6
    pm = PermanenceMatrix(np.where(pot, rng.random((12, 20)), 0.0), pot, 0.5)
    segs = SegmentSet(rng.random((3, 5, 2, 3, 5)) * (rng.random((3, 5, 2, 3, 5)) < 0.7), 0.5)
    violations = 0
    for _ in range(10_000):
        rp, rm, rd = rng.uniform(0, 0.6, 3)
        pm = learn(pm, rng.integers(0, 2, 20), rng.integers(0, 2, 12), rp, rm)
        prev, now = rng.integers(0, 2, (3, 5)), rng.integers(0, 2, (3, 5))
        segs = reinforce(segs, prev, rp, rm, rng.random((3, 5, 2)) < 0.5)
        segs = decay(segs, now, prev, int(rng.integers(0, 3)), rd)
        violations += int(pm.permanence.min() < 0 or pm.permanence.max() > 1)
        violations += int(segs.permanence.min() < 0 or segs.permanence.max() > 1)
    ok = acceptance(3, "permanence bounds", violations == 0, f"{violations} violations in 10^4 steps")
    assert ok


def _oracle_predictive(perm, theta_c, active, theta_seg):
    cells, columns, segments = perm.shape[:3]
    out = np.zeros((cells, columns), dtype=np.uint8)
    for i in range(cells):
        for j in range(columns):
            for d in range(segments):
                count = sum(1 for x in range(cells) for y in range(columns)
                            if perm[i, j, d, x, y] >= theta_c and active[x, y])
                if count > theta_seg:
                    out[i, j] = 1
    return out


def _oracle_active(winners, prev_pred):
    cells, columns = prev_pred.shape
    out = np.zeros((cells, columns), dtype=np.uint8)
    for j in winners:
        burst = not any(prev_pred[i, j] for i in range(cells))
        for i in range(cells):
            out[i, j] = int(burst or prev_pred[i, j] == 1)
    return out


def test_criterion_04_tm_oracle(acceptance):
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(1000):
        cells, columns, segments = int(rng.integers(1, 5)), int(rng.integers(1, 7)), int(rng.integers(0, 4))
        perm = rng.random((cells, columns, segments, cells, columns))
        perm[rng.random(perm.shape) < 0.4] = 0.0
        a = rng.integers(0, 2, (cells, columns))
        theta = int(rng.integers(0, 3))
        pi = predictive_state(SegmentSet(perm, 0.5), a, theta)
        mismatches += int(not np.array_equal(pi, _oracle_predictive(perm, 0.5, a, theta)))
        winners = np.flatnonzero(rng.random(columns) < 0.5)
        mismatches += int(not np.array_equal(active_state(winners, pi), _oracle_active(winners, pi)))
    ok = acceptance(4, "TM oracle equivalence", mismatches == 0, f"{mismatches} mismatches")
    assert ok


def test_criterion_05_sequence_learning(acceptance):
    seq_a = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=np.uint8)
    cfg = HtmConfig(theta_c=0.5, theta_seg=1, rho_plus=0.1, rho_minus=0.1, rho_tilde_minus=0.02)
    backend = MemristiveBackend(DevicePreset(levels=256, p_switch=1.0, sigma_r=0.0), seed=42)
    tm = TemporalMemory(8, 2, cfg, seed=42, segments_per_cell=2, synapse_fraction=1.0, backend=backend)
    per_epoch = []
    for _ in range(60):
        bursts = 0
        for pattern in (seq_a, 1 - seq_a):
            tm.compute(pattern)
            bursts += len(tm.last_bursting)
        per_epoch.append(bursts)
    monotone = all(b <= a for a, b in zip(per_epoch, per_epoch[1:]))
    zero_at = next((e for e in range(60) if all(b == 0 for b in per_epoch[e:])), None)
    ok = acceptance(5, "sequence learning", monotone and zero_at is not None and zero_at < 50,
                    f"bursts first epochs {per_epoch[:4]}, zero from epoch {zero_at}")
    assert ok


def test_criterion_06_crossbar_exactness(acceptance):
    rng = np.random.default_rng(6)
    ideal = DevicePreset(levels=None)
    backend = MemristiveBackend(ideal)
    worst = 0.0
    for _ in range(1000):
        w, v = rng.random((32, 32)), rng.uniform(0, 0.9, 32)
        direct = v @ (1 / ideal.r_off + (1 / ideal.r_on - 1 / ideal.r_off) * w)
        worst = max(worst, float(np.max(np.abs(map_weights(w, ideal).matvec(v) - direct) / np.abs(direct))))
        m, x = rng.random((32, 32)), rng.random(32)
        worst = max(worst, float(np.max(np.abs(backend.dot(m, x) - m @ x) / np.abs(m @ x))))
    ok = acceptance(6, "crossbar exactness", worst <= 1e-9, f"worst relative error {worst:.1e}")
    assert ok


def test_criterion_07_quantized_storage(acceptance):
    preset = get_preset("multilevel256")
    err256 = recall_error(preset, 256, CALIBRATED_SIGMA_256, samples=20_000, seed=7)
    err1024 = recall_error(preset, 1024, CALIBRATED_SIGMA_256, samples=20_000, seed=7)
    ok = acceptance(7, "quantized storage", err256 <= 0.10 and err1024 > err256,
                    f"mean error L=256 {err256:.4f}, L=1024 {err1024:.4f}")
    assert ok


def test_criterion_08_synthetic_suite(acceptance, suite_spec, memristive_run):
    ideal = run_experiment(suite_spec)[0]["accuracy"]
    memristive = memristive_run[1]["accuracy"]
    gap = 100 * abs(ideal - memristive)
    ok = acceptance(8, "end-to-end synthetic suite", ideal >= 0.90 and gap <= 5.0,
                    f"ideal {ideal:.3f}, memristive {memristive:.3f}, gap {gap:.1f} points")
    assert ok


def test_criterion_09_cost_model(acceptance):
    table = {"sp_blocks_1x4": (19.96, 365.88), "tm_cells_1x1": (23.85, 442.26), "matcher_cells_1x1": (1.18, 69.44)}
    ok = all(estimate_cost({k: 1}) == {"area_um2": a, "power_uw": p} for k, (a, p) in table.items())
    assert acceptance(9, "cost model exactness", ok)


def test_criterion_10_sneak_mitigation(acceptance):
    rng = np.random.default_rng(10)
    preset = DevicePreset(levels=256)
    nonzero = 0
    for rows in (2, 3, 8, 17, 32, 64):
        for cols in (2, 5, 16, 64):
            x = map_weights(rng.random((rows, cols)), preset)
            nonzero += sum(sneak_ratio(x, (r, c)) != 0.0 for r, c in [(0, 0), (rows - 1, cols - 1)])
    uniform = map_weights(np.ones((2, 2)), DevicePreset(r_on=1e3, levels=2), access_mode=ALL_COLUMNS)
    err = abs(sneak_ratio(uniform, (0, 0)) - 1 / 3)
    ok = acceptance(10, "sneak mitigation", nonzero == 0 and err <= 1e-12,
                    f"nonzero single-column ratios {nonzero}, 2x2 error {err:.1e}")
    assert ok


def test_criterion_11_reproducibility(acceptance, memristive_run):
    spec, first = memristive_run
    again = report_json(run_experiment(spec)[0])
    single = report_json(run_experiment(spec.replace(threads=1))[0])
    ok = acceptance(11, "reproducibility", again == report_json(first) and single == again,
                    "repeat and threads 1 vs 4 compared byte for byte")
    assert ok
