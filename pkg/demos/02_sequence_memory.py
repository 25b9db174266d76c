"""Temporal memory learning an alternating two-pattern sequence.

Columns 0-3 fire at even steps and columns 4-7 at odd steps.  At first
every segment is dense, so each column is predicted at every step.
Reinforcement prunes the synapses that point at the wrong pattern until
only the correct next pattern is predicted.  The same run is repeated on a
memristive backend whose permanences live on a 256-level ladder.
"""

import numpy as np

from memhtm import HtmConfig, MemristiveBackend, TemporalMemory

A = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=np.uint8)
B = 1 - A
cfg = HtmConfig(theta_c=0.5, theta_seg=1, rho_plus=0.1, rho_minus=0.1, rho_tilde_minus=0.02)


def run(backend=None, steps=40):
    tm = TemporalMemory(8, 2, cfg, seed=42, segments_per_cell=2, synapse_fraction=1.0, backend=backend)
    wrong = []
    for t in range(steps):
        pattern, nxt = (A, B) if t % 2 == 0 else (B, A)
        tm.compute(pattern)
        predicted = tm.state.predictive.any(axis=0).astype(np.uint8)
        wrong.append(int(np.count_nonzero(predicted != nxt)))
    return wrong


for name, backend in [("ideal", None), ("memristive, 256 levels", MemristiveBackend("ideal256", seed=42))]:
    wrong = run(backend)
    settled = next(t for t in range(len(wrong)) if not any(wrong[t:]))
    print(f"{name:24s} wrongly predicted columns per step: {wrong[:12]} ... exact from step {settled}")
