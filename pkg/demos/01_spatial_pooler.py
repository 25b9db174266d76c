"""Spatial pooler on noisy copies of a few binary prototypes.

Each prototype is a 16x16 binary image.  The pooler maps every input to a
sparse set of active columns; after a few passes the columns that respond
to one prototype barely overlap with those of the others, and the boost
factors stay close to 1 because local inhibition spreads activity evenly.
"""

import numpy as np

from memhtm import HtmConfig, RngStream, SpatialPooler, Topology
from memhtm.datasets import flip_bits

topo = Topology(16, 16, 8, 8, hypercube_edge=5, inhibition_radius=2.5)
cfg = HtmConfig(s=0.1, theta_s=1, rho_plus=0.05, rho_minus=0.02, T=50, eta=2.0)
sp = SpatialPooler(topo, cfg, seed=0)

rng = RngStream(7)
prototypes = [(rng.substream(0, k).uniform(256) < 0.3).astype(np.uint8) for k in range(3)]

for epoch in range(5):
    for k, proto in enumerate(prototypes):
        for n in range(10):
            sp.compute(flip_bits(proto, 12, rng.substream(1, epoch, k, n)))

codes = [sp.compute(p, learn_enabled=False).astype(bool) for p in prototypes]
print("active columns per prototype:", [int(c.sum()) for c in codes], "of", topo.column_count)
for a in range(3):
    for b in range(a + 1, 3):
        print(f"overlap between codes {a} and {b}: {int((codes[a] & codes[b]).sum())}")

noisy = sp.compute(flip_bits(prototypes[0], 25, RngStream(99)), learn_enabled=False).astype(bool)
print("noisy copy of prototype 0 shares", int((noisy & codes[0]).sum()), "columns with its clean code")
print(f"boost range after training: {sp.stats.boost.min():.3f} .. {sp.stats.boost.max():.3f}")
