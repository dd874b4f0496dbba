"""
A ten-node chain, end to end
============================

Entangles all links in two synchronized phases, swaps at every intermediate
node, and repeats until the swap chain succeeds.  The mean time is compared
with the closed form (L0/c) * n_bar / P1.
"""

import numpy as np

from rydrepeater import analytics as an
from rydrepeater import chainsim as cs

params = cs.ChainParams()  # N = 10, L0 = 100 km
summary = cs.run_end_to_end(params, 20_000, np.random.default_rng(3))

print(f"mean rounds for one pass: {summary.mean_first_pass:.1f} +- {summary.sem_first_pass:.1f}")
print(f"closed-form n_bar:        {an.n_bar(an.chain_p0(params), 10).n_bar:.1f}")
print(f"mean protocol repeats:    {summary.mean_repeats:.3f} (1/P1 = {1 / an.p1(10, params.noise):.3f})")
print(f"mean time: {summary.mean_time:.4f} +- {summary.sem_time:.4f} s, closed form {an.total_time(params):.4f} s")

# the Pauli frame: which correction each trial ends with
words = [r.correction for r in summary.records]
for w in ("I", "X", "Z", "ZX"):
    print(f"  correction {w:2s}: {words.count(w) / len(words):.3f}")

# how the time grows with the number of nodes at fixed spacing
for n in (4, 8, 16, 32):
    p = cs.ChainParams(n_nodes=n)
    print(f"N = {n:2d}: T = {an.total_time(p):.3f} s over {p.L_total:.0f} km")
