"""
Checking the swap corrections by brute force
============================================

Builds the full state of a short chain of Bell pairs, applies the swap gate
and readout at each intermediate node, and checks that the tracked Pauli
correction leaves Phi+ between the end nodes.
"""

import itertools

import numpy as np

from rydrepeater import chainsim as cs

print("swap gate (rounded):")
print(np.round(cs.swap_gate_matrix(), 3))

for n in (3, 4):
    for outcomes in itertools.product(itertools.product((0, 1), repeat=2), repeat=n - 2):
        res = cs.swap_oracle(n, list(outcomes))
        print(f"N={n} outcomes={outcomes}: end state {res.end_state.value}, "
              f"correction {res.correction}, fidelity {res.fidelity:.12f}")

# a single wrong sign in the phase gate breaks the correction table
bad = cs.P_LR.copy()
bad[2, 2] *= -1
res = cs.swap_oracle(3, [(0, 1)], gate=cs.swap_gate_matrix(bad), strict=False)
print(f"\nwith a flipped sign: fidelity {res.fidelity:.3f}")
