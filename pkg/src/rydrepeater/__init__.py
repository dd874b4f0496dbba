"""Quantum repeater built from Rydberg-blockaded atomic ensembles in cavities.

Modules
-------
statevec
    Sparse state vectors over collective ensemble and cavity occupations.
linkprotocol
    One heralded entanglement-generation round between neighbouring nodes.
chainsim
    Two-phase link generation, swapping and end-to-end timing for N nodes.
analytics
    Closed-form success probabilities, round counts and protocol times.
cli
    ``rydrepeater`` command-line front end.
"""

from .analytics import direct_time, n_bar, p0, p1, total_time
from .chainsim import ChainParams, run_end_to_end, swap_gate_matrix, swap_oracle
from .linkprotocol import NoiseParams, Verdict, attempt_link

__all__ = [
    "ChainParams", "NoiseParams", "Verdict", "attempt_link", "direct_time", "n_bar", "p0", "p1",
    "run_end_to_end", "swap_gate_matrix", "swap_oracle", "total_time",
]
__version__ = "0.1.0"
