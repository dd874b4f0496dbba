"""Noiseless self-checks shared by the test suite and ``rydrepeater verify``."""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from . import chainsim
from . import linkprotocol as lp
from . import statevec as sv

PERFECT = lp.NoiseParams(gamma=0.0, eta_ion=1.0, eta_t=1.0)


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


def check_generation_table(tol: float = 1e-12) -> list[Check]:
    """Replay steps i-xii without noise against the reference states."""
    trace: list = []
    lp.run_generation_sequence(sv.new_link_state(), PERFECT, np.random.default_rng(0), trace)
    out = []
    for (step, state), (ref_step, ref) in zip(trace, lp.EXPECTED_GENERATION_STATES):
        if step != ref_step:
            raise AssertionError(f"step order mismatch: {step} vs {ref_step}")
        ov = sv.overlap(state, sv.state_from(ref))
        out.append(Check(f"generation/{step}", ov >= 1 - tol, f"overlap={ov:.17g}"))
    return out


def expected_verdict(ion_rA_k: bool, ion_rA_k1: bool, ion_1A_k: bool, ion_1A_k1: bool) -> lp.Verdict:
    # case A: an r_A ion on either side; B1: both 1_A ions; B2: anything else
    if any((ion_rA_k, ion_rA_k1)):
        return lp.Verdict.RETRY_A
    return lp.Verdict.ACCEPT_B1 if all((ion_1A_k, ion_1A_k1)) else lp.Verdict.RETRY_B2


def check_diagnosis_truth_table() -> list[Check]:
    out = []
    for bits in itertools.product((False, True), repeat=4):
        got, want = lp.verdict_from_detections(*bits), expected_verdict(*bits)
        name = "diagnosis/" + "".join("1" if b else "0" for b in bits)
        out.append(Check(name, got is want, f"got={got.value} want={want.value}"))
    return out


def check_swap(n_nodes=(3, 4), gate: np.ndarray | None = None, tol: float = 1e-12) -> list[Check]:
    """Exhaustive outcome enumeration of :func:`chainsim.swap_oracle`."""
    out = []
    for n in n_nodes:
        for outcomes in itertools.product(itertools.product((0, 1), repeat=2), repeat=n - 2):
            res = chainsim.swap_oracle(n, list(outcomes), gate=gate, strict=False)
            tag = "".join(f"{a}{b}" for a, b in outcomes)
            out.append(Check(f"swap/N={n}/{tag}", res.fidelity >= 1 - tol, f"fidelity={res.fidelity:.17g}"))
    return out


def run_all(gate: np.ndarray | None = None) -> list[Check]:
    return check_generation_table() + check_diagnosis_truth_table() + check_swap(gate=gate)
