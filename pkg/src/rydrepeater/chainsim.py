"""Chain-level discrete-event simulation of the N-node repeater.

Links are generated in two phases of synchronized rounds: first the links
``(R_1, L_2), (R_3, L_4), ...`` and then the interleaving ones.  In each round
every unfinished link of the phase makes one attempt; a phase lasts as many
rounds as its slowest link.  Once all links are up, every intermediate node
applies the swap gate and reads out its two subnodes.  A failure at any node
restarts the whole protocol.

Two schedules are available.  ``"symmetric"`` gives both phases ``K = N // 2``
links, which is the bookkeeping behind the closed-form round count;
``"physical"`` splits the ``N - 1`` links as ``ceil((N-1)/2)`` and
``floor((N-1)/2)``.  For odd N the two coincide.

Generation rounds run either ``"fast"`` (one Bernoulli(p0) draw per link per
round) or ``"faithful"`` (a full state-vector :func:`attempt_link` per link per
round).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import NamedTuple, Sequence

import numpy as np

from . import analytics
from .linkprotocol import NoiseParams, attempt_link


@dataclass(frozen=True)
class ChainParams:
    """Chain geometry and physics.  ``p0`` overrides the closed-form link budget."""

    n_nodes: int = 10
    noise: NoiseParams = field(default_factory=NoiseParams)
    chi_r: float = 1e10
    p0: float | None = None
    schedule: str = "symmetric"

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("a chain needs at least two nodes")
        if self.p0 is not None and not 0 < self.p0 <= 1:
            raise ValueError("p0 must lie in (0, 1]")
        if self.schedule not in ("symmetric", "physical"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.chi_r <= 0:
            raise ValueError("chi_r must be positive")

    @property
    def L0(self) -> float:
        return self.noise.L0

    @property
    def L_att(self) -> float:
        return self.noise.L_att

    @property
    def c(self) -> float:
        return self.noise.c

    @property
    def L_total(self) -> float:
        return self.noise.L0 * (self.n_nodes - 1)


class BellLabel(enum.Enum):
    PHI_PLUS = "Phi+"
    PHI_MINUS = "Phi-"
    PSI_PLUS = "Psi+"
    PSI_MINUS = "Psi-"


BELL_VECTORS = {
    BellLabel.PHI_PLUS: np.array([1, 0, 0, 1]) / math.sqrt(2),
    BellLabel.PHI_MINUS: np.array([1, 0, 0, -1]) / math.sqrt(2),
    BellLabel.PSI_PLUS: np.array([0, 1, 1, 0]) / math.sqrt(2),
    BellLabel.PSI_MINUS: np.array([0, 1, -1, 0]) / math.sqrt(2),
}

# Pauli words as (x, z) exponent bits; word = Z**z X**x up to a global phase
PAULI_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "ZX": (1, 1)}
PAULI_NAMES = {bits: name for name, bits in PAULI_BITS.items()}
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0, -1.0]).astype(complex)
PAULI_MATRICES = {"I": np.eye(2, dtype=complex), "X": _X, "Z": _Z, "ZX": _Z @ _X}

# state left on (R_1, L_N) before correction, indexed by the correction word
_UNCORRECTED = {"I": BellLabel.PHI_PLUS, "X": BellLabel.PSI_PLUS,
                "Z": BellLabel.PHI_MINUS, "ZX": BellLabel.PSI_MINUS}


def correction_for(i_L: int, i_R: int) -> str:
    """W_k for readout bits of L_k and R_k: (0,0) I, (0,1) X, (1,0) Z, (1,1) ZX."""
    return PAULI_NAMES[(i_R, i_L)]


def compose(words: Sequence[str]) -> str:
    """Product of Pauli words, global phase dropped."""
    x, z = reduce(lambda a, b: (a[0] ^ b[0], a[1] ^ b[1]), (PAULI_BITS[w] for w in words), (0, 0))
    return PAULI_NAMES[(x, z)]


class SwapOutcome(NamedTuple):
    i_L: int
    i_R: int

    @property
    def correction(self) -> str:
        return correction_for(self.i_L, self.i_R)


P_LR = np.diag([-1.0, -1.0, 1.0, -1.0]).astype(complex)


def _rot(theta: float, sigma: np.ndarray) -> np.ndarray:
    # exp(-i theta sigma) for a Pauli matrix
    return math.cos(theta) * np.eye(2) - 1j * math.sin(theta) * sigma


def swap_gate_matrix(p_lr: np.ndarray | None = None) -> np.ndarray:
    """(U_L x U_R) P_LR (I_L x V_R) in the basis |i_L i_R> = |00>, |01>, |10>, |11>."""
    U = _rot(math.pi / 2, _Z) @ _rot(math.pi / 4, _Y)
    V = _rot(math.pi / 2, _X) @ _rot(math.pi / 2, _Z) @ _rot(math.pi / 4, _Y)
    p_lr = P_LR if p_lr is None else p_lr
    return np.kron(U, U) @ p_lr @ np.kron(np.eye(2), V)


class SwapOracleResult(NamedTuple):
    end_state: BellLabel
    correction: str
    fidelity: float
    probability: float


def _chain_state(n_nodes: int) -> np.ndarray:
    # qubit order R_1, L_2, R_2, L_3, ..., R_{N-1}, L_N; Bell pairs on (R_k, L_{k+1})
    psi = np.array([1.0 + 0j])
    for _ in range(n_nodes - 1):
        psi = np.kron(psi, BELL_VECTORS[BellLabel.PHI_PLUS])
    return psi.reshape((2,) * (2 * (n_nodes - 1)))


def swap_oracle(n_nodes: int, outcomes: Sequence[tuple[int, int]], gate: np.ndarray | None = None,
                strict: bool = True) -> SwapOracleResult:
    """Brute-force state-vector check of swapping along a short chain.

    Builds the product of Bell pairs, applies the swap gate to ``(L_k, R_k)`` of
    every intermediate node, projects on the given readout bits and
    identifies the Bell state left on ``(R_1, L_N)``.  ``fidelity`` is that of
    the corrected pair with Phi+; with ``strict`` a fidelity below ``1 - 1e-12``
    raises AssertionError.
    """
    if not 3 <= n_nodes <= 6:
        raise ValueError("swap_oracle supports 3 <= n_nodes <= 6")
    if len(outcomes) != n_nodes - 2:
        raise ValueError(f"expected {n_nodes - 2} outcome pairs, got {len(outcomes)}")
    gate = swap_gate_matrix() if gate is None else gate
    g = gate.reshape(2, 2, 2, 2)
    psi = _chain_state(n_nodes)
    prob = 1.0
    for node, (i_L, i_R) in enumerate(outcomes, start=2):
        ax_L, ax_R = 2 * node - 3, 2 * node - 2
        psi = np.tensordot(g, psi, axes=([2, 3], [ax_L, ax_R]))
        psi = np.moveaxis(psi, [0, 1], [ax_L, ax_R])
        index = [slice(None)] * psi.ndim
        index[ax_L], index[ax_R] = i_L, i_R
        keep = np.zeros_like(psi)
        keep[tuple(index)] = psi[tuple(index)]
        p = float(np.vdot(keep, keep).real)
        if p < 1e-14:
            raise ValueError(f"outcome {(i_L, i_R)} at node {node} has zero probability")
        prob *= p
        psi = keep / math.sqrt(p)
    # trace out the measured qubits, which are now in a product basis state
    flat = psi.reshape(2, -1, 2)
    pair = flat.sum(axis=1).reshape(4)
    pair = pair / np.linalg.norm(pair)
    overlaps = {lbl: abs(np.vdot(vec, pair)) ** 2 for lbl, vec in BELL_VECTORS.items()}
    end_state = max(overlaps, key=overlaps.get)
    word = compose([correction_for(i_L, i_R) for i_L, i_R in outcomes])
    corrected = np.kron(np.eye(2), PAULI_MATRICES[word]) @ pair
    fidelity = float(abs(np.vdot(BELL_VECTORS[BellLabel.PHI_PLUS], corrected)) ** 2)
    if strict and fidelity < 1 - 1e-12:
        raise AssertionError(f"corrected end state has fidelity {fidelity!r} with Phi+")
    return SwapOracleResult(end_state, word, fidelity, prob)


def phase_sizes(params: ChainParams) -> tuple[int, int]:
    links = params.n_nodes - 1
    if params.schedule == "symmetric":
        k = analytics.links_per_phase(params.n_nodes)
        return k, k
    return (links + 1) // 2, links // 2


def _phase_rounds(n_links: int, params: ChainParams, rng, mode: str, p0: float) -> int:
    if n_links == 0:
        return 0
    if mode == "fast":
        # rounds until a link succeeds are geometric; the phase waits for the slowest
        return int(rng.geometric(p0, size=n_links).max())
    if mode != "faithful":
        raise ValueError(f"unknown mode {mode!r}")
    pending = n_links
    rounds = 0
    while pending:
        rounds += 1
        pending -= sum(attempt_link(params.noise, rng).success for _ in range(pending))
    return rounds


def run_generation_phases(params: ChainParams, rng: np.random.Generator,
                          mode: str = "fast") -> tuple[int, int]:
    """Round counts of the two generation phases."""
    p0 = analytics.chain_p0(params)
    k1, k2 = phase_sizes(params)
    return _phase_rounds(k1, params, rng, mode, p0), _phase_rounds(k2, params, rng, mode, p0)


def run_swapping(params: ChainParams, rng: np.random.Generator) -> tuple[bool, list[SwapOutcome]]:
    """Gate and readout at every intermediate node.

    Each node succeeds independently; readout bits are uniform, as the Born
    probabilities from :func:`swap_oracle` confirm.  Returns no outcomes on
    failure.
    """
    n_mid = params.n_nodes - 2
    if n_mid == 0:
        return True, []
    q = analytics.swap_node_success(params.noise)
    if not bool(np.all(rng.random(n_mid) < q)):
        return False, []
    bits = rng.integers(0, 2, size=(n_mid, 2))
    return True, [SwapOutcome(int(a), int(b)) for a, b in bits]


@dataclass(frozen=True)
class TrialRecord:
    """One end-to-end run.

    Round counts accumulate over protocol repeats.  ``first_pass_rounds`` is
    the round count of the first generation pass alone, whose mean is
    ``n_bar``.
    """

    rounds_phase1: int
    rounds_phase2: int
    protocol_repeats: int
    first_pass_rounds: int
    total_time: float
    end_state: BellLabel
    correction: str
    swap_ok: bool = True


def run_trial(params: ChainParams, rng: np.random.Generator, mode: str = "fast") -> TrialRecord:
    """Repeat generation and swapping until swapping succeeds."""
    r1 = r2 = repeats = 0
    first = None
    while True:
        repeats += 1
        a, b = run_generation_phases(params, rng, mode)
        r1 += a
        r2 += b
        first = a + b if first is None else first
        ok, outcomes = run_swapping(params, rng)
        if ok:
            break
    word = compose([o.correction for o in outcomes])
    return TrialRecord(r1, r2, repeats, first, (r1 + r2) * params.noise.travel_time, _UNCORRECTED[word], word)


@dataclass(frozen=True)
class ChainSummary:
    trials: int
    mean_time: float
    var_time: float
    mean_rounds: float
    var_rounds: float
    mean_first_pass: float
    var_first_pass: float
    mean_repeats: float
    records: tuple[TrialRecord, ...] = ()

    @property
    def sem_time(self) -> float:
        return math.sqrt(self.var_time / self.trials)

    @property
    def sem_rounds(self) -> float:
        return math.sqrt(self.var_rounds / self.trials)

    @property
    def sem_first_pass(self) -> float:
        return math.sqrt(self.var_first_pass / self.trials)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trial ``index``; the same whichever worker runs it."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def summarize(records: Sequence[TrialRecord]) -> ChainSummary:
    times = np.array([r.total_time for r in records])
    rounds = np.array([r.rounds_phase1 + r.rounds_phase2 for r in records], dtype=float)
    first = np.array([r.first_pass_rounds for r in records], dtype=float)
    ddof = 1 if len(records) > 1 else 0
    return ChainSummary(len(records), float(times.mean()), float(times.var(ddof=ddof)),
                        float(rounds.mean()), float(rounds.var(ddof=ddof)),
                        float(first.mean()), float(first.var(ddof=ddof)),
                        float(np.mean([r.protocol_repeats for r in records])), tuple(records))


def run_end_to_end(params: ChainParams, trials: int, rng: np.random.Generator,
                   mode: str = "fast") -> ChainSummary:
    """Mean and variance of total time and round counts over ``trials`` runs."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    return summarize([run_trial(params, rng, mode) for _ in range(trials)])
