"""One round of heralded entanglement generation between two neighbouring nodes.

A round is: fresh ensembles, the twelve-step generation script (photon emitted
by ensemble ``k``, carried by the fiber, absorbed by ensemble ``k+1``), the
auxiliary-subnode diagnosis and the ion-detection verdict.

Noise model
-----------
Every Rydberg-touching pulse is wrapped in two decay checks with probability
``p/2`` each, one on the state before the pulse and one after, where
``p = pi*Gamma/Omega`` (plus ``(Omega/Delta_dd)**2`` when double excitation is
enabled).  For a pi pulse the Rydberg population ramps linearly between the
two, so this charges each pulse its time-averaged exposure.  The coded scripts
contain :data:`GENERATION_RYDBERG_PULSES` and :data:`DIAGNOSIS_RYDBERG_PULSES`
Rydberg pulses; the closed-form budget in :mod:`rydrepeater.analytics` keeps the
rounded count ``n_r = 23``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import statevec as sv
from .statevec import K, K1, LinkState, PulseSpec

C_FIBER = 2e8  # m/s


@dataclass(frozen=True)
class NoiseParams:
    """Physical parameters of one link.

    ``gamma`` is the Rydberg decay rate in 1/s and ``omega`` the effective
    two-photon Rabi frequency in rad/s.  Distances are in km.  ``eta_t``
    overrides the fiber transmission ``exp(-L0/L_att)`` when set.
    ``omega_over_delta_dd`` enables the optional double-excitation loss
    (0 disables it).
    """

    gamma: float = 1e3
    omega: float = 2 * math.pi * 1e6
    eta_ion: float = 0.99
    L0: float = 100.0
    L_att: float = 22.0
    omega_over_delta_dd: float = 0.0
    pulse_duration: float = 1e-6
    c: float = C_FIBER
    eta_t: float | None = None

    def __post_init__(self):
        for name in ("gamma", "omega", "eta_ion", "L0", "L_att", "omega_over_delta_dd",
                     "pulse_duration", "c"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.eta_ion > 1:
            raise ValueError("eta_ion must not exceed 1")
        if self.omega_over_delta_dd >= 1:
            raise ValueError("omega_over_delta_dd must be below 1")
        if self.L_att <= 0:
            raise ValueError("L_att must be positive")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.eta_t is not None and not 0 <= self.eta_t <= 1:
            raise ValueError("eta_t must be a probability")
        if self.gamma > 0 and self.omega == 0:
            raise ValueError("omega must be positive when gamma > 0")

    @property
    def transmission(self) -> float:
        if self.eta_t is not None:
            return self.eta_t
        return math.exp(-self.L0 / self.L_att)

    @property
    def decay_per_pulse(self) -> float:
        """Spontaneous-emission probability of one Rydberg pi pulse."""
        return 0.0 if self.gamma == 0 else math.pi * self.gamma / self.omega

    @property
    def loss_per_pulse(self) -> float:
        return min(1.0, self.decay_per_pulse + self.omega_over_delta_dd ** 2)

    @property
    def travel_time(self) -> float:
        return self.L0 * 1e3 / self.c


class Verdict(enum.Enum):
    RETRY_A = "retry_A"
    ACCEPT_B1 = "accept_B1"
    RETRY_B2 = "retry_B2"


@dataclass(frozen=True)
class DiagnosisResult:
    verdict: Verdict
    ions_seen: tuple[tuple[str, bool], ...]


@dataclass(frozen=True)
class LinkOutcome:
    success: bool
    elapsed: float
    failure_cause: str | None = None
    verdict: Verdict | None = None
    rounds_consumed: int = 1

    def __post_init__(self):
        if self.success and self.failure_cause is not None:
            raise ValueError("a successful round has no failure cause")


def _p(side, src, dst, mode=None):
    return PulseSpec(side, src, dst, math.pi, mode)


TRANSFER = "transfer"

GENERATION_STEPS: tuple[tuple[str, object], ...] = (
    ("i", (_p(K, "s", "r-"), _p(K, "s", "r+"))),
    ("ii", _p(K, "r-", "s", "minus")),
    ("iii", _p(K, "s", "r-")),
    ("iv", _p(K, "r+", "s", "plus")),
    ("v", _p(K, "s", "r+")),
    ("vi", _p(K, "r-", "0R")),
    ("vii", _p(K, "r+", "1R")),
    ("viii", TRANSFER),
    ("ix", _p(K1, "s", "r-", "minus")),
    ("x", _p(K1, "r-", "0L")),
    ("xi", _p(K1, "s", "r+", "plus")),
    ("xii", _p(K1, "r+", "1L")),
)


def _aux_preparation(side):
    return (("prep-1", _p(side, "s", "rA")), ("prep-2", _p(side, "rA", "0A")))


def _diagnosis_script(side, sub):
    # sub is "R" on ensemble k and "L" on ensemble k+1
    return (
        ("i", _p(side, "1" + sub, "r+")),
        ("ii", _p(side, "0A", "rA")),
        ("iii", _p(side, "rA", "1A")),
        ("iv", _p(side, "r+", "1" + sub)),
        ("v", _p(side, "0" + sub, "r-")),
        ("vi", _p(side, "0A", "rA")),
        ("vii", _p(side, "rA", "1A")),
        ("viii", _p(side, "r-", "0" + sub)),
    )


def _both_sides(script_k, script_k1):
    # both ensembles are driven in the same time slot
    steps = []
    for (name, pulse_k), (_, pulse_k1) in zip(script_k, script_k1):
        steps += [(name + "/k", pulse_k), (name + "/k+1", pulse_k1)]
    return tuple(steps)


DIAGNOSIS_STEPS = (_both_sides(_aux_preparation(K), _aux_preparation(K1))
                   + _both_sides(_diagnosis_script(K, "R"), _diagnosis_script(K1, "L")))


def _pulses(step) -> tuple[PulseSpec, ...]:
    return (step,) if isinstance(step, PulseSpec) else tuple(step)


GENERATION_RYDBERG_PULSES = sum(len(_pulses(s)) for _, s in GENERATION_STEPS if s != TRANSFER)
DIAGNOSIS_RYDBERG_PULSES = sum(len(_pulses(s)) for _, s in DIAGNOSIS_STEPS)
# pulse slots per round; simultaneous pulses and the two ensembles share slots
PULSE_SLOTS = (len(GENERATION_STEPS) - 1) + len(DIAGNOSIS_STEPS) // 2


def _noisy_pulse(state: LinkState, step, p_loss: float, rng) -> LinkState:
    if p_loss > 0.0:
        state = sv.apply_decay_channel(state, p_loss / 2, rng)
    state = sv.apply_pulse(state, step)
    if p_loss > 0.0:
        state = sv.apply_decay_channel(state, p_loss / 2, rng)
    return state


def _run(state, steps, params: NoiseParams, rng, trace=None):
    p_loss = params.loss_per_pulse
    for name, step in steps:
        if step == TRANSFER:
            state = sv.transfer_photon(state, params.transmission, rng)
        else:
            state = _noisy_pulse(state, step, p_loss, rng)
        if trace is not None:
            trace.append((name, state))
    return state


def run_generation_sequence(state: LinkState, params: NoiseParams, rng: np.random.Generator,
                            trace: list | None = None) -> LinkState:
    """Execute steps i-xii; appends ``(step, state)`` pairs to ``trace`` if given."""
    return _run(state, GENERATION_STEPS, params, rng, trace)


def verdict_from_detections(ion_rA_k: bool, ion_rA_k1: bool, ion_1A_k: bool, ion_1A_k1: bool) -> Verdict:
    """Case logic of the ion-detection herald."""
    if ion_rA_k or ion_rA_k1:
        return Verdict.RETRY_A
    if ion_1A_k and ion_1A_k1:
        return Verdict.ACCEPT_B1
    return Verdict.RETRY_B2


def run_diagnosis(state: LinkState, params: NoiseParams, rng: np.random.Generator,
                  trace: list | None = None) -> tuple[LinkState, DiagnosisResult]:
    """Map subnode occupancy onto the auxiliary subnodes and read them out.

    The 1_A ionisations are only performed when neither r_A ionisation fired.
    """
    state = _run(state, DIAGNOSIS_STEPS, params, rng, trace)
    seen = []
    state, ra_k = sv.ionize_and_detect(state, "rA", K, params.eta_ion, rng)
    state, ra_k1 = sv.ionize_and_detect(state, "rA", K1, params.eta_ion, rng)
    seen += [("rA_k", ra_k), ("rA_k+1", ra_k1)]
    a1_k = a1_k1 = False
    if not (ra_k or ra_k1):
        state, a1_k = sv.ionize_and_detect(state, "1A", K, params.eta_ion, rng)
        state, a1_k1 = sv.ionize_and_detect(state, "1A", K1, params.eta_ion, rng)
        seen += [("1A_k", a1_k), ("1A_k+1", a1_k1)]
    verdict = verdict_from_detections(ra_k, ra_k1, a1_k, a1_k1)
    return state, DiagnosisResult(verdict, tuple(seen))


def target_state() -> LinkState:
    """(|0_R>_k |0_L>_{k+1} + |1_R>_k |1_L>_{k+1}) / sqrt(2), everything else empty."""
    return sv.state_from({sv.label(k=["0R"], k1=["0L"]): 1, sv.label(k=["1R"], k1=["1L"]): 1})


_TARGET = target_state()


def reset_subnodes(state: LinkState | None = None) -> LinkState:
    """Fresh ensembles and empty cavities; the reservoir is treated as inexhaustible."""
    return sv.new_link_state()


def round_duration(params: NoiseParams) -> float:
    return params.travel_time + PULSE_SLOTS * params.pulse_duration


def attempt_link(params: NoiseParams, rng: np.random.Generator) -> LinkOutcome:
    """Reset, generate, diagnose.  Success means accept_B1 on the correct Bell state."""
    state = reset_subnodes()
    state = run_generation_sequence(state, params, rng)
    state, diag = run_diagnosis(state, params, rng)
    elapsed = round_duration(params)
    if diag.verdict is Verdict.ACCEPT_B1:
        if sv.overlap(state, _TARGET) >= 1 - 1e-9:
            return LinkOutcome(True, elapsed, None, diag.verdict)
        return LinkOutcome(False, elapsed, "false_accept", diag.verdict)
    if not state.status.live:
        cause = state.status.cause
    elif diag.verdict is Verdict.RETRY_B2:
        cause = "diagnosis_B2"
    else:
        raise AssertionError("r_A ion without any recorded error")
    return LinkOutcome(False, elapsed, cause, diag.verdict)


def no_jump_exposures(params: NoiseParams | None = None) -> list[float]:
    """Rydberg populations seen by each decay check along the error-free path."""
    params = NoiseParams(gamma=0.0, eta_t=1.0, eta_ion=1.0) if params is None else params
    state = sv.new_link_state()
    out = []
    for name, step in GENERATION_STEPS + DIAGNOSIS_STEPS:
        if step == TRANSFER:
            state = sv.transfer_photon(state, 1.0, None)
            continue
        out.append(sv.rydberg_population(state))
        state = sv.apply_pulse(state, step)
        out.append(sv.rydberg_population(state))
    return out


def predicted_generation_survival(params: NoiseParams) -> float:
    """P(no fiber loss and no decay jump) after steps i-xii for the coded script."""
    n_gen_checks = 2 * (len(GENERATION_STEPS) - 1)
    p = params.loss_per_pulse / 2
    return params.transmission * math.prod(1 - p * w for w in no_jump_exposures()[:n_gen_checks])


def predicted_success_probability(params: NoiseParams) -> float:
    """Exact success probability of :func:`attempt_link` for the coded scripts.

    On the error-free path the two r_A checks are certain negatives, so only
    the two 1_A detections can fail.
    """
    p = params.loss_per_pulse / 2
    survive = math.prod(1 - p * w for w in no_jump_exposures())
    return params.transmission * survive * params.eta_ion ** 2


def effective_rydberg_pulses() -> float:
    """Coded-script analogue of n_r: summed time-averaged Rydberg exposure."""
    return sum(no_jump_exposures()) / 2


@dataclass
class LinkRunStats:
    outcomes: list[LinkOutcome] = field(default_factory=list)

    @property
    def success_fraction(self) -> float:
        return sum(o.success for o in self.outcomes) / len(self.outcomes)


def simulate_links(params: NoiseParams, trials: int, rng: np.random.Generator) -> LinkRunStats:
    return LinkRunStats([attempt_link(params, rng) for _ in range(trials)])


def _bell(*terms):
    return tuple((sv.label(**t), 1 / math.sqrt(len(terms))) for t in terms)


# expected state after each generation step, written out from the level
# occupations alone (independent of the pulse mechanics)
EXPECTED_GENERATION_STATES: tuple[tuple[str, tuple], ...] = (
    ("i", _bell(dict(k=["r-"]), dict(k=["r+"]))),
    ("ii", _bell(dict(cav_k="-"), dict(k=["r+"]))),
    ("iii", _bell(dict(k=["r-"], cav_k="-"), dict(k=["r+"]))),
    ("iv", _bell(dict(k=["r-"], cav_k="-"), dict(cav_k="+"))),
    ("v", _bell(dict(k=["r-"], cav_k="-"), dict(k=["r+"], cav_k="+"))),
    ("vi", _bell(dict(k=["0R"], cav_k="-"), dict(k=["r+"], cav_k="+"))),
    ("vii", _bell(dict(k=["0R"], cav_k="-"), dict(k=["1R"], cav_k="+"))),
    ("viii", _bell(dict(k=["0R"], cav_k1="-"), dict(k=["1R"], cav_k1="+"))),
    ("ix", _bell(dict(k=["0R"], k1=["r-"]), dict(k=["1R"], cav_k1="+"))),
    ("x", _bell(dict(k=["0R"], k1=["0L"]), dict(k=["1R"], cav_k1="+"))),
    ("xi", _bell(dict(k=["0R"], k1=["0L"]), dict(k=["1R"], k1=["r+"]))),
    ("xii", _bell(dict(k=["0R"], k1=["0L"]), dict(k=["1R"], k1=["1L"]))),
)
