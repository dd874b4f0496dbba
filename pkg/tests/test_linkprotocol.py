from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from rydrepeater import linkprotocol as lp
from rydrepeater import statevec as sv
from rydrepeater.linkprotocol import NoiseParams, Verdict
from rydrepeater.statevec import K, K1, label

from conftest import binomial_z

PERFECT = NoiseParams(gamma=0.0, eta_t=1.0, eta_ion=1.0)


def _case_logic(bits):
    # written from the case description: A if any r_A ion, B1 if both 1_A ions, else B2
    ra_k, ra_k1, a1_k, a1_k1 = bits
    if ra_k or ra_k1:
        return Verdict.RETRY_A
    if a1_k and a1_k1:
        return Verdict.ACCEPT_B1
    return Verdict.RETRY_B2


@pytest.mark.parametrize("bits", list(itertools.product((False, True), repeat=4)))
def test_verdict_truth_table(bits):
    assert lp.verdict_from_detections(*bits) is _case_logic(bits)


def test_pulse_inventory_counts():
    assert lp.GENERATION_RYDBERG_PULSES == 12
    assert lp.DIAGNOSIS_RYDBERG_PULSES == 20
    assert lp.PULSE_SLOTS == 21


def test_noiseless_generation_reaches_target():
    out = lp.run_generation_sequence(sv.new_link_state(), PERFECT, np.random.default_rng(0))
    assert out.status.live
    assert sv.overlap(out, lp.target_state()) >= 1 - 1e-12


def test_certain_fiber_loss(rng):
    p = NoiseParams(eta_t=0.0)
    for _ in range(50):
        out = lp.run_generation_sequence(sv.new_link_state(), p, rng)
        assert out.status == sv.lost(K1, "fiber")


def test_generation_survival_matches_coded_inventory(rng):
    p = NoiseParams(gamma=2e4, eta_t=0.5)
    n = 100_000
    live = sum(lp.run_generation_sequence(sv.new_link_state(), p, rng).status.live for _ in range(n))
    predicted = lp.predicted_generation_survival(p)
    assert abs(binomial_z(live, n, predicted)) < 3
    # time-averaged exposure never exceeds one full pulse per Rydberg pulse
    assert 0.5 * (1 - lp.GENERATION_RYDBERG_PULSES * p.decay_per_pulse) < predicted < 0.5


def test_diagnosis_accepts_filled_subnodes():
    state, res = lp.run_diagnosis(lp.target_state(), PERFECT, np.random.default_rng(1))
    assert res.verdict is Verdict.ACCEPT_B1
    assert sv.overlap(state, lp.target_state()) >= 1 - 1e-12


def test_diagnosis_leaves_auxiliary_in_1A_before_readout():
    trace = []
    lp.run_diagnosis(lp.target_state(), PERFECT, np.random.default_rng(1), trace)
    final = trace[-1][1]
    assert sv.level_population(final, "1A", K) == pytest.approx(1)
    assert sv.level_population(final, "1A", K1) == pytest.approx(1)
    ref = sv.state_from({label(k=["0R", "1A"], k1=["0L", "1A"]): 1,
                         label(k=["1R", "1A"], k1=["1L", "1A"]): 1})
    assert sv.overlap(final, ref) >= 1 - 1e-12


@pytest.mark.parametrize("missing", ["k", "k+1"])
def test_missing_excitation_flags_retry_A(missing):
    # one subnode empty, as after a loss
    empty_k = missing == "k"
    state = sv.state_from({label(k=[] if empty_k else ["1R"], k1=["1L"] if empty_k else []): 1})
    out, res = lp.run_diagnosis(state, PERFECT, np.random.default_rng(2))
    assert res.verdict is Verdict.RETRY_A
    assert dict(res.ions_seen)["rA_" + missing]


def test_blind_detectors_always_retry_B2(rng):
    p = NoiseParams(gamma=0.0, eta_t=1.0, eta_ion=0.0)
    for _ in range(20):
        _, res = lp.run_diagnosis(lp.target_state(), p, rng)
        assert res.verdict is Verdict.RETRY_B2


def test_perfect_link_always_succeeds(rng):
    outcomes = [lp.attempt_link(PERFECT, rng) for _ in range(50)]
    assert all(o.success and o.failure_cause is None for o in outcomes)


def test_elapsed_time():
    o = lp.attempt_link(NoiseParams(), np.random.default_rng(0))
    assert o.elapsed >= 0.5e-3
    assert o.elapsed == pytest.approx(0.5e-3 + lp.PULSE_SLOTS * 1e-6)
    assert o.rounds_consumed == 1


def test_fiber_losses_are_always_heralded(rng):
    p = NoiseParams(gamma=0.0, eta_t=0.5, eta_ion=1.0)
    causes = Counter(lp.attempt_link(p, rng).failure_cause for _ in range(4000))
    assert set(causes) == {None, "fiber"}


def test_accepts_are_correct_unless_a_decay_was_recorded(rng):
    # occupancy checks cannot see a decay that collapses the superposition and
    # lets a later pulse re-excite the ensemble, so such runs end as false accepts
    p = NoiseParams(gamma=5e4, eta_t=0.7, eta_ion=1.0)
    outcomes = Counter()
    for _ in range(4000):
        state = lp.run_generation_sequence(lp.reset_subnodes(), p, rng)
        state, res = lp.run_diagnosis(state, p, rng)
        if res.verdict is Verdict.ACCEPT_B1:
            good = sv.overlap(state, lp.target_state()) >= 1 - 1e-12
            assert good or state.status.cause == "decay"
            assert good or not state.status.live
            if state.status.live:
                assert good
            outcomes["false_accept" if not good else "accept"] += 1
        else:
            outcomes[res.verdict] += 1
            assert not state.status.live
    assert 0 < outcomes["false_accept"]
    # a false accept needs at least one decay jump
    assert outcomes["false_accept"] / 4000 < (lp.GENERATION_RYDBERG_PULSES
                                               + lp.DIAGNOSIS_RYDBERG_PULSES) * p.decay_per_pulse


def test_success_rate_matches_prediction(rng):
    p = NoiseParams(gamma=1e4, eta_t=0.3, eta_ion=0.95)
    n = 20_000
    k = sum(lp.attempt_link(p, rng).success for _ in range(n))
    assert abs(binomial_z(k, n, lp.predicted_success_probability(p))) < 3


def test_prediction_closed_form_limits():
    assert lp.predicted_success_probability(PERFECT) == 1
    p = NoiseParams(gamma=0.0, eta_ion=0.9, eta_t=0.2)
    assert lp.predicted_success_probability(p) == pytest.approx(0.2 * 0.81)


def test_effective_pulse_count_is_between_bounds():
    # time-averaged exposure cannot exceed the number of Rydberg pulses
    n_eff = lp.effective_rydberg_pulses()
    assert 0 < n_eff <= lp.GENERATION_RYDBERG_PULSES + lp.DIAGNOSIS_RYDBERG_PULSES


def test_rounds_until_success_are_geometric(rng):
    p = NoiseParams(eta_t=0.3, gamma=0.0, eta_ion=1.0)
    q = lp.predicted_success_probability(p)
    counts = []
    for _ in range(3000):
        n = 1
        while not lp.attempt_link(p, rng).success:
            n += 1
        counts.append(n)
    counts = np.array(counts)
    edges = [1, 2, 3, 4, 6, 9, np.inf]
    observed = [np.sum((counts >= a) & (counts < b)) for a, b in zip(edges, edges[1:])]
    cdf = lambda n: 1 - (1 - q) ** (n - 1)  # noqa: E731  P(N < n)
    expected = [len(counts) * ((1 if b == np.inf else cdf(b)) - cdf(a)) for a, b in zip(edges, edges[1:])]
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_reset_semantics():
    lost = sv.new_link_state().with_status(sv.lost(K, "decay"))
    fresh = lp.reset_subnodes(lost)
    assert fresh.status.live
    assert fresh == sv.new_link_state()
    assert lp.reset_subnodes(lp.reset_subnodes(lost)) == fresh


@pytest.mark.parametrize("kwargs", [dict(eta_ion=1.2), dict(gamma=-1.0), dict(omega_over_delta_dd=1.0),
                                    dict(L_att=0.0), dict(eta_t=2.0)])
def test_noise_params_validation(kwargs):
    with pytest.raises(ValueError):
        NoiseParams(**kwargs)


def test_noise_params_derived_quantities():
    p = NoiseParams()
    assert p.transmission == pytest.approx(math.exp(-100 / 22))
    assert p.decay_per_pulse == pytest.approx(5e-4)
    assert p.travel_time == pytest.approx(0.5e-3)
    assert NoiseParams(omega_over_delta_dd=0.1).loss_per_pulse == pytest.approx(5e-4 + 0.01)


def test_double_excitation_lowers_success():
    base = lp.predicted_success_probability(NoiseParams())
    assert lp.predicted_success_probability(NoiseParams(omega_over_delta_dd=0.1)) < base
