"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the slow Monte
Carlo criterion takes a few minutes.
"""

from __future__ import annotations

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from rydrepeater import analytics as an
from rydrepeater import chainsim as cs
from rydrepeater import cli
from rydrepeater import linkprotocol as lp
from rydrepeater import statevec as sv
from rydrepeater.chainsim import ChainParams
from rydrepeater.linkprotocol import NoiseParams, Verdict

from test_analytics import exact_max_pmf
from test_statevec import TABLE

DEFAULT = NoiseParams()
PERFECT = NoiseParams(gamma=0.0, eta_ion=1.0, eta_t=1.0)


@pytest.fixture
def verdict(capsys):
    """Print one line per criterion, then assert on the overall result."""
    def emit(number: int, checks: dict[str, bool], detail: str, elapsed: float | None = None,
             limit: float | None = None):
        if limit is not None:
            checks = checks | {f"runtime {elapsed:.2f}s < {limit:g}s": elapsed < limit}
        ok = all(checks.values())
        failed = [name for name, good in checks.items() if not good]
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        if failed:
            line += f"  [failed: {'; '.join(failed)}]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def test_criterion_1_link_budget(verdict):
    t0 = time.perf_counter()
    eta = an.eta_t(100, 22)
    b = an.p0(DEFAULT)
    elapsed = time.perf_counter() - t0
    verdict(1, {
        "eta_t": abs(eta - 0.01057) <= 5e-4,
        "decay": abs(b.p_no_decay - 0.9885) <= 5e-4,
        "eta_ion^4": abs(b.p_ion4 - 0.9606) <= 5e-4,
        "P0": abs(b.p0 - 0.0100) <= 5e-4,
    }, f"eta_t={eta:.6f} decay={b.p_no_decay:.6f} eta_ion^4={b.p_ion4:.6f} P0={b.p0:.6f}", elapsed, 1.0)


def test_criterion_2_swap_probability(verdict):
    t0 = time.perf_counter()
    p1 = an.p1(10, DEFAULT)
    elapsed = time.perf_counter() - t0
    verdict(2, {"P1(10)": abs(p1 - 0.713) <= 5e-3}, f"P1(10)={p1:.6f}", elapsed, 1.0)


def test_criterion_3_mean_rounds(verdict):
    t0 = time.perf_counter()
    s = an.n_bar(0.01, 10)
    elapsed = time.perf_counter() - t0
    verdict(3, {"n_bar": abs(s.n_bar - 455) <= 1, "tail": s.tail_bound < 1e-9},
            f"n_bar(0.01,10)={s.n_bar:.6f} (truncated at n={s.truncation_n}, tail<={s.tail_bound:.1e})",
            elapsed, 1.0)


def test_criterion_4_times(verdict):
    t0 = time.perf_counter()
    T = an.total_time(ChainParams())
    direct = an.direct_time(1000, 22, 1e10)
    elapsed = time.perf_counter() - t0
    verdict(4, {"T": abs(T - 0.32) <= 0.01, "direct": abs(direct / 5.5e9 - 1) <= 0.1},
            f"T={T:.5f}s direct(1000km)={direct:.4e}s", elapsed, 1.0)


def test_criterion_5_generation_replay(verdict):
    t0 = time.perf_counter()
    trace = []
    lp.run_generation_sequence(sv.new_link_state(), PERFECT, np.random.default_rng(0), trace)
    got = dict(trace)
    overlaps = {step: sv.overlap(got[step], sv.state_from(ref)) for step, ref in TABLE}
    elapsed = time.perf_counter() - t0
    worst = min(overlaps, key=overlaps.get)
    checks = {f"step {s}": ov >= 1 - 1e-12 for s, ov in overlaps.items()}
    checks["12 steps"] = len(overlaps) == 12 == len(trace)
    verdict(5, checks, f"12 states replayed, worst overlap {overlaps[worst]:.15f} at step {worst}",
            elapsed, 1.0)


def _expected_verdict(ra_k, ra_k1, a1_k, a1_k1):
    if ra_k or ra_k1:
        return Verdict.RETRY_A
    return Verdict.ACCEPT_B1 if a1_k and a1_k1 else Verdict.RETRY_B2


def test_criterion_6_diagnosis_truth_table(verdict):
    t0 = time.perf_counter()
    checks = {str(bits): lp.verdict_from_detections(*bits) is _expected_verdict(*bits)
              for bits in itertools.product((False, True), repeat=4)}
    elapsed = time.perf_counter() - t0
    verdict(6, checks, f"{sum(checks.values())}/16 detection combinations match", elapsed, 1.0)


def test_criterion_7_swap_oracle(verdict):
    t0 = time.perf_counter()
    checks, worst, cases = {}, 1.0, 0
    for n in (3, 4, 5):
        for outcomes in itertools.product(itertools.product((0, 1), repeat=2), repeat=n - 2):
            res = cs.swap_oracle(n, list(outcomes), strict=False)
            worst = min(worst, res.fidelity)
            checks[f"N={n} {outcomes}"] = res.fidelity >= 1 - 1e-12
            cases += 1
    elapsed = time.perf_counter() - t0
    checks["case count"] = cases == 4 + 16 + 64
    verdict(7, checks, f"{cases} outcome combinations for N=3,4,5, worst fidelity {worst:.15f}",
            elapsed, 30.0)


@pytest.mark.slow
def test_criterion_8a_link_monte_carlo(verdict):
    rng = np.random.default_rng(8_001)
    n = 1_000_000
    t0 = time.perf_counter()
    k = sum(lp.attempt_link(DEFAULT, rng).success for _ in range(n))
    elapsed = time.perf_counter() - t0
    predicted = lp.predicted_success_probability(DEFAULT)
    analytic = an.p0(DEFAULT).p0
    rate = k / n
    z = (rate - predicted) / math.sqrt(predicted * (1 - predicted) / n)
    rel = abs(rate - analytic) / analytic
    verdict(8, {"3 sigma of coded prediction": abs(z) < 3, "10% of analytic P0": rel < 0.1},
            f"(a) rate={rate:.6f} over {n} faithful trials, predicted={predicted:.6f} (z={z:+.2f}), "
            f"P0={analytic:.6f} (rel {rel:.2%}), {elapsed:.0f}s")


@pytest.mark.parametrize("p0", [None, 0.01])
def test_criterion_8b_chain_rounds(verdict, p0):
    params = ChainParams(p0=p0)
    t0 = time.perf_counter()
    s = cs.run_end_to_end(params, 100_000, np.random.default_rng(8_002), mode="fast")
    elapsed = time.perf_counter() - t0
    expected = an.n_bar(an.chain_p0(params), 10).n_bar
    z = (s.mean_first_pass - expected) / s.sem_first_pass
    verdict(8, {"3 sigma of n_bar": abs(z) < 3},
            f"(b) P0={an.chain_p0(params):.6f}: mean rounds={s.mean_first_pass:.3f}+-{s.sem_first_pass:.3f} "
            f"over 1e5 trials, n_bar={expected:.3f} (z={z:+.2f}), {elapsed:.0f}s")


def test_criterion_8c_swap_fraction(verdict):
    params = ChainParams()
    rng = np.random.default_rng(8_003)
    n = 1_000_000
    t0 = time.perf_counter()
    k = sum(cs.run_swapping(params, rng)[0] for _ in range(n))
    elapsed = time.perf_counter() - t0
    p1 = an.p1(10, DEFAULT)
    z = (k / n - p1) / math.sqrt(p1 * (1 - p1) / n)
    verdict(8, {"3 sigma of P1": abs(z) < 3},
            f"(c) swap fraction={k / n:.6f} over {n} draws, P1(10)={p1:.6f} (z={z:+.2f}), {elapsed:.0f}s")


def test_criterion_9_round_count_identities(verdict):
    t0 = time.perf_counter()
    checks = {}
    n = np.arange(1, 20_001)
    for K in range(1, 65):
        for p in (0.01, 0.1, 0.3):
            checks[f"norm K={K} p={p}"] = abs(math.fsum(an.p_K(n, K, p)) - 1) <= 1e-12
    m = np.arange(1, 400)
    for K in (2, 3, 8, 40):
        for p in (0.01, 0.1, 0.3):
            q = 1 - p
            rhs = an.p_K(m, K - 1, p) * (1 - q ** m) + an.S_K(m - 1, K - 1, p) * p * q ** (m - 1)
            checks[f"recurrence K={K} p={p}"] = np.max(np.abs(an.p_K(m, K, p) - rhs)) <= 1e-12
    for K in (1, 2, 3, 4):
        for p in (Fraction(1, 10), Fraction(3, 10), Fraction(1, 2)):
            exact = exact_max_pmf(K, p, 50)
            got = an.p_K(np.arange(1, 51), K, float(p))
            checks[f"brute force K={K} p={p}"] = all(
                math.isclose(g, float(e), rel_tol=1e-12, abs_tol=1e-300) for e, g in zip(exact, got))
    N, series = an.fig_a2_series(range(4, 65, 2), (0.1, 0.2, 0.3))
    for p, (nbar, two_nmax) in series.items():
        checks[f"n_bar >= 2 n_max p={p}"] = bool(np.all(nbar >= two_nmax))
    elapsed = time.perf_counter() - t0
    verdict(9, checks, f"{sum(checks.values())}/{len(checks)} identity checks hold", elapsed, 10.0)


def test_criterion_10_determinism(verdict, tmp_path, capsys):
    base = ["simulate", "--seed", "42", "--trials", "300"]
    runs = {}
    for level, extra in (("chain", []), ("link", ["--trials", "60", "--set", "eta_t=0.5"])):
        for tag, workers in (("a", 1), ("b", 1), ("c", 2), ("d", 4)):
            out = tmp_path / f"{level}_{tag}.csv"
            code = cli.main(base + extra + ["--level", level, "--workers", str(workers), "--out", str(out)])
            runs[level, tag] = (code, out.read_bytes())
    capsys.readouterr()
    checks = {}
    for level in ("chain", "link"):
        codes = {runs[level, t][0] for t in "abcd"}
        blobs = {runs[level, t][1] for t in "abcd"}
        checks[f"{level} exit 0"] = codes == {0}
        checks[f"{level} byte-identical"] = len(blobs) == 1
    verdict(10, checks, "simulate CSVs byte-identical across repeated runs and 1/2/4 workers")
