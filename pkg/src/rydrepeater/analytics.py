"""Closed-form success probabilities, round counts and protocol times.

The round-count formulas treat one generation phase as ``K`` links retried in
lock-step until all have succeeded, so the phase length is the maximum of
``K`` i.i.d. geometric variables with success probability ``p0``::

    S_K(n) = [1 - (1 - p0)**n]**K          P(max <= n)
    p_K(n) = S_K(n) - S_K(n - 1)           P(max == n)
    n_bar  = 2 * sum_n n * p_K(n)          two phases

Powers of ``1 - p0`` are evaluated as ``exp(n * log1p(-p0))`` so that round
numbers in the thousands keep full relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .linkprotocol import NoiseParams

if TYPE_CHECKING:
    from .chainsim import ChainParams

N_R = 23  # Rydberg pi pulses per link attempt, generation plus diagnosis
SWAP_RYDBERG_PULSES = 4


def eta_t(L0: float, L_att: float) -> float:
    """Fiber transmission ``exp(-L0 / L_att)``; lengths in km."""
    if L_att <= 0:
        raise ValueError("attenuation length must be positive")
    if L0 < 0:
        raise ValueError("fiber length must be nonnegative")
    return math.exp(-L0 / L_att)


@dataclass(frozen=True)
class LinkBudget:
    eta_t: float
    p_no_decay: float
    p_ion4: float
    p0: float
    n_r: int = N_R


def p0(noise: NoiseParams, n_r: int = N_R) -> LinkBudget:
    """Per-round probability of heralded entanglement of one link."""
    transmission = noise.transmission
    p_no_decay = 1.0 - n_r * noise.decay_per_pulse
    p_ion4 = noise.eta_ion ** 4
    for name, value in (("eta_t", transmission), ("1 - n_r*pi*Gamma/Omega", p_no_decay),
                        ("eta_ion**4", p_ion4)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} = {value!r} is not a probability; check Gamma/Omega and n_r")
    return LinkBudget(transmission, p_no_decay, p_ion4, transmission * p_no_decay * p_ion4, n_r)


def swap_node_success(noise: NoiseParams) -> float:
    """Success probability of the gate plus readout at one intermediate node."""
    q = (1.0 - SWAP_RYDBERG_PULSES * noise.decay_per_pulse) * noise.eta_ion ** 4
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"swap success {q!r} is not a probability")
    return q


def p1(n_nodes: int, noise: NoiseParams) -> float:
    """Probability that swapping succeeds at all ``n_nodes - 2`` intermediate nodes."""
    if n_nodes < 2:
        raise ValueError("a chain needs at least two nodes")
    return swap_node_success(noise) ** (n_nodes - 2)


def _check_p0(p0: float) -> None:
    if not 0.0 < p0 <= 1.0:
        raise ValueError(f"p0 must lie in (0, 1], got {p0!r}")


def _fail_power(n, p0):
    """(1 - p0)**n, exact at n = 0 and p0 = 1."""
    n = np.asarray(n, dtype=float)
    if p0 >= 1.0:
        return np.where(n == 0, 1.0, 0.0)
    return np.exp(n * math.log1p(-p0))


def S_K(n, K: int, p0: float):
    """P(max of K geometric(p0) <= n)."""
    _check_p0(p0)
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("n must be nonnegative")
    q_n = _fail_power(n, p0)
    with np.errstate(divide="ignore"):
        out = np.exp(K * np.log1p(-q_n))
    return out if out.ndim else float(out)


def p_K(n, K: int, p0: float):
    """P(max of K geometric(p0) == n) for n >= 1."""
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("n must be at least 1")
    if K < 1:
        raise ValueError("K must be at least 1")
    _check_p0(p0)
    # a**K - b**K with a = 1 - q**n, b = 1 - q**(n-1), written as
    # b**K * expm1(K * log1p((a - b) / b)) to avoid cancellation in the tails
    n = n.astype(float)
    if p0 >= 1.0:
        out = np.where(n == 1, 1.0, 0.0)
        return out if out.ndim else float(out)
    log_q = math.log1p(-p0)
    b = -np.expm1((n - 1) * log_q)
    gap = p0 * np.exp((n - 1) * log_q)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(K * np.log(b)) * np.expm1(K * np.log1p(gap / b))
    out = np.where(n == 1, p0 ** K, out)
    return out if out.ndim else float(out)


def links_per_phase(n_nodes: int) -> int:
    """K = N/2 for even N; (N-1)/2 for odd N, where the two phases are equal."""
    if n_nodes < 2:
        raise ValueError("a chain needs at least two nodes")
    return n_nodes // 2


def n_max(p0: float, K: int) -> float:
    """Approximate mode of p_K: -ln K / ln(1 - p0)."""
    _check_p0(p0)
    if K == 1 or p0 == 1.0:
        return 0.0
    return -math.log(K) / math.log1p(-p0)


@dataclass(frozen=True)
class RoundCountSummary:
    n_bar: float
    n_max: float
    truncation_n: int
    tail_bound: float
    K: int


def _tail_bound(n: int, K: int, q: float) -> float:
    # 2 * sum_{m>n} m p_K(m) <= 2 K q**n (n + 1/(1-q)), from 1 - S_K(m) <= K q**m
    if q == 0.0:
        return 0.0
    return 2.0 * K * q ** n * (n + 1.0 / (1.0 - q))


def expected_max_rounds(p0: float, K: int, tol: float = 1e-9) -> tuple[float, int, float]:
    """sum_n n p_K(n), truncated once the analytic tail is below ``tol / 2``.

    Returns the sum, the truncation index and the doubled tail bound.
    """
    _check_p0(p0)
    q = 1.0 - p0
    n = max(16, int(math.ceil(n_max(p0, K))) * 2)
    # the sum is at least 1, so a last term below 1e-15 is negligible relative to it
    while _tail_bound(n, K, q) >= tol or n * float(p_K(n, K, p0)) >= 1e-15:
        n *= 2
    grid = np.arange(1, n + 1)
    terms = grid * p_K(grid, K, p0)
    return math.fsum(terms), n, _tail_bound(n, K, q)


def n_bar(p0: float, n_nodes: int) -> RoundCountSummary:
    """Average number of synchronized rounds to entangle all links of the chain.

    Two phases of ``K = N/2`` links each.  For ``N = 2`` this still counts two
    phases, so ``n_bar = 2 / p0`` there.
    """
    _check_p0(p0)
    K = links_per_phase(n_nodes)
    mean, trunc, tail = expected_max_rounds(p0, K)
    return RoundCountSummary(2.0 * mean, n_max(p0, K), trunc, tail, K)


def chain_p0(params: "ChainParams") -> float:
    return params.p0 if params.p0 is not None else p0(params.noise).p0


def total_time(params: "ChainParams") -> float:
    """Average end-to-end time in seconds: (L0/c) * n_bar / P1."""
    rounds = n_bar(chain_p0(params), params.n_nodes).n_bar
    return params.noise.travel_time * rounds / p1(params.n_nodes, params.noise)


def direct_time(L_total: float, L_att: float, chi_r: float) -> float:
    """Average time for one photon to cross ``L_total`` km directly, at source rate ``chi_r``."""
    if L_total < 0 or L_att <= 0 or chi_r <= 0:
        raise ValueError("need L_total >= 0, L_att > 0 and chi_r > 0")
    return math.exp(L_total / L_att) / chi_r


def fig3_series(n_nodes: int = 16, L_grid: Iterable[float] = (), noise: NoiseParams | None = None,
                chi_r: float = 1e10) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """log10 of the average entangling time versus total distance.

    Returns ``(L, log10_direct, log10_protocol)``.  The protocol curve spreads
    the distance over ``n_nodes - 1`` equal fiber segments.
    """
    noise = NoiseParams() if noise is None else noise
    L = np.asarray(list(L_grid), dtype=float)
    if np.any(L <= 0):
        raise ValueError("distances must be positive")
    # log of direct_time, written out so that long distances cannot overflow
    direct = L / noise.L_att / math.log(10) - math.log10(chi_r)
    protocol = []
    for x in L:
        seg = replace(noise, L0=x / (n_nodes - 1), eta_t=None)
        rounds = n_bar(p0(seg).p0, n_nodes).n_bar
        protocol.append(math.log10(seg.travel_time * rounds / p1(n_nodes, seg)))
    return L, direct, np.array(protocol)


def fig_a1_series(K: int = 1000, p0_values: Iterable[float] = (0.1, 0.2, 0.3),
                  n_grid: Iterable[int] | None = None) -> tuple[np.ndarray, dict[float, np.ndarray]]:
    """p_K(n) curves for several p0."""
    n = np.arange(1, 151) if n_grid is None else np.asarray(list(n_grid))
    return n, {p: p_K(n, K, p) for p in p0_values}


def fig_a2_series(n_nodes: Iterable[int] = range(4, 65, 2), p0_values: Iterable[float] = (0.1, 0.2, 0.3)):
    """n_bar and its lower estimate 2*n_max as functions of N."""
    N = np.asarray(list(n_nodes))
    out = {}
    for p in p0_values:
        summaries = [n_bar(p, int(x)) for x in N]
        out[p] = (np.array([s.n_bar for s in summaries]), np.array([2 * s.n_max for s in summaries]))
    return N, out
