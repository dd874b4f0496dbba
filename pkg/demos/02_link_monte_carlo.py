"""
How often does a link attempt succeed?
======================================

Runs noisy link attempts through the full state-vector model and compares the
success rate with the closed-form budget.
"""

import numpy as np

from rydrepeater import analytics as an
from rydrepeater import linkprotocol as lp

rng = np.random.default_rng(2)

# default hardware: 100 km spacing, 22 km attenuation, 1 kHz decay, eta_ion = 0.99
noise = lp.NoiseParams()
budget = an.p0(noise)
print(f"eta_t = {budget.eta_t:.5f}, no-decay = {budget.p_no_decay:.4f}, eta_ion^4 = {budget.p_ion4:.4f}")
print(f"closed-form P0 = {budget.p0:.5f}")
print(f"prediction from the coded pulse scripts = {lp.predicted_success_probability(noise):.5f}")

# a shorter fiber makes successes common enough to count quickly
short = lp.NoiseParams(eta_t=0.5)
n = 20_000
outcomes = [lp.attempt_link(short, rng) for _ in range(n)]
rate = np.mean([o.success for o in outcomes])
print(f"\neta_t = 0.5: simulated {rate:.4f} vs predicted {lp.predicted_success_probability(short):.4f}")

# why did the failures fail?
causes = {}
for o in outcomes:
    if not o.success:
        causes[o.failure_cause] = causes.get(o.failure_cause, 0) + 1
print("failure causes:", causes)
