"""
Waiting for the slowest link
============================

A generation phase lasts as long as its slowest link, so its length is the
maximum of K geometric variables.  This walks through the distribution, its
mean and the rough estimate from its peak.
"""

import numpy as np

from rydrepeater import analytics as an

# the distribution of the phase length for many links
n = np.arange(1, 151)
for p0 in (0.1, 0.2, 0.3):
    pk = an.p_K(n, 1000, p0)
    peak = n[np.argmax(pk)]
    print(f"K = 1000, P0 = {p0}: peak at n = {peak}, estimate -ln K / ln(1-P0) = {an.n_max(p0, 1000):.1f}")

# the mean over both phases and how far the series had to run
s = an.n_bar(0.01, 10)
print(f"\nn_bar(P0=0.01, N=10) = {s.n_bar:.3f}, summed to n = {s.truncation_n}, tail <= {s.tail_bound:.1e}")

# twice the peak position is a lower bound on the mean
for N in (4, 16, 64):
    s = an.n_bar(0.2, N)
    print(f"N = {N:2d}: n_bar = {s.n_bar:6.2f} >= 2 n_max = {2 * s.n_max:6.2f}")

# sanity check by sampling
rng = np.random.default_rng(4)
samples = rng.geometric(0.2, size=(200_000, 5)).max(axis=1)
print(f"\nsampled mean of max of 5 geometrics: {samples.mean():.3f}, exact {an.n_bar(0.2, 10).n_bar / 2:.3f}")

# protocol versus sending photons straight down the fiber
L, direct, protocol = an.fig3_series(16, [200, 500, 1000, 2000])
for x, d, p in zip(L, direct, protocol):
    print(f"L = {x:5.0f} km: log10 T_direct = {d:6.2f}, log10 T_protocol = {p:5.2f}")
