from __future__ import annotations

import math

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def binomial_z(successes: int, trials: int, p: float) -> float:
    """z-score of an observed count against Binomial(trials, p)."""
    sd = math.sqrt(trials * p * (1 - p))
    return (successes - trials * p) / sd if sd > 0 else (0.0 if successes == trials * p else math.inf)
