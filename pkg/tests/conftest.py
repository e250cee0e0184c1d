"""Shared test helpers.

Every randomized test draws from an explicitly seeded counter-based
generator so failures reproduce exactly.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.special import expit

from causalest import validate


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def rng() -> np.random.Generator:
    return philox(20240817)


def confounded_binary(seed: int, n: int, tau: float = -5.0):
    """A strongly confounded binary-treatment draw used across test modules:
    x shifts both the assignment odds and the outcome level."""
    g = philox(seed)
    x = g.normal(0.0, np.sqrt(10.0), n)
    p = expit(2.0 + 0.5 * x)
    d = (g.uniform(size=n) < p).astype(float)
    y = 10.0 + tau * d + 0.5 * x + g.normal(0.0, np.sqrt(5.0), n)
    return validate(y, d, x)


def randomized_binary(seed: int, n: int, tau: float = 2.0):
    """A randomized draw (assignment independent of x) where outcome
    regression, weighting and the augmented estimator must all agree."""
    g = philox(seed)
    x = g.normal(0.0, 1.0, n)
    d = (g.uniform(size=n) < 0.5).astype(float)
    y = 1.0 + tau * d + 0.8 * x + g.normal(0.0, 1.0, n)
    return validate(y, d, x)
