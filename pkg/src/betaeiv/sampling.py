"""Deterministic random-variate helpers shared by the simulation harness,
the bootstrap, and the envelope diagnostics.

Streams are derived as PCG64 generators seeded by ``SeedSequence((seed,
stream))``, so replicate i of a run is reproducible independently of how
many workers execute it.
"""

import numpy as np

RNG_DESCRIPTION = "numpy PCG64, stream = SeedSequence((seed, replicate_index))"


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """A generator for the given (seed, stream) pair."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((int(seed), int(stream)))))


def draw_beta(rng: np.random.Generator, mu, phi, clamp: float = 1e-12) -> np.ndarray:
    """Beta(mu, phi) variates via the ratio of two gamma draws.

    Stable for small shape parameters; output is clamped to
    (clamp, 1 - clamp) so downstream logs stay finite.
    """
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    g1 = rng.gamma(mu * phi)
    g2 = rng.gamma((1.0 - mu) * phi)
    with np.errstate(invalid="ignore", divide="ignore"):
        y = g1 / (g1 + g2)
    y = np.where(np.isfinite(y), y, 0.5)  # both gamma draws underflowed
    return np.clip(y, clamp, 1.0 - clamp)
