"""Synthetic scattered data on the unit square with large empty regions."""

from __future__ import annotations

import numpy as np

NOISE_SD = 0.1
BAND_OFFSET = 0.12
BAND_HALF_WIDTH = 0.12


def truth(x, z):
    """Smooth test surface; equals 1 at ``(x, z) = (0.2, 0.3)``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.exp(-((z - 0.3) ** 2) / 2 - (x - 0.2) ** 2 / 4)


def sample_locations(n: int, rng: np.random.Generator,
                     offset: float = BAND_OFFSET, half_width: float = BAND_HALF_WIDTH):
    """Points on two diagonal strips ``z = x +/- offset`` (uniform jitter), clipped to the unit square.

    The main diagonal and the two far corners stay empty, so a tensor basis
    over ``[0, 1]^2`` has many coefficients with no data in their support.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs, zs = [], []
    have = 0
    while have < n:
        m = 2 * (n - have) + 16
        x = rng.uniform(0.0, 1.0, m)
        side = np.where(rng.uniform(size=m) < 0.5, -1.0, 1.0)
        z = x + side * offset + rng.uniform(-half_width, half_width, m)
        ok = (z >= 0.0) & (z <= 1.0)
        xs.append(x[ok])
        zs.append(z[ok])
        have += int(ok.sum())
    return np.concatenate(xs)[:n], np.concatenate(zs)[:n]


def simulate(n: int, seed: int = 0, sd: float = NOISE_SD):
    """``(x, z, y)`` with ``y = truth(x, z) + N(0, sd^2)`` noise; deterministic in ``seed``."""
    if sd < 0:
        raise ValueError("noise sd must be >= 0")
    rng = np.random.default_rng(seed)
    x, z = sample_locations(n, rng)
    y = truth(x, z) + (rng.normal(0.0, sd, n) if sd > 0 else 0.0)
    return x, z, y
