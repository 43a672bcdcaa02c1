"""Counter-based randomness.

Every random draw in the package is a pure function of
``(root_seed, trial, site index, draw index)`` through the splitmix64
finalizer.  No global RNG state exists, so sampling is order-independent
and safe to parallelize: workers computing different trials (or the same
trial twice) produce byte-identical results.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U53 = float(1 << 53)


def mix64(x):
    """splitmix64 finalizer on uint64 scalars or arrays (wraps mod 2^64)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def derive_key(*parts) -> np.uint64:
    """Fold integer parts into a single 64-bit stream key."""
    key = np.uint64(0)
    for p in parts:
        key = mix64(key ^ np.uint64(int(p) & 0xFFFFFFFFFFFFFFFF))
    return np.uint64(key)


def uniforms(key: np.uint64, counters) -> np.ndarray:
    """Uniform [0,1) draws indexed by an array of counters.

    ``uniforms(key, i)[j]`` depends only on ``(key, counters[j])``; callers
    pass site indices (plus a draw-level offset) as counters.
    """
    c = np.asarray(counters, dtype=np.uint64)
    bits = mix64(np.uint64(key) ^ mix64(c))
    return (bits >> np.uint64(11)).astype(np.float64) / _U53


def site_uniforms(root_seed: int, trial: int, n_sites: int, level: int = 0) -> np.ndarray:
    """One uniform per site for a given draw level.

    Levels separate successive draws needed by one site (mixtures consume
    more than one uniform); distinct levels are independent streams.
    """
    key = derive_key(root_seed, trial, 0x5EED ^ level)
    return uniforms(key, np.arange(n_sites, dtype=np.uint64))
