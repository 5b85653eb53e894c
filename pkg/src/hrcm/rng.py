"""Deterministic random-number streams for reproducible parallel Monte Carlo.

Every source of randomness in the package flows from a 64-bit master seed
through one of two mechanisms:

* per-replica Philox substreams keyed by ``(master_seed, replica, role)``,
  so replicas can be evaluated in any order, on any number of workers,
  with bit-identical results;
* a counter-based per-pair hash for edge coin flips, so that lazy or
  pruned edge evaluation draws exactly the same uniform for pair ``(i, j)``
  as the exhaustive reference path.
"""

from __future__ import annotations

import numpy as np

# Stream roles, mixed into the Philox key alongside the replica index.
ROLE_POINTS = 0
ROLE_EDGES = 1
ROLE_GHOSTS = 2
ROLE_MC = 3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = float(1 << 53)


def substream(master_seed: int, replica: int, role: int) -> np.random.Generator:
    """Generator for one (replica, role) stream under a master seed."""
    key = np.array(
        [np.uint64(master_seed), (np.uint64(replica) << np.uint64(2)) | np.uint64(role)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def stream_key(master_seed: int, replica: int, role: int) -> int:
    """64-bit scalar key for counter-based draws in one stream."""
    return int(substream(master_seed, replica, role).integers(0, 2**63, dtype=np.uint64))


def derive_seed(master_seed: int, salt: int) -> int:
    """Deterministically derive an independent master seed (e.g. one per
    window radius or sweep stage)."""
    with np.errstate(over="ignore"):
        x = np.array([np.uint64(master_seed)], dtype=np.uint64)
        x ^= np.array([np.uint64(salt)], dtype=np.uint64) * _MIX2
    return int(splitmix64(x)[0] >> np.uint64(1))


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorised splitmix64 finaliser (uint64 in, uint64 out)."""
    x = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x += _GOLDEN
        x ^= x >> np.uint64(30)
        x *= _MIX1
        x ^= x >> np.uint64(27)
        x *= _MIX2
        x ^= x >> np.uint64(31)
    return x


def pair_uniform(edge_key: int, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Uniform [0,1) deviate for unordered point pairs.

    A pure function of ``(edge_key, min(i,j), max(i,j))``: the same pair
    always receives the same deviate no matter how many pairs are examined
    or in what order, which is what makes neighbourhood pruning exact.
    """
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    with np.errstate(over="ignore"):
        k = (lo << np.uint64(32)) | hi
        h = splitmix64(np.uint64(edge_key) ^ (k * _GOLDEN))
    return (h >> np.uint64(11)).astype(np.float64) / _U53
