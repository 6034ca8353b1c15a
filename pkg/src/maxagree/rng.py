"""Deterministic random-number streams and multivariate normal sampling.

Every stochastic routine in the package derives its randomness from the
counter-based Philox generator, keyed by the user seed plus replicate
indices.  Two access patterns are provided:

* ``stream(seed, *indices)`` — an independent generator per index tuple,
  used where each replicate draws a nontrivial amount of randomness
  (dataset generation, split permutations);
* ``index_blocks(seed, tag, ...)`` — resampling indices where replicate
  ``b`` owns the b-th fixed counter window of one keyed stream.  This is
  the same splittable-stream guarantee without constructing thousands of
  generator objects, which dominates the cost of tight bootstrap loops.

Either way a replicate's values do not depend on how many other
replicates run, in what order, or in what chunk sizes, so parallel and
serial execution produce identical results.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularCovariance

__all__ = ["stream", "philox_key", "index_blocks", "mvn_rows", "cholesky_lower"]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def philox_key(seed: int, *indices: int) -> np.ndarray:
    """Mix (seed, indices) into a 128-bit Philox key (splitmix64 chain)."""
    state = int(seed) & _MASK64
    for i in indices:
        state = _splitmix((state + _GOLDEN * (int(i) + 1)) & _MASK64)
    return np.array([_splitmix(state), _splitmix(state ^ _GOLDEN)], dtype=np.uint64)


def stream(seed: int, *indices: int) -> np.random.Generator:
    """Return the generator for replicate ``indices`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=[int(seed), *map(int, indices)])
    return np.random.Generator(np.random.Philox(ss))


def index_blocks(
    seed: int,
    tag: int,
    n_blocks: int,
    block_len: int,
    modulo: int,
    start_block: int = 0,
) -> np.ndarray:
    """Resampling indices in [0, modulo) for a run of replicate blocks.

    Block ``b`` (global numbering) is the b-th fixed window of the stream
    keyed by (seed, tag), so its values are independent of batching and
    of how many blocks are drawn.  Windows are padded to the generator's
    4-word counter granularity.  Raw words map to indices through the top
    53 bits scaled by ``modulo``; the resulting bias (< modulo / 2^53) is
    astronomically below Monte Carlo resolution and the map is branch-free.
    """
    words = -(-block_len // 4) * 4
    gen = np.random.Generator(np.random.Philox(key=philox_key(seed, tag)))
    if start_block:
        gen.bit_generator.advance(start_block * (words // 4))
    raw = gen.bit_generator.random_raw(n_blocks * words)
    np.right_shift(raw, 11, out=raw)
    scaled = raw.astype(np.float64)
    scaled *= modulo * 2.0**-53
    idx = scaled.astype(np.int32)
    return idx.reshape(n_blocks, words)[:, :block_len]


def cholesky_lower(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises SingularCovariance if not SPD."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"covariance is not positive definite: {exc}") from exc


def mvn_rows(mean: np.ndarray, cov: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows from N(mean, cov) via the lower triangular factor."""
    mean = np.asarray(mean, dtype=float)
    lower = cholesky_lower(np.asarray(cov, dtype=float))
    z = rng.standard_normal((n, mean.size))
    return mean + z @ lower.T
