"""Deterministic random substreams for reproducible parallel sampling.

Every stochastic routine in the package receives either an explicit
``numpy.random.Generator`` or a seed from which it derives independent
substreams via :func:`substream`. A substream is a pure function of
``(seed, *path)``, so batches of trajectories can be produced in any order,
split across workers, or regenerated individually without changing results.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "fold_seed"]


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator keyed by ``seed`` and an integer path.

    Distinct paths yield statistically independent streams; the same
    ``(seed, *path)`` always yields the same stream.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def fold_seed(seed: int, index: int) -> int:
    """Derive a fresh 63-bit seed from a master seed and an index.

    Used where a whole run (not a single stream) needs its own seed, e.g.
    one network simulation per index; the derived seeds are mutually
    independent and independent of the master seed's own substreams.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
