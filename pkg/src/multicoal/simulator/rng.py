"""Counter-based random streams, one per (seed, stream id)."""
from __future__ import annotations

import dataclasses

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclasses.dataclass(frozen=True)
class RngSpec:
    """
    A reproducible random stream.

    The Philox key is built from ``seed`` (high 64 bits) and ``stream``
    (low 64 bits), so streams never overlap and a replica's draws do not
    depend on which worker runs it or in what order.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = ((self.seed & _MASK64) << 64) | (self.stream & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngSpec(int(rng)).generator()
    raise TypeError(f"cannot make a random generator from {rng!r}")


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic 64-bit child seed for an independent sample."""
    state = np.random.SeedSequence([seed & _MASK64, *tags]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])
