"""Counter-based random streams: every trial owns a fixed slice of one Philox sequence.

Trial ``i`` consumes Philox blocks ``i * blocks + 1 .. (i + 1) * blocks`` of
the stream keyed by the master seed, so any chunking of the trial range, in
any order and on any thread, sees the same numbers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["TrialStreams", "philox_key", "generate_seed"]

_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter step
_DOUBLE_SCALE = 1.0 / 9007199254740992.0  # 2**-53, as in Generator.random


def generate_seed() -> int:
    """Fresh 63-bit master seed drawn from OS entropy."""
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0] >> np.uint64(1))


def philox_key(master_seed: int) -> np.ndarray:
    return np.random.SeedSequence(int(master_seed)).generate_state(2, np.uint64)


class TrialStreams:
    """Uniform variates for trials drawn from a master seed.

    Each trial gets ``width`` uniforms in ``[0, 1)``.
    """

    def __init__(self, master_seed: int, width: int):
        if int(master_seed) < 0:
            raise ValueError("master_seed must be non-negative")
        self.master_seed = int(master_seed)
        self.width = int(width)
        self.key = philox_key(self.master_seed)
        self.blocks = -(-self.width // _WORDS_PER_BLOCK)

    def generator(self, trial: int) -> np.random.Generator:
        """Generator whose first ``width`` calls to ``random`` are the uniforms of ``trial``."""
        return np.random.Generator(np.random.Philox(key=self.key, counter=int(trial) * self.blocks))

    def uniforms(self, start: int, stop: int) -> np.ndarray:
        """Uniforms of trials ``start .. stop-1``, shape ``(stop - start, width)``."""
        n = int(stop) - int(start)
        bitgen = np.random.Philox(key=self.key, counter=int(start) * self.blocks)
        raw = bitgen.random_raw(n * self.blocks * _WORDS_PER_BLOCK)
        raw = raw.reshape(n, self.blocks * _WORDS_PER_BLOCK)[:, : self.width]
        return (raw >> np.uint64(11)).astype(np.float64) * _DOUBLE_SCALE
