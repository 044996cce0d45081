"""Order-independent seeded substreams keyed by (seed, frame, purpose)."""
import numpy as np

PURPOSES = ("data", "noise", "alpha", "theta", "guard", "preamble", "postamble")


def substream(seed: int, frame: int, purpose: str) -> np.random.Generator:
    if purpose not in PURPOSES:
        raise ValueError(f"unknown RNG purpose {purpose!r}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(frame, PURPOSES.index(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


class RngStream:
    def __init__(self, seed: int):
        self.seed = int(seed)

    def __call__(self, frame: int, purpose: str) -> np.random.Generator:
        return substream(self.seed, frame, purpose)
