"""Seeded random streams.

A stream is identified by a 64-bit seed and a 64-bit stream id; the same pair
always produces the same draws. Child streams are derived from a parent's
identity plus integer keys, never from the parent's draw history, so sweeps
stay reproducible whatever order their trials run in.
"""
import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(*keys):
    """Hash integer keys into one 64-bit seed."""
    entropy = [int(k) & _MASK64 for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


class RngStream:
    """A numpy Generator owned by one consumer."""

    def __init__(self, seed, stream_id=0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def child(self, *keys):
        """Independent stream named by keys under this stream's identity."""
        return RngStream(derive_seed(self.seed, self.stream_id, *keys), 0)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
