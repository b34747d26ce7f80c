"""Deterministic random sub-streams.

Every random draw in the package flows from a single integer seed through a
named sub-stream ("splits", "init", "dropout", "synth", ...).  Streams are
backed by the counter-based Philox generator, so consuming randomness in one
component never shifts the draws of another, and identical (seed, tags)
always reproduce the same sequence bit for bit.
"""

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    digest = hashlib.blake2s(str(tag).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, *tags) -> np.random.Generator:
    """Return the generator for the sub-stream named by ``tags``.

    Tags may be strings or integers; they are hashed into the seed material,
    not into Python's per-process hash, so streams are stable across runs.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
