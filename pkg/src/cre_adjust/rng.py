"""Derived random streams keyed on (seed, purpose, replicate).

Every consumer asks for its own Philox generator so that results do not depend
on call order or on how replicates are split across workers.
"""
import zlib

import numpy as np


def _tag_key(tag):
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed, tag, index=0):
    """Counter-based generator for one (seed, tag, index) triple."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(_tag_key(tag), int(index)))
    return np.random.Generator(np.random.Philox(ss))
