"""Named, independent random streams derived from one experiment seed.

Every stream is keyed by (seed, *names); adding a new stream never perturbs
existing ones.
"""

import hashlib

import numpy as np


def _name_key(name):
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8],
                          "little")


def stream(seed, *names):
    """A numpy Generator keyed by the seed and a tuple of stream names."""
    return np.random.default_rng([int(seed)] + [_name_key(n) for n in names])
