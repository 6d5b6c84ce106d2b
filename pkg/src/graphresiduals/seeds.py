"""Deterministic seed derivation for Monte Carlo trials.

A master seed splits into per-trial seeds by a stable hash so trials are
independent, reproducible across platforms, and insensitive to execution
order.  Never wall-clock seeded.
"""

from __future__ import annotations

import hashlib


def split_seed(master: int, *indices: int | str) -> int:
    """Derive a child seed from a master seed and an index path.

    Uses SHA-256 over the decimal rendering of (master, *indices), so the
    mapping is stable across Python versions and platforms.  Returns a
    63-bit nonnegative integer suitable for ``numpy.random.default_rng``.
    """
    text = ":".join(str(part) for part in (master, *indices))
    digest = hashlib.sha256(text.encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)
