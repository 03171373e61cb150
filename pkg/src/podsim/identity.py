"""128-bit node identifiers and the XOR metric."""

from __future__ import annotations

import random

ID_BITS = 128
ID_MASK = (1 << ID_BITS) - 1

NodeId = int


def xor_distance(a: NodeId, b: NodeId) -> int:
    return a ^ b


def bucket_index(self_id: NodeId, other: NodeId) -> int:
    """Index of the most significant bit in which the two ids differ.

    ``other`` lands in bucket ``i`` iff ``2**i <= self_id ^ other < 2**(i+1)``.
    """
    d = self_id ^ other
    if d == 0:
        raise ValueError("a node never stores itself: ids are equal")
    return d.bit_length() - 1


def generate_ids(count: int, rng: random.Random, taken: set[int] | None = None) -> list[NodeId]:
    """Draw ``count`` distinct uniform ids, redrawing on collision.

    ``taken`` holds ids already in use; new ids are added to it when given.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    seen = taken if taken is not None else set()
    out = []
    while len(out) < count:
        x = rng.getrandbits(ID_BITS)
        if x in seen:
            continue
        seen.add(x)
        out.append(x)
    return out
