"""Random-source helpers shared by the protocol and sampling modules."""
from __future__ import annotations

import hashlib
import random


def uniform_below(rng: random.Random, bound: int) -> int:
    """Draw an integer uniformly from ``[0, bound)``.

    Candidates are drawn from the next power of two and rejected when they
    fall outside the range, so the result carries no modulo bias. Accepted
    values are appended to ``rng.draws`` when the source records them.
    """
    if bound < 1:
        raise ValueError(f"bound must be positive, got {bound}")
    nbits = (bound - 1).bit_length()
    if nbits == 0:
        value = 0
    else:
        getrandbits = rng.getrandbits
        value = getrandbits(nbits)
        while value >= bound:
            value = getrandbits(nbits)
    draws = getattr(rng, "draws", None)
    if draws is not None:
        draws.append(value)
    return value


def uniform_vector(rng: random.Random, bound: int, count: int) -> list[int]:
    """``count`` independent :func:`uniform_below` draws."""
    if bound < 1:
        raise ValueError(f"bound must be positive, got {bound}")
    nbits = (bound - 1).bit_length()
    getrandbits = rng.getrandbits
    out = []
    append = out.append
    for _ in range(count):
        value = getrandbits(nbits) if nbits else 0
        while value >= bound:
            value = getrandbits(nbits)
        append(value)
    draws = getattr(rng, "draws", None)
    if draws is not None:
        draws.extend(out)
    return out


def derive_seed(master: int, *labels: object) -> int:
    """Counter-based split of a master seed into an independent child seed."""
    h = hashlib.blake2b(digest_size=16)
    h.update(str(master).encode())
    for label in labels:
        h.update(b"\x00")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "big")


class RecordingRandom(random.Random):
    """A ``random.Random`` whose accepted uniform draws are kept in ``draws``."""

    def __init__(self, seed: int | None = None):
        super().__init__(seed)
        self.draws: list[int] = []
