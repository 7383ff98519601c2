"""Additive secret sharing over Z_q with local addition and Beaver-triple multiplication.

Party indices are 1-based. Multiplication is split into per-party steps
(:func:`mul_open`, :func:`mul_combine`) so a harness can run the parties in
any order and carry the broadcast between them.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from ._rand import uniform_below, uniform_vector

DEFAULT_MODULUS = 2**61 - 1


class SharingError(ValueError):
    pass


class MalformedTripleError(SharingError):
    pass


@dataclass(frozen=True)
class ShareSet:
    shares: tuple[int, ...]
    q: int

    def __post_init__(self):
        if self.q < 2:
            raise SharingError(f"modulus must be at least 2, got {self.q}")
        if len(self.shares) < 2:
            raise SharingError(f"need at least 2 shares, got {len(self.shares)}")
        if any(not 0 <= s < self.q for s in self.shares):
            raise SharingError("share outside [0, q)")

    @property
    def n(self) -> int:
        return len(self.shares)

    def __getitem__(self, party: int) -> int:
        """Share held by 1-based ``party``."""
        if not 1 <= party <= self.n:
            raise IndexError(party)
        return self.shares[party - 1]


@dataclass(frozen=True)
class BeaverTriple:
    u: ShareSet
    v: ShareSet
    w: ShareSet
    iota: int

    @property
    def n(self) -> int:
        return self.u.n

    @property
    def q(self) -> int:
        return self.u.q

    def asymmetric_bit(self, party: int) -> int:
        return int(party == self.iota)

    def validate(self) -> None:
        if not (self.u.q == self.v.q == self.w.q and self.u.n == self.v.n == self.w.n):
            raise MalformedTripleError("triple components disagree on q or n")
        if not 1 <= self.iota <= self.n:
            raise MalformedTripleError(f"no party holds the asymmetric bit (iota={self.iota})")


def share(x: int, n: int, q: int, rng: random.Random) -> ShareSet:
    """Split ``x`` into ``n`` shares: n-1 uniform draws plus the balancing share."""
    if n < 2:
        raise SharingError(f"need at least 2 parties, got {n}")
    if not 0 <= x < q:
        raise SharingError(f"secret {x} outside [0, {q})")
    head = [uniform_below(rng, q) for _ in range(n - 1)]
    return ShareSet((*head, (x - sum(head)) % q), q)


def share_many(values: Sequence[int], n: int, q: int, rng: random.Random) -> list[list[int]]:
    """Share every value at once; returns one vector of shares per party (1-based order)."""
    if n < 2:
        raise SharingError(f"need at least 2 parties, got {n}")
    for x in values:
        if not 0 <= x < q:
            raise SharingError(f"secret {x} outside [0, {q})")
    ell = len(values)
    heads = [uniform_vector(rng, q, ell) for _ in range(n - 1)]
    last = [x for x in values]
    for col in heads:
        last = [a - b for a, b in zip(last, col)]
    heads.append([v % q for v in last])
    return heads


def reconstruct(s: ShareSet) -> int:
    return sum(s.shares) % s.q


def _check_compatible(sets: Sequence[ShareSet]) -> None:
    if not sets:
        raise SharingError("no share sets given")
    q, n = sets[0].q, sets[0].n
    for s in sets[1:]:
        if s.q != q or s.n != n:
            raise SharingError("share sets disagree on q or n")


def pi_add(inputs: Sequence[ShareSet]) -> ShareSet:
    """Party i's output share is the sum of its input shares mod q."""
    _check_compatible(inputs)
    q = inputs[0].q
    return ShareSet(tuple(sum(col) % q for col in zip(*(s.shares for s in inputs))), q)


def ti_gen_triple(n: int, q: int, rng: random.Random) -> BeaverTriple:
    """Trusted Initializer setup: share u, v and w = uv, and pick the asymmetric-bit holder."""
    if n < 2 or q < 2:
        raise SharingError(f"invalid parameters n={n}, q={q}")
    u = uniform_below(rng, q)
    v = uniform_below(rng, q)
    w = u * v % q
    iota = 1 + uniform_below(rng, n)
    return BeaverTriple(share(u, n, q, rng), share(v, n, q, rng), share(w, n, q, rng), iota)


def mul_open(x_i: int, y_i: int, u_i: int, v_i: int, q: int) -> tuple[int, int]:
    """Step 1: a party's masked differences (d_i, e_i) to broadcast."""
    return (x_i - u_i) % q, (y_i - v_i) % q


def mul_combine(
    party: int,
    d_all: Sequence[int],
    e_all: Sequence[int],
    u_i: int,
    v_i: int,
    w_i: int,
    iota: int,
    q: int,
) -> int:
    """Steps 3-5: open d and e from all broadcasts and form the output share."""
    d = sum(d_all) % q
    e = sum(e_all) % q
    z = w_i + d * v_i + e * u_i
    if party == iota:
        z += d * e
    return z % q


def pi_mul(
    x: ShareSet,
    y: ShareSet,
    triple: BeaverTriple,
    broadcasts: list | None = None,
) -> ShareSet:
    """Multiply two sharings with one Beaver triple.

    Every (party, d_i, e_i) broadcast is appended to ``broadcasts`` if given.
    """
    _check_compatible([x, y, triple.u, triple.v, triple.w])
    triple.validate()
    q, n = x.q, x.n
    d_all, e_all = [], []
    for i in range(1, n + 1):
        d_i, e_i = mul_open(x[i], y[i], triple.u[i], triple.v[i], q)
        d_all.append(d_i)
        e_all.append(e_i)
        if broadcasts is not None:
            broadcasts.append((i, "d", d_i))
            broadcasts.append((i, "e", e_i))
    z = tuple(
        mul_combine(i, d_all, e_all, triple.u[i], triple.v[i], triple.w[i], triple.iota, q)
        for i in range(1, n + 1)
    )
    return ShareSet(z, q)
