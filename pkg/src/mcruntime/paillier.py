"""Paillier cryptosystem with additive and scalar-multiplicative homomorphisms.

Arithmetic runs on GMP integers (``gmpy2.mpz``); they are arbitrary precision
and interoperate with Python ints, so callers may pass either.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpz

from ._rand import uniform_below

DEFAULT_KEY_BITS = 2048
TEST_KEY_BITS = 512
MIN_KEY_BITS = 16

MR_ROUNDS = 40
# Bases that make Miller-Rabin deterministic for n < 3.3e24, which covers 2**64.
_DETERMINISTIC_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


class PaillierError(ValueError):
    pass


class KeyMismatchError(PaillierError):
    pass


class NotInvertibleError(ValueError):
    pass


class PrimeGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PublicKey:
    n: mpz
    g: mpz
    n_squared: mpz

    def __post_init__(self):
        if self.n < 15:
            raise PaillierError("modulus must be at least 15")
        if self.g != self.n + 1:
            raise PaillierError("generator must be n + 1")
        if self.n_squared != self.n * self.n:
            raise PaillierError("n_squared must equal n * n")

    @classmethod
    def from_n(cls, n: int) -> PublicKey:
        n = mpz(n)
        return cls(n, n + 1, n * n)


@dataclass(frozen=True)
class PrivateKey:
    lam: mpz
    mu: mpz
    n: mpz

    @property
    def n_squared(self) -> mpz:
        return self.n * self.n


@dataclass(frozen=True)
class Ciphertext:
    """An encryption ``value`` in Z_{n^2}, tagged with the modulus ``n`` it lives under."""

    value: mpz
    n: mpz


def mod_inverse(a: int, n: int) -> int:
    """Return ``b`` with ``a*b = 1 (mod n)`` using the extended Euclidean algorithm."""
    if n <= 1:
        raise ValueError(f"modulus must exceed 1, got {n}")
    old_r, r = a % n, n
    old_s, s = 1, 0
    while r:
        quotient = old_r // r
        old_r, r = r, old_r - quotient * r
        old_s, s = s, old_s - quotient * s
    if old_r != 1:
        raise NotInvertibleError(f"{a} has no inverse modulo {n} (gcd={old_r})")
    return int(old_s % n)


def is_probable_prime(n: int, rng: random.Random | None = None, rounds: int = MR_ROUNDS) -> bool:
    """Miller-Rabin test: deterministic below 2**64, ``rounds`` random bases above."""
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    n = mpz(n)
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1

    if n < 2**64:
        bases = _DETERMINISTIC_BASES
    else:
        rng = rng or random.Random()
        bases = [2 + uniform_below(rng, int(n) - 3) for _ in range(rounds)]

    for a in bases:
        x = gmpy2.powmod(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = gmpy2.powmod(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def random_prime(bits: int, rng: random.Random, max_attempts: int | None = None) -> mpz:
    """Random prime with exactly ``bits`` bits and its top two bits set."""
    if bits < 3:
        raise ValueError("prime size must be at least 3 bits")
    if max_attempts is None:
        max_attempts = 100 * bits
    top = (1 << (bits - 1)) | (1 << (bits - 2))
    for _ in range(max_attempts):
        candidate = rng.getrandbits(bits) | top | 1
        if is_probable_prime(candidate, rng):
            return mpz(candidate)
    raise PrimeGenerationError(f"no {bits}-bit prime found in {max_attempts} attempts")


def keypair_from_primes(p: int, q: int) -> tuple[PublicKey, PrivateKey]:
    """Build a keypair from two known distinct primes (g fixed to n + 1)."""
    p, q = mpz(p), mpz(q)
    if p == q:
        raise PaillierError("primes must be distinct")
    n = p * q
    if math.gcd(int(n), int((p - 1) * (q - 1))) != 1:
        raise PaillierError("gcd(pq, (p-1)(q-1)) must be 1")
    pk = PublicKey.from_n(n)
    lam = mpz(math.lcm(int(p - 1), int(q - 1)))
    x = gmpy2.powmod(pk.g, lam, pk.n_squared)
    mu = mpz(mod_inverse(int((x - 1) // n), int(n)))
    return pk, PrivateKey(lam, mu, n)


def keygen(bits: int, rng: random.Random) -> tuple[PublicKey, PrivateKey]:
    """Generate a keypair whose modulus is a product of two distinct ``bits/2``-bit primes."""
    if bits < MIN_KEY_BITS:
        raise ValueError(f"key size must be at least {MIN_KEY_BITS} bits, got {bits}")
    if bits % 2:
        raise ValueError(f"key size must be even, got {bits}")
    half = bits // 2
    p = random_prime(half, rng)
    q = random_prime(half, rng)
    while q == p:
        q = random_prime(half, rng)
    return keypair_from_primes(p, q)


def _check_pk(pk: PublicKey, c: Ciphertext) -> None:
    if c.n != pk.n:
        raise KeyMismatchError("ciphertext was produced under a different modulus")


def random_unit(pk: PublicKey, rng: random.Random) -> mpz:
    """Rejection-sample r from [1, n) with gcd(r, n) = 1."""
    n = int(pk.n)
    while True:
        r = uniform_below(rng, n)
        if r and math.gcd(r, n) == 1:
            return mpz(r)


def encrypt(pk: PublicKey, m: int, rng: random.Random | None = None, r: int | None = None) -> Ciphertext:
    """Return ``g^m * r^n mod n^2``; ``r`` is sampled from ``rng`` unless given."""
    if not 0 <= m < pk.n:
        raise PaillierError(f"plaintext {m} outside [0, n)")
    if r is None:
        if rng is None:
            raise ValueError("either rng or r is required")
        r = random_unit(pk, rng)
    nsq = pk.n_squared
    # g = n + 1, so g^m = 1 + m*n (mod n^2)
    gm = (1 + mpz(m) * pk.n) % nsq
    return Ciphertext(gm * gmpy2.powmod(r, pk.n, nsq) % nsq, pk.n)


def decrypt(sk: PrivateKey, c: Ciphertext) -> int:
    if c.n != sk.n:
        raise KeyMismatchError("ciphertext was produced under a different modulus")
    n = sk.n
    x = gmpy2.powmod(c.value, sk.lam, n * n)
    return int((x - 1) // n * sk.mu % n)


def hom_add(pk: PublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Ciphertext product; decrypts to ``m1 + m2 mod n``."""
    _check_pk(pk, c1)
    _check_pk(pk, c2)
    return Ciphertext(c1.value * c2.value % pk.n_squared, pk.n)


def hom_scalar_mul(pk: PublicKey, c: Ciphertext, k: int) -> Ciphertext:
    """Ciphertext power; decrypts to ``k * m mod n``."""
    _check_pk(pk, c)
    if not 0 <= k < pk.n:
        raise PaillierError(f"scalar {k} outside [0, n)")
    return Ciphertext(gmpy2.powmod(c.value, k, pk.n_squared), pk.n)


def dump_keypair(pk: PublicKey, sk: PrivateKey) -> str:
    """Serialize as ``{n, g, lambda, mu}`` with base-10 string values."""
    return json.dumps({"n": str(pk.n), "g": str(pk.g), "lambda": str(sk.lam), "mu": str(sk.mu)})


def load_keypair(text: str) -> tuple[PublicKey, PrivateKey]:
    obj = json.loads(text)
    n = mpz(obj["n"])
    pk = PublicKey(n, mpz(obj["g"]), n * n)
    return pk, PrivateKey(mpz(obj["lambda"]), mpz(obj["mu"]), n)
