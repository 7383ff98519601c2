import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from mcruntime import paillier as he


def brute_powmod(base, exp, mod):
    acc = 1
    for _ in range(exp):
        acc = acc * base % mod
    return acc


def test_forced_primes():
    pk, sk = he.keypair_from_primes(5, 7)
    assert pk.n == 35 and pk.g == 36 and pk.n_squared == 1225
    assert sk.lam == 12
    assert sk.mu == 3


def test_keygen_is_deterministic_under_seed():
    a = he.keygen(512, random.Random(1))
    b = he.keygen(512, random.Random(1))
    assert he.dump_keypair(*a) == he.dump_keypair(*b)


@pytest.mark.parametrize("bits", [16, 64, 128, 512])
def test_keygen_modulus_shape(bits):
    pk, sk = he.keygen(bits, random.Random(bits))
    assert pk.n.bit_length() == bits
    assert pk.g == pk.n + 1
    rng = random.Random(0)
    for m in (0, 1, int(pk.n) - 1):
        assert he.decrypt(sk, he.encrypt(pk, m, rng)) == m


@pytest.mark.parametrize("bits", [8, 15, 17])
def test_keygen_rejects_bad_sizes(bits):
    with pytest.raises(ValueError):
        he.keygen(bits, random.Random(0))


def test_prime_generation_gives_up():
    class Stuck(random.Random):
        def getrandbits(self, k):
            return 0

    # every candidate becomes 0b11000000001 = 1537 = 29 * 53
    assert not he.is_probable_prime(1537)
    with pytest.raises(he.PrimeGenerationError):
        he.random_prime(11, Stuck(), max_attempts=5)


def test_roundtrip_1000_random_messages(keys512):
    pk, sk = keys512
    rng = random.Random(7)
    for _ in range(1000):
        m = rng.randrange(int(pk.n))
        assert he.decrypt(sk, he.encrypt(pk, m, rng)) == m


def test_encrypt_identity_case():
    pk, _ = he.keypair_from_primes(5, 7)
    assert he.encrypt(pk, 0, r=1).value == 1


def test_encrypt_matches_brute_force_oracle():
    pk, sk = he.keypair_from_primes(5, 7)
    c = he.encrypt(pk, 3, r=2)
    expected = brute_powmod(36, 3, 1225) * brute_powmod(2, 35, 1225) % 1225
    assert expected == 683
    assert c.value == expected
    assert he.decrypt(sk, c) == 3


def test_decrypt_trivial_ciphertext():
    pk, sk = he.keypair_from_primes(5, 7)
    assert he.decrypt(sk, he.Ciphertext(1, pk.n)) == 0


def test_encrypt_rejects_out_of_range(keys512, rng):
    pk, _ = keys512
    with pytest.raises(he.PaillierError):
        he.encrypt(pk, int(pk.n), rng)
    with pytest.raises(he.PaillierError):
        he.encrypt(pk, -1, rng)


def test_key_mismatch(keys512, rng):
    pk, sk = keys512
    other_pk, other_sk = he.keypair_from_primes(5, 7)
    c = he.encrypt(pk, 5, rng)
    with pytest.raises(he.KeyMismatchError):
        he.decrypt(other_sk, c)
    with pytest.raises(he.KeyMismatchError):
        he.hom_add(other_pk, c, c)


def test_hom_add_examples(keys512, rng):
    pk, sk = keys512
    assert he.decrypt(sk, he.hom_add(pk, he.encrypt(pk, 2, rng), he.encrypt(pk, 3, rng))) == 5
    m = 987654321
    assert he.decrypt(sk, he.hom_add(pk, he.encrypt(pk, m, rng), he.encrypt(pk, 0, rng))) == m


def test_hom_add_wraps_mod_n(keys512, rng):
    pk, sk = keys512
    n = int(pk.n)
    c = he.hom_add(pk, he.encrypt(pk, n - 1, rng), he.encrypt(pk, 5, rng))
    assert he.decrypt(sk, c) == 4


def test_hom_add_counting_oracle(keys512, rng):
    pk, sk = keys512
    one = he.encrypt(pk, 1, rng)
    acc = he.encrypt(pk, 1, rng)
    for _ in range(99):
        acc = he.hom_add(pk, acc, one)
    assert he.decrypt(sk, acc) == 100


def test_hom_add_counting_wraps_small_modulus():
    pk, sk = he.keypair_from_primes(5, 7)
    rng = random.Random(3)
    acc = he.encrypt(pk, 1, rng)
    for _ in range(49):
        acc = he.hom_add(pk, acc, he.encrypt(pk, 1, rng))
    assert he.decrypt(sk, acc) == 50 % 35


@pytest.mark.parametrize("m,k,expected", [(7, 6, 42), (123, 1, 123), (123, 0, 0)])
def test_hom_scalar_mul(keys512, rng, m, k, expected):
    pk, sk = keys512
    assert he.decrypt(sk, he.hom_scalar_mul(pk, he.encrypt(pk, m, rng), k)) == expected


def test_hom_scalar_mul_range(keys512, rng):
    pk, _ = keys512
    c = he.encrypt(pk, 1, rng)
    with pytest.raises(he.PaillierError):
        he.hom_scalar_mul(pk, c, int(pk.n))


def test_probabilistic_encryption(keys512, rng):
    pk, sk = keys512
    a, b = he.encrypt(pk, 42, r=2), he.encrypt(pk, 42, r=3)
    assert a.value != b.value
    assert he.decrypt(sk, a) == he.decrypt(sk, b) == 42


def test_exhaustive_small_key():
    pk, sk = he.keypair_from_primes(5, 7)
    units = [r for r in range(1, 35) if r % 5 and r % 7]
    for m in range(35):
        for r in units:
            c = he.encrypt(pk, m, r=r)
            assert 0 < c.value < 1225
            assert he.decrypt(sk, c) == m


@pytest.mark.parametrize("a,n,expected", [(1, 9, 1), (3, 7, 5), (10, 17, 12), (-1, 7, 6)])
def test_mod_inverse(a, n, expected):
    assert he.mod_inverse(a, n) == expected


@pytest.mark.parametrize("a,n", [(4, 8), (0, 5), (6, 9)])
def test_mod_inverse_not_invertible(a, n):
    with pytest.raises(he.NotInvertibleError):
        he.mod_inverse(a, n)


def test_mod_inverse_rejects_small_modulus():
    with pytest.raises(ValueError):
        he.mod_inverse(1, 1)


@given(st.integers(min_value=2, max_value=10**30), st.integers(min_value=-10**30, max_value=10**30))
def test_mod_inverse_property(n, a):
    try:
        b = he.mod_inverse(a, n)
    except he.NotInvertibleError:
        import math
        assert math.gcd(a, n) != 1
    else:
        assert a * b % n == 1 and 0 <= b < n


def test_primality_deterministic_range():
    small = [p for p in range(2, 2000) if all(p % d for d in range(2, int(p**0.5) + 1))]
    assert [n for n in range(2000) if he.is_probable_prime(n)] == small
    # strong pseudoprimes to several small bases
    for n in (3215031751, 2152302898747, 3474749660383, 341550071728321):
        assert not he.is_probable_prime(n)
    assert he.is_probable_prime(2**61 - 1)
    assert he.is_probable_prime(2**127 - 1)
    assert not he.is_probable_prime((2**61 - 1) * (2**31 - 1))


def test_key_json_roundtrip(keys512):
    pk, sk = keys512
    text = he.dump_keypair(pk, sk)
    obj = json.loads(text)
    assert set(obj) == {"n", "g", "lambda", "mu"}
    assert all(isinstance(v, str) and v.isdigit() for v in obj.values())
    pk2, sk2 = he.load_keypair(text)
    assert pk2 == pk and sk2 == sk


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_homomorphisms_property(keys512, data):
    pk, sk = keys512
    n = int(pk.n)
    m1 = data.draw(st.integers(0, n - 1))
    m2 = data.draw(st.integers(0, n - 1))
    k = data.draw(st.integers(0, n - 1))
    rng = random.Random(data.draw(st.integers(0, 2**32)))
    c1, c2 = he.encrypt(pk, m1, rng), he.encrypt(pk, m2, rng)
    assert he.decrypt(sk, he.hom_add(pk, c1, c2)) == (m1 + m2) % n
    assert he.decrypt(sk, he.hom_scalar_mul(pk, c1, k)) == k * m1 % n
