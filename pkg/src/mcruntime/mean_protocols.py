"""Floor-mean protocols over Paillier ciphertexts and over additive shares.

Each protocol is split into client-prepare, server-compute and client-finish
phases. :func:`run_protocol` wires them through a :class:`SimHarness` and
books client and server time separately.

Two modes are supported. ``paper_faithful`` has the servers multiply the sum
by the modular inverse of the dataset size, which equals the mean only when
the size divides the sum. ``exact`` leaves the servers with the sum and lets
the client floor-divide.
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from . import paillier as he
from . import secret_sharing as ss
from .harness import CLIENT, SERVER, RoleTimer, RuntimeSample, SimHarness


class Protocol(str, enum.Enum):
    HE = "HE"
    MPC = "MPC"


class Mode(str, enum.Enum):
    PAPER_FAITHFUL = "paper_faithful"
    EXACT = "exact"


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class MeanProtocolConfig:
    protocol: Protocol
    parties: int = 3
    key_bits: int = he.DEFAULT_KEY_BITS
    q: int = ss.DEFAULT_MODULUS
    mode: Mode = Mode.EXACT

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.protocol is Protocol.MPC:
            if self.parties < 2:
                raise ProtocolError("MPC needs at least 2 computing parties")
            if self.q < 2:
                raise ProtocolError("modulus must be at least 2")


@dataclass
class MeanResult:
    value: int
    timings: RuntimeSample


# -- HE ------------------------------------------------------------------------

def he_client_prepare(dataset: Sequence[int], pk: he.PublicKey, rng: random.Random) -> list[he.Ciphertext]:
    for x in dataset:
        if not 0 <= x < pk.n:
            raise ProtocolError(f"value {x} outside the plaintext space [0, n)")
    return [he.encrypt(pk, x, rng) for x in dataset]


def he_server_compute(cts: Sequence[he.Ciphertext], ell: int, pk: he.PublicKey,
                      mode: Mode = Mode.PAPER_FAITHFUL) -> he.Ciphertext:
    """Fold the ciphertexts with homomorphic addition; in paper-faithful mode scale by ell^-1 mod n."""
    if not cts:
        raise ProtocolError("no ciphertexts to aggregate")
    acc = cts[0]
    for c in cts[1:]:
        acc = he.hom_add(pk, acc, c)
    if Mode(mode) is Mode.EXACT:
        return acc
    try:
        inv = he.mod_inverse(ell, int(pk.n))
    except he.NotInvertibleError as exc:
        raise ProtocolError(f"dataset size {ell} is not invertible modulo n") from exc
    return he.hom_scalar_mul(pk, acc, inv)


def he_client_finish(sk: he.PrivateKey, c: he.Ciphertext, ell: int, mode: Mode = Mode.PAPER_FAITHFUL) -> int:
    plain = he.decrypt(sk, c)
    if Mode(mode) is Mode.EXACT:
        return plain // ell
    return plain


# -- MPC -----------------------------------------------------------------------

class MpcClientBundle(NamedTuple):
    party_shares: list[list[int]]
    triple: ss.BeaverTriple | None
    ell_inv: ss.ShareSet | None


def mpc_client_prepare(dataset: Sequence[int], k: int, q: int, rng: random.Random,
                       mode: Mode = Mode.PAPER_FAITHFUL) -> MpcClientBundle:
    """Share every value among ``k`` parties; in paper-faithful mode also act as Trusted Initializer."""
    ell = len(dataset)
    inv_share = triple = None
    if Mode(mode) is Mode.PAPER_FAITHFUL:
        if math.gcd(ell, q) != 1:
            raise ProtocolError(f"dataset size {ell} is not invertible modulo q")
        triple = ss.ti_gen_triple(k, q, rng)
        inv_share = ss.share(he.mod_inverse(ell, q), k, q, rng)
    return MpcClientBundle(ss.share_many(dataset, k, q, rng), triple, inv_share)


def mpc_party_states(bundle: MpcClientBundle, q: int, mode: Mode) -> list[dict]:
    """Split the client's output into what each computing party receives."""
    states = []
    for i, col in enumerate(bundle.party_shares, start=1):
        st = {"index": i, "shares": col, "q": q, "mode": Mode(mode)}
        if bundle.triple is not None:
            t = bundle.triple
            st.update(u=t.u[i], v=t.v[i], w=t.w[i], iota_bit=t.asymmetric_bit(i), ell_inv=bundle.ell_inv[i])
        states.append(st)
    return states


def mpc_server_party(party):
    """Computing-party program: local sum, then one Beaver multiplication by the shared ell^-1.

    Yields once between broadcasting (d_i, e_i) and combining the opened values.
    """
    st = party.state
    q = st["q"]
    s_i = sum(st["shares"]) % q
    if st["mode"] is Mode.EXACT:
        return s_i
    d_i, e_i = ss.mul_open(s_i, st["ell_inv"], st["u"], st["v"], q)
    party.broadcast("de", (d_i, e_i))
    yield
    msgs = party.receive("de")
    if len(msgs) != st.get("k", len(msgs)) or not msgs:
        raise ProtocolError(f"party {party.index} is missing broadcasts")
    d_all = [m.payload[0] for m in msgs]
    e_all = [m.payload[1] for m in msgs]
    iota = party.index if st["iota_bit"] else 0
    return ss.mul_combine(party.index, d_all, e_all, st["u"], st["v"], st["w"], iota, q)


def mpc_client_finish(z_shares: ss.ShareSet, ell: int, mode: Mode = Mode.PAPER_FAITHFUL) -> int:
    """Reconstruct the parties' outputs; in exact mode these are sum shares and get floor-divided."""
    value = ss.reconstruct(z_shares)
    if Mode(mode) is Mode.EXACT:
        return value // ell
    return value


def _he_server(party):
    st = party.state
    return he_server_compute(st["cts"], st["ell"], st["pk"], st["mode"])


# -- orchestration ---------------------------------------------------------------

def run_protocol(
    dataset: Sequence[int],
    cfg: MeanProtocolConfig,
    harness: SimHarness | None = None,
    rng: random.Random | None = None,
    keys: tuple[he.PublicKey, he.PrivateKey] | None = None,
    iteration: int = 0,
) -> MeanResult:
    """Run one protocol instance, timing client phases and the server span separately."""
    dataset = list(dataset)
    ell = len(dataset)
    if ell == 0:
        raise ProtocolError("empty dataset")
    harness = harness or SimHarness()
    rng = rng or random.Random()
    timer = RoleTimer(harness.clock, iteration)

    if cfg.protocol is Protocol.HE:
        if keys is None:
            keys = he.keygen(cfg.key_bits, rng)
        pk, sk = keys
        if cfg.mode is Mode.EXACT and sum(dataset) >= pk.n:
            raise ProtocolError("dataset sum overflows the plaintext space")
        cts = timer.time(CLIENT, lambda: he_client_prepare(dataset, pk, rng), "prepare")
        parties = harness.spawn(1, _he_server, [{"cts": cts, "ell": ell, "pk": pk, "mode": cfg.mode}])
        (c,) = timer.time(SERVER, lambda: harness.run(parties), "compute")
        value = timer.time(CLIENT, lambda: he_client_finish(sk, c, ell, cfg.mode), "finish")
    else:
        k, q = cfg.parties, cfg.q
        if cfg.mode is Mode.EXACT and sum(dataset) >= q:
            raise ProtocolError("dataset sum overflows the share modulus")
        if any(not 0 <= x < q for x in dataset):
            raise ProtocolError("dataset value outside [0, q)")

        def prepare():
            bundle = mpc_client_prepare(dataset, k, q, rng, cfg.mode)
            states = mpc_party_states(bundle, q, cfg.mode)
            for st in states:
                st["k"] = k
            return states

        states = timer.time(CLIENT, prepare, "prepare")
        parties = harness.spawn(k, mpc_server_party, states)
        z = timer.time(SERVER, lambda: harness.run(parties), "compute")
        value = timer.time(CLIENT, lambda: mpc_client_finish(ss.ShareSet(tuple(z), q), ell, cfg.mode), "finish")

    timer.sample.value = value
    timer.sample.party_ms = dict(harness.party_ms)
    return MeanResult(value, timer.sample)


def plaintext_floor_mean(dataset: Sequence[int]) -> int:
    return sum(dataset) // len(dataset)
