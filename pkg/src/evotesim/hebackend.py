"""Threshold additively homomorphic Paillier encryption.

A trusted dealer generates the modulus, fixes the decryption exponent d with
d = 0 mod lambda(n) and d = 1 mod n, and Shamir-shares d over the secret
modulus n*lambda(n) with a degree-(t-1) polynomial. Tally participants raise a
ciphertext to 2*delta*s_i (delta = N!); any t such partial values recombine
via integer Lagrange coefficients scaled by delta, which keeps all share
arithmetic inverse-free modulo the secret modulus.

The message-space generator is fixed at g = n+1, so (1+n)^m = 1 + m*n mod n^2
and the final discrete log is the exact map L(u) = (u-1)/n.

Randomness: every operation that needs it takes an explicit DeterministicRng;
there is no ambient entropy anywhere in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import gmpy2

from .encoding import Reader, int_to_fixed, u16
from .errors import (
    BadRandomizer,
    CombinationFailure,
    DuplicateShareIndex,
    InsufficientShares,
    InvalidThreshold,
    MalformedPayload,
    PlaintextOutOfRange,
    PrimeGenerationFailure,
)
from .rng import DeterministicRng

MAX_SHARES = 64
MIN_KEY_BITS = 256
_PRIME_RETRY_BUDGET = 2_000_000

# Product of the odd primes below 10^4; one gcd against it rejects most
# composite candidates before a full primality test.
_SMALL_PRIME_PRODUCT = int(
    math.prod(p for p in range(3, 10_000) if gmpy2.is_prime(p))
)


@dataclass(frozen=True)
class PaillierPublicKey:
    """Modulus n with the fixed generator g = n+1."""

    n: int
    bits: int

    def __post_init__(self):
        if self.n.bit_length() != self.bits:
            raise ValueError("modulus bit length disagrees with declared bits")

    @property
    def g(self) -> int:
        return self.n + 1

    @property
    def n_squared(self) -> int:
        return self.n * self.n

    @property
    def modulus_width(self) -> int:
        """Serialized width of values mod n, in bytes."""
        return (self.bits + 7) // 8

    @property
    def element_width(self) -> int:
        """Serialized width of values mod n^2, in bytes."""
        return 2 * self.modulus_width

    def to_bytes(self) -> bytes:
        return u16(self.bits) + int_to_fixed(self.n, self.modulus_width)

    @classmethod
    def from_bytes(cls, data: bytes) -> "PaillierPublicKey":
        r = Reader(data)
        bits = r.take_u16()
        n = r.take_int((bits + 7) // 8)
        r.expect_end()
        return cls(n=n, bits=bits)


@dataclass(frozen=True)
class FullSecretKey:
    """Undivided key. Test oracle only; never consulted on validation paths."""

    p: int
    q: int
    lam: int
    mu: int  # lambda^-1 mod n


@dataclass(frozen=True)
class KeyShare:
    """One participant's Shamir share of the decryption exponent."""

    index: int
    s_i: int
    verification_value: int  # v^(delta * s_i) mod n^2

    def to_bytes(self, pk: PaillierPublicKey) -> bytes:
        return u16(self.index) + int_to_fixed(self.s_i, pk.element_width)


@dataclass(frozen=True)
class ThresholdParams:
    """Public threshold material: (t, N), verifier base v, and the v_i list."""

    t: int
    big_n: int
    v: int
    share_verification: tuple[int, ...]

    @property
    def delta(self) -> int:
        return math.factorial(self.big_n)

    def verification_value(self, index: int) -> int:
        if not 1 <= index <= self.big_n:
            raise ValueError(f"share index {index} outside [1, {self.big_n}]")
        return self.share_verification[index - 1]

    def to_bytes(self, pk: PaillierPublicKey) -> bytes:
        w = pk.element_width
        body = u16(self.t) + u16(self.big_n) + int_to_fixed(self.v, w)
        for v_i in self.share_verification:
            body += int_to_fixed(v_i, w)
        return body

    @classmethod
    def from_bytes(cls, data: bytes, pk: PaillierPublicKey) -> "ThresholdParams":
        w = pk.element_width
        r = Reader(data)
        t = r.take_u16()
        big_n = r.take_u16()
        if not 1 <= t <= big_n <= MAX_SHARES:
            raise MalformedPayload("threshold parameters out of range")
        v = r.take_int(w)
        shares = tuple(r.take_int(w) for _ in range(big_n))
        r.expect_end()
        return cls(t=t, big_n=big_n, v=v, share_verification=shares)


@dataclass(frozen=True)
class Ciphertext:
    """Element of Z*_{n^2}."""

    value: int

    def to_bytes(self, pk: PaillierPublicKey) -> bytes:
        return int_to_fixed(self.value, pk.element_width)

    @classmethod
    def from_bytes(cls, data: bytes, pk: PaillierPublicKey) -> "Ciphertext":
        if len(data) != pk.element_width:
            raise MalformedPayload(
                f"ciphertext must be {pk.element_width} bytes, got {len(data)}"
            )
        value = int.from_bytes(data, "big")
        if not 0 < value < pk.n_squared or math.gcd(value, pk.n) != 1:
            raise MalformedPayload("ciphertext not a unit mod n^2")
        return cls(value=value)


@dataclass(frozen=True)
class PartialDecryption:
    """sigma_i = C^(2 * delta * s_i) mod n^2."""

    index: int
    sigma: int

    def to_bytes(self, pk: PaillierPublicKey) -> bytes:
        return u16(self.index) + int_to_fixed(self.sigma, pk.element_width)


class KeyMaterial(NamedTuple):
    pk: PaillierPublicKey
    shares: list[KeyShare]
    params: ThresholdParams
    sk: FullSecretKey


def _candidate_ok(x: int) -> bool:
    return math.gcd(x, _SMALL_PRIME_PRODUCT) == 1


def _random_prime(bits: int, rng: DeterministicRng, safe: bool) -> int:
    """Prime with the top two bits set; safe prime (p = 2q+1) when asked."""
    budget = _PRIME_RETRY_BUDGET
    top = 3 << (bits - 2)
    if safe:
        sub_top = 3 << (bits - 3)
        while budget > 0:
            budget -= 1
            q = rng.getrandbits(bits - 1) | sub_top | 1
            p = 2 * q + 1
            if not (_candidate_ok(q) and _candidate_ok(p)):
                continue
            if gmpy2.is_prime(q, 25) and gmpy2.is_prime(p, 25):
                return p
    else:
        while budget > 0:
            budget -= 1
            p = rng.getrandbits(bits) | top | 1
            if _candidate_ok(p) and gmpy2.is_prime(p, 25):
                return p
    raise PrimeGenerationFailure(f"no {bits}-bit prime after retry budget")


def keygen(bits: int, t: int, big_n: int, seed) -> KeyMaterial:
    """Dealer keygen: modulus, shared decryption exponent, verification values.

    bits >= 256 and even; toy mode (bits < 1024) uses ordinary random primes,
    production mode uses safe primes. seed may be a DeterministicRng or any
    seed material accepted by one.
    """
    if bits < MIN_KEY_BITS or bits % 2:
        raise ValueError(
            f"modulus size must be even and at least {MIN_KEY_BITS} bits"
        )
    if not 1 <= t <= big_n <= MAX_SHARES:
        raise InvalidThreshold(f"need 1 <= t <= N <= {MAX_SHARES}, got t={t} N={big_n}")
    rng = seed if isinstance(seed, DeterministicRng) else DeterministicRng(seed)
    safe = bits >= 1024
    half = bits // 2
    p = _random_prime(half, rng, safe)
    while True:
        q = _random_prime(half, rng, safe)
        if q != p:
            break
    return _assemble(p, q, t, big_n, rng)


def from_primes(p: int, q: int, t: int, big_n: int, seed) -> KeyMaterial:
    """Key material from caller-supplied primes; for tests and toy examples."""
    if not 1 <= t <= big_n <= MAX_SHARES:
        raise InvalidThreshold(f"need 1 <= t <= N <= {MAX_SHARES}, got t={t} N={big_n}")
    rng = seed if isinstance(seed, DeterministicRng) else DeterministicRng(seed)
    return _assemble(p, q, t, big_n, rng)


def _assemble(p: int, q: int, t: int, big_n: int, rng: DeterministicRng) -> KeyMaterial:
    if p == q or not (gmpy2.is_prime(p) and gmpy2.is_prime(q)):
        raise ValueError("modulus factors must be distinct primes")
    n = p * q
    nsq = n * n
    lam = math.lcm(p - 1, q - 1)
    if math.gcd(n, lam) != 1:
        raise ValueError("gcd(n, lambda) != 1; pick different primes")
    pk = PaillierPublicKey(n=n, bits=n.bit_length())
    sk = FullSecretKey(p=p, q=q, lam=lam, mu=int(gmpy2.invert(lam, n)))

    # d = 0 mod lambda and d = 1 mod n makes c^(4*delta^2*d) land on
    # 1 + (4*delta^2*m)n regardless of the ciphertext randomizer.
    d = lam * int(gmpy2.invert(lam, n))
    share_modulus = n * lam
    coeffs = [d] + [rng.randrange(share_modulus) for _ in range(t - 1)]

    def poly(x: int) -> int:
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * x + c) % share_modulus
        return acc

    s_values = [poly(i) for i in range(1, big_n + 1)]

    # v generates (w.h.p.) the squares of Z*_{n^2}; squaring keeps the share
    # proofs inside a group of known-odd order.
    while True:
        x = rng.randrange(1, nsq)
        if math.gcd(x, n) == 1:
            break
    v = int(gmpy2.powmod(x, 2, nsq))

    delta = math.factorial(big_n)
    v_list = [int(gmpy2.powmod(v, delta * s_i, nsq)) for s_i in s_values]
    shares = [
        KeyShare(index=i + 1, s_i=s_values[i], verification_value=v_list[i])
        for i in range(big_n)
    ]
    params = ThresholdParams(
        t=t, big_n=big_n, v=v, share_verification=tuple(v_list)
    )
    return KeyMaterial(pk=pk, shares=shares, params=params, sk=sk)


def draw_randomizer(pk: PaillierPublicKey, rng: DeterministicRng) -> int:
    while True:
        r = rng.randrange(1, pk.n)
        if math.gcd(r, pk.n) == 1:
            return r


def encrypt(
    pk: PaillierPublicKey,
    m: int,
    r: int | None = None,
    *,
    rng: DeterministicRng | None = None,
) -> Ciphertext:
    """c = g^m * r^n mod n^2. Callers keeping r as a proof witness pass it in."""
    if not 0 <= m < pk.n:
        raise PlaintextOutOfRange(f"plaintext must lie in [0, n), got {m}")
    if r is None:
        if rng is None:
            raise ValueError("encrypt needs either an explicit r or an rng")
        r = draw_randomizer(pk, rng)
    if not 0 < r < pk.n or math.gcd(r, pk.n) != 1:
        raise BadRandomizer("randomizer must be a unit in [1, n)")
    nsq = pk.n_squared
    value = (1 + m * pk.n) % nsq * gmpy2.powmod(r, pk.n, nsq) % nsq
    return Ciphertext(value=int(value))


def add(pk: PaillierPublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return Ciphertext(value=a.value * b.value % pk.n_squared)


def partial_decrypt(
    share: KeyShare, params: ThresholdParams, pk: PaillierPublicKey, c: Ciphertext
) -> PartialDecryption:
    sigma = gmpy2.powmod(c.value, 2 * params.delta * share.s_i, pk.n_squared)
    return PartialDecryption(index=share.index, sigma=int(sigma))


def lagrange_at_zero(indices: list[int], delta: int) -> dict[int, int]:
    """mu_i = delta * prod_{j != i} j / (j - i), exact integers by Shoup's lemma."""
    mus: dict[int, int] = {}
    for i in indices:
        acc = Fraction(delta)
        for j in indices:
            if j != i:
                acc *= Fraction(j, j - i)
        if acc.denominator != 1:
            raise ArithmeticError("delta-scaled Lagrange coefficient not integral")
        mus[i] = acc.numerator
    return mus


def combine(
    pk: PaillierPublicKey,
    params: ThresholdParams,
    partials: list[PartialDecryption],
) -> int:
    """Recover the plaintext from >= t partial decryptions of one ciphertext."""
    indices = [p.index for p in partials]
    if len(set(indices)) != len(indices):
        raise DuplicateShareIndex(f"duplicate indices in {sorted(indices)}")
    if len(partials) < params.t:
        raise InsufficientShares(
            f"have {len(partials)} partial decryptions, threshold is {params.t}"
        )
    if not all(1 <= i <= params.big_n for i in indices):
        raise ValueError("share index outside [1, N]")
    nsq = pk.n_squared
    mus = lagrange_at_zero(indices, params.delta)
    u = gmpy2.mpz(1)
    for part in partials:
        u = u * gmpy2.powmod(part.sigma, 2 * mus[part.index], nsq) % nsq
    u = int(u)
    if (u - 1) % pk.n != 0:
        raise CombinationFailure("combined value is not 1 + m*n; corrupted share?")
    l_u = (u - 1) // pk.n
    norm = int(gmpy2.invert(4 * params.delta * params.delta, pk.n))
    return l_u * norm % pk.n


def decrypt_direct(sk: FullSecretKey, pk: PaillierPublicKey, c: Ciphertext) -> int:
    """Textbook decryption with the undivided key. Test oracle only."""
    u = int(gmpy2.powmod(c.value, sk.lam, pk.n_squared))
    if (u - 1) % pk.n != 0:
        raise CombinationFailure("value is not a valid ciphertext")
    return (u - 1) // pk.n * sk.mu % pk.n
