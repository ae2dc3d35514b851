"""Sigma-protocol proofs and the vote statement.

Three proof systems live here:

  * EncValidityProof: a 1-out-of-2 OR composition proving a Paillier
    ciphertext encrypts 0 or 1, via knowledge of an n-th root of c*g^(-v).
  * ShareCorrectnessProof: a Chaum-Pedersen equality-of-exponent proof tying a
    partial decryption to its published verification value.
  * VoteProof: the full ballot statement (membership, nullifier derivation,
    encryption validity) behind a pluggable backend. The `transparent` backend
    ships the witness itself and re-checks it; it is NOT zero-knowledge and is
    for simulation and audit only. A `snark` backend can be registered
    externally against the frozen statement serialization.

All proofs are non-interactive through a SHA-256 transcript with per-kind
domain tags; challenges are 128 bits.

Verification convention: verify_* functions return None on acceptance or a
short reason string on rejection. They never raise on hostile input, so a
replica can validate untrusted transactions without try/except at every call
site. Proving functions do raise (WitnessMismatch, BackendUnavailable): a
local caller with a bad witness is a programming error, not an attack.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import gmpy2

from . import hebackend
from .encoding import Reader, int_to_fixed, lp, u8, u16, u32
from .errors import BackendUnavailable, MalformedPayload, WitnessMismatch
from .hashing import commitment, nullifier, sha256
from .merkle import PathStep, fold_path
from .rng import DeterministicRng

CHALLENGE_BITS = 128
CHALLENGE_BYTES = CHALLENGE_BITS // 8
_CHALLENGE_MOD = 1 << CHALLENGE_BITS

DOMAIN_ENC_VALIDITY = b"enc-validity-v1"
DOMAIN_SHARE_CORRECTNESS = b"share-correctness-v1"
DOMAIN_VOTE_STATEMENT = b"vote-statement-v1"
DOMAIN_VOTE_BATCH = b"vote-batch-v1"

# ShareCorrectnessProof nonce width: |n^2| + 255 bits leaves a >= 2^-127
# statistical hiding margin over e*s_i and still fits element_width+32 bytes.
_SHARE_NONCE_SLACK = 255

MAX_MERKLE_DEPTH = 64


class Transcript:
    """Fiat-Shamir transcript: running SHA-256 over length-prefixed fields."""

    def __init__(self, domain: bytes):
        self._h = hashlib.sha256()
        self._h.update(b"transcript-v1")
        self._h.update(u32(len(domain)))
        self._h.update(domain)

    def absorb(self, label: bytes, data: bytes) -> None:
        self._h.update(u32(len(label)))
        self._h.update(label)
        self._h.update(u32(len(data)))
        self._h.update(data)

    def challenge(self, label: bytes) -> int:
        """128-bit challenge; a pure function of everything absorbed so far."""
        h = self._h.copy()
        h.update(b"challenge")
        h.update(u32(len(label)))
        h.update(label)
        return int.from_bytes(h.digest()[:CHALLENGE_BYTES], "big")


# ---------------------------------------------------------------------------
# Encryption 0/1 validity (OR proof of an n-th root)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EncValidityProof:
    """Branch b proves knowledge of an n-th root of u_b = c * g^(-b)."""

    a0: int
    a1: int
    e0: int
    e1: int
    z0: int
    z1: int

    def to_bytes(self, pk: hebackend.PaillierPublicKey) -> bytes:
        ew, mw = pk.element_width, pk.modulus_width
        return (
            int_to_fixed(self.a0, ew)
            + int_to_fixed(self.a1, ew)
            + int_to_fixed(self.e0, CHALLENGE_BYTES)
            + int_to_fixed(self.e1, CHALLENGE_BYTES)
            + int_to_fixed(self.z0, mw)
            + int_to_fixed(self.z1, mw)
        )

    @classmethod
    def wire_length(cls, pk: hebackend.PaillierPublicKey) -> int:
        return 2 * pk.element_width + 2 * CHALLENGE_BYTES + 2 * pk.modulus_width

    @classmethod
    def read_from(cls, r: Reader, pk: hebackend.PaillierPublicKey) -> "EncValidityProof":
        ew, mw = pk.element_width, pk.modulus_width
        return cls(
            a0=r.take_int(ew),
            a1=r.take_int(ew),
            e0=r.take_int(CHALLENGE_BYTES),
            e1=r.take_int(CHALLENGE_BYTES),
            z0=r.take_int(mw),
            z1=r.take_int(mw),
        )

    @classmethod
    def from_bytes(cls, data: bytes, pk: hebackend.PaillierPublicKey) -> "EncValidityProof":
        r = Reader(data)
        proof = cls.read_from(r, pk)
        r.expect_end()
        return proof


def _branch_targets(pk: hebackend.PaillierPublicKey, c: hebackend.Ciphertext):
    """u_0 = c, u_1 = c * g^(-1); honest branch v has u_v = r^n, an n-th power."""
    nsq = pk.n_squared
    g_inv = (1 - pk.n) % nsq
    return c.value % nsq, c.value * g_inv % nsq


def _enc_challenge(
    pk: hebackend.PaillierPublicKey, c: hebackend.Ciphertext, a0: int, a1: int
) -> int:
    ts = Transcript(DOMAIN_ENC_VALIDITY)
    ts.absorb(b"pk", pk.to_bytes())
    ts.absorb(b"ciphertext", c.to_bytes(pk))
    ts.absorb(b"a0", int_to_fixed(a0, pk.element_width))
    ts.absorb(b"a1", int_to_fixed(a1, pk.element_width))
    return ts.challenge(b"e")


def prove_enc_validity(
    pk: hebackend.PaillierPublicKey,
    c: hebackend.Ciphertext,
    v: int,
    r: int,
    rng: DeterministicRng,
) -> EncValidityProof:
    if v not in (0, 1):
        raise WitnessMismatch(f"choice {v} outside {{0, 1}}")
    if hebackend.encrypt(pk, v, r) != c:
        raise WitnessMismatch("ciphertext does not re-encrypt from (v, r)")
    nsq = pk.n_squared
    targets = _branch_targets(pk, c)

    # Simulate the branch we cannot open: pick (z, e) and solve for a.
    sim = 1 - v
    z_sim = hebackend.draw_randomizer(pk, rng)
    e_sim = rng.getrandbits(CHALLENGE_BITS)
    a_sim = int(
        gmpy2.powmod(z_sim, pk.n, nsq)
        * gmpy2.powmod(targets[sim], -e_sim, nsq)
        % nsq
    )

    s = hebackend.draw_randomizer(pk, rng)
    a_real = int(gmpy2.powmod(s, pk.n, nsq))

    a = [0, 0]
    a[v], a[sim] = a_real, a_sim
    e_total = _enc_challenge(pk, c, a[0], a[1])
    e_real = (e_total - e_sim) % _CHALLENGE_MOD
    z_real = s * int(gmpy2.powmod(r, e_real, pk.n)) % pk.n

    e = [0, 0]
    z = [0, 0]
    e[v], e[sim] = e_real, e_sim
    z[v], z[sim] = z_real, z_sim
    return EncValidityProof(a0=a[0], a1=a[1], e0=e[0], e1=e[1], z0=z[0], z1=z[1])


def verify_enc_validity(
    pk: hebackend.PaillierPublicKey,
    c: hebackend.Ciphertext,
    proof: EncValidityProof,
) -> str | None:
    nsq = pk.n_squared
    targets = _branch_targets(pk, c)
    branches = ((proof.a0, proof.e0, proof.z0), (proof.a1, proof.e1, proof.z1))
    for b, (a_b, e_b, z_b) in enumerate(branches):
        if not 0 < a_b < nsq or math.gcd(a_b, pk.n) != 1:
            return f"branch {b}: commitment not a unit"
        if not 0 <= e_b < _CHALLENGE_MOD:
            return f"branch {b}: challenge out of range"
        if not 0 < z_b < pk.n or math.gcd(z_b, pk.n) != 1:
            return f"branch {b}: response not a unit"
    if (proof.e0 + proof.e1) % _CHALLENGE_MOD != _enc_challenge(
        pk, c, proof.a0, proof.a1
    ):
        return "challenge does not bind the transcript"
    for b, (a_b, e_b, z_b) in enumerate(branches):
        lhs = gmpy2.powmod(z_b, pk.n, nsq)
        rhs = a_b * gmpy2.powmod(targets[b], e_b, nsq) % nsq
        if lhs != rhs:
            return f"branch {b}: verification equation fails"
    return None


# ---------------------------------------------------------------------------
# Partial-decryption correctness (Chaum-Pedersen)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShareCorrectnessProof:
    """Equality of exponent s_i across bases v^delta and c_sum^(4*delta):
    v_i = (v^delta)^(s_i) and sigma^2 = (c_sum^(4*delta))^(s_i)."""

    a1: int
    a2: int
    e: int
    z: int

    def to_bytes(self, pk: hebackend.PaillierPublicKey) -> bytes:
        ew = pk.element_width
        return (
            int_to_fixed(self.a1, ew)
            + int_to_fixed(self.a2, ew)
            + int_to_fixed(self.e, CHALLENGE_BYTES)
            + int_to_fixed(self.z, ew + 32)
        )

    @classmethod
    def wire_length(cls, pk: hebackend.PaillierPublicKey) -> int:
        return 3 * pk.element_width + CHALLENGE_BYTES + 32

    @classmethod
    def read_from(cls, r: Reader, pk: hebackend.PaillierPublicKey) -> "ShareCorrectnessProof":
        ew = pk.element_width
        return cls(
            a1=r.take_int(ew),
            a2=r.take_int(ew),
            e=r.take_int(CHALLENGE_BYTES),
            z=r.take_int(ew + 32),
        )

    @classmethod
    def from_bytes(cls, data: bytes, pk: hebackend.PaillierPublicKey) -> "ShareCorrectnessProof":
        r = Reader(data)
        proof = cls.read_from(r, pk)
        r.expect_end()
        return proof


def _share_bases(
    params: hebackend.ThresholdParams,
    pk: hebackend.PaillierPublicKey,
    c_sum: hebackend.Ciphertext,
):
    nsq = pk.n_squared
    base_v = gmpy2.powmod(params.v, params.delta, nsq)
    base_c = gmpy2.powmod(c_sum.value, 4 * params.delta, nsq)
    return base_v, base_c


def _share_challenge(
    params: hebackend.ThresholdParams,
    pk: hebackend.PaillierPublicKey,
    c_sum: hebackend.Ciphertext,
    partial: hebackend.PartialDecryption,
    a1: int,
    a2: int,
) -> int:
    ew = pk.element_width
    ts = Transcript(DOMAIN_SHARE_CORRECTNESS)
    ts.absorb(b"pk", pk.to_bytes())
    ts.absorb(b"params", params.to_bytes(pk))
    ts.absorb(b"index", u16(partial.index))
    ts.absorb(b"c_sum", c_sum.to_bytes(pk))
    ts.absorb(b"sigma", int_to_fixed(partial.sigma, ew))
    ts.absorb(b"a1", int_to_fixed(a1, ew))
    ts.absorb(b"a2", int_to_fixed(a2, ew))
    return ts.challenge(b"e")


def prove_share(
    share: hebackend.KeyShare,
    params: hebackend.ThresholdParams,
    pk: hebackend.PaillierPublicKey,
    c_sum: hebackend.Ciphertext,
    partial: hebackend.PartialDecryption,
    rng: DeterministicRng,
) -> ShareCorrectnessProof:
    if partial.index != share.index:
        raise WitnessMismatch("partial decryption index does not match share")
    if hebackend.partial_decrypt(share, params, pk, c_sum) != partial:
        raise WitnessMismatch("sigma was not computed from this share and c_sum")
    nsq = pk.n_squared
    base_v, base_c = _share_bases(params, pk, c_sum)
    w = rng.randrange(1 << (2 * pk.bits + _SHARE_NONCE_SLACK))
    a1 = int(gmpy2.powmod(base_v, w, nsq))
    a2 = int(gmpy2.powmod(base_c, w, nsq))
    e = _share_challenge(params, pk, c_sum, partial, a1, a2)
    z = w + e * share.s_i
    return ShareCorrectnessProof(a1=a1, a2=a2, e=e, z=z)


def verify_share(
    params: hebackend.ThresholdParams,
    pk: hebackend.PaillierPublicKey,
    c_sum: hebackend.Ciphertext,
    partial: hebackend.PartialDecryption,
    proof: ShareCorrectnessProof,
) -> str | None:
    nsq = pk.n_squared
    if not 1 <= partial.index <= params.big_n:
        return "share index out of range"
    if not 0 < partial.sigma < nsq or math.gcd(partial.sigma, pk.n) != 1:
        return "sigma not a unit"
    for name, a in (("a1", proof.a1), ("a2", proof.a2)):
        if not 0 < a < nsq or math.gcd(a, pk.n) != 1:
            return f"{name} not a unit"
    if not 0 <= proof.e < _CHALLENGE_MOD:
        return "challenge out of range"
    if not 0 <= proof.z < 1 << (8 * (pk.element_width + 32)):
        return "response out of range"
    if proof.e != _share_challenge(params, pk, c_sum, partial, proof.a1, proof.a2):
        return "challenge does not bind the transcript"
    v_i = params.verification_value(partial.index)
    sigma_sq = partial.sigma * partial.sigma % nsq
    base_v, base_c = _share_bases(params, pk, c_sum)
    if gmpy2.powmod(base_v, proof.z, nsq) != proof.a1 * gmpy2.powmod(
        v_i, proof.e, nsq
    ) % nsq:
        return "verification-value equation fails"
    if gmpy2.powmod(base_c, proof.z, nsq) != proof.a2 * gmpy2.powmod(
        sigma_sq, proof.e, nsq
    ) % nsq:
        return "sigma equation fails"
    return None


# ---------------------------------------------------------------------------
# The vote statement and its backends
# ---------------------------------------------------------------------------

TRANSPARENT = "transparent"
SNARK = "snark"
_BACKEND_TAGS = {TRANSPARENT: 1, SNARK: 2}
_BACKEND_NAMES = {tag: name for name, tag in _BACKEND_TAGS.items()}

# External snark prover/verifier hooks; unset by default.
_snark_backend: tuple | None = None


def register_snark_backend(prove, verify) -> None:
    """Attach an external prover/verifier pair for the frozen vote statement."""
    global _snark_backend
    _snark_backend = (prove, verify)


@dataclass(frozen=True)
class VoteStatement:
    """Public inputs of the ballot-validity statement."""

    election_id: bytes
    merkle_root: bytes
    nullifier: bytes
    ciphertext: hebackend.Ciphertext
    pk: hebackend.PaillierPublicKey

    def to_bytes(self) -> bytes:
        """Frozen serialization; an external backend binds to exactly this."""
        return (
            self.election_id
            + self.merkle_root
            + self.nullifier
            + self.ciphertext.to_bytes(self.pk)
            + int_to_fixed(self.pk.n, self.pk.modulus_width)
        )

    def digest(self) -> bytes:
        return sha256(DOMAIN_VOTE_STATEMENT, self.to_bytes())


@dataclass(frozen=True)
class VoteWitness:
    secret_id: bytes
    v: int
    r: int
    merkle_path: tuple[PathStep, ...]

    def to_bytes(self, pk: hebackend.PaillierPublicKey) -> bytes:
        body = self.secret_id + u8(self.v) + int_to_fixed(self.r, pk.modulus_width)
        body += u16(len(self.merkle_path))
        for sibling, side in self.merkle_path:
            body += sibling + u8(side)
        return body

    @classmethod
    def read_from(cls, r: Reader, pk: hebackend.PaillierPublicKey) -> "VoteWitness":
        secret_id = r.take(32)
        # v is parsed permissively so an out-of-range choice is rejected by
        # constraint C3, which names the violation, not by the parser.
        v = r.take_u8()
        randomizer = r.take_int(pk.modulus_width)
        depth = r.take_u16()
        if depth > MAX_MERKLE_DEPTH:
            raise MalformedPayload(f"merkle path depth {depth} over limit")
        path = []
        for _ in range(depth):
            sibling = r.take(32)
            side = r.take_u8()
            if side not in (0, 1):
                raise MalformedPayload("merkle path side byte must be 0 or 1")
            path.append((sibling, side))
        return cls(secret_id=secret_id, v=v, r=randomizer, merkle_path=tuple(path))


SATISFIED = None

C1_MEMBERSHIP = "C1"
C2_NULLIFIER = "C2"
C3_ENCRYPTION = "C3"


def check_witness(stmt: VoteStatement, w: VoteWitness) -> str | None:
    """Evaluate the ballot constraints in order; return the first violated id.

    C1: cm = H(dom_cm || secret_id) is a member of stmt.merkle_root.
    C2: stmt.nullifier derives from (secret_id, election_id).
    C3: stmt.ciphertext re-encrypts from (v, r) and v is in {0, 1}.
    """
    cm = commitment(w.secret_id)
    if fold_path(cm, list(w.merkle_path)) != stmt.merkle_root:
        return C1_MEMBERSHIP
    if nullifier(w.secret_id, stmt.election_id) != stmt.nullifier:
        return C2_NULLIFIER
    if w.v not in (0, 1):
        return C3_ENCRYPTION
    try:
        reencrypted = hebackend.encrypt(stmt.pk, w.v, w.r)
    except Exception:
        return C3_ENCRYPTION
    if reencrypted != stmt.ciphertext:
        return C3_ENCRYPTION
    return SATISFIED


@dataclass(frozen=True)
class VoteProof:
    backend: str
    payload: bytes

    def to_bytes(self) -> bytes:
        return u8(_BACKEND_TAGS[self.backend]) + lp(self.payload)

    @classmethod
    def read_from(cls, r: Reader) -> "VoteProof":
        tag = r.take_u8()
        if tag not in _BACKEND_NAMES:
            raise MalformedPayload(f"unknown vote-proof backend tag {tag}")
        return cls(backend=_BACKEND_NAMES[tag], payload=r.take_lp())

    @classmethod
    def from_bytes(cls, data: bytes) -> "VoteProof":
        r = Reader(data)
        proof = cls.read_from(r)
        r.expect_end()
        return proof


def prove_vote(
    backend: str,
    stmt: VoteStatement,
    w: VoteWitness,
    rng: DeterministicRng,
) -> VoteProof:
    if backend == TRANSPARENT:
        violated = check_witness(stmt, w)
        if violated is not SATISFIED:
            raise WitnessMismatch(f"witness violates constraint {violated}")
        enc_proof = prove_enc_validity(stmt.pk, stmt.ciphertext, w.v, w.r, rng)
        payload = w.to_bytes(stmt.pk) + enc_proof.to_bytes(stmt.pk)
        return VoteProof(backend=TRANSPARENT, payload=payload)
    if backend == SNARK:
        if _snark_backend is None:
            raise BackendUnavailable("no snark prover registered")
        return VoteProof(backend=SNARK, payload=_snark_backend[0](stmt, w))
    raise BackendUnavailable(f"unknown backend {backend!r}")


def verify_vote(backend: str, stmt: VoteStatement, proof: VoteProof) -> str | None:
    if proof.backend != backend:
        return f"proof backend {proof.backend!r} does not match election backend"
    if backend == TRANSPARENT:
        try:
            r = Reader(proof.payload)
            w = VoteWitness.read_from(r, stmt.pk)
            enc_proof = EncValidityProof.read_from(r, stmt.pk)
            r.expect_end()
        except MalformedPayload as exc:
            return f"malformed payload: {exc}"
        return _verify_transparent(stmt, proof.payload, w, enc_proof)
    if backend == SNARK:
        if _snark_backend is None:
            return "snark backend unavailable"
        return _snark_backend[1](stmt, proof.payload)
    return f"unknown backend {backend!r}"


def verify_vote_unbatched(stmt: VoteStatement, proof: VoteProof) -> str | None:
    """Literal composition check_witness + verify_enc_validity.

    Reference semantics for the transparent backend: verify_vote must accept
    exactly what this accepts (up to the 2^-128 batching soundness slack).
    Slower than verify_vote by two full-width exponentiations.
    """
    try:
        r = Reader(proof.payload)
        w = VoteWitness.read_from(r, stmt.pk)
        enc_proof = EncValidityProof.read_from(r, stmt.pk)
        r.expect_end()
    except MalformedPayload as exc:
        return f"malformed payload: {exc}"
    violated = check_witness(stmt, w)
    if violated is not SATISFIED:
        return f"constraint {violated} violated"
    reason = verify_enc_validity(stmt.pk, stmt.ciphertext, enc_proof)
    if reason is not None:
        return f"encryption validity: {reason}"
    return None


def _verify_transparent(
    stmt: VoteStatement,
    payload: bytes,
    w: VoteWitness,
    enc_proof: EncValidityProof,
) -> str | None:
    """Transparent-backend verification with batched exponentiation.

    The three n-th-power relations (both OR branches plus the witness
    re-encryption c = g^v * r^n) are checked as one product raised to random
    128-bit coefficients derived from the statement and payload. A proof
    violating any single relation survives with probability ~2^-128, the same
    soundness level as the sigma-protocol challenges. This turns three
    full-width exponentiations into one, which is what keeps per-transaction
    validation fast enough for peers to keep up with gossip.
    """
    pk = stmt.pk
    nsq = pk.n_squared

    # Hash constraints C1 and C2, and the cheap range legs of C3.
    cm = commitment(w.secret_id)
    if fold_path(cm, list(w.merkle_path)) != stmt.merkle_root:
        return f"constraint {C1_MEMBERSHIP} violated"
    if nullifier(w.secret_id, stmt.election_id) != stmt.nullifier:
        return f"constraint {C2_NULLIFIER} violated"
    if w.v not in (0, 1):
        return f"constraint {C3_ENCRYPTION} violated"
    if not 0 < w.r < pk.n or math.gcd(w.r, pk.n) != 1:
        return f"constraint {C3_ENCRYPTION} violated"

    # Structural checks on the embedded OR proof.
    branches = (
        (enc_proof.a0, enc_proof.e0, enc_proof.z0),
        (enc_proof.a1, enc_proof.e1, enc_proof.z1),
    )
    for b, (a_b, e_b, z_b) in enumerate(branches):
        if not 0 < a_b < nsq or math.gcd(a_b, pk.n) != 1:
            return f"encryption validity: branch {b} commitment not a unit"
        if not 0 <= e_b < _CHALLENGE_MOD:
            return f"encryption validity: branch {b} challenge out of range"
        if not 0 < z_b < pk.n or math.gcd(z_b, pk.n) != 1:
            return f"encryption validity: branch {b} response not a unit"
    if (enc_proof.e0 + enc_proof.e1) % _CHALLENGE_MOD != _enc_challenge(
        pk, stmt.ciphertext, enc_proof.a0, enc_proof.a1
    ):
        return "encryption validity: challenge does not bind the transcript"

    # Batch coefficients are fixed only once the whole payload is fixed.
    ts = Transcript(DOMAIN_VOTE_BATCH)
    ts.absorb(b"statement", stmt.to_bytes())
    ts.absorb(b"payload", payload)
    rho1 = ts.challenge(b"rho1")
    rho2 = ts.challenge(b"rho2")

    u0, u1 = _branch_targets(pk, stmt.ciphertext)
    u_v = (u0, u1)[w.v]

    # (z0 * z1^rho1 * r^rho2)^n == a0*u0^e0 * (a1*u1^e1)^rho1 * u_v^rho2
    base = (
        enc_proof.z0
        * gmpy2.powmod(enc_proof.z1, rho1, pk.n)
        % pk.n
        * gmpy2.powmod(w.r, rho2, pk.n)
        % pk.n
    )
    lhs = gmpy2.powmod(base, pk.n, nsq)
    rhs = enc_proof.a0 * gmpy2.powmod(u0, enc_proof.e0, nsq) % nsq
    rhs = rhs * gmpy2.powmod(enc_proof.a1, rho1, nsq) % nsq
    rhs = rhs * gmpy2.powmod(u1, enc_proof.e1 * rho1, nsq) % nsq
    rhs = rhs * gmpy2.powmod(u_v, rho2, nsq) % nsq
    if lhs != rhs:
        return "ballot equations fail (batched check)"
    return None
