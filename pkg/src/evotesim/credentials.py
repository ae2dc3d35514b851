"""Eligibility credentials, the registrar, and selective-disclosure voting
credentials.

An Identity Provider (simulated) signs EligibilityVC documents over a person
identifier. The registrar verifies them against its trusted-issuer set, en-
forces one registration per person per election through a private nullifier
registry, and issues a voting Credential: three attribute commitments
(secret_id, election_id, issuance_timestamp) under one Ed25519 signature.

A Presentation discloses only (election_id, salt_2). The commitment C_1 is
the unsalted hash of secret_id and doubles as the on-ledger commitment cm, so
a credential can anchor exactly one ledger registration; secret_id itself is
32 uniform bytes, which carries the hiding property without a blinder.

The salted-commitment construction stands in for a pairing-based multi-show
credential: each credential here is shown exactly once, so issuer-
authenticated attributes plus selective disclosure are the whole contract.

The nullifier registry is write-ahead logged: the (v_nf, election, timestamp)
record hits disk before the in-memory registry admits the registration, and a
restarted registrar reloads the log, so a crash can lose an issued credential
but can never issue two for one person.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric import ed25519

from .encoding import Reader, lp, u16, u64
from .errors import (
    BadSignature,
    DuplicateRegistration,
    ElectionMismatch,
    MalformedPayload,
    MalformedPresentation,
    UntrustedIssuer,
)
from .hashing import attr_commitment, commitment, person_nullifier
from .rng import DeterministicRng

_VC_CONTEXT = b"eligibility-vc-v1"
_CRED_CONTEXT = b"voting-credential-v1"

PUBLIC_KEY_LEN = 32
SIGNATURE_LEN = 64
SALT_LEN = 16
SECRET_ID_LEN = 32

ATTR_ELECTION_ID = b"election_id"
ATTR_TIMESTAMP = b"ts"


class SigningKey:
    """Ed25519 keypair derived deterministically from 32 seed bytes."""

    def __init__(self, seed32: bytes):
        if len(seed32) != 32:
            raise ValueError("signing seed must be 32 bytes")
        self._priv = ed25519.Ed25519PrivateKey.from_private_bytes(seed32)
        self.public_bytes: bytes = self._priv.public_key().public_bytes_raw()

    @classmethod
    def generate(cls, rng: DeterministicRng) -> "SigningKey":
        return cls(rng.randbytes(32))

    def sign(self, message: bytes) -> bytes:
        return self._priv.sign(message)


def verify_signature(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        ed25519.Ed25519PublicKey.from_public_bytes(public_key).verify(
            signature, message
        )
        return True
    except (InvalidSignature, ValueError):
        return False


# ---------------------------------------------------------------------------
# Eligibility credential from the (simulated) identity provider
# ---------------------------------------------------------------------------

def _canonical_attributes(attributes) -> tuple[tuple[str, str], ...]:
    items = tuple(sorted(dict(attributes).items()))
    for k, v in items:
        if not isinstance(k, str) or not isinstance(v, str):
            raise TypeError("attributes must map str to str")
    return items


def _vc_message(pid: bytes, attributes: tuple[tuple[str, str], ...]) -> bytes:
    body = _VC_CONTEXT + lp(pid) + u16(len(attributes))
    for k, v in attributes:
        body += lp(k.encode()) + lp(v.encode())
    return body


@dataclass(frozen=True)
class EligibilityVC:
    """Issuer-signed statement that a person identifier is eligible."""

    pid: bytes
    attributes: tuple[tuple[str, str], ...]
    issuer_id: bytes  # issuer Ed25519 public key
    signature: bytes

    def to_bytes(self) -> bytes:
        return (
            _vc_message(self.pid, self.attributes)[len(_VC_CONTEXT):]
            + self.issuer_id
            + self.signature
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "EligibilityVC":
        r = Reader(data)
        pid = r.take_lp()
        count = r.take_u16()
        attrs = []
        for _ in range(count):
            k = r.take_lp().decode()
            v = r.take_lp().decode()
            attrs.append((k, v))
        issuer_id = r.take(PUBLIC_KEY_LEN)
        signature = r.take(SIGNATURE_LEN)
        r.expect_end()
        return cls(
            pid=pid,
            attributes=tuple(attrs),
            issuer_id=issuer_id,
            signature=signature,
        )


def issuer_issue_vc(issuer: SigningKey, pid: bytes, attributes=None) -> EligibilityVC:
    if not pid:
        raise ValueError("pid must be non-empty")
    attrs = _canonical_attributes(attributes or {})
    signature = issuer.sign(_vc_message(pid, attrs))
    return EligibilityVC(
        pid=pid, attributes=attrs, issuer_id=issuer.public_bytes, signature=signature
    )


# ---------------------------------------------------------------------------
# Voting credential and presentation
# ---------------------------------------------------------------------------

def _credential_message(c1: bytes, c2: bytes, c3: bytes) -> bytes:
    return _CRED_CONTEXT + c1 + c2 + c3


@dataclass(frozen=True)
class Credential:
    """Registrar-signed attribute triple; C_1 doubles as the ledger cm."""

    secret_id: bytes
    election_id: bytes
    issuance_timestamp: int
    salt_2: bytes
    salt_3: bytes
    c1: bytes
    c2: bytes
    c3: bytes
    signature: bytes

    @property
    def cm(self) -> bytes:
        return self.c1

    @classmethod
    def build(
        cls,
        secret_id: bytes,
        election_id: bytes,
        issuance_timestamp: int,
        salt_2: bytes,
        salt_3: bytes,
        signer: SigningKey,
    ) -> "Credential":
        c1 = commitment(secret_id)
        c2 = attr_commitment(ATTR_ELECTION_ID, election_id, salt_2)
        c3 = attr_commitment(ATTR_TIMESTAMP, u64(issuance_timestamp), salt_3)
        signature = signer.sign(_credential_message(c1, c2, c3))
        return cls(
            secret_id=secret_id,
            election_id=election_id,
            issuance_timestamp=issuance_timestamp,
            salt_2=salt_2,
            salt_3=salt_3,
            c1=c1,
            c2=c2,
            c3=c3,
            signature=signature,
        )

    def to_bytes(self) -> bytes:
        return (
            self.secret_id
            + self.election_id
            + u64(self.issuance_timestamp)
            + self.salt_2
            + self.salt_3
            + self.c1
            + self.c2
            + self.c3
            + self.signature
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Credential":
        r = Reader(data)
        out = cls(
            secret_id=r.take(SECRET_ID_LEN),
            election_id=r.take(32),
            issuance_timestamp=r.take_u64(),
            salt_2=r.take(SALT_LEN),
            salt_3=r.take(SALT_LEN),
            c1=r.take(32),
            c2=r.take(32),
            c3=r.take(32),
            signature=r.take(SIGNATURE_LEN),
        )
        r.expect_end()
        return out


@dataclass(frozen=True)
class Presentation:
    """Selective disclosure: commitments plus (election_id, salt_2) opened."""

    c1: bytes
    c2: bytes
    c3: bytes
    signature: bytes
    election_id: bytes
    salt_2: bytes

    WIRE_LENGTH = 32 * 3 + SIGNATURE_LEN + 32 + SALT_LEN

    def to_bytes(self) -> bytes:
        return (
            self.c1
            + self.c2
            + self.c3
            + self.signature
            + self.election_id
            + self.salt_2
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Presentation":
        try:
            r = Reader(data)
            out = cls(
                c1=r.take(32),
                c2=r.take(32),
                c3=r.take(32),
                signature=r.take(SIGNATURE_LEN),
                election_id=r.take(32),
                salt_2=r.take(SALT_LEN),
            )
            r.expect_end()
        except MalformedPayload as exc:
            raise MalformedPresentation(str(exc)) from None
        return out


def present(credential: Credential) -> Presentation:
    return Presentation(
        c1=credential.c1,
        c2=credential.c2,
        c3=credential.c3,
        signature=credential.signature,
        election_id=credential.election_id,
        salt_2=credential.salt_2,
    )


def verify_presentation(
    p: Presentation, registrar_pk: bytes, election_id: bytes
) -> bytes:
    """Check the disclosure and return the bound commitment cm = C_1.

    Returning C_1 is the credential-to-commitment binding: a ledger
    registration is accepted only for the exact commitment the registrar
    signed into the credential.
    """
    if not verify_signature(
        registrar_pk, p.signature, _credential_message(p.c1, p.c2, p.c3)
    ):
        raise BadSignature("presentation signature invalid")
    if p.election_id != election_id:
        raise ElectionMismatch(
            "presentation discloses a different election identifier"
        )
    if attr_commitment(ATTR_ELECTION_ID, election_id, p.salt_2) != p.c2:
        raise ElectionMismatch("disclosed election attribute does not open C_2")
    return p.c1


# ---------------------------------------------------------------------------
# Registrar
# ---------------------------------------------------------------------------

class RegistrarState:
    """Trusted registrar: VC gatekeeping, nullifier registry, issuance.

    check_and_record is the single serialization point; everything else is
    pure. The registry write path is: append to the log file, flush, fsync,
    then mutate memory, so every admitted registration is durable first.
    """

    def __init__(
        self,
        signing_key: SigningKey,
        trusted_issuers=(),
        wal_path: str | Path | None = None,
    ):
        self.signing_key = signing_key
        self.trusted_issuers: set[bytes] = set(trusted_issuers)
        self.used_nullifiers: set[bytes] = set()
        self.issuance_log: list[tuple[bytes, bytes, int]] = []
        self.wal_path = Path(wal_path) if wal_path is not None else None
        if self.wal_path is not None and self.wal_path.exists():
            self._replay_wal()

    @classmethod
    def create(
        cls, rng: DeterministicRng, trusted_issuers=(), wal_path=None
    ) -> "RegistrarState":
        return cls(SigningKey.generate(rng), trusted_issuers, wal_path)

    @property
    def public_key(self) -> bytes:
        return self.signing_key.public_bytes

    def _replay_wal(self) -> None:
        for line in self.wal_path.read_text().splitlines():
            if not line.strip():
                continue
            v_nf_hex, election_hex, ts = line.split()
            record = (bytes.fromhex(v_nf_hex), bytes.fromhex(election_hex), int(ts))
            self.used_nullifiers.add(record[0])
            self.issuance_log.append(record)

    def _append_wal(self, v_nf: bytes, election_id: bytes, now: int) -> None:
        if self.wal_path is None:
            return
        with open(self.wal_path, "a") as fh:
            fh.write(f"{v_nf.hex()} {election_id.hex()} {now}\n")
            fh.flush()
            os.fsync(fh.fileno())

    def verify_vc(self, vc: EligibilityVC) -> bytes:
        if vc.issuer_id not in self.trusted_issuers:
            raise UntrustedIssuer("issuer key not in the trusted set")
        if not verify_signature(
            vc.issuer_id, vc.signature, _vc_message(vc.pid, vc.attributes)
        ):
            raise BadSignature("eligibility credential signature invalid")
        return vc.pid

    def check_and_record(self, pid: bytes, election_id: bytes, now: int) -> bytes:
        """Record one registration right for (pid, election); atomic check+insert."""
        v_nf = person_nullifier(pid, election_id)
        if v_nf in self.used_nullifiers:
            raise DuplicateRegistration(
                "person already registered for this election"
            )
        self._append_wal(v_nf, election_id, now)
        self.used_nullifiers.add(v_nf)
        self.issuance_log.append((v_nf, election_id, now))
        return v_nf

    def issue(
        self, election_id: bytes, now: int, rng: DeterministicRng
    ) -> Credential:
        """Mint a fresh credential for a registration already recorded."""
        secret_id = rng.randbytes(SECRET_ID_LEN)
        return Credential.build(
            secret_id=secret_id,
            election_id=election_id,
            issuance_timestamp=now,
            salt_2=rng.randbytes(SALT_LEN),
            salt_3=rng.randbytes(SALT_LEN),
            signer=self.signing_key,
        )

    def register(
        self,
        vc: EligibilityVC,
        election_id: bytes,
        now: int,
        rng: DeterministicRng,
    ) -> Credential:
        """Full registration flow: VC check, nullifier gate, issuance."""
        pid = self.verify_vc(vc)
        self.check_and_record(pid, election_id, now)
        return self.issue(election_id, now, rng)
