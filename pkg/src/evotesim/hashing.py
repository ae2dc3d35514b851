"""SHA-256 with one-byte domain tags.

Every derived 32-byte value in the protocol (commitments, nullifiers, Merkle
nodes, attribute commitments, the registrar's person-nullifier) goes through
exactly one of these functions. Distinct leading tags keep the preimage spaces
disjoint, so a value computed in one role can never collide with a value
computed in another.
"""

from __future__ import annotations

import hashlib

DIGEST_LEN = 32

DOM_COMMITMENT = b"\x01"  # voter commitment cm over secret_id
DOM_NULLIFIER = b"\x02"   # vote nullifier over (secret_id, election_id)
DOM_LEAF = b"\x03"        # Merkle leaf
DOM_NODE = b"\x04"        # Merkle interior node
DOM_ATTR = b"\x05"        # salted credential attribute commitment
DOM_VNF = b"\x06"         # registrar-side person nullifier


def sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


def commitment(secret_id: bytes) -> bytes:
    """cm = H(0x01 || secret_id); hiding rests on secret_id's 256-bit entropy."""
    return sha256(DOM_COMMITMENT, secret_id)


def nullifier(secret_id: bytes, election_id: bytes) -> bytes:
    return sha256(DOM_NULLIFIER, secret_id, election_id)


def merkle_leaf(cm: bytes) -> bytes:
    return sha256(DOM_LEAF, cm)


def merkle_node(left: bytes, right: bytes) -> bytes:
    return sha256(DOM_NODE, left, right)


def attr_commitment(label: bytes, value: bytes, salt: bytes) -> bytes:
    return sha256(DOM_ATTR, label, value, salt)


def person_nullifier(pid: bytes, election_id: bytes) -> bytes:
    """Registrar-private tag marking one registration per person per election."""
    return sha256(DOM_VNF, pid, election_id)


def tx_hash(tx_bytes: bytes) -> bytes:
    """Content address for bulletin-board transactions (gossip dedup key)."""
    return hashlib.sha256(tx_bytes).digest()
