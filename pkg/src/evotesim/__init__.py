"""Decentralized e-voting toolkit: threshold-Paillier tallying, sigma-protocol
proofs, anonymous voting credentials, a replicated bulletin-board ledger, and a
deterministic gossip-network simulator, glued together by a scenario-driven CLI.

Layering, bottom up:

    rng, encoding, hashing, errors     shared primitives
    hebackend                          threshold additively homomorphic encryption
    merkle                             commitment membership trees
    zkproofs                           Fiat-Shamir proofs and the vote statement
    credentials                        eligibility checks and voting credentials
    ledger                             bulletin-board state machine and audit
    netsim                             discrete-event gossip replication
    actors                             organizer / voter / tally-participant roles
    scenario, cli                      scripted elections from the command line
"""

__version__ = "0.1.0"

from .errors import (
    BackendUnavailable,
    BadRandomizer,
    BadSignature,
    CombinationFailure,
    DuplicateRegistration,
    DuplicateShareIndex,
    ElectionMismatch,
    EmptyBallotBox,
    InsufficientShares,
    InvalidThreshold,
    MalformedPayload,
    MalformedPresentation,
    PlaintextOutOfRange,
    PrimeGenerationFailure,
    ProtocolError,
    UntrustedIssuer,
    WitnessMismatch,
)
from .rng import DeterministicRng

__all__ = [
    "DeterministicRng",
    "ProtocolError",
    "BackendUnavailable",
    "BadRandomizer",
    "BadSignature",
    "CombinationFailure",
    "DuplicateRegistration",
    "DuplicateShareIndex",
    "ElectionMismatch",
    "EmptyBallotBox",
    "InsufficientShares",
    "InvalidThreshold",
    "MalformedPayload",
    "MalformedPresentation",
    "PlaintextOutOfRange",
    "PrimeGenerationFailure",
    "UntrustedIssuer",
    "WitnessMismatch",
    "__version__",
]
