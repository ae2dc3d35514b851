"""Exception hierarchy shared by every layer.

Validation of *transactions* never raises: the ledger returns verdict values so
a hostile input cannot crash a replica. Exceptions are reserved for misuse of
local APIs (bad arguments, missing key material, broken files).
"""


class ProtocolError(Exception):
    """Base class for every error raised by this package."""


# --- key generation / threshold arithmetic ---------------------------------

class InvalidThreshold(ProtocolError):
    """Threshold t outside 1 <= t <= N."""


class PrimeGenerationFailure(ProtocolError):
    """Prime search exhausted its retry budget."""


class PlaintextOutOfRange(ProtocolError):
    """Plaintext not in [0, n)."""


class BadRandomizer(ProtocolError):
    """Encryption randomizer shares a factor with the modulus."""


class InsufficientShares(ProtocolError):
    """Fewer than t partial decryptions supplied."""


class DuplicateShareIndex(ProtocolError):
    """Two partial decryptions claim the same share index."""


class CombinationFailure(ProtocolError):
    """Combined value is not of the form 1 + m*n mod n^2; a share is corrupt."""


# --- proofs -----------------------------------------------------------------

class WitnessMismatch(ProtocolError):
    """Prover's witness does not satisfy the statement it claims to prove."""


class BackendUnavailable(ProtocolError):
    """Requested proof backend has no registered implementation."""


class MalformedPayload(ProtocolError):
    """Proof payload bytes do not parse under the strict wire grammar."""


# --- credentials ------------------------------------------------------------

class UntrustedIssuer(ProtocolError):
    """Eligibility credential signed by an issuer outside the trusted set."""


class BadSignature(ProtocolError):
    """Signature verification failed."""


class DuplicateRegistration(ProtocolError):
    """This person already registered for this election."""


class ElectionMismatch(ProtocolError):
    """Credential presentation discloses a different election than expected."""


class MalformedPresentation(ProtocolError):
    """Presentation bytes do not parse."""


# --- ledger / simulation ----------------------------------------------------

class EmptyBallotBox(ProtocolError):
    """Homomorphic sum requested over zero ballots."""


class MerklePathUnavailable(ProtocolError):
    """Voter's commitment is absent from the frozen registration tree."""


class UnknownPeer(ProtocolError):
    """Simulation addressed a peer id that does not exist."""


class ScenarioError(ProtocolError):
    """Scenario file missing, unparseable, or failing schema validation."""


class DumpCorrupt(ProtocolError):
    """Ledger dump file unreadable: bad magic, truncation, or framing error."""
