"""The bulletin-board state machine.

One LedgerState instance is one replica's view of one election: the election
configuration, the commitment set and its Merkle tree, the spent-nullifier
set, the encrypted ballot box, the partial-decryption pool, and the final
tally. Transactions are validated in full before any state changes; a
rejected transaction changes nothing.

Replicas receive the same transactions in different orders, so acceptance is
made confluent: within a phase, the final state is a pure function of the
transaction *set*. Two rules carry that property:

  * Merkle leaves are the sorted commitment set, so every replica freezes the
    same root no matter the arrival order of registrations.
  * Conflicts (two valid votes spending one nullifier, or two valid shares
    claiming one index) resolve canonically to the transaction with the
    smaller hash. A later-arriving winner atomically evicts the earlier one,
    so replicas converge on exactly one accepted transaction per conflict
    slot regardless of which arrived first.

Phases are driven by the tick clock in the election schedule: Setup until the
config lands, then Registration below registration_close, Voting below
voting_close, Tally after, and Closed once a tally is recorded. The Merkle
root freezes at the Registration-to-Voting edge, and every vote proof is
checked against that frozen root.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import credentials, hebackend, zkproofs
from .encoding import Reader, int_to_fixed, lp, u8, u16, u32, u64
from .errors import (
    CombinationFailure,
    DumpCorrupt,
    EmptyBallotBox,
    InsufficientShares,
    MalformedPayload,
    ProtocolError,
)
from .hashing import sha256, tx_hash
from .merkle import EMPTY_ROOT, MerkleTree

# ---------------------------------------------------------------------------
# Election configuration
# ---------------------------------------------------------------------------

ELECTION_ID_LEN = 32


@dataclass(frozen=True)
class ElectionConfig:
    """Public election parameters published as the first transaction."""

    election_id: bytes
    proposal_text: str
    pk: hebackend.PaillierPublicKey
    params: hebackend.ThresholdParams  # verification values only, no secrets
    registrar_pk: bytes
    backend_id: str
    registration_close: int
    voting_close: int

    def __post_init__(self):
        if len(self.election_id) != ELECTION_ID_LEN:
            raise ValueError("election id must be 32 bytes")
        if not 0 < self.registration_close < self.voting_close:
            raise ValueError("phase schedule must be strictly ordered")

    @property
    def t(self) -> int:
        return self.params.t

    @property
    def big_n(self) -> int:
        return self.params.big_n

    def to_bytes(self) -> bytes:
        return (
            self.election_id
            + lp(self.proposal_text.encode())
            + self.pk.to_bytes()
            + lp(self.params.to_bytes(self.pk))
            + self.registrar_pk
            + u8(1 if self.backend_id == zkproofs.TRANSPARENT else 2)
            + u64(self.registration_close)
            + u64(self.voting_close)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "ElectionConfig":
        r = Reader(data)
        election_id = r.take(ELECTION_ID_LEN)
        try:
            proposal = r.take_lp().decode()
        except UnicodeDecodeError:
            raise MalformedPayload("proposal text is not valid UTF-8") from None
        bits = r.take_u16()
        if bits < hebackend.MIN_KEY_BITS:
            raise MalformedPayload(f"key width {bits} below minimum")
        n = r.take_int((bits + 7) // 8)
        try:
            pk = hebackend.PaillierPublicKey(n=n, bits=bits)
        except ValueError as exc:
            raise MalformedPayload(str(exc)) from None
        params = hebackend.ThresholdParams.from_bytes(r.take_lp(), pk)
        registrar_pk = r.take(credentials.PUBLIC_KEY_LEN)
        backend_tag = r.take_u8()
        if backend_tag not in (1, 2):
            raise MalformedPayload(f"unknown proof backend tag {backend_tag}")
        backend_id = zkproofs.TRANSPARENT if backend_tag == 1 else zkproofs.SNARK
        registration_close = r.take_u64()
        voting_close = r.take_u64()
        r.expect_end()
        try:
            return cls(
                election_id=election_id,
                proposal_text=proposal,
                pk=pk,
                params=params,
                registrar_pk=registrar_pk,
                backend_id=backend_id,
                registration_close=registration_close,
                voting_close=voting_close,
            )
        except ValueError as exc:
            raise MalformedPayload(str(exc)) from None

    def fingerprint(self) -> bytes:
        return sha256(b"election-config-v1", self.to_bytes())


# ---------------------------------------------------------------------------
# Transactions
# ---------------------------------------------------------------------------

TX_CONFIG = 1
TX_REGISTRATION = 2
TX_VOTE = 3
TX_SHARE = 4

_KIND_NAMES = {
    TX_CONFIG: "config",
    TX_REGISTRATION: "registration",
    TX_VOTE: "vote",
    TX_SHARE: "tally-share",
}


class _TxBase:
    """Common transaction plumbing: cached bytes and content hash."""

    kind: int = 0

    def payload_bytes(self) -> bytes:
        raise NotImplementedError

    def to_bytes(self) -> bytes:
        cached = getattr(self, "_wire", None)
        if cached is None:
            cached = u8(self.kind) + self.payload_bytes()
            object.__setattr__(self, "_wire", cached)
        return cached

    def hash(self) -> bytes:
        cached = getattr(self, "_hash", None)
        if cached is None:
            cached = tx_hash(self.to_bytes())
            object.__setattr__(self, "_hash", cached)
        return cached

    @property
    def kind_name(self) -> str:
        return _KIND_NAMES[self.kind]


@dataclass(frozen=True, eq=False)
class ConfigTx(_TxBase):
    config: ElectionConfig
    kind = TX_CONFIG

    def payload_bytes(self) -> bytes:
        return self.config.to_bytes()


@dataclass(frozen=True, eq=False)
class RegistrationTx(_TxBase):
    cm: bytes
    presentation: credentials.Presentation
    kind = TX_REGISTRATION

    def payload_bytes(self) -> bytes:
        return self.cm + self.presentation.to_bytes()


@dataclass(frozen=True, eq=False)
class VoteTx(_TxBase):
    election_id: bytes
    ciphertext_bytes: bytes  # width checked against the config key on apply
    nf: bytes
    proof: zkproofs.VoteProof
    kind = TX_VOTE

    def payload_bytes(self) -> bytes:
        return (
            self.election_id
            + lp(self.ciphertext_bytes)
            + self.nf
            + self.proof.to_bytes()
        )


@dataclass(frozen=True, eq=False)
class TallyShareTx(_TxBase):
    election_id: bytes
    index: int
    sigma_bytes: bytes
    proof_bytes: bytes
    kind = TX_SHARE

    def payload_bytes(self) -> bytes:
        return (
            self.election_id
            + u16(self.index)
            + lp(self.sigma_bytes)
            + lp(self.proof_bytes)
        )


Transaction = ConfigTx | RegistrationTx | VoteTx | TallyShareTx


def parse_tx(data: bytes) -> Transaction:
    """Strict wire-to-object parse; key-dependent fields stay as bytes."""
    r = Reader(data)
    kind = r.take_u8()
    if kind == TX_CONFIG:
        tx = ConfigTx(config=ElectionConfig.from_bytes(r.take(r.remaining())))
    elif kind == TX_REGISTRATION:
        cm = r.take(32)
        presentation = credentials.Presentation.from_bytes(
            r.take(credentials.Presentation.WIRE_LENGTH)
        )
        r.expect_end()
        tx = RegistrationTx(cm=cm, presentation=presentation)
    elif kind == TX_VOTE:
        election_id = r.take(ELECTION_ID_LEN)
        ciphertext_bytes = r.take_lp()
        nf = r.take(32)
        proof = zkproofs.VoteProof.read_from(r)
        r.expect_end()
        tx = VoteTx(
            election_id=election_id,
            ciphertext_bytes=ciphertext_bytes,
            nf=nf,
            proof=proof,
        )
    elif kind == TX_SHARE:
        election_id = r.take(ELECTION_ID_LEN)
        index = r.take_u16()
        sigma_bytes = r.take_lp()
        proof_bytes = r.take_lp()
        r.expect_end()
        tx = TallyShareTx(
            election_id=election_id,
            index=index,
            sigma_bytes=sigma_bytes,
            proof_bytes=proof_bytes,
        )
    else:
        raise MalformedPayload(f"unknown transaction kind {kind}")
    return tx


# ---------------------------------------------------------------------------
# Verdicts and phases
# ---------------------------------------------------------------------------

class Reason(str, enum.Enum):
    WRONG_PHASE = "WrongPhase"
    UNKNOWN_ELECTION = "UnknownElection"
    INVALID_PROOF = "InvalidProof"
    DUPLICATE_COMMITMENT = "DuplicateCommitment"
    DUPLICATE_NULLIFIER = "DuplicateNullifier"
    DUPLICATE_SHARE_INDEX = "DuplicateShareIndex"
    CONFIG_ALREADY_SET = "ConfigAlreadySet"

    def __str__(self) -> str:  # render as the bare name in reports
        return self.value


@dataclass(frozen=True)
class Applied:
    """Transaction incorporated; evicted names a displaced conflicting tx."""

    evicted: bytes | None = None

    @property
    def accepted(self) -> bool:
        return True


@dataclass(frozen=True)
class Rejected:
    reason: Reason
    detail: str = ""

    @property
    def accepted(self) -> bool:
        return False


Verdict = Applied | Rejected


class Phase(enum.IntEnum):
    SETUP = 0
    REGISTRATION = 1
    VOTING = 2
    TALLY = 3
    CLOSED = 4


@dataclass(frozen=True)
class TallyResult:
    yes_count: int
    no_count: int
    total_votes: int

    def as_dict(self) -> dict:
        return {
            "yes_count": self.yes_count,
            "no_count": self.no_count,
            "total_votes": self.total_votes,
        }


# ---------------------------------------------------------------------------
# The replicated state machine
# ---------------------------------------------------------------------------

@dataclass
class _Entry:
    tick: int
    tx: Transaction


class LedgerState:
    """One replica's election state; mutated only through apply()."""

    def __init__(self):
        self.config: ElectionConfig | None = None
        self.tick: int = 0
        self.phase: Phase = Phase.SETUP
        self.frozen_root: bytes | None = None
        self.frozen_tree: MerkleTree | None = None
        self.tally: TallyResult | None = None
        self._config_entry: _Entry | None = None
        # cm -> registration entry
        self._registrations: dict[bytes, _Entry] = {}
        # nf -> (entry, parsed ciphertext); canonical winner per nullifier
        self._ballots: dict[bytes, tuple[_Entry, hebackend.Ciphertext]] = {}
        # share index -> (entry, parsed partial decryption)
        self._shares: dict[int, tuple[_Entry, hebackend.PartialDecryption]] = {}

    # -- read-only views ----------------------------------------------------

    @property
    def commit_set(self) -> set[bytes]:
        return set(self._registrations)

    @property
    def vote_nullifiers(self) -> set[bytes]:
        return set(self._ballots)

    @property
    def ballot_box(self) -> list[hebackend.Ciphertext]:
        """Ballots in canonical (nullifier-sorted) order."""
        return [self._ballots[nf][1] for nf in sorted(self._ballots)]

    @property
    def share_pool(self) -> dict[int, hebackend.PartialDecryption]:
        return {idx: part for idx, (_, part) in self._shares.items()}

    def merkle_tree(self) -> MerkleTree:
        if self.frozen_tree is not None:
            return self.frozen_tree
        return MerkleTree(self._registrations.keys())

    # -- phase clock ----------------------------------------------------------

    def advance_phase(self, tick: int) -> Phase:
        """Move the clock forward; freeze the Merkle root entering Voting."""
        if tick > self.tick:
            self.tick = tick
        if self.config is None:
            return self.phase
        if self.phase >= Phase.CLOSED:
            return self.phase
        if self.tick < self.config.registration_close:
            target = Phase.REGISTRATION
        elif self.tick < self.config.voting_close:
            target = Phase.VOTING
        else:
            target = Phase.TALLY
        if target > self.phase:
            if self.phase < Phase.VOTING <= target:
                self.frozen_tree = MerkleTree(self._registrations.keys())
                self.frozen_root = self.frozen_tree.root
            self.phase = target
        return self.phase

    # -- transaction application ---------------------------------------------

    def apply(
        self,
        tx: Transaction,
        tick: int,
        *,
        verify_cache: dict | None = None,
    ) -> Verdict:
        """Validate and incorporate one transaction; atomic on rejection.

        verify_cache, when given, memoizes pure proof verifications across
        replicas keyed by (tx hash, full verification context); simulation
        convenience only, never used by audit.
        """
        self.advance_phase(tick)
        if isinstance(tx, ConfigTx):
            return self._apply_config(tx, tick)
        if isinstance(tx, RegistrationTx):
            return self._apply_registration(tx, tick, verify_cache)
        if isinstance(tx, VoteTx):
            return self._apply_vote(tx, tick, verify_cache)
        if isinstance(tx, TallyShareTx):
            return self._apply_share(tx, tick, verify_cache)
        return Rejected(Reason.INVALID_PROOF, "unknown transaction type")

    def _apply_config(self, tx: ConfigTx, tick: int) -> Verdict:
        if self.config is not None:
            return Rejected(Reason.CONFIG_ALREADY_SET)
        cfg = tx.config
        if cfg.params.t > cfg.params.big_n:
            return Rejected(Reason.INVALID_PROOF, "threshold exceeds share count")
        self.config = cfg
        self._config_entry = _Entry(tick, tx)
        self.advance_phase(tick)
        return Applied()

    def _cached(self, verify_cache, key, compute):
        if verify_cache is None:
            return compute()
        if key not in verify_cache:
            verify_cache[key] = compute()
        return verify_cache[key]

    def _apply_registration(self, tx, tick, verify_cache) -> Verdict:
        if self.config is None:
            return Rejected(Reason.WRONG_PHASE, "no election configured")
        if tx.presentation.election_id != self.config.election_id:
            return Rejected(Reason.UNKNOWN_ELECTION)
        if self.phase != Phase.REGISTRATION:
            return Rejected(Reason.WRONG_PHASE, f"phase is {self.phase.name}")

        def check() -> str | None:
            try:
                cm = credentials.verify_presentation(
                    tx.presentation,
                    self.config.registrar_pk,
                    self.config.election_id,
                )
            except ProtocolError as exc:
                return f"{type(exc).__name__}: {exc}"
            if cm != tx.cm:
                return "commitment does not match the credential binding"
            return None

        key = (b"reg", tx.hash(), self.config.fingerprint())
        reason = self._cached(verify_cache, key, check)
        if reason is not None:
            return Rejected(Reason.INVALID_PROOF, reason)
        if tx.cm in self._registrations:
            return Rejected(Reason.DUPLICATE_COMMITMENT)
        self._registrations[tx.cm] = _Entry(tick, tx)
        return Applied()

    def _apply_vote(self, tx, tick, verify_cache) -> Verdict:
        if self.config is None:
            return Rejected(Reason.WRONG_PHASE, "no election configured")
        if tx.election_id != self.config.election_id:
            return Rejected(Reason.UNKNOWN_ELECTION)
        if self.phase != Phase.VOTING:
            return Rejected(Reason.WRONG_PHASE, f"phase is {self.phase.name}")
        if len(tx.nf) != 32:
            return Rejected(Reason.INVALID_PROOF, "nullifier must be 32 bytes")
        try:
            ciphertext = hebackend.Ciphertext.from_bytes(
                tx.ciphertext_bytes, self.config.pk
            )
        except MalformedPayload as exc:
            return Rejected(Reason.INVALID_PROOF, str(exc))

        stmt = zkproofs.VoteStatement(
            election_id=tx.election_id,
            merkle_root=self.frozen_root,
            nullifier=tx.nf,
            ciphertext=ciphertext,
            pk=self.config.pk,
        )
        key = (b"vote", tx.hash(), self.config.fingerprint(), self.frozen_root)
        reason = self._cached(
            verify_cache,
            key,
            lambda: zkproofs.verify_vote(self.config.backend_id, stmt, tx.proof),
        )
        if reason is not None:
            return Rejected(Reason.INVALID_PROOF, reason)

        incumbent = self._ballots.get(tx.nf)
        if incumbent is not None:
            inc_entry, _ = incumbent
            if tx.hash() >= inc_entry.tx.hash():
                return Rejected(
                    Reason.DUPLICATE_NULLIFIER,
                    "nullifier already spent by the canonical transaction",
                )
            # Canonical winner arrived second: evict the incumbent atomically.
            self._ballots[tx.nf] = (_Entry(tick, tx), ciphertext)
            return Applied(evicted=inc_entry.tx.hash())
        self._ballots[tx.nf] = (_Entry(tick, tx), ciphertext)
        return Applied()

    def _apply_share(self, tx, tick, verify_cache) -> Verdict:
        if self.config is None:
            return Rejected(Reason.WRONG_PHASE, "no election configured")
        if tx.election_id != self.config.election_id:
            return Rejected(Reason.UNKNOWN_ELECTION)
        if self.phase != Phase.TALLY:
            return Rejected(Reason.WRONG_PHASE, f"phase is {self.phase.name}")
        if not 1 <= tx.index <= self.config.big_n:
            return Rejected(Reason.INVALID_PROOF, "share index out of range")
        pk = self.config.pk
        if len(tx.sigma_bytes) != pk.element_width:
            return Rejected(Reason.INVALID_PROOF, "sigma has the wrong width")
        partial = hebackend.PartialDecryption(
            index=tx.index, sigma=int.from_bytes(tx.sigma_bytes, "big")
        )
        try:
            proof = zkproofs.ShareCorrectnessProof.from_bytes(tx.proof_bytes, pk)
        except MalformedPayload as exc:
            return Rejected(Reason.INVALID_PROOF, str(exc))
        try:
            c_sum = self.compute_sum()
        except EmptyBallotBox:
            return Rejected(Reason.INVALID_PROOF, "no ballots to decrypt")

        key = (
            b"share",
            tx.hash(),
            self.config.fingerprint(),
            sha256(c_sum.to_bytes(pk)),
        )
        reason = self._cached(
            verify_cache,
            key,
            lambda: zkproofs.verify_share(
                self.config.params, pk, c_sum, partial, proof
            ),
        )
        if reason is not None:
            return Rejected(Reason.INVALID_PROOF, reason)

        incumbent = self._shares.get(tx.index)
        if incumbent is not None:
            inc_entry, _ = incumbent
            if tx.hash() >= inc_entry.tx.hash():
                return Rejected(
                    Reason.DUPLICATE_SHARE_INDEX,
                    "index already filled by the canonical transaction",
                )
            self._shares[tx.index] = (_Entry(tick, tx), partial)
            return Applied(evicted=inc_entry.tx.hash())
        self._shares[tx.index] = (_Entry(tick, tx), partial)
        return Applied()

    # -- tallying -------------------------------------------------------------

    def compute_sum(self) -> hebackend.Ciphertext:
        """Homomorphic sum over the ballot box in canonical order."""
        if not self._ballots:
            raise EmptyBallotBox("ballot box is empty")
        pk = self.config.pk
        acc = hebackend.Ciphertext(value=1)
        for ct in self.ballot_box:
            acc = hebackend.add(pk, acc, ct)
        return acc

    def finalize_tally(self) -> TallyResult:
        """Combine t verified shares into the plaintext tally."""
        if self.config is None:
            raise ProtocolError("no election configured")
        if self.tally is not None:
            return self.tally
        t = self.config.t
        if len(self._shares) < t:
            raise InsufficientShares(
                f"have {len(self._shares)} verified shares, threshold is {t}"
            )
        chosen = [self._shares[idx][1] for idx in sorted(self._shares)[:t]]
        yes = hebackend.combine(self.config.pk, self.config.params, chosen)
        total = len(self._ballots)
        result = TallyResult(
            yes_count=yes, no_count=total - yes, total_votes=total
        )
        self.tally = result
        self.phase = Phase.CLOSED
        return result

    # -- canonical digests ------------------------------------------------------

    def ledger_hash(self) -> bytes:
        """Content digest: equal across replicas iff their states agree.

        Arrival ticks are deliberately excluded; replicas receiving the same
        transactions at different times must still compare equal.
        """
        h_parts = [b"ledger-state-v1"]
        if self.config is not None:
            h_parts.append(self.config.fingerprint())
        h_parts.append(b"commitments")
        for cm in sorted(self._registrations):
            h_parts.append(cm)
        h_parts.append(b"frozen-root")
        h_parts.append(self.frozen_root or EMPTY_ROOT)
        h_parts.append(b"ballots")
        for nf in sorted(self._ballots):
            h_parts.append(nf)
            h_parts.append(self._ballots[nf][0].tx.hash())
        h_parts.append(b"shares")
        for idx in sorted(self._shares):
            h_parts.append(u16(idx))
            h_parts.append(self._shares[idx][0].tx.hash())
        h_parts.append(b"tally")
        if self.tally is not None:
            h_parts.append(
                u64(self.tally.yes_count) + u64(self.tally.total_votes)
            )
        return sha256(*[lp(p) for p in h_parts])

    def records(self) -> list[tuple[int, Transaction]]:
        """Incorporated transactions as (tick, tx), in replayable order."""
        out: list[tuple[int, Transaction]] = []
        if self._config_entry is not None:
            out.append((self._config_entry.tick, self._config_entry.tx))
        entries = [e for e in self._registrations.values()]
        entries += [e for e, _ in self._ballots.values()]
        entries += [e for e, _ in self._shares.values()]
        entries.sort(key=lambda e: (e.tick, e.tx.hash()))
        out.extend((e.tick, e.tx) for e in entries)
        return out


# ---------------------------------------------------------------------------
# Dump format and audit
# ---------------------------------------------------------------------------

DUMP_MAGIC = b"EVOTELOG"
DUMP_VERSION = 1
_FOOTER_SENTINEL = 0xFFFFFFFF


@dataclass(frozen=True)
class DumpFooter:
    chain_hash: bytes
    state_hash: bytes
    tally: TallyResult | None


def _chain_hash(records: list[tuple[int, bytes]]) -> bytes:
    h = sha256(DUMP_MAGIC, u8(DUMP_VERSION))
    for tick, tx_bytes in records:
        h = sha256(h, u64(tick), tx_bytes)
    return h


def serialize_dump(state: LedgerState) -> bytes:
    """Binary dump: framed records plus an integrity footer."""
    records = [(tick, tx.to_bytes()) for tick, tx in state.records()]
    out = bytearray()
    out += DUMP_MAGIC
    out += u8(DUMP_VERSION)
    for tick, tx_bytes in records:
        out += u32(8 + len(tx_bytes))
        out += u64(tick)
        out += tx_bytes
    out += u32(_FOOTER_SENTINEL)
    out += _chain_hash(records)
    out += state.ledger_hash()
    if state.tally is None:
        out += u8(0) + u64(0) + u64(0)
    else:
        out += u8(1) + u64(state.tally.yes_count) + u64(state.tally.total_votes)
    return bytes(out)


def parse_dump(data: bytes) -> tuple[list[tuple[int, bytes]], DumpFooter]:
    """Frame-level parse; raises DumpCorrupt on any container damage."""
    try:
        r = Reader(data)
        if r.take(len(DUMP_MAGIC)) != DUMP_MAGIC:
            raise DumpCorrupt("bad magic")
        if r.take_u8() != DUMP_VERSION:
            raise DumpCorrupt("unsupported dump version")
        records: list[tuple[int, bytes]] = []
        while True:
            marker = r.take_u32()
            if marker == _FOOTER_SENTINEL:
                break
            if marker < 9:
                raise DumpCorrupt("record frame too short")
            tick = r.take_u64()
            records.append((tick, r.take(marker - 8)))
        chain_hash = r.take(32)
        state_hash = r.take(32)
        has_tally = r.take_u8()
        yes = r.take_u64()
        total = r.take_u64()
        r.expect_end()
    except MalformedPayload as exc:
        raise DumpCorrupt(str(exc)) from None
    tally = (
        TallyResult(yes_count=yes, no_count=total - yes, total_votes=total)
        if has_tally
        else None
    )
    return records, DumpFooter(
        chain_hash=chain_hash, state_hash=state_hash, tally=tally
    )


def render_dump_text(data: bytes) -> str:
    """Canonical line-per-transaction rendering of a dump, for diffing."""
    records, footer = parse_dump(data)
    lines = [f"dump version={DUMP_VERSION} records={len(records)}"]
    for tick, tx_bytes in records:
        try:
            tx = parse_tx(tx_bytes)
        except MalformedPayload:
            lines.append(f"tick={tick} kind=unparseable bytes={tx_bytes.hex()}")
            continue
        head = f"tick={tick} kind={tx.kind_name} hash={tx.hash().hex()}"
        if isinstance(tx, ConfigTx):
            cfg = tx.config
            head += (
                f" election={cfg.election_id.hex()} t={cfg.t} n={cfg.big_n}"
                f" reg_close={cfg.registration_close}"
                f" voting_close={cfg.voting_close}"
            )
        elif isinstance(tx, RegistrationTx):
            head += f" cm={tx.cm.hex()}"
        elif isinstance(tx, VoteTx):
            head += (
                f" nf={tx.nf.hex()}"
                f" ciphertext_sha256={sha256(tx.ciphertext_bytes).hex()}"
            )
        elif isinstance(tx, TallyShareTx):
            head += (
                f" index={tx.index}"
                f" sigma_sha256={sha256(tx.sigma_bytes).hex()}"
            )
        lines.append(head)
    lines.append(f"chain_hash={footer.chain_hash.hex()}")
    lines.append(f"state_hash={footer.state_hash.hex()}")
    if footer.tally is not None:
        lines.append(
            f"tally yes={footer.tally.yes_count}"
            f" no={footer.tally.no_count}"
            f" total={footer.tally.total_votes}"
        )
    else:
        lines.append("tally absent")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AuditCheck:
    check_id: str
    ok: bool
    detail: str = ""


@dataclass
class AuditReport:
    checks: list[AuditCheck] = field(default_factory=list)
    tally: TallyResult | None = None

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def add(self, check_id: str, ok: bool, detail: str = "") -> None:
        self.checks.append(AuditCheck(check_id=check_id, ok=ok, detail=detail))

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [
                {"id": c.check_id, "ok": c.ok, "detail": c.detail}
                for c in self.checks
            ],
            "tally": self.tally.as_dict() if self.tally else None,
        }


def audit(data: bytes) -> AuditReport:
    """Full third-party audit of a ledger dump.

    Replays every transaction through a fresh replica with all proofs
    re-verified, then independently recomputes the Merkle root, the
    homomorphic sum, and the tally, and cross-checks the integrity footer.
    Raises DumpCorrupt only for container-level damage; every semantic
    problem becomes a failed check in the report.
    """
    report = AuditReport()
    records, footer = parse_dump(data)

    chain_ok = _chain_hash(records) == footer.chain_hash
    ticks = [t for t, _ in records]
    monotone = all(a <= b for a, b in zip(ticks, ticks[1:]))
    problems = []
    if not chain_ok:
        problems.append("chain hash mismatch")
    if not monotone:
        problems.append("record ticks not monotone")
    report.add("container", not problems, "; ".join(problems))

    # Replay through a fresh state with full re-verification.
    state = LedgerState()
    replay_failures = []
    parsed: list[tuple[int, Transaction]] = []
    for i, (tick, tx_bytes) in enumerate(records):
        try:
            tx = parse_tx(tx_bytes)
        except MalformedPayload as exc:
            replay_failures.append(f"record {i}: unparseable ({exc})")
            continue
        parsed.append((tick, tx))
        verdict = state.apply(tx, tick)
        if not verdict.accepted:
            replay_failures.append(
                f"record {i} ({tx.kind_name} {tx.hash().hex()[:16]}): "
                f"{verdict.reason}: {verdict.detail}"
            )
    report.add(
        "replay",
        not replay_failures,
        "; ".join(replay_failures[:5]),
    )

    # Nullifier uniqueness straight off the records, independent of replay.
    nfs = [tx.nf for _, tx in parsed if isinstance(tx, VoteTx)]
    report.add(
        "nullifier-uniqueness",
        len(nfs) == len(set(nfs)),
        "duplicate nullifier among vote records" if len(nfs) != len(set(nfs)) else "",
    )

    # Every accepted ballot proved membership of a registered commitment,
    # so the ballot count can never exceed the registration count.
    conservation = len(state._ballots) <= len(state.commit_set)
    report.add(
        "conservation",
        conservation,
        f"ballots={len(state._ballots)} commitments={len(state.commit_set)}",
    )

    # Independent Merkle recomputation from the raw registration records.
    reg_cms = [tx.cm for _, tx in parsed if isinstance(tx, RegistrationTx)]
    recomputed_root = MerkleTree(reg_cms).root
    frozen = state.frozen_root
    vote_records = [tx for _, tx in parsed if isinstance(tx, VoteTx)]
    if frozen is None:
        # Voting never opened; acceptable only if no vote claims one did.
        report.add(
            "merkle-root",
            not vote_records,
            "vote records present but voting never opened" if vote_records else "",
        )
    else:
        report.add(
            "merkle-root",
            recomputed_root == frozen,
            "frozen root does not match recomputation over registrations"
            if recomputed_root != frozen
            else "",
        )

    # Homomorphic sum recomputed straight off the vote records, bypassing
    # the replayed state's bookkeeping.
    sum_ok, sum_detail = True, ""
    if state.config is not None and vote_records:
        pk = state.config.pk
        product = 1
        for vtx in vote_records:
            product = (product * int.from_bytes(vtx.ciphertext_bytes, "big")) % (
                pk.n_squared
            )
        try:
            replayed_sum = state.compute_sum().value
        except EmptyBallotBox:
            replayed_sum = None
        if replayed_sum != product:
            sum_ok = False
            sum_detail = "ballot-box product disagrees with independent recompute"
    report.add("homomorphic-sum", sum_ok, sum_detail)

    # Tally recombination from the recorded decryption shares.
    tally, rec_detail, rec_ok = None, "", True
    if state.config is not None and state._ballots:
        try:
            tally = state.finalize_tally()
        except (InsufficientShares, CombinationFailure) as exc:
            rec_ok = footer.tally is None
            rec_detail = f"{type(exc).__name__}: {exc}"
        if tally is not None:
            if not 0 <= tally.yes_count <= tally.total_votes:
                rec_ok, rec_detail = False, "tally outside [0, total]"
            if footer.tally is None:
                # A dump holding >= t good shares must publish its tally;
                # otherwise flipping the footer's tally flag would hide a
                # countable result without failing any check.
                rec_ok, rec_detail = (
                    False,
                    "recombination succeeded but the footer claims no tally",
                )
            elif (
                footer.tally.yes_count != tally.yes_count
                or footer.tally.total_votes != tally.total_votes
            ):
                rec_ok, rec_detail = (
                    False,
                    "footer tally disagrees with recombination",
                )
    elif footer.tally is not None:
        rec_ok, rec_detail = False, "footer claims a tally but no ballots replayed"
    report.add("tally-recombination", rec_ok, rec_detail)
    report.tally = tally

    hash_ok = state.ledger_hash() == footer.state_hash
    report.add(
        "state-hash",
        hash_ok,
        "" if hash_ok else "replayed state digest differs from footer",
    )
    return report
