"""Protocol roles: organizer, voter, tally participant, and adversaries.

Actors build transactions; they never touch a ledger directly. Everything an
actor signs or proves comes from its own secrets plus whatever a peer's
public ledger view exposes (the frozen registration tree, the ballot-box
sum), which keeps the trust boundaries of the protocol visible in the code:
a voter cannot cast without a membership path from some replica, and a tally
participant cannot publish a share before the ballot box is summable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import credentials, hebackend, ledger, zkproofs
from .errors import DuplicateRegistration, MerklePathUnavailable
from .hashing import nullifier, sha256
from .merkle import MerkleTree
from .rng import DeterministicRng


def derive_election_id(label: str) -> bytes:
    return sha256(b"election-id-v1", label.encode())


@dataclass
class Organizer:
    """Trusted dealer: generates keys, appoints the registrar, opens the election.

    The full secret key exists only transiently inside keygen; the organizer
    keeps the public material and hands each tally participant its share.
    """

    config: ledger.ElectionConfig
    shares: tuple[hebackend.KeyShare, ...]
    registrar: credentials.RegistrarState

    @classmethod
    def create(
        cls,
        *,
        election_label: str,
        proposal_text: str,
        bits: int,
        t: int,
        big_n: int,
        registration_close: int,
        voting_close: int,
        rng: DeterministicRng,
        trusted_issuers=(),
        wal_path=None,
    ) -> "Organizer":
        km = hebackend.keygen(bits=bits, t=t, big_n=big_n, seed=rng.fork("keygen"))
        registrar = credentials.RegistrarState.create(
            rng.fork("registrar"),
            trusted_issuers=trusted_issuers,
            wal_path=wal_path,
        )
        config = ledger.ElectionConfig(
            election_id=derive_election_id(election_label),
            proposal_text=proposal_text,
            pk=km.pk,
            params=km.params,
            registrar_pk=registrar.public_key,
            backend_id=zkproofs.TRANSPARENT,
            registration_close=registration_close,
            voting_close=voting_close,
        )
        return cls(config=config, shares=km.shares, registrar=registrar)

    def config_tx(self) -> ledger.ConfigTx:
        return ledger.ConfigTx(config=self.config)


@dataclass
class Voter:
    """One eligible person: identity credential in hand, one choice to cast."""

    pid: bytes
    vc: credentials.EligibilityVC
    choice: int
    home_peer: int = 0
    credential: credentials.Credential | None = None

    @property
    def registered(self) -> bool:
        return self.credential is not None

    def register(
        self,
        registrar: credentials.RegistrarState,
        election_id: bytes,
        now: int,
        rng: DeterministicRng,
    ) -> ledger.RegistrationTx:
        """Obtain a voting credential and the transaction announcing it."""
        self.credential = registrar.register(self.vc, election_id, now, rng)
        return registration_tx(self.credential)

    def cast(
        self,
        config: ledger.ElectionConfig,
        tree: MerkleTree,
        rng: DeterministicRng,
        *,
        choice: int | None = None,
    ) -> ledger.VoteTx:
        if self.credential is None:
            raise MerklePathUnavailable("voter never registered")
        return vote_tx(
            self.credential,
            self.choice if choice is None else choice,
            config,
            tree,
            rng,
        )


def registration_tx(credential: credentials.Credential) -> ledger.RegistrationTx:
    return ledger.RegistrationTx(
        cm=credential.cm, presentation=credentials.present(credential)
    )


def vote_tx(
    credential: credentials.Credential,
    choice: int,
    config: ledger.ElectionConfig,
    tree: MerkleTree,
    rng: DeterministicRng,
) -> ledger.VoteTx:
    """Encrypt a choice and prove it against the frozen registration tree."""
    if credential.cm not in tree:
        raise MerklePathUnavailable(
            "commitment missing from the frozen registration tree"
        )
    pk = config.pk
    r = hebackend.draw_randomizer(pk, rng)
    ciphertext = hebackend.encrypt(pk, choice, r)
    nf = nullifier(credential.secret_id, config.election_id)
    stmt = zkproofs.VoteStatement(
        election_id=config.election_id,
        merkle_root=tree.root,
        nullifier=nf,
        ciphertext=ciphertext,
        pk=pk,
    )
    witness = zkproofs.VoteWitness(
        secret_id=credential.secret_id,
        v=choice,
        r=r,
        merkle_path=tuple(tree.path(credential.cm)),
    )
    proof = zkproofs.prove_vote(config.backend_id, stmt, witness, rng)
    return ledger.VoteTx(
        election_id=config.election_id,
        ciphertext_bytes=ciphertext.to_bytes(pk),
        nf=nf,
        proof=proof,
    )


@dataclass
class TallyParticipant:
    """Holds one key share; publishes its partial decryption after voting."""

    share: hebackend.KeyShare
    home_peer: int = 0

    def publish_share(
        self,
        config: ledger.ElectionConfig,
        c_sum: hebackend.Ciphertext,
        rng: DeterministicRng,
    ) -> ledger.TallyShareTx:
        partial = hebackend.partial_decrypt(
            self.share, config.params, config.pk, c_sum
        )
        proof = zkproofs.prove_share(
            self.share, config.params, config.pk, c_sum, partial, rng
        )
        return ledger.TallyShareTx(
            election_id=config.election_id,
            index=self.share.index,
            sigma_bytes=partial.sigma.to_bytes(config.pk.element_width, "big"),
            proof_bytes=proof.to_bytes(config.pk),
        )


# ---------------------------------------------------------------------------
# Adversaries
# ---------------------------------------------------------------------------

@dataclass
class AdversaryLog:
    """What each adversary attempted, for the run report."""

    attempts: list[dict] = field(default_factory=list)

    def record(self, kind: str, **info) -> None:
        self.attempts.append({"kind": kind, **info})


def double_vote_txs(
    voter: Voter,
    config: ledger.ElectionConfig,
    tree: MerkleTree,
    rng: DeterministicRng,
) -> tuple[ledger.VoteTx, ledger.VoteTx]:
    """Two well-formed ballots spending one nullifier with opposite choices.

    Both carry valid proofs; only the nullifier equality lets replicas tell
    they are the same voter, so at most one can ever be retained.
    """
    first = voter.cast(config, tree, rng.fork("first"), choice=0)
    second = voter.cast(config, tree, rng.fork("second"), choice=1)
    assert first.nf == second.nf
    return first, second


def invalid_choice_tx(
    voter: Voter,
    config: ledger.ElectionConfig,
    tree: MerkleTree,
    rng: DeterministicRng,
    *,
    choice: int = 2,
) -> ledger.VoteTx:
    """A ballot whose plaintext is outside {0, 1}, hand-assembled because the
    honest prover refuses to sign it. The validity proof bytes are borrowed
    from a legitimate encryption of zero, so the payload parses but cannot
    satisfy the re-encryption constraint."""
    credential = voter.credential
    pk = config.pk
    r = hebackend.draw_randomizer(pk, rng)
    ciphertext = hebackend.encrypt(pk, choice, r)
    nf = nullifier(credential.secret_id, config.election_id)
    witness = zkproofs.VoteWitness(
        secret_id=credential.secret_id,
        v=choice,
        r=r,
        merkle_path=tuple(tree.path(credential.cm)),
    )
    decoy_r = hebackend.draw_randomizer(pk, rng)
    decoy_ct = hebackend.encrypt(pk, 0, decoy_r)
    decoy_proof = zkproofs.prove_enc_validity(pk, decoy_ct, 0, decoy_r, rng)
    payload = witness.to_bytes(pk) + decoy_proof.to_bytes(pk)
    return ledger.VoteTx(
        election_id=config.election_id,
        ciphertext_bytes=ciphertext.to_bytes(pk),
        nf=nf,
        proof=zkproofs.VoteProof(backend=zkproofs.TRANSPARENT, payload=payload),
    )


def foreign_commitment_tx(
    credential: credentials.Credential, wrong_cm: bytes
) -> ledger.RegistrationTx:
    """A registration whose announced commitment differs from the credential's
    own binding; the presentation itself is genuine."""
    return ledger.RegistrationTx(
        cm=wrong_cm, presentation=credentials.present(credential)
    )


def sybil_attempts(
    registrar: credentials.RegistrarState,
    issuer: credentials.SigningKey,
    pids: list[bytes],
    election_id: bytes,
    schedule: list[int],
    rng: DeterministicRng,
    log: AdversaryLog | None = None,
) -> list[credentials.Credential]:
    """Replay a registration schedule (PIDs with repeats) against the registrar.

    Returns every credential actually issued; the registrar's person
    nullifier must cap that at one per distinct PID no matter the order or
    multiplicity of attempts.
    """
    issued = []
    for attempt, (when, pid) in enumerate(zip(schedule, pids)):
        vc = credentials.issuer_issue_vc(issuer, pid)
        try:
            cred = registrar.register(vc, election_id, when, rng.fork(f"a{attempt}"))
        except DuplicateRegistration:
            if log:
                log.record("sybil-blocked", pid=pid.hex(), when=when)
            continue
        issued.append(cred)
        if log:
            log.record("sybil-issued", pid=pid.hex(), when=when)
    return issued
