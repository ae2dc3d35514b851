"""Protocol roles: lifecycle wiring and the adversary construction kit."""

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import ElectionHarness
from evotesim import actors, credentials, hebackend, ledger, zkproofs
from evotesim.errors import MerklePathUnavailable
from evotesim.hashing import nullifier
from evotesim.merkle import MerkleTree
from evotesim.rng import DeterministicRng


def test_derive_election_id():
    a = actors.derive_election_id("city-budget-2030")
    assert len(a) == 32
    assert a == actors.derive_election_id("city-budget-2030")
    assert a != actors.derive_election_id("city-budget-2031")


def test_organizer_create_wires_everything(issuer):
    org = actors.Organizer.create(
        election_label="lib-levy",
        proposal_text="Fund the library?",
        bits=256,
        t=2,
        big_n=3,
        registration_close=50,
        voting_close=100,
        rng=DeterministicRng(b"org"),
        trusted_issuers=[issuer.public_bytes],
    )
    assert org.config.election_id == actors.derive_election_id("lib-levy")
    assert org.config.t == 2 and org.config.big_n == 3
    assert len(org.shares) == 3
    assert org.config.registrar_pk == org.registrar.public_key
    assert issuer.public_bytes in org.registrar.trusted_issuers
    # The published config carries only public material and round-trips.
    assert ledger.ElectionConfig.from_bytes(org.config.to_bytes()) == org.config

    state = ledger.LedgerState()
    assert state.apply(org.config_tx(), 1).accepted
    assert state.phase == ledger.Phase.REGISTRATION


def test_organizer_create_is_seed_deterministic(issuer):
    def build():
        return actors.Organizer.create(
            election_label="x",
            proposal_text="p",
            bits=256,
            t=2,
            big_n=3,
            registration_close=10,
            voting_close=20,
            rng=DeterministicRng(b"fixed"),
        )

    assert build().config.to_bytes() == build().config.to_bytes()


def test_voter_lifecycle(harness):
    harness.open_election()
    voter = harness.voters[0]
    assert not voter.registered
    tx = voter.register(harness.registrar, harness.config.election_id, 0, harness.rng)
    assert voter.registered
    assert tx.cm == voter.credential.cm
    assert harness.state.apply(tx, 10).accepted
    harness.open_voting()
    vote = voter.cast(harness.config, harness.state.merkle_tree(), harness.rng)
    assert harness.state.apply(vote, 110).accepted


def test_cast_before_register_raises(harness):
    harness.open_election()
    with pytest.raises(MerklePathUnavailable):
        harness.voters[0].cast(harness.config, MerkleTree([]), harness.rng)


def test_vote_tx_requires_membership(harness):
    harness.open_election()
    voter = harness.voters[0]
    voter.register(harness.registrar, harness.config.election_id, 0, harness.rng)
    foreign_tree = MerkleTree([bytes(32)])
    with pytest.raises(MerklePathUnavailable):
        actors.vote_tx(voter.credential, 1, harness.config, foreign_tree, harness.rng)


def test_vote_tx_nullifier_binding(harness):
    harness.open_election()
    voter = harness.voters[0]
    assert harness.register(voter).accepted
    harness.open_voting()
    tree = harness.state.merkle_tree()
    tx = actors.vote_tx(voter.credential, 1, harness.config, tree, harness.rng)
    assert tx.nf == nullifier(voter.credential.secret_id, harness.config.election_id)


def test_double_vote_txs_share_one_nullifier(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    tree = harness.state.merkle_tree()
    first, second = actors.double_vote_txs(
        harness.voters[0], harness.config, tree, harness.rng
    )
    assert first.nf == second.nf
    assert first.ciphertext_bytes != second.ciphertext_bytes
    assert first.hash() != second.hash()

    def proof_ok(tx):
        stmt = zkproofs.VoteStatement(
            election_id=tx.election_id,
            merkle_root=tree.root,
            nullifier=tx.nf,
            ciphertext=hebackend.Ciphertext.from_bytes(
                tx.ciphertext_bytes, harness.km.pk
            ),
            pk=harness.km.pk,
        )
        return zkproofs.verify_vote(zkproofs.TRANSPARENT, stmt, tx.proof)

    # Individually each carries a valid proof; only the shared nullifier
    # keeps the pair from both landing.
    assert proof_ok(first) is None and proof_ok(second) is None
    for tx in (first, second):
        harness.state.apply(tx, 110)
    assert len(harness.state.vote_nullifiers) == 1


def test_invalid_choice_tx_parses_but_fails_c3(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    voter = harness.voters[0]
    tx = actors.invalid_choice_tx(
        voter, harness.config, harness.state.merkle_tree(), harness.rng, choice=2
    )
    reparsed = ledger.parse_tx(tx.to_bytes())  # wire-valid on purpose
    verdict = harness.state.apply(reparsed, 110)
    assert verdict.reason == ledger.Reason.INVALID_PROOF
    assert zkproofs.C3_ENCRYPTION in verdict.detail


def test_foreign_commitment_tx_uses_genuine_presentation(harness):
    harness.open_election()
    voter = harness.voters[0]
    voter.register(harness.registrar, harness.config.election_id, 0, harness.rng)
    tx = actors.foreign_commitment_tx(voter.credential, wrong_cm=b"\x42" * 32)
    # The presentation itself verifies; only the announced binding is wrong.
    cm = credentials.verify_presentation(
        tx.presentation, harness.registrar.public_key, harness.config.election_id
    )
    assert cm == voter.credential.cm != tx.cm
    assert harness.state.apply(tx, 10).reason == ledger.Reason.INVALID_PROOF


def test_tally_participant_share_verifies(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    harness.cast_all()
    c_sum = harness.state.compute_sum()
    participant = actors.TallyParticipant(share=harness.km.shares[2])
    tx = participant.publish_share(harness.config, c_sum, harness.rng)
    assert tx.index == 3
    partial = hebackend.PartialDecryption(
        index=tx.index, sigma=int.from_bytes(tx.sigma_bytes, "big")
    )
    proof = zkproofs.ShareCorrectnessProof.from_bytes(tx.proof_bytes, harness.km.pk)
    assert (
        zkproofs.verify_share(harness.km.params, harness.km.pk, c_sum, partial, proof)
        is None
    )


def test_adversary_log():
    log = actors.AdversaryLog()
    log.record("double-vote", voter="v1", outcome="rejected")
    assert log.attempts == [
        {"kind": "double-vote", "voter": "v1", "outcome": "rejected"}
    ]


def test_sybil_attempts_capped_at_distinct_pids(issuer, registrar):
    eid = actors.derive_election_id("sybil-test")
    pids = [b"alice", b"bob", b"alice", b"carol", b"bob", b"alice"]
    log = actors.AdversaryLog()
    issued = actors.sybil_attempts(
        registrar, issuer, pids, eid, list(range(len(pids))), DeterministicRng(b"s"), log
    )
    assert len(issued) == 3  # alice, bob, carol exactly once each
    kinds = [a["kind"] for a in log.attempts]
    assert kinds.count("sybil-issued") == 3
    assert kinds.count("sybil-blocked") == 3


@settings(deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    data=st.lists(st.integers(min_value=0, max_value=7), min_size=1, max_size=30)
)
def test_sybil_property_issued_equals_distinct(issuer, data):
    """Whatever the attempt schedule, issuance equals the distinct-PID count."""
    registrar = credentials.RegistrarState.create(
        DeterministicRng(b"sybil-prop"), trusted_issuers=[issuer.public_bytes]
    )
    eid = actors.derive_election_id("sybil-prop")
    pids = [b"pid-%d" % i for i in data]
    issued = actors.sybil_attempts(
        registrar, issuer, pids, eid, list(range(len(pids))), DeterministicRng(b"r")
    )
    assert len(issued) == len(set(data))
