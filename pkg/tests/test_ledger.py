"""Bulletin-board state machine: phases, rejection reasons, confluence, audit."""

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import TAMPER_MODES, ElectionHarness, tamper_dump
from evotesim import actors, hebackend, ledger, zkproofs
from evotesim.errors import DumpCorrupt, EmptyBallotBox, InsufficientShares, MalformedPayload
from evotesim.merkle import MerkleTree
from evotesim.rng import DeterministicRng


# ---------------------------------------------------------------------------
# Config and transaction wire formats
# ---------------------------------------------------------------------------

def test_config_roundtrip(harness):
    cfg = harness.config
    again = ledger.ElectionConfig.from_bytes(cfg.to_bytes())
    assert again == cfg
    assert again.fingerprint() == cfg.fingerprint()


def test_config_rejects_malformed(harness):
    wire = harness.config.to_bytes()
    with pytest.raises(MalformedPayload):
        ledger.ElectionConfig.from_bytes(wire[:-1])
    with pytest.raises(MalformedPayload):
        ledger.ElectionConfig.from_bytes(wire + b"\x00")
    bad_backend = bytearray(wire)
    bad_backend[-17] = 9  # backend tag sits 17 bytes from the tail
    with pytest.raises(MalformedPayload):
        ledger.ElectionConfig.from_bytes(bytes(bad_backend))


def test_config_rejects_disordered_schedule(harness):
    with pytest.raises(ValueError):
        ledger.ElectionConfig(
            election_id=harness.config.election_id,
            proposal_text="p",
            pk=harness.km.pk,
            params=harness.km.params,
            registrar_pk=harness.registrar.public_key,
            backend_id=zkproofs.TRANSPARENT,
            registration_close=200,
            voting_close=100,
        )


def test_all_tx_kinds_roundtrip(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    harness.cast_all()
    harness.publish_shares()
    for _, tx in harness.state.records():
        wire = tx.to_bytes()
        again = ledger.parse_tx(wire)
        assert again.to_bytes() == wire
        assert again.hash() == tx.hash()


def test_parse_tx_rejects_unknown_kind():
    with pytest.raises(MalformedPayload):
        ledger.parse_tx(b"\x09" + bytes(40))


def test_parse_tx_rejects_trailing_bytes(harness):
    harness.open_election()
    tx = harness.voters[0].register(
        harness.registrar, harness.config.election_id, 0, harness.rng
    )
    with pytest.raises(MalformedPayload):
        ledger.parse_tx(tx.to_bytes() + b"\x00")


# ---------------------------------------------------------------------------
# Phase machine
# ---------------------------------------------------------------------------

def test_phase_progression(harness):
    state = harness.state
    assert state.phase == ledger.Phase.SETUP
    state.advance_phase(50)
    assert state.phase == ledger.Phase.SETUP  # clock moves, phase needs config
    harness.open_election()
    assert state.phase == ledger.Phase.REGISTRATION
    state.advance_phase(100)
    assert state.phase == ledger.Phase.VOTING
    assert state.frozen_root == state.merkle_tree().root
    state.advance_phase(200)
    assert state.phase == ledger.Phase.TALLY


def test_phase_never_regresses(harness):
    harness.open_election()
    harness.state.advance_phase(150)
    assert harness.state.phase == ledger.Phase.VOTING
    harness.state.advance_phase(10)  # stale tick must not rewind
    assert harness.state.tick == 150
    assert harness.state.phase == ledger.Phase.VOTING


def test_merkle_root_frozen_at_voting(harness):
    harness.open_election()
    harness.register_all()
    tree_before = harness.state.merkle_tree()
    harness.open_voting()
    assert harness.state.frozen_root == tree_before.root
    # Skipping straight from registration to tally must still freeze a root.
    other = ElectionHarness(harness.km, harness.issuer, b"skip-to-tally")
    other.open_election()
    other.register(other.voters[0])
    other.state.advance_phase(other.config.voting_close + 5)
    assert other.state.phase == ledger.Phase.TALLY
    assert other.state.frozen_root is not None


# ---------------------------------------------------------------------------
# Rejection reasons, one by one
# ---------------------------------------------------------------------------

def test_config_applied_once(harness):
    assert harness.open_election().accepted
    verdict = harness.state.apply(ledger.ConfigTx(config=harness.config), 2)
    assert verdict == ledger.Rejected(ledger.Reason.CONFIG_ALREADY_SET)


def test_registration_before_config_rejected(harness):
    tx = harness.voters[0].register(
        harness.registrar, harness.config.election_id, 0, harness.rng
    )
    verdict = harness.state.apply(tx, 1)
    assert not verdict.accepted
    assert verdict.reason == ledger.Reason.WRONG_PHASE


def test_registration_for_other_election_rejected(harness, km512, issuer):
    harness.open_election()
    other = ElectionHarness(km512, issuer, b"other-election")
    tx = other.voters[0].register(
        other.registrar, other.config.election_id, 0, other.rng
    )
    verdict = harness.state.apply(tx, 5)
    assert verdict.reason == ledger.Reason.UNKNOWN_ELECTION


def test_registration_after_close_rejected(harness):
    harness.open_election()
    tx = harness.voters[0].register(
        harness.registrar, harness.config.election_id, 0, harness.rng
    )
    verdict = harness.state.apply(tx, harness.config.registration_close)
    assert verdict.reason == ledger.Reason.WRONG_PHASE
    assert "VOTING" in verdict.detail


def test_duplicate_registration_rejected_not_absorbed(harness):
    """Replaying the identical registration bytes is a rejection, not a no-op."""
    harness.open_election()
    voter = harness.voters[0]
    tx = voter.register(harness.registrar, harness.config.election_id, 0, harness.rng)
    assert harness.state.apply(tx, 10).accepted
    replay = ledger.parse_tx(tx.to_bytes())
    verdict = harness.state.apply(replay, 11)
    assert verdict.reason == ledger.Reason.DUPLICATE_COMMITMENT


def test_foreign_commitment_rejected(harness):
    harness.open_election()
    voter = harness.voters[0]
    voter.register(harness.registrar, harness.config.election_id, 0, harness.rng)
    tx = actors.foreign_commitment_tx(voter.credential, wrong_cm=bytes(32))
    verdict = harness.state.apply(tx, 10)
    assert verdict.reason == ledger.Reason.INVALID_PROOF
    assert "binding" in verdict.detail


def test_tampered_presentation_rejected(harness):
    harness.open_election()
    voter = harness.voters[0]
    tx = voter.register(harness.registrar, harness.config.election_id, 0, harness.rng)
    wire = bytearray(tx.to_bytes())
    wire[-10] ^= 0x01  # inside the presentation
    verdict = harness.state.apply(ledger.parse_tx(bytes(wire)), 10)
    assert verdict.reason == ledger.Reason.INVALID_PROOF


def test_vote_outside_voting_phase_rejected(harness):
    harness.open_election()
    harness.register_all()
    voter = harness.voters[0]
    tree = harness.state.merkle_tree()
    tx = voter.cast(harness.config, tree, harness.rng)
    verdict = harness.state.apply(tx, 50)  # still REGISTRATION
    assert verdict.reason == ledger.Reason.WRONG_PHASE
    verdict = harness.state.apply(tx, harness.config.voting_close)  # TALLY
    assert verdict.reason == ledger.Reason.WRONG_PHASE


def test_vote_for_other_election_rejected(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    tx = harness.voters[0].cast(
        harness.config, harness.state.merkle_tree(), harness.rng
    )
    alien = ledger.VoteTx(
        election_id=bytes(32),
        ciphertext_bytes=tx.ciphertext_bytes,
        nf=tx.nf,
        proof=tx.proof,
    )
    assert harness.state.apply(alien, 110).reason == ledger.Reason.UNKNOWN_ELECTION


def test_vote_with_malformed_ciphertext_rejected(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    tx = harness.voters[0].cast(
        harness.config, harness.state.merkle_tree(), harness.rng
    )
    bad = ledger.VoteTx(
        election_id=tx.election_id,
        ciphertext_bytes=bytes(len(tx.ciphertext_bytes)),  # zero: not a unit
        nf=tx.nf,
        proof=tx.proof,
    )
    verdict = harness.state.apply(bad, 110)
    assert verdict.reason == ledger.Reason.INVALID_PROOF
    assert "unit" in verdict.detail


def test_vote_with_invalid_choice_rejected(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    voter = harness.voters[0]
    tx = actors.invalid_choice_tx(
        voter, harness.config, harness.state.merkle_tree(), harness.rng
    )
    verdict = harness.state.apply(tx, 110)
    assert verdict.reason == ledger.Reason.INVALID_PROOF


def test_vote_from_unregistered_credential_rejected(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    ghost = harness.make_voter(99)
    ghost.credential = harness.registrar.register(
        ghost.vc, harness.config.election_id, 0, harness.rng
    )
    # The credential is genuine but its commitment never hit the ledger, so
    # there is no membership path in the frozen tree.
    fake_tree = MerkleTree(list(harness.state.commit_set) + [ghost.credential.cm])
    tx = ghost.cast(harness.config, fake_tree, harness.rng)
    verdict = harness.state.apply(tx, 110)
    assert verdict.reason == ledger.Reason.INVALID_PROOF
    assert zkproofs.C1_MEMBERSHIP in verdict.detail


def test_double_vote_exactly_one_retained(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    tree = harness.state.merkle_tree()
    first, second = actors.double_vote_txs(
        harness.voters[0], harness.config, tree, harness.rng
    )
    v1 = harness.state.apply(first, 110)
    v2 = harness.state.apply(second, 111)
    assert v1.accepted
    winner = min([first, second], key=lambda tx: tx.hash())
    if winner is second:
        assert v2.accepted and v2.evicted == first.hash()
    else:
        assert not v2.accepted
        assert v2.reason == ledger.Reason.DUPLICATE_NULLIFIER
    assert len(harness.state.vote_nullifiers) == 1
    retained = harness.state._ballots[first.nf][0].tx
    assert retained.hash() == winner.hash()


def test_double_vote_confluence_both_orders(km512, issuer):
    """Replicas seeing conflicting ballots in opposite orders must agree."""
    results = []
    for order in (0, 1):
        h = ElectionHarness(km512, issuer, b"confluence")
        h.open_election()
        h.register_all()
        h.open_voting()
        pair = actors.double_vote_txs(
            h.voters[0], h.config, h.state.merkle_tree(), h.rng
        )
        txs = [ledger.parse_tx(t.to_bytes()) for t in pair]
        if order:
            txs.reverse()
        for i, tx in enumerate(txs):
            h.state.apply(tx, 110 + i)
        results.append(h.state.ledger_hash())
    assert results[0] == results[1]


def test_share_phase_and_validation(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    harness.cast_all()
    c_sum_early = harness.state.compute_sum()
    participant = actors.TallyParticipant(share=harness.km.shares[0])
    tx = participant.publish_share(harness.config, c_sum_early, harness.rng)
    verdict = harness.state.apply(tx, 150)  # still VOTING
    assert verdict.reason == ledger.Reason.WRONG_PHASE

    harness.state.advance_phase(harness.config.voting_close)
    assert harness.state.apply(tx, 201).accepted

    ghost = ledger.TallyShareTx(
        election_id=harness.config.election_id,
        index=harness.config.big_n + 1,
        sigma_bytes=tx.sigma_bytes,
        proof_bytes=tx.proof_bytes,
    )
    verdict = harness.state.apply(ghost, 202)
    assert verdict.reason == ledger.Reason.INVALID_PROOF
    assert "index" in verdict.detail

    wrong_width = ledger.TallyShareTx(
        election_id=harness.config.election_id,
        index=2,
        sigma_bytes=tx.sigma_bytes[:-1],
        proof_bytes=tx.proof_bytes,
    )
    assert harness.state.apply(wrong_width, 203).reason == ledger.Reason.INVALID_PROOF

    forged = ledger.TallyShareTx(
        election_id=harness.config.election_id,
        index=2,
        sigma_bytes=tx.sigma_bytes,  # share 1's sigma under index 2
        proof_bytes=tx.proof_bytes,
    )
    assert harness.state.apply(forged, 204).reason == ledger.Reason.INVALID_PROOF

    replay = ledger.parse_tx(tx.to_bytes())
    assert harness.state.apply(replay, 205).reason == ledger.Reason.DUPLICATE_SHARE_INDEX


def test_share_with_empty_ballot_box_rejected(harness):
    harness.open_election()
    harness.register_all()
    harness.state.advance_phase(harness.config.voting_close)
    tx = ledger.TallyShareTx(
        election_id=harness.config.election_id,
        index=1,
        sigma_bytes=bytes(harness.km.pk.element_width),
        proof_bytes=bytes(zkproofs.ShareCorrectnessProof.wire_length(harness.km.pk)),
    )
    verdict = harness.state.apply(tx, 201)
    assert verdict.reason == ledger.Reason.INVALID_PROOF
    assert "ballots" in verdict.detail


# ---------------------------------------------------------------------------
# Tallying
# ---------------------------------------------------------------------------

def test_full_lifecycle_tally(harness):
    result = harness.run_all()
    expected_yes = sum(v.choice for v in harness.voters)
    assert result.yes_count == expected_yes
    assert result.total_votes == len(harness.voters)
    assert result.no_count == result.total_votes - expected_yes
    assert harness.state.phase == ledger.Phase.CLOSED
    assert harness.state.finalize_tally() == result  # idempotent


def test_compute_sum_matches_ciphertext_product(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    harness.cast_all()
    pk = harness.km.pk
    product = 1
    for ct in harness.state.ballot_box:
        product = product * ct.value % pk.n_squared
    assert harness.state.compute_sum().value == product


def test_compute_sum_empty_raises(harness):
    harness.open_election()
    with pytest.raises(EmptyBallotBox):
        harness.state.compute_sum()


def test_tally_requires_threshold(harness):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    harness.cast_all()
    harness.publish_shares(indices=(1, 2))  # t = 3
    with pytest.raises(InsufficientShares):
        harness.state.finalize_tally()


def test_tally_uses_any_t_shares(km512, issuer):
    tallies = set()
    for indices in [(1, 2, 3), (2, 4, 5), (1, 3, 5)]:
        h = ElectionHarness(km512, issuer, b"subset-test")
        h.open_election()
        h.register_all()
        h.open_voting()
        h.cast_all()
        h.publish_shares(indices=indices)
        result = h.state.finalize_tally()
        tallies.add((result.yes_count, result.total_votes))
    assert len(tallies) == 1


# ---------------------------------------------------------------------------
# Canonical digests and records
# ---------------------------------------------------------------------------

def test_ledger_hash_ignores_arrival_ticks(km512, issuer):
    a = ElectionHarness(km512, issuer, b"tick-shift")
    b = ElectionHarness(km512, issuer, b"tick-shift")
    for h, offset in ((a, 0), (b, 7)):
        h.open_election()
        for v in h.voters:
            h.register(v, tick=h.REG_TICK + offset)
        h.open_voting()
        for v in h.voters:
            h.cast(v, tick=h.VOTE_TICK + offset)
    assert a.state.ledger_hash() == b.state.ledger_hash()


def test_ledger_hash_sees_content_change(km512, issuer):
    a = ElectionHarness(km512, issuer, b"content-a", n_voters=2)
    b = ElectionHarness(km512, issuer, b"content-b", n_voters=2)
    for h in (a, b):
        h.open_election()
        h.register_all()
    assert a.state.ledger_hash() != b.state.ledger_hash()


def test_records_sorted_and_config_first(harness):
    harness.run_all()
    records = harness.state.records()
    assert isinstance(records[0][1], ledger.ConfigTx)
    keys = [(tick, tx.hash()) for tick, tx in records[1:]]
    assert keys == sorted(keys)


@settings(deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(order=st.permutations(range(4)))
def test_confluence_any_registration_order(km512, issuer, order):
    """Registration arrival order never changes the resulting state digest."""
    h = ElectionHarness(km512, issuer, b"perm-test")
    h.open_election()
    txs = [
        v.register(h.registrar, h.config.election_id, 0, h.rng.fork(v.pid))
        for v in h.voters
    ]
    for i in order:
        assert h.state.apply(txs[i], 10).accepted
    digest = h.state.ledger_hash()
    reference = ElectionHarness(km512, issuer, b"perm-test")
    reference.open_election()
    for tx in txs:
        reference.state.apply(ledger.parse_tx(tx.to_bytes()), 20)
    assert digest == reference.state.ledger_hash()


# ---------------------------------------------------------------------------
# Dump, replay, audit
# ---------------------------------------------------------------------------

@pytest.fixture()
def finished(harness) -> ElectionHarness:
    harness.run_all()
    return harness


def test_dump_roundtrip_and_determinism(finished):
    dump = ledger.serialize_dump(finished.state)
    assert dump == ledger.serialize_dump(finished.state)
    records, footer = ledger.parse_dump(dump)
    assert footer.state_hash == finished.state.ledger_hash()
    assert footer.tally == finished.state.tally
    assert len(records) == len(finished.state.records())


def test_dump_text_rendering(finished):
    dump = ledger.serialize_dump(finished.state)
    text = ledger.render_dump_text(dump)
    lines = text.splitlines()
    assert lines[0].startswith("dump version=1 records=")
    assert sum(1 for ln in lines if " kind=vote " in ln) == len(finished.voters)
    assert any(ln.startswith("tally yes=") for ln in lines)
    assert ledger.render_dump_text(dump) == text


def test_parse_dump_rejects_container_damage(finished):
    dump = ledger.serialize_dump(finished.state)
    with pytest.raises(DumpCorrupt):
        ledger.parse_dump(dump[:-1])
    with pytest.raises(DumpCorrupt):
        ledger.parse_dump(b"NOTALOG!" + dump[8:])
    with pytest.raises(DumpCorrupt):
        ledger.parse_dump(dump[:8] + b"\x02" + dump[9:])  # version bump
    short_frame = dump[:9] + (5).to_bytes(4, "big") + dump[13:]
    with pytest.raises(DumpCorrupt):
        ledger.parse_dump(short_frame)


def test_audit_accepts_honest_dump(finished):
    report = ledger.audit(ledger.serialize_dump(finished.state))
    assert report.ok, report.as_dict()
    assert report.tally == finished.state.tally
    ids = [c.check_id for c in report.checks]
    assert ids == [
        "container",
        "replay",
        "nullifier-uniqueness",
        "conservation",
        "merkle-root",
        "homomorphic-sum",
        "tally-recombination",
        "state-hash",
    ]


def test_audit_accepts_prefix_dump_without_tally(harness):
    """A replica dumped mid-election (no shares yet) must audit clean."""
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    harness.cast_all()
    report = ledger.audit(ledger.serialize_dump(harness.state))
    assert report.ok, report.as_dict()
    assert report.tally is None


@pytest.mark.parametrize("mode", TAMPER_MODES)
def test_audit_flags_record_tampering(finished, mode):
    dump = ledger.serialize_dump(finished.state)
    report = ledger.audit(tamper_dump(dump, mode))
    assert not report.ok, mode


@pytest.mark.parametrize(
    "mode", ["flip-ciphertext", "strip-proof", "forge-share", "remove-vote", "alter-config"]
)
def test_audit_flags_tampering_even_with_fixed_chain_hash(finished, mode):
    """An adversary recomputing the container hash still cannot pass replay,
    sum recomputation, or the state digest."""
    dump = ledger.serialize_dump(finished.state)
    report = ledger.audit(tamper_dump(dump, mode, fix_chain=True))
    assert not report.ok, mode
    container = report.checks[0]
    assert container.check_id == "container" and container.ok


def test_audit_flags_tally_flag_flip(finished):
    """Clearing the footer's tally flag must not hide a countable result."""
    dump = bytearray(ledger.serialize_dump(finished.state))
    dump[-17] = 0  # has_tally byte
    report = ledger.audit(bytes(dump))
    assert not report.ok
    failing = {c.check_id for c in report.checks if not c.ok}
    assert "tally-recombination" in failing


def test_audit_flags_forged_footer_tally(finished):
    dump = bytearray(ledger.serialize_dump(finished.state))
    dump[-9] ^= 0x01  # yes-count low byte
    report = ledger.audit(bytes(dump))
    assert not report.ok


def test_every_single_byte_flip_is_flagged_sampled(finished):
    """Any single corrupted byte anywhere in the dump must fail the audit."""
    dump = ledger.serialize_dump(finished.state)
    for pos in range(0, len(dump), 97):
        mutated = bytearray(dump)
        mutated[pos] ^= 0x01
        try:
            report = ledger.audit(bytes(mutated))
        except DumpCorrupt:
            continue
        assert not report.ok, f"byte flip at {pos} went unnoticed"


def test_verify_cache_skips_recomputation(harness, monkeypatch):
    harness.open_election()
    harness.register_all()
    harness.open_voting()
    tree = harness.state.merkle_tree()
    tx = harness.voters[0].cast(harness.config, tree, harness.rng)

    calls = {"n": 0}
    real = zkproofs.verify_vote

    def counting(backend, stmt, proof):
        calls["n"] += 1
        return real(backend, stmt, proof)

    monkeypatch.setattr(ledger.zkproofs, "verify_vote", counting)
    cache: dict = {}
    assert harness.state.apply(tx, 110, verify_cache=cache).accepted
    replay = ledger.parse_tx(tx.to_bytes())
    verdict = harness.state.apply(replay, 111, verify_cache=cache)
    assert verdict.reason == ledger.Reason.DUPLICATE_NULLIFIER
    assert calls["n"] == 1  # second apply answered from the cache
