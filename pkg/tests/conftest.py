import pytest

from evotesim import actors, credentials, hebackend, ledger, zkproofs
from evotesim.rng import DeterministicRng

# Small enough to brute-force the whole message space, large enough that
# n = 35 and lambda = 12 are coprime as threshold decryption requires.
TOY_P, TOY_Q = 5, 7


@pytest.fixture(scope="session")
def toy_km() -> hebackend.KeyMaterial:
    return hebackend.from_primes(TOY_P, TOY_Q, t=2, big_n=3, seed=b"toy-fixture")


@pytest.fixture(scope="session")
def km512() -> hebackend.KeyMaterial:
    return hebackend.keygen(bits=512, t=3, big_n=5, seed=b"km512-fixture")


@pytest.fixture(scope="session")
def km2048() -> hebackend.KeyMaterial:
    """Production-width key; safe-prime search costs about a minute, paid once."""
    return hebackend.keygen(bits=2048, t=3, big_n=5, seed=b"km2048-fixture")


@pytest.fixture()
def rng() -> DeterministicRng:
    return DeterministicRng(b"test-rng")


@pytest.fixture(scope="session")
def issuer() -> credentials.SigningKey:
    return credentials.SigningKey.generate(DeterministicRng(b"issuer-fixture"))


@pytest.fixture()
def registrar(issuer) -> credentials.RegistrarState:
    return credentials.RegistrarState.create(
        DeterministicRng(b"registrar-fixture"),
        trusted_issuers=[issuer.public_bytes],
    )


class ElectionHarness:
    """Full election lifecycle driven against one in-process replica.

    Reuses session key material instead of running keygen, so tests can spin
    up many elections cheaply. Ticks: registration up to reg_close, voting up
    to voting_close, shares after.
    """

    REG_TICK = 10
    VOTE_TICK = 110

    def __init__(
        self,
        km: hebackend.KeyMaterial,
        issuer: credentials.SigningKey,
        seed: bytes,
        *,
        n_voters: int = 4,
        reg_close: int = 100,
        voting_close: int = 200,
    ):
        self.km = km
        self.issuer = issuer
        self.rng = DeterministicRng(seed)
        self.registrar = credentials.RegistrarState.create(
            self.rng.fork(b"registrar"), trusted_issuers=[issuer.public_bytes]
        )
        self.config = ledger.ElectionConfig(
            election_id=actors.derive_election_id("harness-" + seed.hex()),
            proposal_text="Adopt the proposal?",
            pk=km.pk,
            params=km.params,
            registrar_pk=self.registrar.public_key,
            backend_id=zkproofs.TRANSPARENT,
            registration_close=reg_close,
            voting_close=voting_close,
        )
        self.state = ledger.LedgerState()
        self.voters = [self.make_voter(i) for i in range(n_voters)]

    def make_voter(self, i: int, choice: int | None = None) -> actors.Voter:
        pid = b"person-%d" % i
        vc = credentials.issuer_issue_vc(self.issuer, pid)
        if choice is None:
            choice = i % 2
        return actors.Voter(pid=pid, vc=vc, choice=choice)

    def open_election(self) -> ledger.Verdict:
        return self.state.apply(ledger.ConfigTx(config=self.config), 1)

    def register(self, voter: actors.Voter, tick: int | None = None) -> ledger.Verdict:
        tx = voter.register(
            self.registrar,
            self.config.election_id,
            now=1_700_000_000 + (tick or self.REG_TICK),
            rng=self.rng.fork(b"issue" + voter.pid),
        )
        return self.state.apply(tx, tick or self.REG_TICK)

    def register_all(self) -> None:
        for voter in self.voters:
            verdict = self.register(voter)
            assert verdict.accepted, verdict

    def open_voting(self) -> None:
        self.state.advance_phase(self.config.registration_close)
        assert self.state.phase == ledger.Phase.VOTING

    def cast(self, voter: actors.Voter, tick: int | None = None, **kw) -> ledger.Verdict:
        tx = voter.cast(
            self.config,
            self.state.merkle_tree(),
            self.rng.fork(b"cast" + voter.pid),
            **kw,
        )
        return self.state.apply(tx, tick or self.VOTE_TICK)

    def cast_all(self) -> None:
        for voter in self.voters:
            verdict = self.cast(voter)
            assert verdict.accepted, verdict

    def publish_shares(self, indices=(1, 2, 3)) -> None:
        self.state.advance_phase(self.config.voting_close)
        c_sum = self.state.compute_sum()
        for idx in indices:
            participant = actors.TallyParticipant(share=self.km.shares[idx - 1])
            tx = participant.publish_share(
                self.config, c_sum, self.rng.fork(b"share%d" % idx)
            )
            verdict = self.state.apply(tx, self.config.voting_close + 1)
            assert verdict.accepted, verdict

    def run_all(self) -> ledger.TallyResult:
        self.open_election()
        self.register_all()
        self.open_voting()
        self.cast_all()
        self.publish_shares()
        return self.state.finalize_tally()


@pytest.fixture()
def harness(km512, issuer) -> ElectionHarness:
    return ElectionHarness(km512, issuer, b"default-harness")


# ---------------------------------------------------------------------------
# Dump tampering helpers
# ---------------------------------------------------------------------------

def rebuild_dump(records, footer: ledger.DumpFooter, *, fix_chain: bool = False) -> bytes:
    """Reassemble a dump from (tick, tx_bytes) records and a footer.

    fix_chain=True models a tampering adversary who recomputes the container
    chain hash after editing records; the semantic checks must still catch
    the edit. The state hash and tally always stay as the honest footer had
    them, since those commit to content the adversary cannot re-derive
    without being caught by replicas.
    """
    from evotesim.encoding import u8, u32, u64

    out = bytearray()
    out += ledger.DUMP_MAGIC
    out += u8(ledger.DUMP_VERSION)
    for tick, tx_bytes in records:
        out += u32(8 + len(tx_bytes))
        out += u64(tick)
        out += tx_bytes
    out += u32(0xFFFFFFFF)
    out += ledger._chain_hash(records) if fix_chain else footer.chain_hash
    out += footer.state_hash
    if footer.tally is None:
        out += u8(0) + u64(0) + u64(0)
    else:
        out += u8(1) + u64(footer.tally.yes_count) + u64(footer.tally.total_votes)
    return bytes(out)


def tamper_dump(dump: bytes, mode: str, *, fix_chain: bool = False) -> bytes:
    """Apply one named record-level tamper to an honest dump."""
    records, footer = ledger.parse_dump(dump)
    kinds = [rec[1][0] for rec in records]

    def first(kind: int) -> int:
        return kinds.index(kind)

    records = [list(r) for r in records]
    if mode == "flip-ciphertext":
        i = first(ledger.TX_VOTE)
        body = bytearray(records[i][1])
        body[40] ^= 0x01  # a byte inside the length-prefixed ciphertext
        records[i][1] = bytes(body)
    elif mode == "strip-proof":
        i = first(ledger.TX_VOTE)
        tx = ledger.parse_tx(records[i][1])
        stripped = ledger.VoteTx(
            election_id=tx.election_id,
            ciphertext_bytes=tx.ciphertext_bytes,
            nf=tx.nf,
            proof=zkproofs.VoteProof(backend=tx.proof.backend, payload=b""),
        )
        records[i][1] = stripped.to_bytes()
    elif mode == "forge-share":
        i = first(ledger.TX_SHARE)
        body = bytearray(records[i][1])
        body[-40] ^= 0x01  # inside the proof bytes
        records[i][1] = bytes(body)
    elif mode == "remove-vote":
        i = first(ledger.TX_VOTE)
        del records[i]
    elif mode == "reorder-votes":
        votes = [i for i, k in enumerate(kinds) if k == ledger.TX_VOTE]
        a, b = votes[0], votes[-1]
        records[a], records[b] = records[b], records[a]
    elif mode == "alter-config":
        i = first(ledger.TX_CONFIG)
        body = bytearray(records[i][1])
        body[-1] ^= 0x01  # voting_close low byte
        records[i][1] = bytes(body)
    else:
        raise ValueError(f"unknown tamper mode {mode!r}")
    return rebuild_dump([tuple(r) for r in records], footer, fix_chain=fix_chain)


TAMPER_MODES = (
    "flip-ciphertext",
    "strip-proof",
    "forge-share",
    "remove-vote",
    "reorder-votes",
    "alter-config",
)
