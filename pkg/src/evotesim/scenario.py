"""Scenario files and the election orchestrator.

A scenario is a JSON document (schema below) that fixes everything about one
simulated election: key parameters, voter population, adversary mix, network
conditions, and the phase schedule. Given the mandatory seed, a run is fully
deterministic: rerunning the same file produces byte-identical ledger dumps.

The orchestrator schedules every actor action inside the simulator's event
loop with propagation margins derived from the network parameters. The
anti-entropy heartbeat walks a round-robin schedule, so any transaction held
by an honest peer provably reaches every honest peer within (peers - 1)
rounds; the margin before each phase boundary is sized to that full cycle,
which makes convergence a guarantee rather than a probability, independent
of the drop rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from . import actors, credentials, hebackend, ledger, netsim
from .errors import ScenarioError
from .rng import DeterministicRng

# Credential issuance timestamps: a fixed epoch plus the sim tick.
BASE_TIMESTAMP = 1_700_000_000

ADVERSARY_KINDS = (
    "double_vote",
    "re_register",
    "foreign_commitment",
    "invalid_choice",
    "replay_foreign_vote",
)

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["seed", "voters"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": ["integer", "string"]},
        "proposal": {"type": "string", "default": "Adopt the proposal?"},
        "election_label": {"type": "string"},
        "bits": {"type": "integer", "minimum": 256, "default": 512},
        "threshold": {
            "type": "object",
            "required": ["t", "n"],
            "additionalProperties": False,
            "properties": {
                "t": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1, "maximum": 64},
            },
        },
        "voters": {"type": "integer", "minimum": 1, "maximum": 100000},
        "yes_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "share_holders": {"enum": ["committee", "voters"]},
        "multi_peer_submission": {"type": "boolean"},
        "adversaries": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                kind: {"type": "integer", "minimum": 0} for kind in ADVERSARY_KINDS
            },
        },
        "network": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "peers": {"type": "integer", "minimum": 1, "maximum": 500},
                "fanout": {"type": "integer", "minimum": 1},
                "latency": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "drop_rate": {"type": "number", "minimum": 0, "maximum": 0.99},
                "heartbeat_interval": {"type": "integer", "minimum": 1},
                "partitions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["start", "end", "side_a"],
                        "additionalProperties": False,
                        "properties": {
                            "start": {"type": "integer", "minimum": 0},
                            "end": {"type": "integer", "minimum": 0},
                            "side_a": {
                                "type": "array",
                                "items": {"type": "integer", "minimum": 0},
                            },
                        },
                    },
                },
                "byzantine": {
                    "type": "object",
                    "additionalProperties": {"enum": list(netsim.BEHAVIORS)},
                },
            },
        },
        "schedule": {
            "type": "object",
            "required": ["registration_close", "voting_close", "max_ticks"],
            "additionalProperties": False,
            "properties": {
                "registration_close": {"type": "integer", "minimum": 2},
                "voting_close": {"type": "integer", "minimum": 3},
                "max_ticks": {"type": "integer", "minimum": 4},
            },
        },
    },
}


@dataclass(frozen=True)
class Schedule:
    registration_close: int
    voting_close: int
    max_ticks: int


@dataclass(frozen=True)
class Scenario:
    seed: bytes
    proposal: str
    election_label: str
    bits: int
    t: int
    big_n: int
    voters: int
    yes_fraction: float
    share_holders: str
    multi_peer_submission: bool
    adversaries: dict[str, int]
    network: netsim.NetworkParams
    schedule: Schedule

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        try:
            jsonschema.validate(doc, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ScenarioError(f"at {path}: {exc.message}") from None

        seed_field = doc["seed"]
        seed = (
            str(seed_field).encode()
            if isinstance(seed_field, int)
            else seed_field.encode()
        )
        threshold = doc.get("threshold", {"t": 2, "n": 3})
        net = doc.get("network", {})
        raw_partitions = net.get("partitions", [])
        byz = {int(k): v for k, v in net.get("byzantine", {}).items()}
        peers = net.get("peers", 5)
        params = netsim.NetworkParams(
            peers=peers,
            fanout=net.get("fanout", 3),
            latency=tuple(net.get("latency", (1, 3))),
            drop_rate=net.get("drop_rate", 0.0),
            heartbeat_interval=net.get("heartbeat_interval", 2),
            partitions=tuple(
                netsim.Partition(
                    start=p["start"], end=p["end"], side_a=frozenset(p["side_a"])
                )
                for p in raw_partitions
            ),
            byzantine=byz,
        )

        adversaries = {
            kind: doc.get("adversaries", {}).get(kind, 0)
            for kind in ADVERSARY_KINDS
        }
        voters = doc["voters"]

        if "schedule" in doc:
            schedule = Schedule(
                registration_close=doc["schedule"]["registration_close"],
                voting_close=doc["schedule"]["voting_close"],
                max_ticks=doc["schedule"]["max_ticks"],
            )
        else:
            schedule = derive_schedule(params, voters, sum(adversaries.values()))

        scenario = cls(
            seed=seed,
            proposal=doc.get("proposal", "Adopt the proposal?"),
            election_label=doc.get("election_label", f"election-{seed_field}"),
            bits=doc.get("bits", 512),
            t=threshold["t"],
            big_n=threshold["n"],
            voters=voters,
            yes_fraction=doc.get("yes_fraction", 0.5),
            share_holders=doc.get("share_holders", "committee"),
            multi_peer_submission=doc.get("multi_peer_submission", False),
            adversaries=adversaries,
            network=params,
            schedule=schedule,
        )
        scenario.validate()
        return scenario

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ScenarioError("scenario root must be a JSON object")
        return cls.from_dict(doc)

    def validate(self) -> None:
        if self.t > self.big_n:
            raise ScenarioError(f"threshold t={self.t} exceeds n={self.big_n}")
        margin = propagation_margin(self.network)
        sched = self.schedule
        if sched.registration_close < 2 + margin:
            raise ScenarioError(
                f"registration_close {sched.registration_close} leaves no room "
                f"for the propagation margin {margin}"
            )
        if sched.voting_close < sched.registration_close + 2 + margin:
            raise ScenarioError(
                f"voting window [{sched.registration_close}, "
                f"{sched.voting_close}) shorter than the margin {margin}"
            )
        if sched.max_ticks < sched.voting_close + 2 + margin:
            raise ScenarioError(
                f"max_ticks {sched.max_ticks} leaves no room to spread and "
                f"propagate tally shares (margin {margin})"
            )
        boundaries = (sched.registration_close, sched.voting_close, sched.max_ticks)
        for p in self.network.partitions:
            if p.end > sched.max_ticks - margin:
                raise ScenarioError(
                    "partition must heal at least one propagation margin "
                    "before max_ticks"
                )
            for b in boundaries[:2]:
                if p.start < b and p.end + margin > b:
                    raise ScenarioError(
                        f"partition [{p.start}, {p.end}) too close to the "
                        f"phase boundary at {b}; heal {margin}+ ticks earlier"
                    )
            for pid in p.side_a:
                if pid >= self.network.peers:
                    raise ScenarioError(f"partition names unknown peer {pid}")
        honest = [
            i
            for i in range(self.network.peers)
            if self.network.byzantine.get(i, netsim.HONEST) == netsim.HONEST
        ]
        if not honest:
            raise ScenarioError("at least one honest peer is required")
        if self.adversaries["re_register"] > 0 and self.voters < 1:
            raise ScenarioError("re_register adversaries need an honest victim")
        if self.adversaries["replay_foreign_vote"] > 0 and self.voters < 1:
            raise ScenarioError("replay adversaries need an honest victim")

    def as_dict(self) -> dict:
        return {
            "seed": self.seed.decode(errors="replace"),
            "proposal": self.proposal,
            "election_label": self.election_label,
            "bits": self.bits,
            "threshold": {"t": self.t, "n": self.big_n},
            "voters": self.voters,
            "yes_fraction": self.yes_fraction,
            "share_holders": self.share_holders,
            "multi_peer_submission": self.multi_peer_submission,
            "adversaries": dict(self.adversaries),
            "network": {
                "peers": self.network.peers,
                "fanout": self.network.fanout,
                "latency": list(self.network.latency),
                "drop_rate": self.network.drop_rate,
                "heartbeat_interval": self.network.heartbeat_interval,
                "partitions": [
                    {"start": p.start, "end": p.end, "side_a": sorted(p.side_a)}
                    for p in self.network.partitions
                ],
                "byzantine": {
                    str(k): v for k, v in sorted(self.network.byzantine.items())
                },
            },
            "schedule": {
                "registration_close": self.schedule.registration_close,
                "voting_close": self.schedule.voting_close,
                "max_ticks": self.schedule.max_ticks,
            },
        }


def propagation_margin(params: netsim.NetworkParams) -> int:
    """Ticks after which one full anti-entropy cycle has provably completed.

    Peer i syncs with peer i + 1 + (round mod (P-1)), so within P-1 rounds
    every ordered pair has synced directly at least once; one extra interval
    plus the maximum delivery latency absorbs in-flight messages.
    """
    p = params.peers
    if p == 1:
        return 1 + params.latency[1]
    cycle = (p - 1) * params.heartbeat_interval
    return cycle + params.heartbeat_interval + params.latency[1] + 1


def derive_schedule(
    params: netsim.NetworkParams, voters: int, adversary_count: int
) -> Schedule:
    """Phase boundaries sized from the population and the propagation margin."""
    margin = propagation_margin(params)
    actions = voters + adversary_count
    reg_span = max(4, math.ceil(actions / 8))
    registration_close = 1 + reg_span + margin
    vote_span = max(4, math.ceil(actions / 8))
    voting_close = registration_close + 1 + vote_span + margin
    max_ticks = voting_close + 2 + 4 + margin
    return Schedule(
        registration_close=registration_close,
        voting_close=voting_close,
        max_ticks=max_ticks,
    )


# ---------------------------------------------------------------------------
# The orchestrated run
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    scenario: Scenario
    sim: netsim.Simulator
    organizer: actors.Organizer
    tally: ledger.TallyResult | None
    shadow: dict
    convergence: netsim.ConvergenceReport
    adversary_log: actors.AdversaryLog
    dump: bytes
    dump_peer: int

    def report(self) -> dict:
        tally_ok = (
            self.tally is not None
            and self.tally.yes_count == self.shadow["yes"]
            and self.tally.total_votes == self.shadow["total"]
        )
        return {
            "scenario": self.scenario.as_dict(),
            "tally": self.tally.as_dict() if self.tally else None,
            "shadow": self.shadow,
            "tally_matches_shadow": tally_ok,
            "convergence": self.convergence.as_dict(),
            "adversary_attempts": self.adversary_log.attempts,
            "dump_peer": self.dump_peer,
            "trace_events": len(self.sim.trace),
        }

    @property
    def succeeded(self) -> bool:
        return self.convergence.converged and self.report()["tally_matches_shadow"]


def _spread(count: int, lo: int, hi: int) -> list[int]:
    """count action ticks spread evenly over [lo, hi]."""
    if count == 0:
        return []
    if hi < lo:
        raise ScenarioError("schedule window is empty")
    if count == 1:
        return [lo]
    span = hi - lo
    return [lo + (i * span) // (count - 1) for i in range(count)]


def run_scenario(sc: Scenario) -> RunResult:
    """Execute one full election; everything is a function of the scenario."""
    rng = DeterministicRng(sc.seed)
    margin = propagation_margin(sc.network)
    sched = sc.schedule

    organizer = actors.Organizer.create(
        election_label=sc.election_label,
        proposal_text=sc.proposal,
        bits=sc.bits,
        t=sc.t,
        big_n=sc.big_n,
        registration_close=sched.registration_close,
        voting_close=sched.voting_close,
        rng=rng.fork("organizer"),
    )
    config = organizer.config
    eid = config.election_id
    issuer = credentials.SigningKey.generate(rng.fork("issuer"))
    organizer.registrar.trusted_issuers.add(issuer.public_bytes)

    sim = netsim.Simulator(sc.network, rng.fork("net"))
    honest_peers = list(sim.honest_ids)
    log = actors.AdversaryLog()

    # -- population -----------------------------------------------------------
    choice_rng = rng.fork("choices")
    voters: list[actors.Voter] = []
    for i in range(sc.voters):
        pid = f"person-{i}".encode()
        voters.append(
            actors.Voter(
                pid=pid,
                vc=credentials.issuer_issue_vc(issuer, pid),
                choice=1 if choice_rng.random() < sc.yes_fraction else 0,
                home_peer=honest_peers[i % len(honest_peers)],
            )
        )
    adversary_voters: dict[str, list[actors.Voter]] = {}
    extra = 0
    for kind in ("double_vote", "invalid_choice", "foreign_commitment"):
        group = []
        for k in range(sc.adversaries[kind]):
            pid = f"adversary-{kind}-{k}".encode()
            group.append(
                actors.Voter(
                    pid=pid,
                    vc=credentials.issuer_issue_vc(issuer, pid),
                    choice=0,
                    home_peer=honest_peers[(sc.voters + extra) % len(honest_peers)],
                )
            )
            extra += 1
        adversary_voters[kind] = group

    # -- tick 0: the election opens. The organizer announces the config at
    # every honest peer directly, so no registration can race a missing
    # config at its own home peer; duplicate announcements dedup by hash.
    config_tx = organizer.config_tx()
    for pid in honest_peers:
        sim.submit(pid, config_tx, 0)

    # -- registrations ----------------------------------------------------------
    registering = (
        [("honest", v) for v in voters]
        + [("double_vote", v) for v in adversary_voters["double_vote"]]
        + [("invalid_choice", v) for v in adversary_voters["invalid_choice"]]
        + [("foreign_commitment", v) for v in adversary_voters["foreign_commitment"]]
    )
    reg_lo = 2
    reg_hi = sched.registration_close - margin - 1
    reg_ticks = _spread(len(registering), reg_lo, reg_hi)

    def make_register(kind: str, voter: actors.Voter, idx: int):
        def action(sim_: netsim.Simulator, tick: int) -> None:
            reg = voter.register(
                organizer.registrar,
                eid,
                BASE_TIMESTAMP + tick,
                rng.fork(f"register-{idx}"),
            )
            if kind == "foreign_commitment":
                wrong = bytes(32)
                tx = actors.foreign_commitment_tx(voter.credential, wrong)
                log.record(
                    "foreign-commitment-submitted",
                    peer=voter.home_peer,
                    tx=tx.hash().hex(),
                )
            else:
                tx = reg
            sim_.submit(voter.home_peer, tx, tick)

        return action

    for idx, ((kind, voter), tick) in enumerate(zip(registering, reg_ticks)):
        sim.schedule(tick, make_register(kind, voter, idx))

    # re-registration attempts: same person asks the registrar again,
    # strictly after their genuine registration has been recorded.
    for k in range(sc.adversaries["re_register"]):
        victim_idx = k % len(voters)
        victim = voters[victim_idx]
        when = reg_ticks[victim_idx] + 2

        def attempt(sim_: netsim.Simulator, tick: int, v=victim, k=k) -> None:
            try:
                organizer.registrar.register(
                    v.vc, eid, BASE_TIMESTAMP + tick, rng.fork(f"rereg-{k}")
                )
            except credentials.DuplicateRegistration:
                log.record("re-register-blocked", pid=v.pid.decode(), tick=tick)
            else:
                log.record("re-register-ISSUED", pid=v.pid.decode(), tick=tick)

        sim.schedule(when, attempt)

    # -- votes -------------------------------------------------------------------
    vote_lo = sched.registration_close + 1
    vote_hi = sched.voting_close - margin - 1
    casting = (
        [("honest", v) for v in voters]
        + [("double_vote", v) for v in adversary_voters["double_vote"]]
        + [("invalid_choice", v) for v in adversary_voters["invalid_choice"]]
    )
    vote_ticks = _spread(len(casting), vote_lo, vote_hi)
    double_vote_winners: list[int] = []
    replay_pool: list[ledger.VoteTx] = []

    def make_cast(kind: str, voter: actors.Voter, idx: int):
        def action(sim_: netsim.Simulator, tick: int) -> None:
            peer = sim_.peer(voter.home_peer)
            peer.state.advance_phase(tick)
            tree = peer.state.merkle_tree()
            vote_rng = rng.fork(f"cast-{idx}")
            if kind == "honest":
                tx = voter.cast(config, tree, vote_rng)
                replay_pool.append(tx)
                sim_.submit(voter.home_peer, tx, tick)
                if sc.multi_peer_submission:
                    other = honest_peers[
                        (honest_peers.index(voter.home_peer) + 1)
                        % len(honest_peers)
                    ]
                    sim_.submit(other, tx, tick)
            elif kind == "double_vote":
                tx0, tx1 = actors.double_vote_txs(voter, config, tree, vote_rng)
                winner_choice = 0 if tx0.hash() < tx1.hash() else 1
                double_vote_winners.append(winner_choice)
                peer_a = voter.home_peer
                peer_b = honest_peers[
                    (honest_peers.index(peer_a) + 1) % len(honest_peers)
                ]
                sim_.submit(peer_a, tx0, tick)
                sim_.submit(peer_b, tx1, tick)
                log.record(
                    "double-vote-race",
                    nf=tx0.nf.hex(),
                    peers=[peer_a, peer_b],
                    winner_choice=winner_choice,
                )
            elif kind == "invalid_choice":
                tx = actors.invalid_choice_tx(voter, config, tree, vote_rng)
                sim_.submit(voter.home_peer, tx, tick)
                log.record("invalid-choice-submitted", nf=tx.nf.hex(), tick=tick)

        return action

    for idx, ((kind, voter), tick) in enumerate(zip(casting, vote_ticks)):
        sim.schedule(tick, make_cast(kind, voter, idx))

    for k in range(sc.adversaries["replay_foreign_vote"]):
        when = min(vote_hi, vote_lo + 3 + k)

        def replay(sim_: netsim.Simulator, tick: int, k=k) -> None:
            if not replay_pool:
                return
            victim_tx = replay_pool[k % len(replay_pool)]
            target = honest_peers[(k + 1) % len(honest_peers)]
            sim_.submit(target, victim_tx, tick)
            log.record(
                "replay-foreign-vote", tx=victim_tx.hash().hex(), peer=target
            )

        sim.schedule(when, replay)

    # -- tally shares --------------------------------------------------------------
    participants = []
    for j, share in enumerate(organizer.shares):
        if sc.share_holders == "voters" and voters:
            home = voters[j % len(voters)].home_peer
        else:
            home = honest_peers[j % len(honest_peers)]
        participants.append(actors.TallyParticipant(share=share, home_peer=home))

    share_lo = sched.voting_close + 1
    share_ticks = _spread(len(participants), share_lo, share_lo + 3)

    def make_publish(p: actors.TallyParticipant, idx: int):
        def action(sim_: netsim.Simulator, tick: int) -> None:
            peer = sim_.peer(p.home_peer)
            peer.state.advance_phase(tick)
            tx = p.publish_share(
                config, peer.state.compute_sum(), rng.fork(f"share-{idx}")
            )
            sim_.submit(p.home_peer, tx, tick)

        return action

    for idx, (p, tick) in enumerate(zip(participants, share_ticks)):
        sim.schedule(tick, make_publish(p, idx))

    # -- run and settle ---------------------------------------------------------
    sim.run(sched.max_ticks)

    tally = None
    for pid in honest_peers:
        state = sim.peer(pid).state
        if len(state.share_pool) >= config.t:
            peer_tally = state.finalize_tally()
            if tally is None:
                tally = peer_tally
    convergence = sim.convergence_report()

    shadow_yes = sum(v.choice for v in voters) + sum(double_vote_winners)
    shadow_total = len(voters) + len(double_vote_winners)
    shadow = {
        "yes": shadow_yes,
        "no": shadow_total - shadow_yes,
        "total": shadow_total,
    }

    dump_peer = honest_peers[0]
    dump = ledger.serialize_dump(sim.peer(dump_peer).state)
    return RunResult(
        scenario=sc,
        sim=sim,
        organizer=organizer,
        tally=tally,
        shadow=shadow,
        convergence=convergence,
        adversary_log=log,
        dump=dump,
        dump_peer=dump_peer,
    )
