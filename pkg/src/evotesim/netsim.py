"""Deterministic discrete-event gossip network over ledger replicas.

Every peer runs its own LedgerState. A transaction submitted at one peer is
applied there, then pushed to a random fanout sample; each push edge may be
dropped (decided by the seeded rng at send time) or blocked by an active
partition (checked at both send and delivery ticks). Push-gossip alone
therefore only probably reaches everyone, so peers also run anti-entropy
heartbeats: on a fixed interval, peer i syncs with peer (i + 1 + round) mod P,
exchanging whichever retained transactions the other side lacks. Sync
deliveries are reliable (they model retransmit-until-acknowledged), respect
partitions, and walk a round-robin schedule, so any transaction retained by
one honest peer reaches every honest peer within one full round cycle once
partitions heal. Rejected transactions are retried when a sync offers them
again, which lets a replica accept transactions whose validity context
(phase, ballot box) had not converged at first contact.

Everything is driven by one seeded rng consumed in event order, so a run is
a pure function of (scenario, seed): reruns give byte-identical traces.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from . import ledger
from .errors import UnknownPeer
from .rng import DeterministicRng

HONEST = "honest"
CENSOR_VOTES = "censor_votes"
CENSOR_REGISTRATIONS = "censor_registrations"
REPLAY_DUPLICATES = "replay_duplicates"
SILENT = "silent"

BEHAVIORS = (HONEST, CENSOR_VOTES, CENSOR_REGISTRATIONS, REPLAY_DUPLICATES, SILENT)


@dataclass(frozen=True)
class Partition:
    """Network split over [start, end): side_a cannot reach its complement."""

    start: int
    end: int
    side_a: frozenset[int]

    def separates(self, a: int, b: int, tick: int) -> bool:
        if not self.start <= tick < self.end:
            return False
        return (a in self.side_a) != (b in self.side_a)


@dataclass(frozen=True)
class NetworkParams:
    peers: int
    fanout: int = 3
    latency: tuple[int, int] = (1, 3)
    drop_rate: float = 0.0
    heartbeat_interval: int = 2
    partitions: tuple[Partition, ...] = ()
    byzantine: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.peers < 1:
            raise ValueError("need at least one peer")
        if not 0 <= self.drop_rate < 1:
            raise ValueError("drop_rate must be in [0, 1)")
        if self.latency[0] < 1 or self.latency[1] < self.latency[0]:
            raise ValueError("latency window must be [lo, hi] with lo >= 1")
        if self.heartbeat_interval < 1:
            raise ValueError("heartbeat interval must be positive")
        for pid, behavior in self.byzantine.items():
            if not 0 <= pid < self.peers:
                raise ValueError(f"byzantine peer {pid} out of range")
            if behavior not in BEHAVIORS:
                raise ValueError(f"unknown behavior {behavior!r}")


@dataclass
class TraceEvent:
    tick: int
    peer: int
    event: str
    detail: str

    def render(self) -> str:
        return f"{self.tick:>6} peer={self.peer:<3} {self.event:<8} {self.detail}"


class PeerHandle:
    """One replica plus its gossip bookkeeping."""

    def __init__(self, peer_id: int, behavior: str):
        self.peer_id = peer_id
        self.behavior = behavior
        self.state = ledger.LedgerState()
        # tx hash -> (tick, tx) for everything currently incorporated
        self.retained: dict[bytes, tuple[int, ledger.Transaction]] = {}
        # every hash ever received by push; stops forward loops
        self.seen_wire: set[bytes] = set()

    @property
    def honest(self) -> bool:
        return self.behavior == HONEST

    def censors(self, tx: ledger.Transaction) -> bool:
        if self.behavior == CENSOR_VOTES and isinstance(tx, ledger.VoteTx):
            return True
        if self.behavior == CENSOR_REGISTRATIONS and isinstance(
            tx, ledger.RegistrationTx
        ):
            return True
        return self.behavior == SILENT

    def incorporate(self, tx: ledger.Transaction, tick: int, verdict) -> None:
        if not verdict.accepted:
            return
        if verdict.evicted is not None:
            self.retained.pop(verdict.evicted, None)
        self.retained[tx.hash()] = (tick, tx)


@dataclass
class ConvergenceReport:
    peer_hashes: dict[int, str]
    honest_ids: tuple[int, ...]
    converged: bool
    settled_tick: int

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "settled_tick": self.settled_tick,
            "honest_peers": list(self.honest_ids),
            "peer_hashes": {str(k): v for k, v in self.peer_hashes.items()},
        }


_DELIVER = 0
_CALL = 1


class Simulator:
    """Event loop owning the peers, the clock, and the seeded randomness."""

    def __init__(self, params: NetworkParams, rng: DeterministicRng):
        self.params = params
        self.rng = rng
        self.peers = [
            PeerHandle(i, params.byzantine.get(i, HONEST))
            for i in range(params.peers)
        ]
        self.partitions: list[Partition] = list(params.partitions)
        self.tick = 0
        self.trace: list[TraceEvent] = []
        self.verify_cache: dict = {}
        self.settled_tick = 0
        self._heap: list = []
        self._seq = 0
        self._heartbeat_round = 0
        self._next_heartbeat = 0

    # -- public API -----------------------------------------------------------

    def peer(self, peer_id: int) -> PeerHandle:
        if not 0 <= peer_id < len(self.peers):
            raise UnknownPeer(f"no peer {peer_id}")
        return self.peers[peer_id]

    @property
    def honest_ids(self) -> tuple[int, ...]:
        return tuple(p.peer_id for p in self.peers if p.honest)

    def schedule(self, tick: int, fn) -> None:
        """Run fn(sim, tick) when the clock reaches tick."""
        if tick < self.tick:
            raise ValueError("cannot schedule in the past")
        self._push(tick, _CALL, fn)

    def submit(self, peer_id: int, tx: ledger.Transaction, tick: int) -> None:
        """Inject a transaction at its origin peer when the clock hits tick."""
        self.peer(peer_id)  # raise UnknownPeer eagerly
        self.schedule(tick, lambda sim, t, p=peer_id, x=tx: sim._receive(p, x, t, "submit"))

    def inject_partition(self, side_a, start: int, end: int) -> None:
        """Split the network over [start, end); start must not be in the past."""
        if start < self.tick:
            raise ValueError("cannot start a partition in the past")
        self.partitions.append(
            Partition(start=start, end=end, side_a=frozenset(side_a))
        )

    def heal(self, tick: int) -> None:
        """Terminate every partition still active at `tick`."""
        self.partitions = [
            p if p.end <= tick else Partition(p.start, tick, p.side_a)
            for p in self.partitions
        ]

    def run(self, until: int) -> None:
        """Advance the clock to `until`, processing every event in order."""
        while True:
            next_event = self._heap[0][0] if self._heap else None
            if self._next_heartbeat <= (
                next_event if next_event is not None else until
            ):
                if self._next_heartbeat > until:
                    break
                self._run_heartbeat_round(self._next_heartbeat)
                continue
            if next_event is None or next_event > until:
                break
            tick, _, kind, payload = heapq.heappop(self._heap)
            self.tick = max(self.tick, tick)
            if kind == _CALL:
                payload(self, tick)
            else:
                dst, tx, src, via = payload
                self._deliver(dst, tx, src, tick, via)
        self.tick = max(self.tick, until)
        for p in self.peers:
            p.state.advance_phase(self.tick)

    def convergence_report(self) -> ConvergenceReport:
        hashes = {p.peer_id: p.state.ledger_hash().hex() for p in self.peers}
        honest = self.honest_ids
        honest_hashes = {hashes[i] for i in honest}
        return ConvergenceReport(
            peer_hashes=hashes,
            honest_ids=honest,
            converged=len(honest_hashes) == 1,
            settled_tick=self.settled_tick,
        )

    # -- internals --------------------------------------------------------------

    def _push(self, tick: int, kind: int, payload) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (tick, self._seq, kind, payload))

    def _trace(self, tick: int, peer: int, event: str, detail: str) -> None:
        self.trace.append(TraceEvent(tick=tick, peer=peer, event=event, detail=detail))

    def _separated(self, a: int, b: int, tick: int) -> bool:
        return any(p.separates(a, b, tick) for p in self.partitions)

    def _apply(self, peer: PeerHandle, tx, tick: int, via: str):
        verdict = peer.state.apply(tx, tick, verify_cache=self.verify_cache)
        if verdict.accepted:
            peer.incorporate(tx, tick, verdict)
            if peer.honest:
                self.settled_tick = tick
            detail = f"{tx.kind_name} {tx.hash().hex()[:16]} via {via}"
            if verdict.evicted is not None:
                detail += f" evicting {verdict.evicted.hex()[:16]}"
            self._trace(tick, peer.peer_id, "apply", detail)
        else:
            self._trace(
                tick,
                peer.peer_id,
                "reject",
                f"{tx.kind_name} {tx.hash().hex()[:16]} via {via}: "
                f"{verdict.reason}",
            )
        return verdict

    def _receive(self, peer_id: int, tx, tick: int, via: str) -> None:
        """Push-path arrival: dedup, apply, forward."""
        peer = self.peer(peer_id)
        h = tx.hash()
        if h in peer.seen_wire:
            return
        peer.seen_wire.add(h)
        self._apply(peer, tx, tick, via)
        # Forwarding decisions belong to the receiving peer, including the
        # origin peer at submit time.
        if peer.censors(tx):
            self._trace(tick, peer_id, "censor", f"{tx.kind_name} {h.hex()[:16]}")
            return
        copies = 2 if peer.behavior == REPLAY_DUPLICATES else 1
        for _ in range(copies):
            self._fanout(peer_id, tx, tick)

    def _fanout(self, src: int, tx, tick: int) -> None:
        others = [i for i in range(len(self.peers)) if i != src]
        k = min(self.params.fanout, len(others))
        targets = self.rng.sample(others, k) if k else []
        for dst in targets:
            if self.rng.random() < self.params.drop_rate:
                self._trace(tick, src, "drop", f"to {dst} {tx.hash().hex()[:16]}")
                continue
            if self._separated(src, dst, tick):
                self._trace(tick, src, "cutoff", f"to {dst} {tx.hash().hex()[:16]}")
                continue
            lat = self.rng.randint(*self.params.latency)
            self._push(
                tick + lat,
                _DELIVER,
                (dst, tx, src, "gossip"),
            )

    def _deliver(self, dst: int, tx, src: int, tick: int, via: str) -> None:
        if src is not None and self._separated(src, dst, tick):
            self._trace(tick, dst, "cutoff", f"from {src} {tx.hash().hex()[:16]}")
            return
        if via == "sync":
            peer = self.peer(dst)
            h = tx.hash()
            peer.seen_wire.add(h)
            if h in peer.retained:
                return
            # Sync retries transactions rejected earlier under a stale
            # context; apply() re-validates against the current state.
            self._apply(peer, tx, tick, via)
            return
        self._receive(dst, tx, tick, via)

    def _run_heartbeat_round(self, tick: int) -> None:
        """Round-robin anti-entropy: peer i syncs with i + 1 + round (mod P)."""
        self.tick = max(self.tick, tick)
        n = len(self.peers)
        for p in self.peers:
            p.state.advance_phase(tick)
        if n > 1:
            step = 1 + self._heartbeat_round % (n - 1)
            for i, peer in enumerate(self.peers):
                if peer.behavior == SILENT:
                    continue
                j = (i + step) % n
                other = self.peers[j]
                if other.behavior == SILENT:
                    continue
                if self._separated(i, j, tick):
                    continue
                self._sync_pair(peer, other, tick)
        self._heartbeat_round += 1
        self._next_heartbeat = tick + self.params.heartbeat_interval

    def _sync_pair(self, a: PeerHandle, b: PeerHandle, tick: int) -> None:
        lat = self.params.latency[1]
        for sender, receiver in ((a, b), (b, a)):
            missing = sorted(set(sender.retained) - set(receiver.retained))
            for h in missing:
                _, tx = sender.retained[h]
                if sender.censors(tx):
                    continue
                self._push(
                    tick + lat,
                    _DELIVER,
                    (receiver.peer_id, tx, sender.peer_id, "sync"),
                )
        if a.retained.keys() != b.retained.keys():
            self._trace(
                tick,
                a.peer_id,
                "sync",
                f"with {b.peer_id}: "
                f"{len(set(a.retained) ^ set(b.retained))} differ",
            )
