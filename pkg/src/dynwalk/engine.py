"""Round-synchronous CONGEST(B) execution over a graph schedule.

Messages sent at round t travel only edges of E_t and arrive at the end of
round t.  Per directed edge and round, delivered bits are capped at B:
under the strict policy an overflow aborts the run, under the queue policy
excess messages wait in FIFO order.  Every round is accounted in a RoundLog
whose totals are the run's cost in the paper's sense (local computation is
free, rounds are the currency).
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple

from .graphs import GraphSchedule, GraphSnapshot, derive_seed

__all__ = [
    "SimConfig",
    "Message",
    "Encodings",
    "default_bandwidth",
    "RoundLog",
    "RoundRecord",
    "CongestEngine",
    "NodeView",
    "run",
    "CongestionError",
    "RoundLimitError",
    "FloodIncompleteError",
    "ProtocolError",
]


class CongestionError(RuntimeError):
    """Strict policy: some directed edge exceeded B bits in one round."""


class RoundLimitError(RuntimeError):
    """The run consumed more rounds than SimConfig.max_rounds allows."""


class FloodIncompleteError(RuntimeError):
    """A flood with a supposedly sufficient budget left nodes uninformed."""


class ProtocolError(RuntimeError):
    """A node program violated the model (e.g. sent on a missing edge)."""


def default_bandwidth(n: int) -> int:
    """Default per-edge budget: 4 * ceil(log2 n)^2 bits."""
    b = max(1, math.ceil(math.log2(max(2, n))))
    return 4 * b * b


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    bandwidth_bits: int | None = None  # None -> default_bandwidth(n)
    congestion_policy: str = "strict"  # "strict" | "queue"
    phi: int | None = None  # dynamic diameter supplied to protocols
    max_rounds: int = 10_000_000
    record_rounds: bool = False  # keep one RoundRecord per round

    def __post_init__(self):
        if self.congestion_policy not in ("strict", "queue"):
            raise ValueError(f"unknown congestion policy {self.congestion_policy!r}")


class Message(NamedTuple):
    kind: str
    payload: tuple
    bits: int


class Encodings:
    """Bit-exact sizes for the protocol message kinds.

    node id: ceil(log2 n) bits; coupon: two ids plus a length field of
    ceil(log2(2*lambda)) bits plus a serial of ceil(log2 d) bits; walk token:
    id plus walk id plus length counter; locate request: id plus serial;
    gossip token: ceil(log2 k) bits.
    """

    def __init__(self, n: int):
        self.n = n
        self.id_bits = max(1, math.ceil(math.log2(max(2, n))))

    @staticmethod
    def _field(values: int) -> int:
        return max(1, math.ceil(math.log2(max(2, values))))

    def coupon_bits(self, lambda_walk: int, d: int) -> int:
        return 2 * self.id_bits + self._field(2 * lambda_walk) + self._field(d)

    def token_bits(self, tau: int, k: int = 1) -> int:
        walk_id = 0 if k <= 1 else self._field(k)
        return self.id_bits + walk_id + self._field(tau + 1)

    def request_bits(self, d: int) -> int:
        return self.id_bits + self._field(d)

    def gossip_bits(self, k: int) -> int:
        return self._field(k)


@dataclass(frozen=True)
class RoundRecord:
    t: int
    msgs: int
    max_edge_bits: int


class RoundLog:
    """Per-run accounting: totals plus (optionally) one record per round."""

    __slots__ = ("rounds", "total_msgs", "max_edge_bits", "congestion_events", "records", "_keep")

    def __init__(self, keep_records: bool = False):
        self.rounds = 0
        self.total_msgs = 0
        self.max_edge_bits = 0
        self.congestion_events = 0
        self.records: list[RoundRecord] = []
        self._keep = keep_records

    def observe(self, t: int, msgs: int, max_bits: int) -> None:
        self.rounds += 1
        self.total_msgs += msgs
        if max_bits > self.max_edge_bits:
            self.max_edge_bits = max_bits
        if self._keep:
            self.records.append(RoundRecord(t, msgs, max_bits))

    def summary(self) -> dict:
        return {
            "rounds": self.rounds,
            "total_msgs": self.total_msgs,
            "max_edge_bits": self.max_edge_bits,
            "congestion_events": self.congestion_events,
        }

    def jsonl_records(self) -> list[str]:
        return [
            json.dumps({"t": r.t, "max_edge_bits": r.max_edge_bits, "msgs": r.msgs})
            for r in self.records
        ]


class CongestEngine:
    """Lock-step round executor bound to one schedule and one config.

    The engine owns the global round counter: every primitive that talks on
    the network advances it.  Per-node randomness streams are derived from
    (algorithm seed, node id, purpose tag), so they never interleave with
    the schedule's seed.
    """

    def __init__(self, schedule: GraphSchedule, config: SimConfig | None = None):
        self.schedule = schedule
        self.config = config or SimConfig()
        self.n = schedule.n
        self.B = (
            self.config.bandwidth_bits
            if self.config.bandwidth_bits is not None
            else default_bandwidth(schedule.n)
        )
        self.enc = Encodings(schedule.n)
        self.log = RoundLog(keep_records=self.config.record_rounds)
        self._round = 0
        self._rngs: dict[tuple[int, int], random.Random] = {}
        self._queues: dict[tuple[int, int], list] = {}

    @property
    def round(self) -> int:
        """Number of completed rounds."""
        return self._round

    def node_rng(self, v: int, tag: int) -> random.Random:
        rng = self._rngs.get((v, tag))
        if rng is None:
            rng = random.Random(derive_seed(self.config.seed, v, tag))
            self._rngs[(v, tag)] = rng
        return rng

    def next_snapshot(self) -> GraphSnapshot:
        """Topology of the round about to execute (round round+1)."""
        return self.schedule.snapshot_at(self._round + 1)

    def _begin_round(self) -> int:
        t = self._round + 1
        if t > self.config.max_rounds:
            raise RoundLimitError(f"exceeded max_rounds={self.config.max_rounds}")
        return t

    def exchange(
        self, sends: Iterable[tuple[int, int, int, object]]
    ) -> dict[int, list[tuple[int, object]]]:
        """Execute one round. `sends` holds (src, dst, bits, payload) tuples.

        Returns the inbox delivered at the end of the round: dst -> list of
        (src, payload) in send order.  Raises on sends along missing edges,
        and on overflow under the strict policy.
        """
        t = self._begin_round()
        g = self.schedule.snapshot_at(t)
        adj_sets = g.adj_sets
        if self.config.congestion_policy == "queue":
            return self._exchange_queued(t, g, sends)
        edge_bits: dict[tuple[int, int], int] = {}
        inbox: dict[int, list[tuple[int, object]]] = {}
        msgs = 0
        for u, v, bits, payload in sends:
            if v not in adj_sets[u]:
                raise ProtocolError(f"round {t}: ({u},{v}) is not an edge of G_{t}")
            key = (u, v)
            total = edge_bits.get(key, 0) + bits
            if total > self.B:
                self.log.congestion_events += 1
                raise CongestionError(
                    f"round {t}: edge ({u},{v}) would carry {total} bits > B={self.B}"
                )
            edge_bits[key] = total
            if v in inbox:
                inbox[v].append((u, payload))
            else:
                inbox[v] = [(u, payload)]
            msgs += 1
        self.log.observe(t, msgs, max(edge_bits.values()) if edge_bits else 0)
        self._round = t
        return inbox

    def _exchange_queued(self, t, g, sends):
        for u, v, bits, payload in sends:
            self._queues.setdefault((u, v), []).append((bits, payload))
        inbox: dict[int, list[tuple[int, object]]] = {}
        msgs = 0
        max_bits = 0
        for (u, v), queue in list(self._queues.items()):
            if v not in g.adj_sets[u]:
                continue  # edge absent this round; messages wait
            used = 0
            delivered = 0
            for bits, payload in queue:
                if used + bits > self.B:
                    break
                used += bits
                delivered += 1
                inbox.setdefault(v, []).append((u, payload))
            if delivered:
                del queue[:delivered]
            if queue:
                self.log.congestion_events += 1
            else:
                del self._queues[(u, v)]
            msgs += delivered
            max_bits = max(max_bits, used)
        self.log.observe(t, msgs, max_bits)
        self._round = t
        return inbox

    def idle(self, rounds: int = 1) -> None:
        """Consume rounds with no traffic (still logged)."""
        for _ in range(rounds):
            t = self._begin_round()
            self.log.observe(t, 0, 0)
            self._round = t

    def flood(
        self,
        payload_bits: int,
        sources: Iterable[int],
        budget: int,
        require_complete: bool = True,
    ) -> dict[int, int]:
        """Broadcast for exactly `budget` rounds from `sources`.

        Every informed node retransmits on all its current edges each round,
        so per directed edge the payload travels at most once per round and
        the accounting is closed-form.  Returns node -> round informed.
        Per-round connectivity makes the informed set grow every round, which
        is asserted; a complete flood inside the budget is required unless
        `require_complete` is False (probabilistic callers).
        """
        if payload_bits > self.B:
            raise CongestionError(f"flood payload of {payload_bits} bits exceeds B={self.B}")
        informed_round = {s: self._round for s in sources}
        informed = set(informed_round)
        if not informed:
            raise ValueError("flood needs at least one source")
        n = self.n
        for _ in range(budget):
            t = self._begin_round()
            g = self.schedule.snapshot_at(t)
            msgs = sum(len(g.adj[v]) for v in informed)
            self.log.observe(t, msgs, payload_bits if msgs else 0)
            if len(informed) < n:
                new = {u for v in informed for u in g.adj[v] if u not in informed}
                assert new, f"flood stalled at round {t}: snapshot disconnected"
                for u in new:
                    informed_round[u] = t
                informed |= new
            self._round = t
        if require_complete and len(informed) < n:
            raise FloodIncompleteError(
                f"flood informed {len(informed)}/{n} nodes in {budget} rounds"
            )
        return informed_round

    def flood_until_complete(
        self, payload_bits: int, sources: Iterable[int], cap: int | None = None
    ) -> tuple[int, dict[int, int]]:
        """Broadcast until everyone is informed; returns (rounds used, map).

        Used by protocols that may stop on completion (trivial gossip).  The
        cap defaults to n - 1, which per-round connectivity guarantees.
        """
        if payload_bits > self.B:
            raise CongestionError(f"flood payload of {payload_bits} bits exceeds B={self.B}")
        cap = cap if cap is not None else self.n - 1
        informed_round = {s: self._round for s in sources}
        informed = set(informed_round)
        used = 0
        while len(informed) < self.n:
            if used >= cap:
                raise FloodIncompleteError(f"flood incomplete after cap={cap} rounds")
            t = self._begin_round()
            g = self.schedule.snapshot_at(t)
            msgs = sum(len(g.adj[v]) for v in informed)
            self.log.observe(t, msgs, payload_bits)
            new = {u for v in informed for u in g.adj[v] if u not in informed}
            assert new, f"flood stalled at round {t}: snapshot disconnected"
            for u in new:
                informed_round[u] = t
            informed |= new
            self._round = t
            used += 1
        return used, informed_round


@dataclass
class NodeView:
    """What one node sees when its program runs for a round."""

    node: int
    t: int
    neighbors: tuple[int, ...]
    inbox: list[tuple[int, Message]]
    rng: Callable[[int], random.Random] = field(repr=False, default=None)


def run(
    schedule: GraphSchedule,
    programs: Mapping[int, object],
    config: SimConfig,
    rounds: int,
) -> tuple[dict[int, object], RoundLog]:
    """Drive per-node programs for `rounds` lock-step rounds.

    A program exposes ``step(view) -> list[(dst, Message)]``; its round-t
    view carries the round-t neighbor set and the messages delivered at the
    end of round t-1.  Returns each program's ``output()`` (None if absent)
    and the round log.
    """
    engine = CongestEngine(schedule, config)
    n = schedule.n
    if set(programs) != set(range(n)):
        raise ProtocolError("programs must be defined for every node")
    inbox: dict[int, list[tuple[int, Message]]] = {}
    for _ in range(rounds):
        g = engine.next_snapshot()
        t = engine.round + 1
        sends = []
        for v in range(n):
            view = NodeView(
                node=v,
                t=t,
                neighbors=g.adj[v],
                inbox=inbox.get(v, []),
                rng=lambda tag, _v=v: engine.node_rng(_v, tag),
            )
            for dst, msg in programs[v].step(view):
                sends.append((v, dst, msg.bits, msg))
        inbox = engine.exchange(sends)
    outcomes = {
        v: (programs[v].output() if hasattr(programs[v], "output") else None) for v in range(n)
    }
    return outcomes, engine.log
