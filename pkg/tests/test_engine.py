import random

import pytest

from conftest import AMPLE, make_engine
from dynwalk.engine import (
    CongestEngine,
    CongestionError,
    FloodIncompleteError,
    Message,
    ProtocolError,
    RoundLimitError,
    SimConfig,
    default_bandwidth,
    run,
)
from dynwalk.graphs import (
    PermutedSchedule,
    RandomRegularSchedule,
    dynamic_diameter,
    named_graph,
    parse_schedule_spec,
)


class Silent:
    def step(self, view):
        return []


class SendOnce:
    def __init__(self, payload="hello"):
        self.payload = payload
        self.sent = False
        self.got = []

    def step(self, view):
        self.got.extend(view.inbox)
        if view.node == 0 and not self.sent:
            self.sent = True
            return [(view.neighbors[0], Message("test", (self.payload,), 8))]
        return []

    def output(self):
        return self.got


class TestRun:
    def test_all_silent(self, k4):
        outcomes, log = run(k4, {v: Silent() for v in range(4)}, SimConfig(), rounds=5)
        assert log.rounds == 5 and log.total_msgs == 0

    def test_single_send_delivered_next_round(self, k4):
        programs = {v: SendOnce() for v in range(4)}
        outcomes, log = run(k4, programs, SimConfig(), rounds=2)
        assert log.total_msgs == 1
        receiver = k4.snapshot_at(1).adj[0][0]
        assert outcomes[receiver] == [(0, Message("test", ("hello",), 8))]

    def test_missing_program(self, k4):
        with pytest.raises(ProtocolError):
            run(k4, {0: Silent()}, SimConfig(), rounds=1)


class TestExchange:
    def test_non_edge_rejected(self, c5):
        eng = make_engine(c5, seed=0)
        with pytest.raises(ProtocolError):
            eng.exchange([(0, 2, 4, None)])  # C5: 0-2 not an edge

    def test_strict_overflow_names_round_and_edge(self, k4):
        eng = make_engine(k4, seed=0, bandwidth=10)
        with pytest.raises(CongestionError) as err:
            eng.exchange([(0, 1, 6, None), (0, 1, 6, None)])
        assert "round 1" in str(err.value) and "(0,1)" in str(err.value)

    def test_delivery_matches_schedule(self):
        # A message rides edge e at round t iff e is in E_t.
        sched = RandomRegularSchedule(10, 3, seed=3)
        rng = random.Random(5)
        eng = make_engine(sched, seed=1)
        for t in range(1, 30):
            g = sched.snapshot_at(t)
            u = rng.randrange(10)
            v = g.adj[u][rng.randrange(3)]
            inbox = eng.exchange([(u, v, 4, t)])
            assert inbox == {v: [(u, t)]}

    def test_max_rounds(self, k4):
        eng = CongestEngine(k4, SimConfig(max_rounds=2, bandwidth_bits=AMPLE))
        eng.idle(2)
        with pytest.raises(RoundLimitError):
            eng.idle(1)

    def test_determinism(self, rr16):
        def one_run(seed):
            eng = CongestEngine(rr16, SimConfig(seed=seed, bandwidth_bits=AMPLE, record_rounds=True))
            receivers = []
            for t in range(1, 11):
                g = eng.next_snapshot()
                rng = eng.node_rng(0, 7)
                v = g.adj[0][rng.randrange(len(g.adj[0]))]
                eng.exchange([(0, v, 5, t)])
                receivers.append(v)
            return eng.log.summary(), eng.log.records, receivers

        assert one_run(42) == one_run(42)
        assert one_run(42)[2] != one_run(43)[2]

    def test_roundlog_totals_match_records(self, k4):
        eng = CongestEngine(k4, SimConfig(bandwidth_bits=AMPLE, record_rounds=True))
        eng.exchange([(0, 1, 4, None), (1, 2, 4, None)])
        eng.idle(1)
        eng.exchange([(2, 3, 4, None)])
        assert eng.log.rounds == len(eng.log.records) == 3
        assert eng.log.total_msgs == sum(r.msgs for r in eng.log.records) == 3
        assert eng.log.max_edge_bits == max(r.max_edge_bits for r in eng.log.records)
        assert len(eng.log.jsonl_records()) == 3


class TestQueuePolicy:
    def test_fifo_within_budget(self, k4):
        eng = make_engine(k4, seed=0, bandwidth=10, policy="queue")
        inbox = eng.exchange([(0, 1, 6, "a"), (0, 1, 6, "b"), (0, 1, 6, "c")])
        assert inbox == {0: [], 1: [(0, "a")]} or inbox == {1: [(0, "a")]}
        assert eng.log.congestion_events == 1
        inbox = eng.exchange([])
        assert inbox == {1: [(0, "b")]}
        inbox = eng.exchange([])
        assert inbox == {1: [(0, "c")]}
        assert eng.log.congestion_events == 2

    def test_per_round_bits_capped(self, k4):
        eng = make_engine(k4, seed=0, bandwidth=10, policy="queue")
        eng.exchange([(0, 1, 6, i) for i in range(5)])
        assert eng.log.max_edge_bits <= 10


class TestFlood:
    def test_k4_budget_one(self, k4):
        eng = make_engine(k4, seed=0)
        informed = eng.flood(8, [0], budget=1)
        assert set(informed) == set(range(4)) and eng.round == 1

    def test_c5_budget_two(self, c5):
        eng = make_engine(c5, seed=0)
        informed = eng.flood(8, [2], budget=2)
        assert set(informed) == set(range(5)) and eng.round == 2

    def test_budget_consumed_exactly(self, k4):
        eng = make_engine(k4, seed=0)
        eng.flood(8, [0], budget=5)
        assert eng.round == 5

    def test_insufficient_budget(self, c9):
        eng = make_engine(c9, seed=0)
        with pytest.raises(FloodIncompleteError):
            eng.flood(8, [0], budget=2)

    def test_perm_adversary_with_oracle_phi(self):
        base = RandomRegularSchedule(8, 3, seed=12).snapshot_at(1)
        sched = PermutedSchedule(base, seed=12)
        phi = dynamic_diameter(sched, 8)
        eng = make_engine(sched, seed=1)
        informed = eng.flood(8, [0], budget=phi)
        assert len(informed) == 8

    def test_flood_until_complete_rounds(self, c5):
        eng = make_engine(c5, seed=0)
        used, informed = eng.flood_until_complete(8, [0])
        assert used == 2 and len(informed) == 5

    def test_payload_exceeding_bandwidth(self, k4):
        eng = make_engine(k4, seed=0, bandwidth=4)
        with pytest.raises(CongestionError):
            eng.flood(8, [0], budget=1)


class TestEncodings:
    def test_default_bandwidth(self):
        assert default_bandwidth(16) == 4 * 4 * 4
        assert default_bandwidth(64) == 4 * 6 * 6

    def test_bit_table(self, rr16):
        eng = make_engine(rr16, seed=0)
        assert eng.enc.id_bits == 4
        assert eng.enc.coupon_bits(4, 3) == 2 * 4 + 3 + 2  # ids + len(2*lam=8) + serial
        assert eng.enc.token_bits(20) == 4 + 5  # id + counter(21)
        assert eng.enc.token_bits(20, k=8) == 4 + 3 + 5
        assert eng.enc.request_bits(3) == 4 + 2
        assert eng.enc.gossip_bits(8) == 3
