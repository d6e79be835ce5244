"""Random-walk protocols: naive token walks, coupon-stitched fast walks,
the shared-phase extension to k walks, and the lazy stepper for non-regular
graphs.

The fast single walk runs in two phases.  Phase 1 distributes, from every
node, d coupons that walk for lambda + r rounds (r uniform in [0, lambda-1])
over snapshots G_1..G_{2*lambda} and freeze at their endpoints.  Phase 2
repeatedly samples an unused coupon at the token's current node (one flood
to locate the holder, one flood to transfer the token, phi rounds each) and
finishes the remainder below 2*lambda naively on live snapshots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import CongestEngine, ProtocolError
from .graphs import GraphSchedule, GraphSnapshot

__all__ = [
    "WalkParams",
    "Coupon",
    "CouponTable",
    "CouponsExhausted",
    "WalkResult",
    "SimpleStepper",
    "LazyStepper",
    "lazy_adapter",
    "naive_walk",
    "concurrent_naive_walks",
    "phase1_distribute",
    "sample_coupon",
    "single_random_walk",
    "many_random_walks",
    "VisitStats",
    "visit_stats",
]

# Purpose tags for per-node randomness streams.
TAG_PHASE1 = 11  # Phase-1 coupon lengths, then forwarding choices
TAG_STITCH = 13  # Phase-2 serial sampling
TAG_NAIVE = 14   # naive walk steps


class CouponsExhausted(RuntimeError):
    """A connector has no unused coupon serial left."""


@dataclass(frozen=True)
class WalkParams:
    """Walk length tau and short-walk parameter lambda.

    By default lambda = ceil(lambda_c * sqrt(tau*phi)) for a single walk and
    ceil(lambda_c * sqrt(k*tau*phi)) for k walks; the asymptotic shape the
    round bounds prescribe, with the proof constants dropped.
    """

    tau: int
    lambda_walk: int
    lambda_c: float = 1.0

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.lambda_walk < 1:
            raise ValueError("lambda_walk must be >= 1")

    @classmethod
    def for_single(cls, tau: int, phi: int, lambda_c: float = 1.0) -> "WalkParams":
        lam = max(1, math.ceil(lambda_c * math.sqrt(max(1, tau) * phi)))
        return cls(tau=tau, lambda_walk=lam, lambda_c=lambda_c)

    @classmethod
    def for_many(cls, tau: int, phi: int, k: int, lambda_c: float = 1.0) -> "WalkParams":
        lam = max(1, math.ceil(lambda_c * math.sqrt(k * max(1, tau) * phi)))
        return cls(tau=tau, lambda_walk=lam, lambda_c=lambda_c)


@dataclass(frozen=True)
class Coupon:
    origin: int
    serial: int
    desired_length: int
    holder: int
    used: bool
    path: tuple[int, ...] | None


class CouponTable:
    """Phase-1 output: per-origin coupons, their holders, and the unused sets."""

    def __init__(self, n: int, d: int, lambda_walk: int):
        self.n = n
        self.d = d
        self.lambda_walk = lambda_walk
        self.origins: list[int] = []
        self.serials: list[int] = []
        self.lengths: list[int] = []
        self.holders: list[int] = []
        self.paths: list[list[int]] | None = None
        self.used: list[bool] = []
        self.unused: list[list[int]] = [[] for _ in range(n)]

    def add(self, origin: int, serial: int, length: int, path: list[int] | None) -> int:
        ci = len(self.origins)
        self.origins.append(origin)
        self.serials.append(serial)
        self.lengths.append(length)
        self.holders.append(origin)
        self.used.append(False)
        self.unused[origin].append(ci)
        if path is not None:
            if self.paths is None:
                self.paths = []
            self.paths.append(path)
        return ci

    def remaining(self, origin: int) -> int:
        return len(self.unused[origin])

    def sample(self, origin: int, rng) -> int:
        """Pop a uniformly chosen unused coupon of `origin`; returns its index."""
        pool = self.unused[origin]
        if not pool:
            raise CouponsExhausted(f"node {origin} has no unused coupons")
        ci = pool.pop(rng.randrange(len(pool)))
        self.used[ci] = True
        return ci

    def as_coupon(self, ci: int) -> Coupon:
        return Coupon(
            origin=self.origins[ci],
            serial=self.serials[ci],
            desired_length=self.lengths[ci],
            holder=self.holders[ci],
            used=self.used[ci],
            path=tuple(self.paths[ci]) if self.paths is not None else None,
        )


@dataclass
class WalkResult:
    """Outcome of one walk: where it ended and what it cost.

    `step_provenance` lists, per walk step, the schedule round whose snapshot
    the step was taken on (Phase-1 rounds for stitched segments, live rounds
    for naive steps).  `connectors` starts with the source; entries after the
    first are the stitch points, in order.
    """

    source: int
    destination: int
    rounds_used: int
    connectors: list[int]
    step_provenance: list[int]
    segment_lengths: list[int]
    fallbacks: int
    path: list[int] | None
    walk_id: int = 0


class SimpleStepper:
    """Uniform-neighbor step of the simple random walk."""

    def step(self, rng, v: int, g: GraphSnapshot) -> int:
        nbrs = g.adj[v]
        return nbrs[rng.randrange(len(nbrs))]


class LazyStepper:
    """Stay with probability 1 - deg(u)/(d_max+1), else uniform neighbor.

    One draw over d_max+1 equally likely outcomes: outcome j < deg(u) moves
    along edge j (probability 1/(d_max+1) each), anything else stays.  The
    induced chain is doubly stochastic with uniform stationary distribution.
    """

    def __init__(self, d_max: int):
        if d_max < 1:
            raise ValueError("d_max must be >= 1")
        self.d_max = d_max

    def step(self, rng, v: int, g: GraphSnapshot) -> int:
        nbrs = g.adj[v]
        if len(nbrs) > self.d_max:
            raise ProtocolError(f"observed degree {len(nbrs)} exceeds d_max={self.d_max}")
        j = rng.randrange(self.d_max + 1)
        return nbrs[j] if j < len(nbrs) else v


def lazy_adapter(schedule: GraphSchedule, d_max: int) -> LazyStepper:
    """Walk stepper that makes a (possibly non-regular) schedule behave like a
    (d_max+1)-regular one with uniform stationary distribution."""
    return LazyStepper(d_max)


_SIMPLE = SimpleStepper()


def _naive_steps(engine, start, steps, token_bits, stepper, collect_path):
    """Advance a single token `steps` rounds; returns (dest, provenance, hops)."""
    v = start
    prov = []
    hops = [] if collect_path else None
    exchange = engine.exchange
    for _ in range(steps):
        g = engine.next_snapshot()
        t = engine.round + 1
        u = stepper.step(engine.node_rng(v, TAG_NAIVE), v, g)
        if u == v:
            engine.idle(1)  # lazy stay: round consumed, nothing sent
        else:
            exchange(((v, u, token_bits, None),))
        prov.append(t)
        if collect_path:
            hops.append(u)
        v = u
    return v, prov, hops


def naive_walk(
    engine: CongestEngine,
    source: int,
    length: int,
    stepper=None,
    walk_id: int = 0,
    record_path: bool = True,
) -> WalkResult:
    """Forward one token for `length` rounds, one uniform step per snapshot."""
    if stepper is None:
        if engine.schedule.d is None:
            raise ProtocolError("non-regular schedule: engage the lazy adapter")
        stepper = _SIMPLE
    start_round = engine.round
    bits = engine.enc.token_bits(max(1, length))
    dest, prov, hops = _naive_steps(engine, source, length, bits, stepper, record_path)
    return WalkResult(
        source=source,
        destination=dest,
        rounds_used=engine.round - start_round,
        connectors=[source],
        step_provenance=prov,
        segment_lengths=[],
        fallbacks=0,
        path=[source] + hops if record_path else None,
        walk_id=walk_id,
    )


def concurrent_naive_walks(
    engine: CongestEngine,
    sources: Sequence[int],
    length: int,
    stepper=None,
    record_path: bool = True,
    token_bits: int | None = None,
) -> list[WalkResult]:
    """Run len(sources) naive walks simultaneously in `length` rounds."""
    if stepper is None:
        if engine.schedule.d is None:
            raise ProtocolError("non-regular schedule: engage the lazy adapter")
        stepper = _SIMPLE
    k = len(sources)
    bits = token_bits if token_bits is not None else engine.enc.token_bits(max(1, length), k)
    start_round = engine.round
    pos = list(sources)
    prov: list[list[int]] = [[] for _ in range(k)]
    paths = [[s] for s in sources] if record_path else None
    for _ in range(length):
        g = engine.next_snapshot()
        t = engine.round + 1
        sends = []
        for j in range(k):
            v = pos[j]
            u = stepper.step(engine.node_rng(v, TAG_NAIVE), v, g)
            if u != v:
                sends.append((v, u, bits, j))
            pos[j] = u
            prov[j].append(t)
            if record_path:
                paths[j].append(u)
        if sends:
            engine.exchange(sends)
        else:
            engine.idle(1)
    used = engine.round - start_round
    return [
        WalkResult(
            source=sources[j],
            destination=pos[j],
            rounds_used=used,
            connectors=[sources[j]],
            step_provenance=prov[j],
            segment_lengths=[],
            fallbacks=0,
            path=paths[j] if record_path else None,
            walk_id=j,
        )
        for j in range(k)
    ]


def phase1_distribute(
    engine: CongestEngine,
    params: WalkParams,
    record_paths: bool = True,
) -> CouponTable:
    """Phase 1: every node launches d coupons of desired length lambda + r_i.

    Runs for exactly 2*lambda engine rounds starting from a fresh engine;
    a coupon moves in round i iff its desired length is at least i, so each
    one rests at the endpoint of an independent walk of its desired length
    over snapshots G_1..G_{desired_length}.
    """
    if engine.round != 0:
        raise ProtocolError("phase 1 must start at round 0 (coupons walk G_1 onwards)")
    d = engine.schedule.d
    if d is None:
        raise ProtocolError("phase 1 requires a declared-regular schedule")
    n = engine.n
    lam = params.lambda_walk
    table = CouponTable(n, d, lam)
    held: list[list[int]] = [[] for _ in range(n)]
    draw = []
    for v in range(n):
        rng = engine.node_rng(v, TAG_PHASE1)
        draw.append(rng.randrange)
        for serial in range(1, d + 1):
            length = lam + rng.randrange(lam)
            ci = table.add(v, serial, length, [v] if record_paths else None)
            held[v].append(ci)
    coupon_bits = engine.enc.coupon_bits(lam, d)
    lengths = table.lengths
    holders = table.holders
    paths = table.paths
    for i in range(1, 2 * lam + 1):
        g = engine.next_snapshot()
        adj = g.adj
        sends = []
        append = sends.append
        for v in range(n):
            bucket = held[v]
            if not bucket:
                continue
            movers = [ci for ci in bucket if lengths[ci] >= i]
            if not movers:
                continue
            if len(movers) == len(bucket):
                held[v] = []
            else:
                held[v] = [ci for ci in bucket if lengths[ci] < i]
            rb = draw[v]
            nbrs = adj[v]
            m = len(nbrs)
            for ci in movers:
                append((v, nbrs[rb(m)], coupon_bits, ci))
        inbox = engine.exchange(sends)
        for v, items in inbox.items():
            bucket = held[v]
            for _, ci in items:
                bucket.append(ci)
                holders[ci] = v
                if paths is not None:
                    paths[ci].append(v)
    if paths is not None:
        assert all(len(paths[ci]) == lengths[ci] + 1 for ci in range(len(lengths)))
    return table


def sample_coupon(
    engine: CongestEngine,
    table: CouponTable,
    connector: int,
    phi: int,
    token_bits: int | None = None,
) -> tuple[Coupon, int]:
    """Stitch step: the connector samples one of its unused coupons uniformly.

    Costs exactly 2*phi rounds: a flood of (origin, serial) lets the unique
    holder self-identify, then a second flood carries the token to it.  The
    coupon is deleted so it can never be sampled again.
    """
    rng = engine.node_rng(connector, TAG_STITCH)
    ci = table.sample(connector, rng)  # raises CouponsExhausted
    if token_bits is None:
        token_bits = engine.enc.token_bits(2 * table.lambda_walk)
    engine.flood(engine.enc.request_bits(table.d), (connector,), phi)
    engine.flood(token_bits, (connector,), phi)
    return table.as_coupon(ci), table.holders[ci]


def single_random_walk(
    engine: CongestEngine,
    source: int,
    params: WalkParams,
    coupons: CouponTable | None = None,
    walk_id: int = 0,
    k_context: int = 1,
    record_path: bool = True,
) -> WalkResult:
    """Sample the endpoint of a tau-step walk by stitching Phase-1 coupons.

    While the completed length is at most tau - 2*lambda, the token holder
    samples one of its coupons and jumps to the holder; the rest (always
    below 2*lambda steps) is walked naively on live snapshots.  When a
    connector's coupons are exhausted, the token takes lambda live naive
    steps and resumes stitching (logged as a fallback).  For tau <= 2*lambda
    the stitched regime is unreachable and the walk is performed naively.
    """
    tau, lam = params.tau, params.lambda_walk
    start_round = engine.round
    token_bits = engine.enc.token_bits(tau, k_context)
    if coupons is None and tau <= 2 * lam:
        dest, prov, hops = _naive_steps(engine, source, tau, token_bits, _SIMPLE, record_path)
        return WalkResult(
            source=source,
            destination=dest,
            rounds_used=engine.round - start_round,
            connectors=[source],
            step_provenance=prov,
            segment_lengths=[],
            fallbacks=0,
            path=[source] + hops if record_path else None,
            walk_id=walk_id,
        )
    phi = engine.config.phi
    if phi is None:
        raise ProtocolError("stitched walks need phi in SimConfig")
    if coupons is None:
        coupons = phase1_distribute(engine, params, record_paths=record_path)
    completed = 0
    v = source
    connectors = [source]
    segments: list[int] = []
    prov: list[int] = []
    path = [source] if record_path else None
    fallbacks = 0
    stitches = 0
    while completed <= tau - 2 * lam:
        try:
            coupon, dest = sample_coupon(engine, coupons, v, phi, token_bits)
        except CouponsExhausted:
            fallbacks += 1
            v, p2, h2 = _naive_steps(engine, v, lam, token_bits, _SIMPLE, record_path)
            prov.extend(p2)
            if record_path:
                path.extend(h2)
            completed += lam
            continue
        stitches += 1
        if stitches > 1:
            connectors.append(v)
        completed += coupon.desired_length
        segments.append(coupon.desired_length)
        prov.extend(range(1, coupon.desired_length + 1))
        if record_path and coupon.path is not None:
            path.extend(coupon.path[1:])
        v = dest
    remainder = tau - completed
    if remainder > 0:
        v, p3, h3 = _naive_steps(engine, v, remainder, token_bits, _SIMPLE, record_path)
        prov.extend(p3)
        if record_path:
            path.extend(h3)
    return WalkResult(
        source=source,
        destination=v,
        rounds_used=engine.round - start_round,
        connectors=connectors,
        step_provenance=prov,
        segment_lengths=segments,
        fallbacks=fallbacks,
        path=path,
        walk_id=walk_id,
    )


def many_random_walks(
    engine: CongestEngine,
    sources: Sequence[int],
    tau: int,
    lambda_walk: int | None = None,
    lambda_c: float = 1.0,
    record_path: bool = True,
) -> list[WalkResult]:
    """k independent tau-length walks sharing one Phase 1.

    With lambda >= tau the walks are performed naively and concurrently in
    tau rounds; otherwise one coupon distribution serves all sources and the
    stitching runs source by source, consuming disjoint coupons.
    """
    k = len(sources)
    if k == 0:
        return []
    phi = engine.config.phi
    if lambda_walk is None:
        if phi is None:
            raise ProtocolError("many_random_walks needs phi to size lambda")
        lam = max(1, math.ceil(lambda_c * math.sqrt(k * max(1, tau) * phi)))
    else:
        lam = lambda_walk
    if lam >= tau:
        return concurrent_naive_walks(
            engine, sources, tau, record_path=record_path,
            token_bits=engine.enc.token_bits(max(1, tau), k),
        )
    params = WalkParams(tau=tau, lambda_walk=lam, lambda_c=lambda_c)
    table = phase1_distribute(engine, params, record_paths=record_path)
    return [
        single_random_walk(
            engine, s, params, coupons=table, walk_id=j, k_context=k, record_path=record_path
        )
        for j, s in enumerate(sources)
    ]


@dataclass
class VisitStats:
    """Per-node visit counts and stitch-point counts over a batch of walks.

    Visits count every walk position including the start.  Connector counts
    cover stitch events after the walk's first sample, i.e. the segment
    boundaries inside (0, tau]; the source's initial membership in the
    connector set is bookkeeping, not a stitch event.
    """

    visits: np.ndarray
    connector_counts: np.ndarray


def visit_stats(results: Sequence[WalkResult], n: int) -> VisitStats:
    visits = np.zeros(n, dtype=np.int64)
    conns = np.zeros(n, dtype=np.int64)
    for res in results:
        if res.path is None:
            raise ValueError("visit_stats needs walks recorded with record_path=True")
        for v in res.path:
            visits[v] += 1
        for v in res.connectors[1:]:
            conns[v] += 1
    return VisitStats(visits=visits, connector_counts=conns)
