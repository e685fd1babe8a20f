"""Deterministic round-synchronous message-passing simulator.

Nodes run a NodeProgram: ``init`` builds local state from the node's local
view, and ``step`` consumes the previous round's inbox and produces an outbox
plus an optional final output.  All round-i outboxes are delivered as
round-(i+1) inboxes.  Per-node randomness streams are derived from
(seed, node id), so results are independent of scheduling; executing with any
worker count yields byte-identical traces.

Messages are length-prefixed byte strings; a message of b bytes is accounted
as 8*b bits.  Bit budgets are audited, never enforced.
"""

from __future__ import annotations

import hashlib
import random
import zlib
from array import array
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Optional

from .graphs import Graph


class IncidentEdge(NamedTuple):
    eid: int
    tail: int
    head: int
    w: int
    client: bool
    server: bool


class Channel(NamedTuple):
    channel: int
    peer: int
    edges: tuple[IncidentEdge, ...]


class LocalView(NamedTuple):
    node: int
    n: int
    directed: bool
    weighted: bool
    client_server: bool
    channels: tuple[Channel, ...]


class NodeProgram:
    """Abstract node behavior; subclasses must be deterministic functions of
    (state, inbox, randomness stream)."""

    def init(self, view: LocalView, rng: random.Random) -> Any:
        raise NotImplementedError

    def step(
        self, state: Any, round_no: int, inbox: list[tuple[int, bytes]], rng: random.Random
    ) -> tuple[Any, dict[int, bytes], Optional[Any]]:
        raise NotImplementedError

    def observe(self, round_no: int, states: list[Any]) -> Optional[dict]:
        """Optional read-only metrics hook, recorded into the trace; node
        behavior must not depend on it."""
        return None


class SimulationError(RuntimeError):
    pass


class RoundLimitExceeded(SimulationError):
    def __init__(self, trace: "Trace"):
        super().__init__(f"round limit reached after {trace.rounds} rounds without global output")
        self.trace = trace


@dataclass
class Trace:
    seed: int
    n: int
    channels: tuple[tuple[int, int], ...]  # channel id -> endpoints
    rounds: int = 0
    outputs: dict[int, Any] = field(default_factory=dict)
    # per round: flat array of (channel*2 + direction, payload bits) pairs
    message_sizes: list[array] = field(default_factory=list)
    payloads: Optional[list[list[tuple[int, int, bytes]]]] = None
    metrics: list[dict] = field(default_factory=list)
    digest: int = 0
    total_bits: int = 0
    total_messages: int = 0
    max_message_bits: int = 0
    completed: bool = False

    def register_metrics(self, record: dict) -> None:
        self.metrics.append(record)


def node_rng(seed: int, node: int) -> random.Random:
    h = hashlib.sha256(f"{seed}/{node}".encode()).digest()
    return random.Random(int.from_bytes(h[:8], "big"))


def build_channels(g: Graph) -> tuple[tuple[tuple[int, int], ...], list[list[Channel]]]:
    """One bidirectional channel per adjacent vertex pair (antiparallel
    directed edges share a channel)."""
    pair_to_channel: dict[tuple[int, int], int] = {}
    pair_edges: dict[tuple[int, int], list[IncidentEdge]] = {}
    order: list[tuple[int, int]] = []
    for eid, e in enumerate(g.edges):
        key = (min(e.u, e.v), max(e.u, e.v))
        if key not in pair_to_channel:
            pair_to_channel[key] = len(order)
            order.append(key)
            pair_edges[key] = []
        pair_edges[key].append(IncidentEdge(eid, e.u, e.v, e.w, e.client, e.server))
    per_node: list[list[Channel]] = [[] for _ in range(g.n)]
    for key in order:
        cid = pair_to_channel[key]
        u, v = key
        edges = tuple(pair_edges[key])
        per_node[u].append(Channel(cid, v, edges))
        per_node[v].append(Channel(cid, u, edges))
    return tuple(order), per_node


def run(
    g: Graph,
    program: NodeProgram,
    seed: int,
    max_rounds: int,
    workers: int = 1,
    keep_payloads: bool = False,
) -> Trace:
    """Execute the program on every vertex until all emit output or the round
    limit is hit (which raises RoundLimitExceeded carrying the partial trace)."""
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    channel_pairs, per_node = build_channels(g)
    views = [
        LocalView(
            node=v,
            n=g.n,
            directed=g.directed,
            weighted=g.weighted,
            client_server=g.client_server,
            channels=tuple(per_node[v]),
        )
        for v in range(g.n)
    ]
    rngs = [node_rng(seed, v) for v in range(g.n)]
    states: list[Any] = [program.init(views[v], rngs[v]) for v in range(g.n)]
    incident_ok = [frozenset(ch.channel for ch in per_node[v]) for v in range(g.n)]
    ch_peer = [
        {ch.channel: ch.peer for ch in per_node[v]} for v in range(g.n)
    ]
    ch_low_end = [pair[0] for pair in channel_pairs]
    trace = Trace(seed=seed, n=g.n, channels=channel_pairs)
    if keep_payloads:
        trace.payloads = []
    inboxes: list[list[tuple[int, bytes]]] = [[] for _ in range(g.n)]
    done = [False] * g.n
    n_done = 0
    rec = program.observe(-1, states)
    if rec is not None:
        trace.register_metrics(rec)

    for round_no in range(max_rounds):
        if n_done == g.n:
            trace.completed = True
            break
        active = [v for v in range(g.n) if not done[v]]

        def exec_node(v: int):
            return program.step(states[v], round_no, inboxes[v], rngs[v])

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = dict(zip(active, pool.map(exec_node, active)))
        else:
            results = {v: exec_node(v) for v in active}
        next_inboxes: list[list[tuple[int, bytes]]] = [[] for _ in range(g.n)]
        sizes = array("Q")
        crc = trace.digest
        if keep_payloads:
            round_payloads: list[tuple[int, int, bytes]] = []
        for v in active:
            state, outbox, output = results[v]
            states[v] = state
            if outbox:
                if done[v]:
                    raise SimulationError(f"node {v} sent after final output")
                for cid in sorted(outbox):
                    payload = outbox[cid]
                    if cid not in incident_ok[v]:
                        raise SimulationError(
                            f"node {v} sent on non-incident channel {cid}"
                        )
                    peer = ch_peer[v][cid]
                    next_inboxes[peer].append((cid, payload))
                    bits = 8 * len(payload)
                    direction = 0 if ch_low_end[cid] == v else 1
                    sizes.append(cid * 2 + direction)
                    sizes.append(bits)
                    trace.total_bits += bits
                    trace.total_messages += 1
                    if bits > trace.max_message_bits:
                        trace.max_message_bits = bits
                    crc = zlib.crc32(payload, crc ^ (cid * 2 + direction))
                    if keep_payloads:
                        round_payloads.append((cid, v, payload))
            if output is not None:
                if done[v]:
                    raise SimulationError(f"node {v} emitted output twice")
                done[v] = True
                n_done += 1
                trace.outputs[v] = output
        trace.digest = crc
        trace.message_sizes.append(sizes)
        if keep_payloads:
            trace.payloads.append(round_payloads)
        trace.rounds += 1
        inboxes = next_inboxes
        rec = program.observe(round_no, states)
        if rec is not None:
            trace.register_metrics(rec)
    else:
        if n_done < g.n:
            raise RoundLimitExceeded(trace)
        trace.completed = True
    if n_done == g.n:
        trace.completed = True
    return trace


@dataclass(frozen=True)
class AuditReport:
    rounds: int
    messages: int
    total_bits: int
    max_message_bits: int
    cut_edges: Optional[int] = None
    cut_bits: Optional[int] = None
    cut_messages: Optional[int] = None


def audit(trace: Trace, cut: Optional[tuple[Iterable[int], Iterable[int]]] = None) -> AuditReport:
    """Recompute message statistics from the per-round size log; with a vertex
    bipartition (V_A, V_B), also account traffic crossing the cut."""
    total_bits = 0
    messages = 0
    max_bits = 0
    cut_chan: Optional[set[int]] = None
    if cut is not None:
        side_a, side_b = set(cut[0]), set(cut[1])
        if side_a & side_b or (side_a | side_b) != set(range(trace.n)):
            raise ValueError("cut must partition all vertices")
        cut_chan = {
            cid
            for cid, (u, v) in enumerate(trace.channels)
            if (u in side_a) != (v in side_a)
        }
    cut_bits = 0
    cut_messages = 0
    for sizes in trace.message_sizes:
        for i in range(0, len(sizes), 2):
            code, bits = sizes[i], sizes[i + 1]
            total_bits += bits
            messages += 1
            if bits > max_bits:
                max_bits = bits
            if cut_chan is not None and (code // 2) in cut_chan:
                cut_bits += bits
                cut_messages += 1
    return AuditReport(
        rounds=trace.rounds,
        messages=messages,
        total_bits=total_bits,
        max_message_bits=max_bits,
        cut_edges=len(cut_chan) if cut_chan is not None else None,
        cut_bits=cut_bits if cut_chan is not None else None,
        cut_messages=cut_messages if cut_chan is not None else None,
    )


# -- compact message codec ---------------------------------------------------


def enc_uint(value: int, out: bytearray) -> None:
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def pack(tag: int, values: Iterable[int] = ()) -> bytes:
    out = bytearray([tag])
    for v in values:
        enc_uint(v, out)
    return bytes(out)


def _unpack_raw(data: bytes) -> tuple[int, tuple[int, ...]]:
    tag = data[0]
    values = []
    acc = 0
    shift = 0
    for b in data[1:]:
        acc |= (b & 0x7F) << shift
        if b & 0x80:
            shift += 7
        else:
            values.append(acc)
            acc = 0
            shift = 0
    return tag, tuple(values)


_UNPACK_CACHE: dict[bytes, tuple[int, tuple[int, ...]]] = {}


def unpack(data: bytes) -> tuple[int, tuple[int, ...]]:
    """Decode a message; broadcast payloads are decoded once and memoized."""
    got = _UNPACK_CACHE.get(data)
    if got is None:
        if len(_UNPACK_CACHE) > 1 << 16:
            _UNPACK_CACHE.clear()
        got = _UNPACK_CACHE[data] = _unpack_raw(data)
    return got


def zigzag(v: int) -> int:
    return (v << 1) ^ (v >> 63) if v >= 0 else ((-v) << 1) - 1


def unzigzag(u: int) -> int:
    return -( (u + 1) >> 1) if u & 1 else u >> 1
