"""Graph representation, spanner verification, and the shared text format.

Graphs are simple (no self-loops, no parallel edges), optionally directed,
optionally carrying non-negative integer weights and/or client/server edge
flags.  Instances are immutable after construction and safe to share across
threads.  Edge subsets are plain ``frozenset``/``set`` objects holding edge
indices of a host graph.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

MAX_WEIGHT = 2**63 - 1


class GraphFormatError(ValueError):
    """Malformed graph text; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class Edge(NamedTuple):
    u: int
    v: int
    w: int = 1
    client: bool = False
    server: bool = False


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[Edge, ...]
    directed: bool = False
    weighted: bool = False
    client_server: bool = False
    # adjacency[v] lists indices of edges incident to v (directed: both ends)
    adjacency: tuple[tuple[int, ...], ...] = field(default=(), compare=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    @property
    def weight_ratio(self) -> Optional[int]:
        """Ratio of max to min positive weight, rounded up; None if unweighted."""
        if not self.weighted:
            return None
        pos = [e.w for e in self.edges if e.w > 0]
        if not pos:
            return None
        return -((-max(pos)) // min(pos))

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def other_end(self, eid: int, v: int) -> int:
        e = self.edges[eid]
        return e.v if e.u == v else e.u

    def neighbors(self, v: int) -> list[int]:
        seen, out = set(), []
        for eid in self.adjacency[v]:
            u = self.other_end(eid, v)
            if u not in seen:
                seen.add(u)
                out.append(u)
        return out

    def edge_index(self) -> dict[tuple[int, int], int]:
        """Map (u, v) -> edge id; undirected keys are canonical (min, max)."""
        idx = {}
        for i, e in enumerate(self.edges):
            key = (e.u, e.v) if self.directed else (min(e.u, e.v), max(e.u, e.v))
            idx[key] = i
        return idx

    def connected_components(self) -> list[list[int]]:
        seen = [False] * self.n
        comps = []
        for s in range(self.n):
            if seen[s]:
                continue
            comp, queue = [], deque([s])
            seen[s] = True
            while queue:
                v = queue.popleft()
                comp.append(v)
                for eid in self.adjacency[v]:
                    u = self.other_end(eid, v)
                    if not seen[u]:
                        seen[u] = True
                        queue.append(u)
            comps.append(comp)
        return comps

    def is_connected(self) -> bool:
        return self.n <= 1 or len(self.connected_components()) == 1


def build_graph(
    n: int,
    edges: Iterable[tuple],
    directed: bool = False,
    weighted: bool = False,
    client_server: bool = False,
) -> Graph:
    """Construct a validated Graph.

    Edge tuples are (u, v), (u, v, w), or (u, v, w, client, server).
    Undirected edges are stored once with endpoints in (min, max) order.
    """
    norm: list[Edge] = []
    seen: set[tuple[int, int]] = set()
    for t in edges:
        u, v = t[0], t[1]
        w = t[2] if len(t) > 2 and t[2] is not None else 1
        client = bool(t[3]) if len(t) > 3 else False
        server = bool(t[4]) if len(t) > 4 else False
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"vertex id out of range in edge ({u}, {v})")
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        if not (0 <= w <= MAX_WEIGHT):
            raise ValueError(f"weight {w} outside [0, 2^63)")
        if not directed and u > v:
            u, v = v, u
        if (u, v) in seen:
            raise ValueError(f"duplicate edge ({u}, {v})")
        seen.add((u, v))
        if client_server and not (client or server):
            raise ValueError(f"edge ({u}, {v}) carries neither client nor server flag")
        norm.append(Edge(u, v, w if weighted else 1, client, server))
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, e in enumerate(norm):
        adj[e.u].append(i)
        adj[e.v].append(i)
    return Graph(
        n=n,
        edges=tuple(norm),
        directed=directed,
        weighted=weighted,
        client_server=client_server,
        adjacency=tuple(tuple(a) for a in adj),
    )


def parse_graph(text: str) -> Graph:
    """Parse the shared text format.

    Header: ``p spanner <n> <m> <directed:0|1> <weighted:0|1> [cs]``
    followed by m lines ``e <u> <v> [weight] [flags]`` where flags is a token
    over {c, s}.  Lines starting with '#' are comments.
    """
    header = None
    edges: list[tuple] = []
    n = m = 0
    directed = weighted = cs = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if header is not None:
                raise GraphFormatError(line_no, "duplicate header")
            if len(parts) < 6 or parts[1] != "spanner":
                raise GraphFormatError(line_no, "expected 'p spanner n m directed weighted'")
            try:
                n, m = int(parts[2]), int(parts[3])
                directed, weighted = bool(int(parts[4])), bool(int(parts[5]))
            except ValueError:
                raise GraphFormatError(line_no, "non-integer header field") from None
            rest = parts[6:]
            if rest == ["cs"]:
                cs = True
            elif rest:
                raise GraphFormatError(line_no, f"unexpected header tokens {rest}")
            if n < 0 or m < 0:
                raise GraphFormatError(line_no, "negative n or m")
            header = line_no
        elif parts[0] == "e":
            if header is None:
                raise GraphFormatError(line_no, "edge before header")
            toks = parts[1:]
            if len(toks) < 2:
                raise GraphFormatError(line_no, "edge needs two endpoints")
            try:
                u, v = int(toks[0]), int(toks[1])
            except ValueError:
                raise GraphFormatError(line_no, "non-integer endpoint") from None
            toks = toks[2:]
            w = None
            if weighted:
                if not toks:
                    raise GraphFormatError(line_no, "missing weight on weighted graph")
                try:
                    w = int(toks[0])
                except ValueError:
                    raise GraphFormatError(line_no, "non-integer weight") from None
                if w < 0:
                    raise GraphFormatError(line_no, "negative weight")
                toks = toks[1:]
            client = server = False
            if toks:
                flag_tok = toks[0]
                if len(toks) > 1 or not flag_tok or any(ch not in "cs" for ch in flag_tok):
                    raise GraphFormatError(line_no, f"bad flags {toks}")
                client = "c" in flag_tok
                server = "s" in flag_tok
            edges.append((u, v, w, client, server, line_no))
        else:
            raise GraphFormatError(line_no, f"unknown record '{parts[0]}'")
    if header is None:
        raise GraphFormatError(1, "missing header")
    if len(edges) != m:
        raise GraphFormatError(header, f"header declares {m} edges, found {len(edges)}")
    try:
        return build_graph(
            n,
            [(u, v, w, c, s) for (u, v, w, c, s, _) in edges],
            directed=directed,
            weighted=weighted,
            client_server=cs,
        )
    except ValueError as exc:
        # attribute to the offending edge line when possible
        for (u, v, w, c, s, ln) in edges:
            try:
                build_graph(n, [(u, v, w, c, s)], directed, weighted, cs)
            except ValueError:
                raise GraphFormatError(ln, str(exc)) from None
        raise GraphFormatError(header, str(exc)) from None


def format_graph(g: Graph) -> str:
    header = f"p spanner {g.n} {g.m} {int(g.directed)} {int(g.weighted)}"
    if g.client_server:
        header += " cs"
    lines = [header]
    for e in g.edges:
        parts = ["e", str(e.u), str(e.v)]
        if g.weighted:
            parts.append(str(e.w))
        flags = ("c" if e.client else "") + ("s" if e.server else "")
        if flags:
            parts.append(flags)
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class VerificationReport:
    valid: bool
    uncovered: tuple[int, ...]  # edge ids lacking a short enough path


def _covered_k2(g: Graph, nbr_sets: list[set[int]], in_h: Sequence[bool], eid: int) -> bool:
    e = g.edges[eid]
    if in_h[eid]:
        return True
    if g.directed:
        # need x with (u,x) and (x,v) in h
        return any(x in nbr_sets[e.v + g.n] for x in nbr_sets[e.u])
    return not nbr_sets[e.u].isdisjoint(nbr_sets[e.v])


def _covered_bfs(g: Graph, h_adj: list[list[int]], in_h: Sequence[bool], eid: int, k: int) -> bool:
    if in_h[eid]:
        return True
    e = g.edges[eid]
    src, dst = e.u, e.v
    dist = {src: 0}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        d = dist[v]
        if d == k:
            continue
        for u in h_adj[v]:
            if u not in dist:
                if u == dst:
                    return True
                dist[u] = d + 1
                queue.append(u)
    return False


def verify_spanner(g: Graph, h: Iterable[int], k: int, mode: str = "plain") -> VerificationReport:
    """Check that every edge (every client edge in client-server mode) has a
    path of length at most k inside h between its endpoints; directed edges
    need a directed path from tail to head."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if mode not in ("plain", "client-server"):
        raise ValueError(f"unknown mode {mode!r}")
    h = set(h)
    for eid in h:
        if not (0 <= eid < g.m):
            raise ValueError(f"edge id {eid} not in host graph")
    if mode == "client-server":
        for eid in h:
            if not g.edges[eid].server:
                raise ValueError(f"edge {eid} in h is not a server edge")
    in_h = [False] * g.m
    for eid in h:
        in_h[eid] = True
    targets = [
        eid
        for eid in range(g.m)
        if mode == "plain" or g.edges[eid].client
    ]
    uncovered = []
    if k == 2:
        # out-neighbors in h, and (directed) in-neighbors offset by n
        nbr_sets: list[set[int]] = [set() for _ in range(g.n * (2 if g.directed else 1))]
        for eid in h:
            e = g.edges[eid]
            nbr_sets[e.u].add(e.v)
            if g.directed:
                nbr_sets[e.v + g.n].add(e.u)
            else:
                nbr_sets[e.v].add(e.u)
        for eid in targets:
            if not _covered_k2(g, nbr_sets, in_h, eid):
                uncovered.append(eid)
    else:
        h_adj: list[list[int]] = [[] for _ in range(g.n)]
        for eid in h:
            e = g.edges[eid]
            h_adj[e.u].append(e.v)
            if not g.directed:
                h_adj[e.v].append(e.u)
        for eid in targets:
            if not _covered_bfs(g, h_adj, in_h, eid, k):
                uncovered.append(eid)
    return VerificationReport(valid=not uncovered, uncovered=tuple(sorted(uncovered)))


def spanner_cost(g: Graph, h: Iterable[int]) -> int:
    """Total weight of h (cardinality on unweighted graphs)."""
    h = set(h)
    for eid in h:
        if not (0 <= eid < g.m):
            raise ValueError(f"edge id {eid} not in host graph")
    if not g.weighted:
        return len(h)
    return sum(g.edges[eid].w for eid in h)


def gnp_random_connected(n: int, p: float, rng: random.Random) -> Graph:
    """G(n, p) conditioned on connectivity: missing tree edges are patched in
    by linking each non-root component representative to a random earlier
    vertex."""
    edges = set()
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                edges.add((u, v))
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (u, v) in sorted(edges):
        parent[find(u)] = find(v)
    for v in range(1, n):
        if find(v) != find(0):
            u = rng.randrange(v)
            edges.add((u, v))
            parent[find(u)] = find(v)
    return build_graph(n, sorted(edges))
