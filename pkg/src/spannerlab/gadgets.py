"""Hardness-construction graphs and their combinatorial verifiers.

Three families:
  * the two-player disjointness gadget: a directed graph whose dense
    bipartite block D has edges forced into every k-spanner (k >= 5) exactly
    at index pairs where both input strings carry a 1;
  * weighted variants (directed, and an undirected path-lengthened form)
    where a 0-cost k-spanner exists iff the inputs are disjoint;
  * the vertex-cover reduction: per-vertex triangles and per-edge cross
    edges with weights in {0, 1, 2}, whose minimum-cost 2-spanner equals the
    minimum vertex cover exactly, with explicit maps in both directions.

Vertex numbering is deterministic and documented in each gadget's
``groups`` mapping so tests can address vertices symbolically.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .graphs import Graph, build_graph, verify_spanner


@dataclass(frozen=True)
class DisjointnessGadget:
    graph: Graph
    ell: int
    beta: int
    a: str
    b: str
    groups: dict = field(compare=False)
    d_edges: frozenset[int] = frozenset()
    side_a: frozenset[int] = frozenset()  # V_A
    side_b: frozenset[int] = frozenset()  # V_B = Y_1
    c: int = 7

    @property
    def threshold(self) -> int:
        le, be = self.ell, self.beta
        return self.c * le * be if be >= le else self.c * le * le


def _check_bits(name: str, s: str, length: int) -> None:
    if len(s) != length or any(ch not in "01" for ch in s):
        raise ValueError(f"{name} must be a 0/1 string of length {length}")


def gen_disjointness_gadget(ell: int, beta: int, a: str, b: str) -> DisjointnessGadget:
    """Directed gadget on 2*ell*beta + 5*ell vertices with the complete
    bipartite block D of (ell*beta)^2 edges; the inputs control the optional
    edges inside each player's side."""
    if ell < 1 or beta < 1:
        raise ValueError("ell and beta must be positive")
    _check_bits("a", a, ell * ell)
    _check_bits("b", b, ell * ell)
    groups: dict[str, int] = {}

    def reg(name: str, vid: int) -> int:
        groups[name] = vid
        return vid

    nxt = 0
    for i in range(1, ell + 1):
        reg(f"x1_{i}", nxt)
        nxt += 1
    for i in range(1, ell + 1):
        reg(f"x2_{i}", nxt)
        nxt += 1
    for i in range(1, ell + 1):
        reg(f"y1_{i}", nxt)
        nxt += 1
    for i in range(1, ell + 1):
        reg(f"y2_{i}", nxt)
        nxt += 1
    for i in range(1, ell + 1):
        for j in range(1, beta + 1):
            reg(f"x_{i}_{j}", nxt)
            nxt += 1
    for i in range(1, ell + 1):
        for j in range(1, beta + 1):
            reg(f"y_{i}_{j}", nxt)
            nxt += 1
    for i in range(1, ell + 1):
        reg(f"y3_{i}", nxt)
        nxt += 1
    n = nxt
    edges: list[tuple[int, int]] = []
    for i in range(1, ell + 1):
        edges.append((groups[f"x1_{i}"], groups[f"y1_{i}"]))
        edges.append((groups[f"x2_{i}"], groups[f"y2_{i}"]))
        edges.append((groups[f"y2_{i}"], groups[f"y3_{i}"]))
    for i in range(1, ell + 1):
        for j in range(1, beta + 1):
            edges.append((groups[f"x_{i}_{j}"], groups[f"x1_{i}"]))
            edges.append((groups[f"y3_{i}"], groups[f"y_{i}_{j}"]))
    for i in range(1, ell + 1):
        for j in range(1, ell + 1):
            if a[(i - 1) * ell + (j - 1)] == "0":
                edges.append((groups[f"x1_{i}"], groups[f"x2_{j}"]))
            if b[(i - 1) * ell + (j - 1)] == "0":
                edges.append((groups[f"y1_{i}"], groups[f"y2_{j}"]))
    d_start = len(edges)
    for i in range(1, ell + 1):
        for j in range(1, beta + 1):
            for r in range(1, ell + 1):
                for s in range(1, beta + 1):
                    edges.append((groups[f"x_{i}_{j}"], groups[f"y_{r}_{s}"]))
    g = build_graph(n, edges, directed=True)
    side_b = frozenset(
        [groups[f"y1_{i}"] for i in range(1, ell + 1)]
        + [groups[f"y2_{i}"] for i in range(1, ell + 1)]
    )
    return DisjointnessGadget(
        graph=g,
        ell=ell,
        beta=beta,
        a=a,
        b=b,
        groups=groups,
        d_edges=frozenset(range(d_start, len(edges))),
        side_a=frozenset(range(n)) - side_b,
        side_b=side_b,
    )


@dataclass(frozen=True)
class GadgetClaimReport:
    ok: bool
    violations: tuple[str, ...]
    disjoint: bool
    forced_d_edges: int
    intersecting_pairs: int
    spanner_size: Optional[int]  # size of E minus D when the inputs are disjoint


def _bfs_dist(g: Graph, adj: list[list[int]], src: int, limit: int) -> dict[int, int]:
    dist = {src: 0}
    queue = deque([src])
    while queue:
        v = queue.popleft()
        d = dist[v]
        if d == limit:
            continue
        for w in adj[v]:
            if w not in dist:
                dist[w] = d + 1
                queue.append(w)
    return dist


def verify_gadget_claims(gadget: DisjointnessGadget, k: int) -> GadgetClaimReport:
    """Check the construction's combinatorial guarantees at stretch k >= 5:
    short detours exist around a D edge exactly when the inputs' bit pair is
    not (1, 1); all-but-D is a valid k-spanner of bounded size when the
    inputs are disjoint; each intersecting index pair forces its beta^2
    block of D into every k-spanner."""
    if k < 5:
        raise ValueError("the construction targets k >= 5")
    g = gadget.graph
    ell, beta = gadget.ell, gadget.beta
    violations: list[str] = []
    non_d_adj: list[list[int]] = [[] for _ in range(g.n)]
    for eid, e in enumerate(g.edges):
        if eid not in gadget.d_edges:
            non_d_adj[e.u].append(e.v)
    bit = lambda s, i, r: s[(i - 1) * ell + (r - 1)]
    intersecting = [
        (i, r)
        for i in range(1, ell + 1)
        for r in range(1, ell + 1)
        if bit(gadget.a, i, r) == "1" and bit(gadget.b, i, r) == "1"
    ]
    disjoint = not intersecting
    # detour claim, for every (i, j, r, s)
    for i in range(1, ell + 1):
        for j in range(1, beta + 1):
            dist = _bfs_dist(g, non_d_adj, gadget.groups[f"x_{i}_{j}"], 5)
            for r in range(1, ell + 1):
                expect = bit(gadget.a, i, r) == "0" or bit(gadget.b, i, r) == "0"
                for s in range(1, beta + 1):
                    got = dist.get(gadget.groups[f"y_{r}_{s}"])
                    if expect and (got is None or got > 5):
                        violations.append(f"missing length-5 detour for ({i},{j},{r},{s})")
                    if not expect and got is not None:
                        violations.append(f"unexpected detour for ({i},{j},{r},{s})")
    # forced edges, operationalized: no replacement path of length <= k
    full_adj: list[list[tuple[int, int]]] = [[] for _ in range(g.n)]
    for eid, e in enumerate(g.edges):
        full_adj[e.u].append((e.v, eid))
    forced = 0
    forced_by_pair: dict[tuple[int, int], int] = {}
    for eid in sorted(gadget.d_edges):
        e = g.edges[eid]
        dist = {e.u: 0}
        queue = deque([e.u])
        reached = False
        while queue and not reached:
            v = queue.popleft()
            d = dist[v]
            if d == k:
                continue
            for (w, fid) in full_adj[v]:
                if fid == eid:
                    continue
                if w == e.v:
                    reached = True
                    break
                if w not in dist:
                    dist[w] = d + 1
                    queue.append(w)
        if not reached:
            forced += 1
            name = _d_edge_pair(gadget, eid)
            forced_by_pair[name] = forced_by_pair.get(name, 0) + 1
    spanner_size = None
    if disjoint:
        non_d = frozenset(range(g.m)) - gadget.d_edges
        rep = verify_spanner(g, non_d, k)
        if not rep.valid:
            violations.append(f"all-but-D fails to k-span: {rep.uncovered[:5]}")
        spanner_size = len(non_d)
        if spanner_size > gadget.threshold:
            violations.append(
                f"sparse spanner too big: {spanner_size} > {gadget.threshold}"
            )
        if forced:
            violations.append(f"{forced} forced D edges despite disjoint inputs")
    else:
        for (i, r) in intersecting:
            got = forced_by_pair.get((i, r), 0)
            if got < beta * beta:
                violations.append(f"pair ({i},{r}) forces only {got} < beta^2 edges")
        if 12 * len(intersecting) >= ell * ell:
            need = (beta * beta * ell * ell) // 12
            if forced < need:
                violations.append(
                    f"far-from-disjoint inputs force {forced} < {need} edges"
                )
    return GadgetClaimReport(
        ok=not violations,
        violations=tuple(violations),
        disjoint=disjoint,
        forced_d_edges=forced,
        intersecting_pairs=len(intersecting),
        spanner_size=spanner_size,
    )


def _d_edge_pair(gadget: DisjointnessGadget, eid: int) -> tuple[int, int]:
    e = gadget.graph.edges[eid]
    names = {v: k for k, v in gadget.groups.items()}
    i = int(names[e.u].split("_")[1])
    r = int(names[e.v].split("_")[1])
    return (i, r)


@dataclass(frozen=True)
class WeightedGadget:
    graph: Graph
    ell: int
    k: int
    directed: bool
    a: str
    b: str
    groups: dict = field(compare=False)
    d_edges: frozenset[int] = frozenset()
    side_b: frozenset[int] = frozenset()

    @property
    def side_a(self) -> frozenset[int]:
        return frozenset(range(self.graph.n)) - self.side_b


def gen_weighted_gadget(ell: int, k: int, directed: bool, a: str, b: str) -> WeightedGadget:
    """Weighted lower-bound gadget: D edges weigh 1, everything else 0, and a
    0-cost k-spanner exists iff the inputs are disjoint.  The undirected form
    replaces each (y2_i, y_i) edge by a 0-weight path of length k - 3."""
    if k < 4:
        raise ValueError("the weighted construction targets k >= 4")
    if ell < 1:
        raise ValueError("ell must be positive")
    _check_bits("a", a, ell * ell)
    _check_bits("b", b, ell * ell)
    groups: dict[str, int] = {}
    nxt = 0

    def reg(name: str) -> int:
        nonlocal nxt
        groups[name] = nxt
        nxt += 1
        return groups[name]

    for i in range(1, ell + 1):
        reg(f"x1_{i}")
    for i in range(1, ell + 1):
        reg(f"x2_{i}")
    for i in range(1, ell + 1):
        reg(f"y1_{i}")
    for i in range(1, ell + 1):
        reg(f"y2_{i}")
    for i in range(1, ell + 1):
        reg(f"x_{i}")
    for i in range(1, ell + 1):
        reg(f"y_{i}")
    edges: list[tuple[int, int, int]] = []
    for i in range(1, ell + 1):
        edges.append((groups[f"x1_{i}"], groups[f"y1_{i}"], 0))
        edges.append((groups[f"x2_{i}"], groups[f"y2_{i}"], 0))
        edges.append((groups[f"x_{i}"], groups[f"x1_{i}"], 0))
    if directed:
        for i in range(1, ell + 1):
            edges.append((groups[f"y2_{i}"], groups[f"y_{i}"], 0))
    else:
        for i in range(1, ell + 1):
            prev = groups[f"y2_{i}"]
            for step in range(k - 4):
                nxt_v = reg(f"yp_{i}_{step + 3}")
                edges.append((prev, nxt_v, 0))
                prev = nxt_v
            edges.append((prev, groups[f"y_{i}"], 0))
    for i in range(1, ell + 1):
        for j in range(1, ell + 1):
            if a[(i - 1) * ell + (j - 1)] == "0":
                edges.append((groups[f"x1_{i}"], groups[f"x2_{j}"], 0))
            if b[(i - 1) * ell + (j - 1)] == "0":
                edges.append((groups[f"y1_{i}"], groups[f"y2_{j}"], 0))
    d_start = len(edges)
    for i in range(1, ell + 1):
        for j in range(1, ell + 1):
            edges.append((groups[f"x_{i}"], groups[f"y_{j}"], 1))
    g = build_graph(nxt, edges, directed=directed, weighted=True)
    side_b = frozenset(
        [groups[f"y1_{i}"] for i in range(1, ell + 1)]
        + [groups[f"y2_{i}"] for i in range(1, ell + 1)]
    )
    return WeightedGadget(
        graph=g,
        ell=ell,
        k=k,
        directed=directed,
        a=a,
        b=b,
        groups=groups,
        d_edges=frozenset(range(d_start, len(edges))),
        side_b=side_b,
    )


@dataclass(frozen=True)
class WeightedGadgetReport:
    ok: bool
    violations: tuple[str, ...]
    disjoint: bool
    zero_cost_spanner: bool


def verify_weighted_gadget(gadget: WeightedGadget) -> WeightedGadgetReport:
    """A 0-cost k-spanner (all weight-0 edges) exists iff the inputs are
    disjoint, checked by running the spanner verifier on the 0-weight set."""
    g = gadget.graph
    ell = gadget.ell
    zero = frozenset(eid for eid in range(g.m) if g.edges[eid].w == 0)
    rep = verify_spanner(g, zero, gadget.k)
    disjoint = all(
        gadget.a[t] == "0" or gadget.b[t] == "0" for t in range(ell * ell)
    )
    violations = []
    if rep.valid != disjoint:
        violations.append(
            f"0-cost spanner {'exists' if rep.valid else 'missing'} with "
            f"{'disjoint' if disjoint else 'intersecting'} inputs"
        )
    if not rep.valid:
        for eid in rep.uncovered:
            if eid not in gadget.d_edges:
                violations.append(f"non-D edge {eid} uncovered by the 0-weight set")
                break
    return WeightedGadgetReport(
        ok=not violations,
        violations=tuple(violations),
        disjoint=disjoint,
        zero_cost_spanner=rep.valid,
    )


# ---------------------------------------------------------------------------
# vertex-cover reduction


@dataclass(frozen=True)
class ReductionGadget:
    source: Graph
    graph: Graph
    directed: bool
    # vertex v of the source maps to (3v, 3v+1, 3v+2) = (v1, v2, v3)
    unit_edges: dict = field(compare=False)  # source vertex -> eid of {v1, v2}


def _triple(v: int) -> tuple[int, int, int]:
    return 3 * v, 3 * v + 1, 3 * v + 2


def gen_mvc_reduction(source: Graph, directed: bool = False) -> ReductionGadget:
    """Per source vertex a weighted triangle (unit edge {v1,v2} covered by two
    0-weight edges), per source edge two 0-weight rails and one weight-2
    cross edge chosen by endpoint id order."""
    if source.directed:
        raise ValueError("the reduction starts from an undirected graph")
    edges: list[tuple[int, int, int]] = []
    unit_edges: dict[int, int] = {}
    for v in range(source.n):
        v1, v2, v3 = _triple(v)
        unit_edges[v] = len(edges)
        edges.append((v1, v2, 1))
        if directed:
            edges.append((v1, v3, 0))
            edges.append((v3, v2, 0))
        else:
            edges.append((v1, v3, 0))
            edges.append((v2, v3, 0))
    for e in source.edges:
        v, u = min(e.u, e.v), max(e.u, e.v)
        v1, v2, _ = _triple(v)
        u1, u2, _ = _triple(u)
        if directed:
            edges.append((v1, u1, 0))
            edges.append((u1, v1, 0))
            edges.append((v2, u2, 0))
            edges.append((u2, v2, 0))
            edges.append((v1, u2, 2))
        else:
            edges.append((v1, u1, 0))
            edges.append((v2, u2, 0))
            edges.append((v1, u2, 2))
    g = build_graph(3 * source.n, edges, directed=directed, weighted=True)
    return ReductionGadget(source=source, graph=g, directed=directed, unit_edges=unit_edges)


def cover_to_spanner(gadget: ReductionGadget, cover: Iterable[int]) -> frozenset[int]:
    """Map a vertex cover of the source graph to a 2-spanner of the reduction
    graph costing exactly |cover|: all 0-weight edges plus each chosen
    vertex's unit edge."""
    cover = set(cover)
    src = gadget.source
    for e in src.edges:
        if e.u not in cover and e.v not in cover:
            raise ValueError(f"input does not cover source edge ({e.u}, {e.v})")
    g = gadget.graph
    h = {eid for eid in range(g.m) if g.edges[eid].w == 0}
    for v in cover:
        if not (0 <= v < src.n):
            raise ValueError(f"vertex {v} outside the source graph")
        h.add(gadget.unit_edges[v])
    return frozenset(h)


def spanner_to_cover(gadget: ReductionGadget, spanner: Iterable[int]) -> frozenset[int]:
    """Canonicalize a 2-spanner of the reduction graph (swap each weight-2
    edge for the two unit edges it bridges) and read off the vertex cover; the
    result's size is at most the spanner's cost."""
    g = gadget.graph
    h = set(spanner)
    rep = verify_spanner(g, h, 2)
    if not rep.valid:
        raise ValueError(f"input is not a 2-spanner: uncovered {rep.uncovered[:5]}")
    canon = {eid for eid in range(g.m) if g.edges[eid].w == 0}
    canon |= {eid for eid in h if g.edges[eid].w == 1}
    for eid in h:
        e = g.edges[eid]
        if e.w == 2:
            a, b = min(e.u, e.v), max(e.u, e.v)
            canon.add(gadget.unit_edges[a // 3])
            canon.add(gadget.unit_edges[b // 3])
    cover = frozenset(
        v for v, eid in gadget.unit_edges.items() if eid in canon
    )
    src = gadget.source
    for e in src.edges:
        if e.u not in cover and e.v not in cover:
            raise ValueError("canonicalized spanner does not induce a vertex cover")
    return cover


def gadget_sidecar(gadget) -> dict:
    """JSON-ready description of a generated gadget: parameters, named vertex
    groups, and the two-player partition."""
    data: dict = {"schema": 1}
    if isinstance(gadget, DisjointnessGadget):
        data.update(
            kind="disjointness",
            ell=gadget.ell,
            beta=gadget.beta,
            a=gadget.a,
            b=gadget.b,
            groups=gadget.groups,
            side_a=sorted(gadget.side_a),
            side_b=sorted(gadget.side_b),
            d_edges=sorted(gadget.d_edges),
            c=gadget.c,
            threshold=gadget.threshold,
        )
    elif isinstance(gadget, WeightedGadget):
        data.update(
            kind="weighted",
            ell=gadget.ell,
            k=gadget.k,
            directed=gadget.directed,
            a=gadget.a,
            b=gadget.b,
            groups=gadget.groups,
            side_a=sorted(gadget.side_a),
            side_b=sorted(gadget.side_b),
            d_edges=sorted(gadget.d_edges),
        )
    elif isinstance(gadget, ReductionGadget):
        data.update(
            kind="mvc",
            directed=gadget.directed,
            source_vertices=gadget.source.n,
            unit_edges={str(v): eid for v, eid in gadget.unit_edges.items()},
        )
    else:
        raise TypeError(f"unknown gadget type {type(gadget)!r}")
    return data
