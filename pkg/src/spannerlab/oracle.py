"""Exact solvers used as ground truth for every approximation claim.

Branch-and-bound searches with admissible pruning, guarded by explicit
budgets: exceeding a cap raises OracleBudgetExceeded instead of returning an
approximate answer.  Desk scale only; these are NP-hard problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional

from .graphs import Graph, verify_spanner


@dataclass(frozen=True)
class OracleBudget:
    max_vertices: int = 24
    max_edges: int = 120
    max_nodes: int = 5_000_000  # search tree nodes

    def check_instance(self, n: int, m: int) -> None:
        if n > self.max_vertices:
            raise OracleBudgetExceeded(f"{n} vertices exceed cap {self.max_vertices}")
        if m > self.max_edges:
            raise OracleBudgetExceeded(f"{m} edges exceed cap {self.max_edges}")


class OracleBudgetExceeded(RuntimeError):
    pass


class InfeasibleInstance(RuntimeError):
    """A client edge admits no server cover at the requested stretch."""


DEFAULT_BUDGET = OracleBudget()


def _cover_options(
    g: Graph, k: int, targets: Iterable[int], pool: set[int]
) -> dict[int, list[frozenset[int]]]:
    """For every target edge, the minimal edge sets (paths of length <= k
    inside the pool between its endpoints) that cover it."""
    options: dict[int, list[frozenset[int]]] = {}
    pool_adj: dict[int, list[tuple[int, int]]] = {v: [] for v in range(g.n)}
    for eid in pool:
        e = g.edges[eid]
        pool_adj[e.u].append((e.v, eid))
        if not g.directed:
            pool_adj[e.v].append((e.u, eid))
    for eid in targets:
        e = g.edges[eid]
        opts: set[frozenset[int]] = set()
        if eid in pool:
            opts.add(frozenset([eid]))
        # enumerate simple paths of length <= k from u to v
        stack = [(e.u, frozenset(), frozenset([e.u]))]
        while stack:
            v, used, seen = stack.pop()
            if len(used) >= k:
                continue
            for (w, fid) in pool_adj[v]:
                if fid == eid and len(used) == 0:
                    continue  # the edge itself was handled above
                if w == e.v:
                    opts.add(used | {fid})
                    continue
                if w in seen:
                    continue
                stack.append((w, used | {fid}, seen | {w}))
        minimal = [o for o in opts if not any(o2 < o for o2 in opts)]
        minimal.sort(key=lambda o: (len(o), sorted(o)))
        options[eid] = minimal
    return options


def min_spanner_exact(
    g: Graph,
    k: int,
    variant: str = "plain",
    budget: OracleBudget = DEFAULT_BUDGET,
    targets: Optional[Iterable[int]] = None,
    pool: Optional[Iterable[int]] = None,
) -> tuple[int, frozenset[int]]:
    """Provably minimum cost of an edge set covering the targets (all edges,
    or all client edges for the client-server variant) with paths of length
    at most k; returns (cost, witness)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if variant not in ("plain", "weighted", "directed", "client-server"):
        raise ValueError(f"unknown variant {variant!r}")
    budget.check_instance(g.n, g.m)
    weighted = g.weighted
    if variant == "client-server" or (g.client_server and targets is None and pool is None):
        targets = [eid for eid in range(g.m) if g.edges[eid].client]
        pool = {eid for eid in range(g.m) if g.edges[eid].server}
    pool = set(range(g.m)) if pool is None else set(pool)
    targets = list(range(g.m)) if targets is None else sorted(set(targets))
    options = _cover_options(g, k, targets, pool)
    bad = [eid for eid, opts in options.items() if not opts]
    if bad:
        raise InfeasibleInstance(f"targets {bad} admit no cover within the pool")

    def w(eid: int) -> int:
        return g.edges[eid].w if weighted else 1

    if weighted:
        # weight-0 pool edges are free: take them all and drop satisfied targets
        free = frozenset(eid for eid in pool if g.edges[eid].w == 0)
    else:
        free = frozenset()
    order = sorted(targets, key=lambda eid: len(options[eid]))
    # greedy incumbent: satisfy targets with their cheapest option
    incumbent: set[int] = set(free)
    for eid in order:
        if any(o <= incumbent for o in options[eid]):
            continue
        best = min(options[eid], key=lambda o: (sum(w(x) for x in o - incumbent), sorted(o)))
        incumbent |= best
    best_cost = sum(w(x) for x in incumbent)
    best_witness = frozenset(incumbent)
    nodes = 0

    def lower_bound(chosen: set[int], remaining: list[int]) -> int:
        # disjoint-support packing: targets whose option unions are pairwise
        # disjoint each force a separate cheapest completion
        lb = 0
        used_support: set[int] = set()
        for eid in remaining:
            opts = options[eid]
            add_costs = []
            support: set[int] = set()
            for o in opts:
                extra = o - chosen
                support |= extra
                add_costs.append(sum(w(x) for x in extra))
            cheapest = min(add_costs)
            if cheapest == 0:
                continue
            if support & used_support:
                continue
            used_support |= support
            lb += cheapest
        return lb

    def rec(chosen: set[int], cost: int, remaining: list[int]) -> None:
        nonlocal best_cost, best_witness, nodes
        nodes += 1
        if nodes > budget.max_nodes:
            raise OracleBudgetExceeded(f"search exceeded {budget.max_nodes} nodes")
        remaining = [eid for eid in remaining if not any(o <= chosen for o in options[eid])]
        if not remaining:
            key = (cost, tuple(sorted(chosen)))
            if key < (best_cost, tuple(sorted(best_witness))):
                best_cost = cost
                best_witness = frozenset(chosen)
            return
        if cost + lower_bound(chosen, remaining) >= best_cost:
            return
        eid = min(remaining, key=lambda t: (len(options[t]), t))
        for o in options[eid]:
            extra = o - chosen
            add = sum(w(x) for x in extra)
            if cost + add >= best_cost:
                continue
            rec(chosen | extra, cost + add, remaining)

    rec(set(free), sum(w(x) for x in free), order)
    return best_cost, best_witness


def min_spanner_reduction_form(
    g: Graph, budget: OracleBudget = DEFAULT_BUDGET
) -> tuple[int, frozenset[int]]:
    """Minimum-cost weighted 2-spanner for graphs in canonical reduction
    shape (weights 0/1/2 where an optimal spanner uses only the 0- and
    1-weight edges): take all weight-0 edges and search over subsets of the
    weight-1 edges by increasing cost, validating with the spanner checker."""
    zeros = [eid for eid in range(g.m) if g.edges[eid].w == 0]
    ones = sorted(eid for eid in range(g.m) if g.edges[eid].w == 1)
    if len(ones) > budget.max_vertices:
        raise OracleBudgetExceeded(f"{len(ones)} unit edges exceed the subset cap")
    base = frozenset(zeros)
    for cost in range(len(ones) + 1):
        for combo in combinations(ones, cost):
            h = base | frozenset(combo)
            if verify_spanner(g, h, 2).valid:
                return cost, h
    raise InfeasibleInstance("no 0/1-weight spanner covers the graph")


def min_vertex_cover_exact(
    g: Graph, budget: OracleBudget = DEFAULT_BUDGET
) -> tuple[int, frozenset[int]]:
    budget.check_instance(g.n, g.m)
    edges = [(e.u, e.v) for e in g.edges]
    best_size = g.n
    best: frozenset[int] = frozenset(range(g.n))
    nodes = 0

    def matching_bound(uncovered: list[tuple[int, int]]) -> int:
        used: set[int] = set()
        cnt = 0
        for (u, v) in uncovered:
            if u not in used and v not in used:
                used.add(u)
                used.add(v)
                cnt += 1
        return cnt

    def rec(chosen: set[int], uncovered: list[tuple[int, int]]) -> None:
        nonlocal best_size, best, nodes
        nodes += 1
        if nodes > budget.max_nodes:
            raise OracleBudgetExceeded(f"search exceeded {budget.max_nodes} nodes")
        uncovered = [(u, v) for (u, v) in uncovered if u not in chosen and v not in chosen]
        if not uncovered:
            key = (len(chosen), tuple(sorted(chosen)))
            if key < (best_size, tuple(sorted(best))):
                best_size = len(chosen)
                best = frozenset(chosen)
            return
        if len(chosen) + matching_bound(uncovered) >= best_size:
            return
        u, v = uncovered[0]
        rec(chosen | {u}, uncovered)
        rec(chosen | {v}, uncovered)

    rec(set(), edges)
    return best_size, best


def min_dominating_set_exact(
    g: Graph, budget: OracleBudget = DEFAULT_BUDGET
) -> tuple[int, frozenset[int]]:
    budget.check_instance(g.n, g.m)
    closed = [frozenset([v] + g.neighbors(v)) for v in range(g.n)]
    best_size = g.n
    best: frozenset[int] = frozenset(range(g.n))
    nodes = 0

    def rec(chosen: set[int], undominated: frozenset[int]) -> None:
        nonlocal best_size, best, nodes
        nodes += 1
        if nodes > budget.max_nodes:
            raise OracleBudgetExceeded(f"search exceeded {budget.max_nodes} nodes")
        if not undominated:
            key = (len(chosen), tuple(sorted(chosen)))
            if key < (best_size, tuple(sorted(best))):
                best_size = len(chosen)
                best = frozenset(chosen)
            return
        max_gain = max(len(closed[v] & undominated) for v in range(g.n))
        need = -(-len(undominated) // max_gain)
        if len(chosen) + need >= best_size:
            return
        u = min(undominated)
        for v in sorted(closed[u]):
            rec(chosen | {v}, undominated - closed[v])

    rec(set(), frozenset(range(g.n)))
    return best_size, best


def densest_subgraph_brute(
    vertices: Iterable[int],
    edges: Iterable[tuple[int, int]],
    weights: Optional[dict[int, int]] = None,
    max_vertices: int = 20,
) -> tuple[frozenset[int], Fraction]:
    """Exhaustive maximum of |E(U)| / weight(U) over nonempty subsets, with
    the canonical tie-break (smallest subset, then lexicographic)."""
    verts = sorted(set(vertices))
    if len(verts) > max_vertices:
        raise OracleBudgetExceeded(f"{len(verts)} vertices exceed the brute cap")
    if not verts:
        raise ValueError("empty vertex set")
    edges = [tuple(e) for e in edges]
    best = None
    for size in range(1, len(verts) + 1):
        for sub in combinations(verts, size):
            s = set(sub)
            cnt = sum(1 for (u, v) in edges if u in s and v in s)
            den = sum(weights[v] for v in sub) if weights else size
            rho = Fraction(cnt, den) if den > 0 else Fraction(0)
            key = (-rho, size, sub)
            if best is None or key < best[0]:
                best = (key, frozenset(sub), rho)
    return best[1], best[2]


def densest_directed_star_exact(
    in_arcs: set[int],
    out_arcs: set[int],
    spannable: set[tuple[int, int]],
) -> tuple[tuple[frozenset[int], frozenset[int]], Fraction]:
    """Exact directed densest star around an implicit center.

    ``in_arcs``/``out_arcs`` name the leaves with an arc into / out of the
    center; ``spannable`` lists uncovered arcs (u, w) with u in in_arcs and
    w in out_arcs.  For a fixed out-leaf set the best in-leaves are a prefix
    of leaves sorted by marginal gain, so the search is exponential only in
    the out-degree."""
    outs = sorted(out_arcs)
    ins = sorted(in_arcs)
    fwd = {u: {w for (x, w) in spannable if x == u} for u in ins}
    best: Optional[tuple[Fraction, int, tuple, tuple]] = None
    for r in range(len(outs) + 1):
        for out_sub in combinations(outs, r):
            oset = set(out_sub)
            gains = sorted(
                ((len(fwd[u] & oset), u) for u in ins), key=lambda t: (-t[0], t[1])
            )
            total = 0
            in_pick: list[int] = []
            for s in range(0, len(gains) + 1):
                den = s + r
                if den == 0:
                    continue
                rho = Fraction(total, den)
                cand = (rho, den, tuple(sorted(in_pick)), out_sub)
                if best is None or (
                    cand[0] > best[0]
                    or (cand[0] == best[0] and (cand[1], cand[2], cand[3]) < (best[1], best[2], best[3]))
                ):
                    best = cand
                if s < len(gains):
                    total += gains[s][0]
                    in_pick.append(gains[s][1])
    assert best is not None
    rho, _, in_pick, out_pick = best
    return (frozenset(in_pick), frozenset(out_pick)), rho


def spanner_enum_reference(
    g: Graph, k: int, budget_edges: int = 14
) -> tuple[int, frozenset[int]]:
    """Unpruned enumeration over all edge subsets; meta-test oracle."""
    if g.m > budget_edges:
        raise OracleBudgetExceeded(f"{g.m} edges exceed the enumeration cap")
    weighted = g.weighted
    best = None
    for size_mask in range(1 << g.m):
        h = frozenset(i for i in range(g.m) if (size_mask >> i) & 1)
        if not verify_spanner(g, h, k).valid:
            continue
        cost = sum(g.edges[i].w for i in h) if weighted else len(h)
        key = (cost, tuple(sorted(h)))
        if best is None or key < best:
            best = key
    assert best is not None
    cost, h = best
    return cost, frozenset(h)
