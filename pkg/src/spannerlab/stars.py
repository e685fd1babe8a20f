"""Stars, exact densities, and the candidate star choice/growth procedure.

A star is a nonempty set of edges incident to one center vertex.  Density of
a star S w.r.t. an uncovered edge set is |C_S| / |S| (or |C_S| / w(S) when
weighted), where C_S holds the uncovered edges whose both endpoints are leaves
of S (directed: edges (u, w) with (u, center) and (center, w) in S).  All
comparisons are exact rationals.

The module exposes both a graph-level API (density_of, densest_star,
choose_star, directed_density_estimate) and reusable "contexts" that operate
on purely local neighborhood data, so distributed node programs can run the
same engine on message-learned state.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .density import DensityInstance, pow2_exp_strictly_above, pow2_strictly_above
from .graphs import Graph

VARIANTS = ("unweighted", "weighted", "directed", "client-server")


class StarChoiceError(RuntimeError):
    """The arbitrary-star fallback of the choice procedure was reached; the
    procedure's invariants rule this out, so it signals an implementation bug."""


@dataclass(frozen=True)
class Star:
    center: int
    edge_ids: frozenset[int]

    def leaves(self, g: Graph) -> frozenset[int]:
        return frozenset(g.other_end(eid, self.center) for eid in self.edge_ids)

    def size(self) -> int:
        return len(self.edge_ids)

    def weight(self, g: Graph) -> int:
        return sum(g.edges[eid].w for eid in self.edge_ids)


@dataclass(frozen=True)
class DensityValue:
    spanned: frozenset[int]  # covered-candidate edges 2-spanned by the star
    num: int
    den: int
    rho: Fraction
    rho_tilde: Fraction
    exponent: Optional[int]  # rho_tilde == 2**exponent; None when rho == 0


def _density_value(spanned: frozenset[int], num: int, den: int) -> DensityValue:
    rho = Fraction(num, den) if den > 0 else Fraction(0)
    exp = pow2_exp_strictly_above(rho)
    return DensityValue(
        spanned=spanned,
        num=num,
        den=den,
        rho=rho,
        rho_tilde=pow2_strictly_above(rho),
        exponent=exp,
    )


# ---------------------------------------------------------------------------
# local star contexts


class StarContext:
    """Star engine over local leaf data for the undirected-counting variants
    (unweighted, weighted, client-server).  States are leaf bitmasks."""

    directed = False

    def __init__(self, leaf_ids: list[int], costs: list[int], rows: list[int]):
        self.leaf_ids = leaf_ids  # ascending
        self.d = len(leaf_ids)
        self.costs = costs
        self.rows = rows
        self.full_mask = (1 << self.d) - 1

    # -- state primitives --

    def spanned_count(self, mask: int) -> int:
        total, m = 0, mask
        while m:
            b = m & -m
            total += (self.rows[b.bit_length() - 1] & mask).bit_count()
            m ^= b
        return total // 2

    def cost(self, mask: int) -> int:
        total, m = 0, mask
        while m:
            b = m & -m
            total += self.costs[b.bit_length() - 1]
            m ^= b
        return total

    def spanned_pairs(self, mask: int) -> list[tuple[int, int]]:
        out, m = [], mask
        while m:
            b = m & -m
            i = b.bit_length() - 1
            m ^= b
            rest = self.rows[i] & m
            while rest:
                b2 = rest & -rest
                out.append((i, b2.bit_length() - 1))
                rest ^= b2
        return out

    def size(self, mask: int) -> int:
        return mask.bit_count()

    def density(self, mask: int) -> Fraction:
        c = self.cost(mask)
        return Fraction(self.spanned_count(mask), c) if c > 0 else Fraction(0)

    def nonempty(self, mask: int) -> bool:
        return mask != 0

    # -- solving --

    def _instance(self, pool_mask: int) -> tuple[DensityInstance, list[int]]:
        sel = [i for i in range(self.d) if (pool_mask >> i) & 1]
        pos = {i: k for k, i in enumerate(sel)}
        rows = []
        for i in sel:
            r, m = 0, self.rows[i] & pool_mask
            while m:
                b = m & -m
                r |= 1 << pos[b.bit_length() - 1]
                m ^= b
            rows.append(r)
        return DensityInstance([self.costs[i] for i in sel], rows), sel

    def densest(
        self,
        pool_mask: Optional[int] = None,
        at_least: Optional[tuple[int, int]] = None,
    ) -> tuple[int, int, int]:
        """Exact densest sub-star within pool_mask; returns (mask, num, den).
        With ``at_least`` = (t_num, t_den), may return (0, 0, 0) early once
        it is certain no sub-star reaches that density."""
        pool = self.full_mask if pool_mask is None else pool_mask
        if pool == 0:
            raise ValueError("empty pool")
        inst, sel = self._instance(pool)
        if at_least is not None and inst.max_below(at_least[0], at_least[1]):
            return 0, 0, 0
        r = inst.solve_canonical()
        if at_least is not None and (r.cost == 0 or r.pairs * at_least[1] < at_least[0] * r.cost):
            return 0, 0, 0
        mask = 0
        m = r.mask
        while m:
            b = m & -m
            mask |= 1 << sel[b.bit_length() - 1]
            m ^= b
        return mask, r.pairs, r.cost

    # -- growth --

    def grow(self, seed_mask: int, t_num: int, t_den: int, pool_mask: int) -> int:
        """Greedy extension: repeatedly add a single qualifying pool edge
        (max marginal gain, then smallest leaf id), else a qualifying
        leaf-disjoint densest star, while density stays >= t_num/t_den."""
        mask = seed_mask
        spanned = self.spanned_count(mask)
        cost = self.cost(mask)
        while True:
            cand = pool_mask & ~mask
            best = None  # (-gain, leaf index)
            m = cand
            while m:
                b = m & -m
                i = b.bit_length() - 1
                m ^= b
                gain = (self.rows[i] & mask).bit_count()
                if (spanned + gain) * t_den >= t_num * (cost + self.costs[i]):
                    key = (-gain, i)
                    if best is None or key < best:
                        best = key
            if best is not None:
                i = best[1]
                mask |= 1 << i
                spanned += -best[0]
                cost += self.costs[i]
                continue
            if cand == 0:
                break
            sub_mask, sub_num, sub_den = self.densest(cand, at_least=(t_num, t_den))
            if sub_den > 0 and sub_num * t_den >= t_num * sub_den:
                mask |= sub_mask
                spanned = self.spanned_count(mask)
                cost = self.cost(mask)
                continue
            break
        return mask

    def fresh_choice(self, t_num: int, t_den: int, pool_mask: Optional[int] = None) -> int:
        pool = self.full_mask if pool_mask is None else pool_mask
        seed, _, _ = self.densest(pool)
        return self.grow(seed, t_num, t_den, pool)


class DirectedStarContext:
    """Star engine for the directed variant.  States are (in_mask, out_mask)
    pairs over local leaf indices: in = arcs leaf->center, out = center->leaf.
    The densest computation reduces to the undirected engine and achieves a
    2-approximation; densities of concrete states are exact."""

    directed = True

    def __init__(
        self,
        leaf_ids: list[int],
        has_in: int,
        has_out: int,
        fwd: list[int],
        bwd: list[int],
    ):
        # fwd[i]: leaves j with a countable uncovered arc (i -> j) that the
        # center could 2-span, i.e. arcs (i, center), (center, j) both exist.
        self.leaf_ids = leaf_ids
        self.d = len(leaf_ids)
        self.has_in = has_in
        self.has_out = has_out
        self.fwd = fwd
        self.bwd = bwd
        self.full_state = (has_in, has_out)

    def spanned_count(self, state: tuple[int, int]) -> int:
        in_mask, out_mask = state
        total, m = 0, in_mask
        while m:
            b = m & -m
            total += (self.fwd[b.bit_length() - 1] & out_mask).bit_count()
            m ^= b
        return total

    def cost(self, state: tuple[int, int]) -> int:
        return state[0].bit_count() + state[1].bit_count()

    size = cost

    def spanned_pairs(self, state: tuple[int, int]) -> list[tuple[int, int]]:
        in_mask, out_mask = state
        out, m = [], in_mask
        while m:
            b = m & -m
            i = b.bit_length() - 1
            m ^= b
            rest = self.fwd[i] & out_mask
            while rest:
                b2 = rest & -rest
                out.append((i, b2.bit_length() - 1))
                rest ^= b2
        return out

    def density(self, state: tuple[int, int]) -> Fraction:
        c = self.cost(state)
        return Fraction(self.spanned_count(state), c) if c > 0 else Fraction(0)

    def nonempty(self, state: tuple[int, int]) -> bool:
        return (state[0] | state[1]) != 0

    def _leaf_pool(self, state: tuple[int, int]) -> int:
        return state[0] | state[1]

    def reduced_rows(self, leaf_pool: int) -> list[int]:
        rows = []
        for i in range(self.d):
            if (leaf_pool >> i) & 1:
                rows.append((self.fwd[i] | self.bwd[i]) & leaf_pool)
            else:
                rows.append(0)
        return rows

    def materialize(self, leaf_mask: int, arc_pool: tuple[int, int]) -> tuple[int, int]:
        return (leaf_mask & arc_pool[0], leaf_mask & arc_pool[1])

    def densest(
        self,
        arc_pool: Optional[tuple[int, int]] = None,
        at_least: Optional[tuple[int, int]] = None,
    ) -> tuple[tuple[int, int], int, int]:
        """2-approximate densest directed star via the undirected reduction;
        returns (state, num, den) with num/den the exact density of the
        returned state.  ``at_least`` allows an early (0,0),0,0 exit when even
        the undirected relaxation stays below the threshold."""
        pool = self.full_state if arc_pool is None else arc_pool
        leaf_pool = pool[0] | pool[1]
        if leaf_pool == 0:
            raise ValueError("empty pool")
        rows = self.reduced_rows(leaf_pool)
        sel = [i for i in range(self.d) if (leaf_pool >> i) & 1]
        pos = {i: k for k, i in enumerate(sel)}
        sub_rows = []
        for i in sel:
            r, m = 0, rows[i]
            while m:
                b = m & -m
                r |= 1 << pos[b.bit_length() - 1]
                m ^= b
            sub_rows.append(r)
        inst = DensityInstance([1] * len(sel), sub_rows)
        if at_least is not None and inst.max_below(at_least[0], at_least[1]):
            return (0, 0), 0, 0
        res = inst.solve_canonical()
        leaf_mask, m = 0, res.mask
        while m:
            b = m & -m
            leaf_mask |= 1 << sel[b.bit_length() - 1]
            m ^= b
        state = self.materialize(leaf_mask, pool)
        return state, self.spanned_count(state), self.cost(state)

    def grow(
        self,
        seed: tuple[int, int],
        t_num: int,
        t_den: int,
        arc_pool: tuple[int, int],
    ) -> tuple[int, int]:
        in_mask, out_mask = seed
        spanned = self.spanned_count(seed)
        cost = self.cost(seed)
        while True:
            cand_in = arc_pool[0] & ~in_mask
            cand_out = arc_pool[1] & ~out_mask
            best = None  # (-gain, leaf index, orient) orient 0=in 1=out
            m = cand_in
            while m:
                b = m & -m
                i = b.bit_length() - 1
                m ^= b
                gain = (self.fwd[i] & out_mask).bit_count()
                if (spanned + gain) * t_den >= t_num * (cost + 1):
                    key = (-gain, i, 0)
                    if best is None or key < best:
                        best = key
            m = cand_out
            while m:
                b = m & -m
                i = b.bit_length() - 1
                m ^= b
                gain = (self.bwd[i] & in_mask).bit_count()
                if (spanned + gain) * t_den >= t_num * (cost + 1):
                    key = (-gain, i, 1)
                    if best is None or key < best:
                        best = key
            if best is not None:
                _, i, orient = best
                if orient == 0:
                    in_mask |= 1 << i
                else:
                    out_mask |= 1 << i
                spanned += -best[0]
                cost += 1
                continue
            touched = in_mask | out_mask
            rem_pool = (arc_pool[0] & ~touched, arc_pool[1] & ~touched)
            if rem_pool[0] | rem_pool[1]:
                sub, sub_num, sub_den = self.densest(rem_pool, at_least=(t_num, t_den))
                if sub_den > 0 and sub_num * t_den >= t_num * sub_den:
                    in_mask |= sub[0]
                    out_mask |= sub[1]
                    spanned = self.spanned_count((in_mask, out_mask))
                    cost = self.cost((in_mask, out_mask))
                    continue
            break
        return (in_mask, out_mask)

    def fresh_choice(
        self, t_num: int, t_den: int, arc_pool: Optional[tuple[int, int]] = None
    ) -> tuple[int, int]:
        pool = self.full_state if arc_pool is None else arc_pool
        seed, _, _ = self.densest(pool)
        return self.grow(seed, t_num, t_den, pool)


def choose_state(ctx, prev_state, prev_exp: Optional[int], exp_now: int):
    """The candidate star choice: fresh build at a new rounded density, keep
    the previous star while it stays dense enough, else rebuild strictly
    inside it.  Thresholds: rho_tilde/4, or rho_tilde/8 for directed."""
    shift = 3 if ctx.directed else 2
    if exp_now - shift >= 0:
        t_num, t_den = 1 << (exp_now - shift), 1
    else:
        t_num, t_den = 1, 1 << (shift - exp_now)
    if prev_state is None or prev_exp != exp_now:
        return ctx.fresh_choice(t_num, t_den)
    num = ctx.spanned_count(prev_state)
    den = ctx.cost(prev_state)
    if num * t_den >= t_num * den and den > 0:
        return prev_state
    if ctx.directed:
        pool = prev_state
        sub, sub_num, sub_den = ctx.densest(pool)
    else:
        pool = prev_state
        sub, sub_num, sub_den = ctx.densest(pool)
    if sub_den == 0 or sub_num * t_den < t_num * sub_den:
        raise StarChoiceError(
            "no sub-star of the previous star meets the density threshold"
        )
    return ctx.grow(sub, t_num, t_den, pool)


# ---------------------------------------------------------------------------
# graph-level wrappers


def _undirected_context(
    g: Graph, v: int, uncovered: Iterable[int], pool: Optional[Iterable[int]], variant: str
) -> tuple[StarContext, list[int], dict[tuple[int, int], int]]:
    uncovered = set(uncovered)
    if pool is None:
        pool_eids = list(g.adjacency[v])
        if variant == "client-server":
            pool_eids = [e for e in pool_eids if g.edges[e].server]
    else:
        pool_eids = list(pool)
        for eid in pool_eids:
            if v not in (g.edges[eid].u, g.edges[eid].v):
                raise ValueError(f"pool edge {eid} not incident to {v}")
            if variant == "client-server" and not g.edges[eid].server:
                raise ValueError(f"pool edge {eid} is not a server edge")
    leaf_cost: dict[int, int] = {}
    for eid in pool_eids:
        u = g.other_end(eid, v)
        w = g.edges[eid].w if variant == "weighted" else 1
        leaf_cost[u] = w
    leaf_ids = sorted(leaf_cost)
    idx = {u: i for i, u in enumerate(leaf_ids)}
    rows = [0] * len(leaf_ids)
    pair_eid: dict[tuple[int, int], int] = {}
    leaf_set = set(leaf_ids)
    for eid in uncovered:
        e = g.edges[eid]
        if e.u in leaf_set and e.v in leaf_set and e.u != v and e.v != v:
            if variant == "client-server" and not e.client:
                continue
            i, j = idx[e.u], idx[e.v]
            rows[i] |= 1 << j
            rows[j] |= 1 << i
            pair_eid[(min(i, j), max(i, j))] = eid
    ctx = StarContext(leaf_ids, [leaf_cost[u] for u in leaf_ids], rows)
    return ctx, leaf_ids, pair_eid


def _directed_context(
    g: Graph, v: int, uncovered: Iterable[int], pool: Optional[Iterable[int]]
) -> tuple[DirectedStarContext, list[int], dict[tuple[int, int], int], dict[tuple[int, int], int]]:
    uncovered = set(uncovered)
    pool_eids = list(g.adjacency[v]) if pool is None else list(pool)
    in_arc: dict[int, int] = {}  # leaf -> eid of (leaf, v)
    out_arc: dict[int, int] = {}  # leaf -> eid of (v, leaf)
    for eid in pool_eids:
        e = g.edges[eid]
        if v == e.v:
            in_arc[e.u] = eid
        elif v == e.u:
            out_arc[e.v] = eid
        else:
            raise ValueError(f"pool edge {eid} not incident to {v}")
    leaf_ids = sorted(set(in_arc) | set(out_arc))
    idx = {u: i for i, u in enumerate(leaf_ids)}
    d = len(leaf_ids)
    has_in = sum(1 << idx[u] for u in in_arc)
    has_out = sum(1 << idx[u] for u in out_arc)
    fwd = [0] * d
    bwd = [0] * d
    arc_eid: dict[tuple[int, int], int] = {}
    for eid in uncovered:
        e = g.edges[eid]
        if e.u in idx and e.v in idx:
            # countable only if (e.u, v) and (v, e.v) are available arcs
            if e.u in in_arc and e.v in out_arc:
                i, j = idx[e.u], idx[e.v]
                fwd[i] |= 1 << j
                bwd[j] |= 1 << i
                arc_eid[(i, j)] = eid
    ctx = DirectedStarContext(leaf_ids, has_in, has_out, fwd, bwd)
    arcs = {}
    for u, eid in in_arc.items():
        arcs[(idx[u], 0)] = eid
    for u, eid in out_arc.items():
        arcs[(idx[u], 1)] = eid
    return ctx, leaf_ids, arc_eid, arcs


def _state_to_star_undirected(g, v, ctx, leaf_ids, mask) -> Star:
    eidx = g.edge_index()
    eids = []
    for i in range(ctx.d):
        if (mask >> i) & 1:
            u = leaf_ids[i]
            eids.append(eidx[(min(u, v), max(u, v))])
    return Star(center=v, edge_ids=frozenset(eids))


def _state_to_star_directed(g, v, arcs, state) -> Star:
    in_mask, out_mask = state
    eids = []
    for (i, orient), eid in arcs.items():
        if orient == 0 and (in_mask >> i) & 1:
            eids.append(eid)
        if orient == 1 and (out_mask >> i) & 1:
            eids.append(eid)
    return Star(center=v, edge_ids=frozenset(eids))


def density_of(g: Graph, star: Star, uncovered: Iterable[int], variant: str = "unweighted") -> DensityValue:
    """Exact density of a concrete star with respect to an uncovered set."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if not star.edge_ids:
        raise ValueError("empty star")
    uncovered = set(uncovered)
    v = star.center
    for eid in star.edge_ids:
        if v not in (g.edges[eid].u, g.edges[eid].v):
            raise ValueError(f"star edge {eid} not incident to center {v}")
    if variant == "directed":
        in_leaves = {g.edges[eid].u for eid in star.edge_ids if g.edges[eid].v == v}
        out_leaves = {g.edges[eid].v for eid in star.edge_ids if g.edges[eid].u == v}
        spanned = frozenset(
            eid
            for eid in uncovered
            if g.edges[eid].u in in_leaves and g.edges[eid].v in out_leaves
        )
        return _density_value(spanned, len(spanned), len(star.edge_ids))
    leaves = star.leaves(g)
    spanned = set()
    for eid in uncovered:
        e = g.edges[eid]
        if v in (e.u, e.v):
            continue
        if e.u in leaves and e.v in leaves:
            if variant == "client-server" and not e.client:
                continue
            spanned.add(eid)
    if variant == "client-server":
        for eid in star.edge_ids:
            if not g.edges[eid].server:
                raise ValueError(f"star edge {eid} is not a server edge")
    den = star.weight(g) if variant == "weighted" else len(star.edge_ids)
    return _density_value(frozenset(spanned), len(spanned), den)


def densest_star(
    g: Graph,
    v: int,
    uncovered: Iterable[int],
    pool: Optional[Iterable[int]] = None,
    variant: str = "unweighted",
) -> tuple[Star, DensityValue]:
    """The maximum-density v-star within the pool.  Exact for the undirected
    variants; the directed variant returns the 2-approximate star obtained by
    solving the orientation-blind reduction."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "directed":
        return directed_density_estimate(g, v, uncovered, pool)
    ctx, leaf_ids, pair_eid = _undirected_context(g, v, uncovered, pool, variant)
    if ctx.d == 0:
        raise ValueError(f"vertex {v} is isolated within the pool")
    mask, num, den = ctx.densest()
    star = _state_to_star_undirected(g, v, ctx, leaf_ids, mask)
    spanned = frozenset(
        pair_eid[(min(i, j), max(i, j))] for (i, j) in ctx.spanned_pairs(mask)
    )
    return star, _density_value(spanned, num, den)


def directed_density_estimate(
    g: Graph,
    v: int,
    uncovered: Iterable[int],
    pool: Optional[Iterable[int]] = None,
) -> tuple[Star, DensityValue]:
    """Directed densest-star 2-approximation: drop arcs that cannot be
    2-spanned through v, solve the undirected relaxation, then materialize
    every available orientation of the chosen leaves."""
    if not g.directed:
        raise ValueError("directed_density_estimate requires a directed graph")
    ctx, leaf_ids, arc_eid, arcs = _directed_context(g, v, uncovered, pool)
    if ctx.d == 0:
        raise ValueError(f"vertex {v} is isolated within the pool")
    state, num, den = ctx.densest()
    if not ctx.nonempty(state):
        # nothing spannable: canonical single arc on the lowest-id leaf
        i = 0
        orient = 0 if (ctx.has_in >> i) & 1 else 1
        state = ((1 << i) if orient == 0 else 0, (1 << i) if orient == 1 else 0)
        num, den = 0, 1
    star = _state_to_star_directed(g, v, arcs, state)
    spanned = frozenset(arc_eid[(i, j)] for (i, j) in ctx.spanned_pairs(state))
    return star, _density_value(spanned, num, den)


def choose_star(
    g: Graph,
    v: int,
    uncovered_now: Iterable[int],
    prev: Optional[tuple[Star, Fraction]],
    rho_tilde_now: Fraction,
    variant: str = "unweighted",
) -> Star:
    """Candidate star selection for one iteration (graph-level wrapper)."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    exp_now = pow2_exp_strictly_above(rho_tilde_now / 2)
    if exp_now is None or Fraction(2) ** exp_now != rho_tilde_now:
        raise ValueError("rho_tilde_now must be a positive power of two")
    if variant == "directed":
        ctx, leaf_ids, arc_eid, arcs = _directed_context(g, v, uncovered_now, None)
        if ctx.d == 0:
            raise ValueError(f"vertex {v} is isolated")
        prev_state = None
        prev_exp = None
        if prev is not None:
            prev_star, prev_rt = prev
            prev_exp = pow2_exp_strictly_above(prev_rt / 2)
            idx = {u: i for i, u in enumerate(leaf_ids)}
            in_mask = out_mask = 0
            for eid in prev_star.edge_ids:
                e = g.edges[eid]
                if e.v == v:
                    in_mask |= 1 << idx[e.u]
                else:
                    out_mask |= 1 << idx[e.v]
            prev_state = (in_mask, out_mask)
        state = choose_state(ctx, prev_state, prev_exp, exp_now)
        return _state_to_star_directed(g, v, arcs, state)
    ctx, leaf_ids, pair_eid = _undirected_context(g, v, uncovered_now, None, variant)
    if ctx.d == 0:
        raise ValueError(f"vertex {v} is isolated")
    prev_state = None
    prev_exp = None
    if prev is not None:
        prev_star, prev_rt = prev
        prev_exp = pow2_exp_strictly_above(prev_rt / 2)
        idx = {u: i for i, u in enumerate(leaf_ids)}
        prev_state = 0
        for u in prev_star.leaves(g):
            prev_state |= 1 << idx[u]
    state = choose_state(ctx, prev_state, prev_exp, exp_now)
    return _state_to_star_undirected(g, v, ctx, leaf_ids, state)
