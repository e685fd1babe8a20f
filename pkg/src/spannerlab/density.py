"""Exact maximum-density subset machinery.

A neighborhood instance holds candidate leaves (each with a positive or zero
integer cost) and an undirected "pair graph" over the leaves; the goal is the
nonempty leaf subset U maximizing pairs(U) / cost(U), compared exactly as
rationals.  Small instances are solved by subset enumeration; larger ones by
integer min-cut feasibility tests (parametric search over guesses), using
scipy's maximum_flow with a pure-Python fallback.

Subsets with cost(U) = 0 are valued at density 0 by convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

try:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import breadth_first_order, maximum_flow

    _HAVE_SCIPY = True
except ImportError:  # pragma: no cover
    _HAVE_SCIPY = False

BRUTE_MAX = 18
_INT32_SAFE = 2**31 - 1


def pow2_exp_strictly_above(rho: Fraction) -> Optional[int]:
    """Exponent e of the smallest power of two with 2**e > rho; None for rho<=0."""
    if rho <= 0:
        return None
    e = rho.numerator.bit_length() - rho.denominator.bit_length()
    if Fraction(2) ** e > rho:
        return e
    return e + 1


def pow2_strictly_above(rho: Fraction) -> Fraction:
    """Smallest power of two strictly greater than rho; 0 when rho <= 0."""
    e = pow2_exp_strictly_above(rho)
    return Fraction(0) if e is None else Fraction(2) ** e


def _popcount_array(a: np.ndarray) -> np.ndarray:
    # SWAR popcount for uint64 arrays
    a = a.copy()
    a -= (a >> np.uint64(1)) & np.uint64(0x5555555555555555)
    a = (a & np.uint64(0x3333333333333333)) + ((a >> np.uint64(2)) & np.uint64(0x3333333333333333))
    a = (a + (a >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (a * np.uint64(0x0101010101010101)) >> np.uint64(56)


@dataclass
class DenseSubsetResult:
    mask: int  # chosen leaf subset as a bitmask over local indices
    pairs: int  # number of pair-edges inside the subset
    cost: int  # total leaf cost of the subset

    @property
    def rho(self) -> Fraction:
        if self.cost == 0:
            return Fraction(0)
        return Fraction(self.pairs, self.cost)


class DensityInstance:
    """Leaves 0..d-1 with integer costs and symmetric pair-adjacency bitmasks.

    ``rows[i]`` holds a bitmask of the leaves j forming a countable pair with
    leaf i.  Local leaf order must be ascending in the caller's id space so
    that mask comparisons implement lexicographic tie-breaking.
    """

    def __init__(self, costs: list[int], rows: list[int]):
        self.d = len(costs)
        self.costs = list(costs)
        self.rows = list(rows)
        self._base = None  # lazy flow-network skeleton

    def pairs_in(self, mask: int) -> int:
        total = 0
        m = mask
        while m:
            b = m & -m
            i = b.bit_length() - 1
            m ^= b
            total += (self.rows[i] & mask).bit_count()
        return total // 2

    def cost_of(self, mask: int) -> int:
        total = 0
        m = mask
        while m:
            b = m & -m
            total += self.costs[b.bit_length() - 1]
            m ^= b
        return total

    def degree(self, i: int, alive: int) -> int:
        return (self.rows[i] & alive).bit_count()

    # -- greedy peel: lower-bound witness and degeneracy upper bound --------

    def peel(self) -> tuple[int, int, int, int]:
        """Return (witness_mask, witness_pairs, witness_cost, degeneracy).

        The witness is the best exact-density suffix of a min-degree peel
        order; degeneracy upper-bounds the unit-cost density of any subset.
        """
        d = self.d
        alive = (1 << d) - 1
        rows = self.rows
        costs = self.costs
        degs = [(rows[i]).bit_count() for i in range(d)]
        edges = sum(degs) // 2
        cost = sum(costs)
        best: Optional[tuple[int, int, int]] = (alive, edges, cost) if cost > 0 else None
        degeneracy = 0
        cur_edges, cur_cost = edges, cost
        removed = [False] * d
        for _ in range(d):
            i = -1
            dmin = 1 << 60
            for j in range(d):
                if not removed[j] and degs[j] < dmin:
                    dmin = degs[j]
                    i = j
            removed[i] = True
            if dmin > degeneracy:
                degeneracy = dmin
            cur_edges -= dmin
            cur_cost -= costs[i]
            alive &= ~(1 << i)
            m = rows[i] & alive
            while m:
                b = m & -m
                degs[b.bit_length() - 1] -= 1
                m ^= b
            if alive and cur_cost > 0:
                if best is None or cur_edges * best[2] > best[1] * cur_cost:
                    best = (alive, cur_edges, cur_cost)
        if best is None:
            best = ((1 << d) - 1, edges, cost)
        return best[0], best[1], best[2], degeneracy

    # -- exact solve ---------------------------------------------------------

    def solve_canonical(self) -> DenseSubsetResult:
        """Exact maximum density with canonical tie-break: smallest subset
        size first, then lexicographically smallest leaf set."""
        if self.d == 0:
            raise ValueError("empty instance")
        if self.d <= BRUTE_MAX:
            return self._solve_brute()
        return self._solve_flow_canonical()

    def max_below(self, t_num: int, t_den: int) -> bool:
        """Cheap certified test that every subset's density is strictly below
        t_num/t_den; False means "unknown" (the exact solve decides)."""
        if self.d <= BRUTE_MAX or any(c != 1 for c in self.costs):
            return False
        wmask, wp, wc, degeneracy = self.peel()
        if wc == 0 or wp * t_den >= t_num * wc:
            return False
        return degeneracy * t_den < t_num

    def _zero_star(self) -> DenseSubsetResult:
        return DenseSubsetResult(mask=1, pairs=0, cost=self.costs[0])

    def _solve_brute(self) -> DenseSubsetResult:
        d = self.d
        n_masks = 1 << d
        pairs = np.zeros(n_masks, dtype=np.int64)
        cost = np.zeros(n_masks, dtype=np.int64)
        for b in range(d):
            size = 1 << b
            sub = np.arange(size, dtype=np.uint64)
            gains = _popcount_array(np.uint64(self.rows[b]) & sub).astype(np.int64)
            pairs[size : 2 * size] = pairs[:size] + gains
            cost[size : 2 * size] = cost[:size] + self.costs[b]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(cost > 0, pairs / np.maximum(cost, 1), 0.0)
        top = float(ratio.max()) if n_masks > 1 else 0.0
        if top <= 0.0:
            return self._zero_star()
        # float division is correctly rounded, hence monotone: every exact
        # maximizer attains the float maximum; aliased near-ties are filtered
        # by the exact comparison below.
        cand = np.nonzero(ratio == top)[0]
        best: Optional[tuple] = None
        for mask in cand.tolist():
            if mask == 0:
                continue
            p, c = int(pairs[mask]), int(cost[mask])
            if c == 0:
                continue
            key = (-Fraction(p, c), mask.bit_count(), _mask_leaf_tuple(mask))
            if best is None or key < best[0]:
                best = (key, mask, p, c)
        if best is None:
            return self._zero_star()
        _, mask, p, c = best
        return DenseSubsetResult(mask=mask, pairs=p, cost=c)

    def _solve_flow_canonical(self) -> DenseSubsetResult:
        zero_mask = sum(1 << i for i in range(self.d) if self.costs[i] == 0)
        if zero_mask and self.pairs_in(zero_mask) > 0:
            # zero-cost leaves already span pairs on their own
            return self._solve_forced_scan(zero_mask)
        wit_mask, wit_pairs, wit_cost, _ = self.peel()
        if wit_pairs == 0 or wit_cost == 0:
            probe = self._probe_positive()
            if probe is None:
                return self._zero_star()
            wit_mask, wit_pairs, wit_cost = probe
        g_p, g_q = wit_pairs, wit_cost
        while True:
            val, mask = self._max_excess(g_p, g_q, bonus=0, minimal=True)
            if val <= 0 or mask == 0:
                break
            p, c = self.pairs_in(mask), self.cost_of(mask)
            if c == 0:
                break
            g_p, g_q, wit_mask = p, c, mask
        # canonical extraction among the maximizers of pairs - g*.cost:
        # the union of all maximizers, then minimal maximizers inside it.
        M = self.d + 2
        _, top_mask = self._max_excess(g_p * M, g_q * M, bonus=1, minimal=False)
        best: Optional[tuple] = None
        remaining = top_mask
        while remaining:
            u = (remaining & -remaining).bit_length() - 1
            _, atom = self._max_excess(g_p, g_q, bonus=0, minimal=True, force_in=1 << u)
            if atom == 0:
                remaining &= ~(1 << u)
                continue
            key = (atom.bit_count(), _mask_leaf_tuple(atom))
            if best is None or key < best[0]:
                best = (key, atom)
            remaining &= ~atom
        mask = best[1] if best else wit_mask
        return DenseSubsetResult(mask=mask, pairs=self.pairs_in(mask), cost=self.cost_of(mask))

    def _probe_positive(self) -> Optional[tuple[int, int, int]]:
        """Best single positive-cost leaf together with all zero-cost leaves."""
        zeros = sum(1 << i for i in range(self.d) if self.costs[i] == 0)
        best = None
        for i in range(self.d):
            if self.costs[i] == 0:
                continue
            mask = (1 << i) | zeros
            p, c = self.pairs_in(mask), self.costs[i]
            if best is None or p * best[2] > best[1] * c:
                best = (mask, p, c)
        if best is None or best[1] == 0:
            return None
        return best

    def _solve_forced_scan(self, zero_mask: int) -> DenseSubsetResult:
        """Exact solve when zero-cost leaves span pairs by themselves: force
        the zero hull plus each positive leaf in turn; best result wins."""
        best: Optional[tuple] = None
        for i in range(self.d):
            if self.costs[i] == 0:
                continue
            base = zero_mask | (1 << i)
            g_p, g_q = self.pairs_in(base), self.costs[i]
            mask = base
            while True:
                val, m2 = self._max_excess(g_p, g_q, bonus=0, minimal=True, force_in=base)
                if val <= 0 or m2 == 0:
                    break
                p, c = self.pairs_in(m2), self.cost_of(m2)
                if c == 0:
                    break
                g_p, g_q, mask = p, c, m2
            key = (-Fraction(g_p, g_q), mask.bit_count(), _mask_leaf_tuple(mask))
            if best is None or key < best[0]:
                best = (key, mask)
        if best is None:
            return self._zero_star()
        mask = best[1]
        return DenseSubsetResult(mask=mask, pairs=self.pairs_in(mask), cost=self.cost_of(mask))

    # -- feasibility ---------------------------------------------------------

    def feasible_ge(self, p: int, q: int) -> tuple[bool, int]:
        """Is there a nonempty U with q*pairs(U) >= p*cost(U)?  Returns
        (answer, witness mask or 0)."""
        if p <= 0:
            return (True, 1)
        if self.d <= BRUTE_MAX:
            r = self._solve_brute()
            ok = r.cost > 0 and q * r.pairs >= p * r.cost
            return (ok, r.mask if ok else 0)
        M = self.d + 2
        val, mask = self._max_excess(p * M, q * M, bonus=1, minimal=True)
        return (val > 0 and mask != 0, mask)

    # -- integer min-cut core -------------------------------------------------

    def _flow_base(self):
        """Lazy skeleton of the cut network: arc order is [s->u]*d, [u->t]*d,
        then pair arcs; stored as a fixed CSR pattern plus a slot->position
        permutation so calls only refill capacities."""
        if self._base is not None:
            return self._base
        d = self.d
        s, t = d, d + 1
        src = [s] * d + list(range(d))
        dst = list(range(d)) + [t] * d
        pair_src, pair_dst = [], []
        for i in range(d):
            m = self.rows[i]
            while m:
                bbit = m & -m
                pair_src.append(i)
                pair_dst.append(bbit.bit_length() - 1)
                m ^= bbit
        src += pair_src
        dst += pair_dst
        src_a = np.asarray(src, dtype=np.int64)
        dst_a = np.asarray(dst, dtype=np.int64)
        order = np.lexsort((dst_a, src_a))
        pos = np.empty(len(src), dtype=np.int64)
        pos[order] = np.arange(len(src))
        indices = dst_a[order].astype(np.int32)
        counts = np.bincount(src_a + 1, minlength=d + 3)
        indptr = np.cumsum(counts).astype(np.int32)
        degs = np.asarray([self.rows[i].bit_count() for i in range(d)], dtype=np.int64)
        costs = np.asarray(self.costs, dtype=np.int64)
        self._base = (
            indices,
            indptr,
            pos,
            degs,
            costs,
            len(pair_src),
            (src, dst),
        )
        return self._base

    def _max_excess(
        self,
        p: int,
        q: int,
        bonus: int,
        minimal: bool,
        force_in: int = 0,
    ) -> tuple[int, int]:
        """Maximize q*pairs(U) - p*cost(U) + bonus*|U| over subsets U
        containing force_in (the empty set scores 0 and is eligible unless
        forced).  Returns (max value, maximizer mask); the maximizer is the
        unique minimal one when ``minimal``, else the unique maximal one."""
        d = self.d
        s, t = d, d + 1
        indices, indptr, pos, degs, costs, n_pairs, raw = self._flow_base()
        # cut algebra: A_u - B_u = q*deg_u - 2p*cost_u + 2*bonus, pair arcs q
        diff = q * degs - 2 * p * costs + 2 * bonus
        a = np.maximum(diff, 0)
        b = a - diff
        big = int(a.sum() + b.sum()) + q * int(degs.sum()) + 1
        if force_in:
            forced = [i for i in range(d) if (force_in >> i) & 1]
            a[forced] = big
        data = np.empty(2 * d + n_pairs, dtype=np.int64)
        data[:d] = a
        data[d : 2 * d] = b
        data[2 * d :] = q
        source_side = _min_cut_source_side(
            d + 2, indices, indptr, pos, data, s, t, minimal, raw
        )
        mask = 0
        for i in source_side:
            if i < d:
                mask |= 1 << i
        value = q * self.pairs_in(mask) - p * self.cost_of(mask) + bonus * mask.bit_count()
        return value, mask


def _mask_leaf_tuple(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        b = mask & -mask
        out.append(b.bit_length() - 1)
        mask ^= b
    return tuple(out)


def _min_cut_source_side(
    n: int,
    indices: "np.ndarray",
    indptr: "np.ndarray",
    pos: "np.ndarray",
    data: "np.ndarray",
    s: int,
    t: int,
    minimal: bool,
    raw: tuple[list[int], list[int]],
) -> set[int]:
    if _HAVE_SCIPY and int(data.max(initial=0)) <= _INT32_SAFE:
        sorted_data = np.empty(len(data), dtype=np.int32)
        sorted_data[pos] = data
        caps = csr_matrix((sorted_data, indices, indptr), shape=(n, n))
        res = maximum_flow(caps, s, t)
        residual_ok = (caps - res.flow) > 0
        if minimal:
            order = breadth_first_order(residual_ok, s, directed=True, return_predecessors=False)
            return set(int(x) for x in order)
        order = breadth_first_order(residual_ok.T, t, directed=True, return_predecessors=False)
        t_side = set(int(x) for x in order)
        return set(range(n)) - t_side
    return _dinic_source_side(n, raw[0], raw[1], data.tolist(), s, t, minimal)


def _dinic_source_side(n, rows_idx, cols_idx, data, s, t, minimal) -> set[int]:
    from collections import deque

    head: list[list[int]] = [[] for _ in range(n)]
    to: list[int] = []
    cap: list[int] = []
    for u, v, c in zip(rows_idx, cols_idx, data):
        head[u].append(len(to))
        to.append(v)
        cap.append(c)
        head[v].append(len(to))
        to.append(u)
        cap.append(0)
    INF = float("inf")
    while True:
        level = [-1] * n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for aid in head[u]:
                if cap[aid] > 0 and level[to[aid]] < 0:
                    level[to[aid]] = level[u] + 1
                    q.append(to[aid])
        if level[t] < 0:
            break
        it = [0] * n

        def dfs(u, f):
            if u == t:
                return f
            while it[u] < len(head[u]):
                aid = head[u][it[u]]
                v = to[aid]
                if cap[aid] > 0 and level[v] == level[u] + 1:
                    got = dfs(v, min(f, cap[aid]))
                    if got:
                        cap[aid] -= got
                        cap[aid ^ 1] += got
                        return got
                it[u] += 1
            return 0

        while dfs(s, INF):
            pass
    if minimal:
        seen = {s}
        q = deque([s])
        while q:
            u = q.popleft()
            for aid in head[u]:
                if cap[aid] > 0 and to[aid] not in seen:
                    seen.add(to[aid])
                    q.append(to[aid])
        return seen
    rev_seen = {t}
    q = deque([t])
    while q:
        u = q.popleft()
        for aid in head[u]:
            if cap[aid ^ 1] > 0 and to[aid] not in rev_seen:
                rev_seen.add(to[aid])
                q.append(to[aid])
    return set(range(n)) - rev_seen
