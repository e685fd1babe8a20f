"""Distributed minimum 2-spanner approximation with certificates.

Each iteration is compiled to eight simulator rounds: density broadcast (two
hops), star announcement, rank broadcast, edge voting, commit, and a two-hop
coverage update.  A three-round prologue exchanges neighbor lists (and, when
weighted, seeds the spanner with all weight-0 edges and spreads the local
maximum edge weight two hops).

Vertices whose 2-neighborhood density falls strictly below the variant
threshold (1, or 1/w_max when weighted, or 1/2 in client-server mode) add all
of their still-uncovered incident edges and stop competing; they keep
relaying density information until their whole neighborhood has finished, so
two-hop information never goes stale, and only then emit their output.

The run yields a cost certificate: an edge voting for a winning star of
density rho pays 1/rho; edges covered any other way during the run pay 0;
edges added at termination pay 1 (their weight when weighted).  The exact
inequality |H| <= 8 * sum(cost) holds on every run.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional

from .density import DensityInstance, pow2_exp_strictly_above
from .graphs import Graph, verify_spanner
from .simulate import (
    LocalView,
    NodeProgram,
    Trace,
    pack,
    run,
    unpack,
    unzigzag,
    zigzag,
)
from .stars import DirectedStarContext, StarChoiceError, StarContext, choose_state

# message tags
T_ADJ, T_COV0, T_COV0B = 1, 2, 3
T_DENS, T_DMAX, T_STAR, T_RANK, T_VOTE, T_CMIT, T_COVA, T_COVB = 5, 6, 7, 8, 9, 10, 11, 12

PROLOGUE_ROUNDS = 3
PHASES = 8
PH_DENS, PH_DMAX, PH_STAR, PH_RANK, PH_VOTE, PH_CMIT, PH_COVA, PH_COVB = range(8)

VARIANTS = ("unweighted", "weighted", "directed", "client-server")


def default_max_rounds(n: int) -> int:
    lg = max(1, n.bit_length())
    return PROLOGUE_ROUNDS + PHASES * (40 * lg * lg + 60)


def _gate_exp(variant: str) -> int:
    # candidacy gate as a rounded-density exponent: rho >= 1 iff exp >= 1,
    # rho >= 1/2 iff exp >= 0 (weighted compares exact fractions instead)
    return 0 if variant == "client-server" else 1


def _term_exp(variant: str) -> int:
    # terminate when every exponent within two hops is <= this bound
    return -1 if variant == "client-server" else 0


class _BucketDensity:
    """Certified rounded-density maintenance for unit-cost instances.

    Keeps a witness subset achieving the current bucket's lower boundary and
    a proven upper bound; densities only fall as edges get covered, so the
    previous bucket stays a valid upper bound and most updates resolve with a
    witness recount and no feasibility test."""

    def __init__(self):
        self.exp: Optional[int] = None
        self.witness = 0
        self.ub_exp: Optional[int] = None  # certified rho < 2**ub_exp

    def refresh(self, ctx: StarContext) -> Optional[int]:
        if self.exp is not None and self.witness:
            num = ctx.spanned_count(self.witness)
            den = ctx.cost(self.witness)
            if den > 0 and num > 0:
                e = self.exp
                if (num << max(0, 1 - e)) >= (den << max(0, e - 1)):
                    return self.exp
        inst = DensityInstance(ctx.costs, ctx.rows)
        wmask, wp, wc, degeneracy = inst.peel()
        if wp == 0:
            self.exp = None
            self.witness = 0
            self.ub_exp = None
            return None
        e = pow2_exp_strictly_above(Fraction(wp, wc))
        self.witness = wmask
        bound = self.ub_exp
        deg_exp = pow2_exp_strictly_above(Fraction(degeneracy)) if degeneracy else None
        if deg_exp is not None and (bound is None or deg_exp < bound):
            bound = deg_exp
        while bound is None or e < bound:
            p, q = (1 << e, 1) if e >= 0 else (1, 1 << (-e))
            ok, wit = inst.feasible_ge(p, q)
            if not ok:
                break
            self.witness = wit
            e += 1
        self.exp = e
        self.ub_exp = e
        return self.exp


class _Node:
    """Per-vertex program state; every field derives from the local view and
    received messages only."""

    def __init__(self, view: LocalView, variant: str):
        self.view = view
        self.me = view.node
        self.n = view.n
        self.variant = variant
        self.directed = variant == "directed"
        nbr_chan: dict[int, int] = {}
        for ch in view.channels:
            nbr_chan[ch.peer] = ch.channel
        self.nbrs: list[int] = sorted(nbr_chan)
        self.idx = {u: i for i, u in enumerate(self.nbrs)}
        self.deg = len(self.nbrs)
        self.chan = [nbr_chan[u] for u in self.nbrs]
        self.chan_to_idx = {c: i for i, c in enumerate(self.chan)}
        # own incident edges; directed graphs may carry one arc per direction
        self.eid_out: list[Optional[int]] = [None] * self.deg  # me->nbr / undirected
        self.eid_in: list[Optional[int]] = [None] * self.deg  # nbr->me
        self.w_out = [1] * self.deg
        self.w_in = [1] * self.deg
        self.flags_out = [0] * self.deg  # 1=client 2=server
        self.flags_in = [0] * self.deg
        for ch in view.channels:
            i = self.idx[ch.peer]
            for e in ch.edges:
                fl = (1 if e.client else 0) | (2 if e.server else 0)
                if not view.directed or e.tail == self.me:
                    self.eid_out[i] = e.eid
                    self.w_out[i] = e.w
                    self.flags_out[i] = fl
                else:
                    self.eid_in[i] = e.eid
                    self.w_in[i] = e.w
                    self.flags_in[i] = fl
        if variant == "client-server":
            self.pool = [i for i in range(self.deg) if self.flags_out[i] & 2]
        else:
            self.pool = list(range(self.deg))
        self.pidx = [-1] * self.deg
        for k, i in enumerate(self.pool):
            self.pidx[i] = k
        self.ctx: Any = None
        self.rows: list[int] = []
        self.fwd: list[int] = []
        self.bwd: list[int] = []
        self.own_unc: set[tuple[int, int]] = set()  # (local idx, dir); dir 0 = out
        self.in_H: set[int] = set()
        self.h2_added: list[int] = []
        self.uncoverable: list[int] = []
        self.nbr_adj: list[dict[int, int]] = [dict() for _ in range(self.deg)]
        self.bucket = _BucketDensity()
        self.exp: Optional[int] = None
        self.rho_num = 0
        self.rho_den = 1
        self.dirty = True
        self.est_exp: Optional[int] = None  # directed estimate cap
        self.maxw_own = 0
        self.maxw_seen = 0
        self.nbr_exp: list[Optional[int]] = [None] * self.deg
        self.nbr_frac: list[tuple[int, int]] = [(0, 1)] * self.deg
        self.nbr_term: list[bool] = [False] * self.deg
        self.nbr_mexp: list[Optional[int]] = [None] * self.deg
        self.nbr_mfrac: list[tuple[int, int]] = [(0, 1)] * self.deg
        self.nbr_star: dict[int, Any] = {}
        self.nbr_rank: dict[int, int] = {}
        self.is_cand = False
        self.star_state: Any = None
        self.star_span = 0
        self.star_cost = 0
        self.rank = 0
        self.prev_state: Any = None
        self.prev_exp: Optional[int] = None
        self.terminated = False
        self.newly_in_H: list[tuple[int, int]] = []
        self.newly_cov: list[tuple[int, int, bool]] = []
        self.it: dict = {}

    def edge_of(self, i: int, d: int) -> Optional[int]:
        return self.eid_out[i] if d == 0 else self.eid_in[i]

    def mark_own_covered(self, i: int, d: int, in_h: bool) -> None:
        key = (i, d)
        eid = self.edge_of(i, d)
        if eid is None:
            return
        if in_h and eid not in self.in_H:
            self.in_H.add(eid)
            self.newly_in_H.append(key)
        if key in self.own_unc:
            self.own_unc.discard(key)
            if not in_h:
                # trackers learn in-H edges from commits and the in-H
                # announcements; only 2-spanned coverage needs this channel
                self.newly_cov.append(key)

    def clear_pair(self, a: int, b: int) -> None:
        """Mark the tracked undirected pair between local neighbors a, b
        covered (no-op when not tracked)."""
        pa, pb = self.pidx[a], self.pidx[b]
        if pa < 0 or pb < 0:
            return
        rows = self.rows
        if (rows[pa] >> pb) & 1:
            rows[pa] &= ~(1 << pb)
            rows[pb] &= ~(1 << pa)
            self.dirty = True

    def clear_arc(self, a: int, b: int) -> None:
        """Mark the tracked arc (a -> b) between local neighbors covered."""
        if (self.fwd[a] >> b) & 1:
            self.fwd[a] &= ~(1 << b)
            self.bwd[b] &= ~(1 << a)
            self.dirty = True


@dataclass
class IterationRecord:
    iteration: int
    exps: dict[int, Optional[int]]
    fracs: dict[int, tuple[int, int]]
    candidates: dict[int, dict]
    votes: dict[tuple, int]  # edge key -> candidate id
    winners: list[int]
    h2: dict[int, list[int]]
    terminated: list[int]


@dataclass
class CostCertificate:
    costs: dict[int, Fraction]
    h1: frozenset[int]
    h2: frozenset[int]
    cost_sum: Fraction
    rho_max_series: list[Optional[int]]
    phi_series: list[int]
    iterations: int


@dataclass
class SpannerResult:
    variant: str
    seed: int
    H: frozenset[int]
    certificate: CostCertificate
    trace: Trace
    records: list[IterationRecord]
    uncoverable_clients: frozenset[int] = frozenset()


class SpannerProgram(NodeProgram):
    def __init__(self, variant: str):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.variant = variant

    # -- lifecycle -------------------------------------------------------

    def init(self, view: LocalView, rng: random.Random) -> _Node:
        node = _Node(view, self.variant)
        if self.variant == "weighted":
            ws = [w for w in node.w_out + node.w_in if w]
            node.maxw_own = max(ws) if ws else 0
            node.maxw_seen = node.maxw_own
        return node

    def step(self, node: _Node, round_no: int, inbox, rng: random.Random):
        if round_no == 0:
            return node, self._send_adj(node), None
        if round_no == 1:
            self._recv_adj(node, inbox)
            return node, self._send_cov0(node), None
        if round_no == 2:
            self._recv_cova(node, inbox, tag=T_COV0)
            return node, self._send_covb(node, tag=T_COV0B), None
        phase = (round_no - PROLOGUE_ROUNDS) % PHASES
        if phase == PH_DENS:
            self._recv_covb(node, inbox)
            if node.terminated and all(node.nbr_term):
                node.it = {}
                return node, {}, self._output(node)
            node.it = {}
            return node, self._send_dens(node), None
        if phase == PH_DMAX:
            self._recv_dens(node, inbox)
            return node, self._send_dmax(node), None
        if phase == PH_STAR:
            self._recv_dmax(node, inbox)
            return node, self._phase_star(node, rng), None
        if phase == PH_RANK:
            self._recv_star(node, inbox)
            out = {}
            if node.is_cand:
                payload = pack(T_RANK, [node.rank])
                out = {c: payload for c in node.chan}
            return node, out, None
        if phase == PH_VOTE:
            self._recv_rank(node, inbox)
            return node, self._phase_vote(node), None
        if phase == PH_CMIT:
            return node, self._phase_commit(node, inbox), None
        if phase == PH_COVA:
            self._recv_commit(node, inbox)
            return node, self._send_cova(node), None
        self._recv_cova(node, inbox, tag=T_COVA)
        return node, self._send_covb(node, tag=T_COVB), None

    def observe(self, round_no: int, states: list[_Node]) -> Optional[dict]:
        if round_no < PROLOGUE_ROUNDS:
            return None
        if (round_no - PROLOGUE_ROUNDS) % PHASES != PH_COVB:
            return None
        iteration = (round_no - PROLOGUE_ROUNDS) // PHASES
        exps, fracs, candidates, votes, winners, h2, term = {}, {}, {}, {}, [], {}, []
        for node in states:
            it = node.it
            if not it:
                continue
            exps[node.me] = it.get("exp")
            fracs[node.me] = it.get("frac", (0, 1))
            if "cand" in it:
                candidates[node.me] = it["cand"]
            for key, cand in it.get("votes", {}).items():
                votes[key] = cand
            if it.get("winner"):
                winners.append(node.me)
            if it.get("h2") is not None:
                h2[node.me] = it["h2"]
            if it.get("terminated"):
                term.append(node.me)
        return {
            "iteration": iteration,
            "exps": exps,
            "fracs": fracs,
            "candidates": candidates,
            "votes": votes,
            "winners": sorted(winners),
            "h2": h2,
            "terminated": sorted(term),
        }

    # -- prologue ----------------------------------------------------------

    def _send_adj(self, node: _Node) -> dict[int, bytes]:
        vals = [node.maxw_own, node.deg]
        for i, u in enumerate(node.nbrs):
            bits = 0
            if node.eid_out[i] is not None:
                bits |= 1 | (node.flags_out[i] << 2) | ((node.w_out[i] == 0) << 4)
            if node.eid_in[i] is not None:
                bits |= 2 | (node.flags_in[i] << 5) | ((node.w_in[i] == 0) << 7)
            vals.extend((u, bits))
        payload = pack(T_ADJ, vals)
        return {c: payload for c in node.chan}

    def _recv_adj(self, node: _Node, inbox) -> None:
        entries: list[tuple] = [()] * node.deg
        for cid, payload in inbox:
            tag, vals = unpack(payload)
            if tag != T_ADJ:
                continue
            i = node.chan_to_idx[cid]
            node.maxw_seen = max(node.maxw_seen, vals[0])
            entries[i] = vals[2:]
        if self.variant == "client-server":
            for i in range(node.deg):
                adj = node.nbr_adj[i]
                vals = entries[i]
                for k in range(0, len(vals), 2):
                    if vals[k] != node.me:
                        adj[vals[k]] = vals[k + 1]
        self._build_structures(node, entries)

    def _build_structures(self, node: _Node, entries: list[tuple]) -> None:
        weighted = self.variant == "weighted"
        cs = self.variant == "client-server"
        for i in range(node.deg):
            for d in (0, 1):
                eid = node.edge_of(i, d)
                if eid is None:
                    continue
                w = node.w_out[i] if d == 0 else node.w_in[i]
                fl = node.flags_out[i] if d == 0 else node.flags_in[i]
                if cs and not (fl & 1):
                    continue  # non-client edges never need covering
                if cs and not self._cs_coverable(node, i):
                    node.uncoverable.append(eid)
                    continue
                if weighted and w == 0:
                    node.in_H.add(eid)
                    node.newly_in_H.append((i, d))
                else:
                    node.own_unc.add((i, d))
        idx_get = node.idx.get
        if node.directed:
            d = node.deg
            node.fwd = [0] * d
            node.bwd = [0] * d
            for i in range(d):
                if node.eid_in[i] is None:
                    continue
                vals = entries[i]
                for k in range(0, len(vals), 2):
                    j = idx_get(vals[k])
                    # arc nbrs[i]->other 2-spannable through me iff the arcs
                    # (nbrs[i], me) and (me, other) exist
                    if j is not None and (vals[k + 1] & 1) and node.eid_out[j] is not None:
                        node.fwd[i] |= 1 << j
                        node.bwd[j] |= 1 << i
            node.ctx = DirectedStarContext(
                node.nbrs,
                sum(1 << i for i in range(d) if node.eid_in[i] is not None),
                sum(1 << i for i in range(d) if node.eid_out[i] is not None),
                node.fwd,
                node.bwd,
            )
            return
        p = len(node.pool)
        node.rows = [0] * p
        rows = node.rows
        pidx = node.pidx
        for k, i in enumerate(node.pool):
            vals = entries[i]
            bit_k = 1 << k
            for s in range(0, len(vals), 2):
                bits = vals[s + 1]
                if not (bits & 1):
                    continue
                if cs and not ((bits >> 2) & 1):
                    continue  # only client pairs count toward density
                if weighted and (bits >> 4) & 1:
                    continue  # weight-0 pair edges start covered
                j = idx_get(vals[s])
                if j is None:
                    continue
                kj = pidx[j]
                if kj >= 0 and kj != k:
                    rows[k] |= 1 << kj
                    rows[kj] |= bit_k
        costs = [(node.w_out[i] if weighted else 1) for i in node.pool]
        node.ctx = StarContext([node.nbrs[i] for i in node.pool], costs, node.rows)

    def _cs_coverable(self, node: _Node, i: int) -> bool:
        if node.flags_out[i] & 2:
            return True
        other = node.nbrs[i]
        for j in range(node.deg):
            if j == i or not (node.flags_out[j] & 2):
                continue
            bits = node.nbr_adj[j].get(other)
            if bits is not None and (bits & 1) and ((bits >> 2) & 2):
                return True
        return False

    def _send_cov0(self, node: _Node) -> dict[int, bytes]:
        out = self._send_cova(node, tag=T_COV0)
        if self.variant != "weighted":
            return {}
        relay = node.maxw_seen
        full = {}
        for cid in node.chan:
            body = out.get(cid)
            vals = unpack(body)[1] if body is not None else [0, 0]
            full[cid] = pack(T_COV0, [relay] + vals)
        return full

    # -- iteration phases ----------------------------------------------------

    def _refresh_density(self, node: _Node) -> None:
        if not node.dirty:
            return
        node.dirty = False
        if node.ctx is None or node.deg == 0 or (not node.directed and not node.pool):
            node.exp = None
            node.rho_num, node.rho_den = 0, 1
            return
        if self.variant in ("unweighted", "client-server"):
            node.exp = node.bucket.refresh(node.ctx)
            return
        if self.variant == "weighted":
            if all(r == 0 for r in node.ctx.rows):
                node.exp = None
                node.rho_num, node.rho_den = 0, 1
                return
            inst = DensityInstance(node.ctx.costs, node.ctx.rows)
            r = inst.solve_canonical()
            if r.pairs == 0 or r.cost == 0:
                node.exp = None
                node.rho_num, node.rho_den = 0, 1
            else:
                node.rho_num, node.rho_den = r.pairs, r.cost
                node.exp = pow2_exp_strictly_above(Fraction(r.pairs, r.cost))
            return
        if all(f == 0 for f in node.fwd):
            node.exp = None
            node.rho_num, node.rho_den = 0, 1
            return
        state, num, den = node.ctx.densest()
        node.rho_num, node.rho_den = num, max(den, 1)
        e = pow2_exp_strictly_above(Fraction(num, den)) if num > 0 else None
        if e is not None and node.est_exp is not None:
            e = min(e, node.est_exp)
        node.est_exp = e
        node.exp = e

    def _send_dens(self, node: _Node) -> dict[int, bytes]:
        self._refresh_density(node)
        flags = (1 if node.terminated else 0) | (2 if node.exp is None else 0)
        vals = [flags]
        if node.exp is not None:
            vals.append(zigzag(node.exp))
        if self.variant == "weighted":
            vals.extend((node.rho_num, node.rho_den))
        node.it["exp"] = node.exp
        node.it["frac"] = (node.rho_num, node.rho_den)
        payload = pack(T_DENS, vals)
        return {c: payload for c in node.chan}

    def _recv_dens(self, node: _Node, inbox) -> None:
        for cid, payload in inbox:
            tag, vals = unpack(payload)
            if tag != T_DENS:
                continue
            i = node.chan_to_idx[cid]
            flags = vals[0]
            node.nbr_term[i] = bool(flags & 1)
            k = 1
            if flags & 2:
                node.nbr_exp[i] = None
            else:
                node.nbr_exp[i] = unzigzag(vals[k])
                k += 1
            if self.variant == "weighted":
                node.nbr_frac[i] = (vals[k], vals[k + 1])

    def _send_dmax(self, node: _Node) -> dict[int, bytes]:
        exps = [e for e in node.nbr_exp if e is not None]
        if node.exp is not None:
            exps.append(node.exp)
        mexp = max(exps) if exps else None
        flags = 2 if mexp is None else 0
        vals = [flags]
        if mexp is not None:
            vals.append(zigzag(mexp))
        if self.variant == "weighted":
            best = (node.rho_num, node.rho_den)
            for (num, den) in node.nbr_frac:
                if num * best[1] > best[0] * den:
                    best = (num, den)
            vals.extend(best)
        payload = pack(T_DMAX, vals)
        return {c: payload for c in node.chan}

    def _recv_dmax(self, node: _Node, inbox) -> None:
        for cid, payload in inbox:
            tag, vals = unpack(payload)
            if tag != T_DMAX:
                continue
            i = node.chan_to_idx[cid]
            flags = vals[0]
            k = 1
            if flags & 2:
                node.nbr_mexp[i] = None
            else:
                node.nbr_mexp[i] = unzigzag(vals[k])
                k += 1
            if self.variant == "weighted":
                node.nbr_mfrac[i] = (vals[k], vals[k + 1])

    def _two_hop_max_exp(self, node: _Node) -> Optional[int]:
        exps = [e for e in node.nbr_mexp if e is not None]
        exps.extend(e for e in node.nbr_exp if e is not None)
        if node.exp is not None:
            exps.append(node.exp)
        return max(exps) if exps else None

    def _phase_star(self, node: _Node, rng: random.Random) -> dict[int, bytes]:
        node.nbr_star = {}
        node.nbr_rank = {}
        node.is_cand = False
        m2 = self._two_hop_max_exp(node)
        if not node.terminated:
            if self.variant == "weighted":
                self._weighted_gates(node, m2)
            else:
                gate, term = _gate_exp(self.variant), _term_exp(self.variant)
                if (
                    node.exp is not None
                    and node.exp >= gate
                    and (m2 is None or node.exp >= m2)
                ):
                    node.is_cand = True
                elif m2 is None or m2 <= term:
                    self._terminate(node)
        if not node.is_cand:
            node.prev_state, node.prev_exp = None, None
            return {}
        node.star_state = choose_state(node.ctx, node.prev_state, node.prev_exp, node.exp)
        node.prev_state, node.prev_exp = node.star_state, node.exp
        node.star_span = node.ctx.spanned_count(node.star_state)
        node.star_cost = node.ctx.cost(node.star_state)
        node.rank = rng.randrange(1, node.n**4 + 1)
        shift = 3 if node.directed else 2
        e = node.exp - shift
        if node.star_span * (1 << max(0, -e)) < node.star_cost * (1 << max(0, e)):
            raise StarChoiceError("chosen star below the density threshold")
        node.it["cand"] = {
            "star": sorted(self._state_edge_ids(node, node.star_state)),
            "span": node.star_span,
            "den": node.star_cost,
            "rank": node.rank,
        }
        if node.directed:
            in_mask, out_mask = node.star_state
            entries = []
            for i in range(node.deg):
                bits = ((in_mask >> i) & 1) | (((out_mask >> i) & 1) << 1)
                if bits:
                    entries.extend((node.nbrs[i], bits))
            payload = pack(T_STAR, [len(entries) // 2] + entries)
        else:
            leaves = [
                node.ctx.leaf_ids[k]
                for k in range(node.ctx.d)
                if (node.star_state >> k) & 1
            ]
            payload = pack(T_STAR, [len(leaves)] + leaves)
        return {c: payload for c in node.chan}

    def _weighted_gates(self, node: _Node, m2exp: Optional[int]) -> None:
        tau_den = max(node.maxw_seen, 1)
        if (
            node.rho_num * tau_den >= node.rho_den
            and node.exp is not None
            and (m2exp is None or node.exp >= m2exp)
        ):
            node.is_cand = True
            return
        best = (node.rho_num, node.rho_den)
        for (num, den) in list(node.nbr_frac) + list(node.nbr_mfrac):
            if num * best[1] > best[0] * den:
                best = (num, den)
        if best[0] * tau_den < best[1]:
            self._terminate(node)

    def _terminate(self, node: _Node) -> None:
        node.terminated = True
        node.it["terminated"] = True
        h2 = []
        for (i, d) in sorted(node.own_unc):
            eid = node.edge_of(i, d)
            fl = node.flags_out[i] if d == 0 else node.flags_in[i]
            if self.variant == "client-server" and not (fl & 2):
                continue  # only client-and-server edges may be self-added
            h2.append(eid)
        for (i, d) in sorted(node.own_unc):
            if self.variant == "client-server":
                fl = node.flags_out[i] if d == 0 else node.flags_in[i]
                if not (fl & 2):
                    continue
            node.mark_own_covered(i, d, in_h=True)
        node.h2_added.extend(h2)
        node.it["h2"] = sorted(h2)

    def _state_edge_ids(self, node: _Node, state) -> list[int]:
        if node.directed:
            in_mask, out_mask = state
            ids = []
            for i in range(node.deg):
                if (in_mask >> i) & 1:
                    ids.append(node.eid_in[i])
                if (out_mask >> i) & 1:
                    ids.append(node.eid_out[i])
            return ids
        return [
            node.eid_out[node.pool[k]] for k in range(node.ctx.d) if (state >> k) & 1
        ]

    def _recv_star(self, node: _Node, inbox) -> None:
        for cid, payload in inbox:
            tag, vals = unpack(payload)
            if tag != T_STAR:
                continue
            i = node.chan_to_idx[cid]
            cnt = vals[0]
            if node.directed:
                node.nbr_star[i] = {
                    vals[1 + 2 * k]: vals[2 + 2 * k] for k in range(cnt)
                }
            else:
                node.nbr_star[i] = set(vals[1 : 1 + cnt])

    def _recv_rank(self, node: _Node, inbox) -> None:
        for cid, payload in inbox:
            tag, vals = unpack(payload)
            if tag == T_RANK:
                node.nbr_rank[node.chan_to_idx[cid]] = vals[0]

    def _phase_vote(self, node: _Node) -> dict[int, bytes]:
        votes: dict[int, list[int]] = {}
        my_votes: dict[tuple, int] = {}
        for (i, d) in sorted(node.own_unc):
            other = node.nbrs[i]
            if node.directed:
                if d != 0:
                    continue  # the tail simulates each arc's vote
            elif node.me > other:
                continue  # the smaller endpoint simulates the vote
            best = None
            for j, star in node.nbr_star.items():
                if j not in node.nbr_rank:
                    continue
                if node.directed:
                    if not (star.get(node.me, 0) & 1):
                        continue  # needs arc (me -> v)
                    if not (star.get(other, 0) & 2):
                        continue  # needs arc (v -> other)
                else:
                    if node.me not in star or other not in star:
                        continue
                key = (node.nbr_rank[j], node.nbrs[j])
                if best is None or key < best[0]:
                    best = (key, j)
            if best is not None:
                j = best[1]
                votes.setdefault(j, []).append(other)
                ekey = (
                    (node.me, other)
                    if node.directed
                    else (min(node.me, other), max(node.me, other))
                )
                my_votes[ekey] = node.nbrs[j]
        node.it["votes"] = my_votes
        return {
            node.chan[j]: pack(T_VOTE, [len(heads)] + sorted(heads))
            for j, heads in votes.items()
        }

    def _phase_commit(self, node: _Node, inbox) -> dict[int, bytes]:
        if not node.is_cand:
            return {}
        count = 0
        for _, payload in inbox:
            tag, vals = unpack(payload)
            if tag == T_VOTE:
                count += vals[0]
        if 8 * count < node.star_span:
            return {}
        node.it["winner"] = True
        node.it["cand"]["votes"] = count
        if node.directed:
            in_mask, out_mask = node.star_state
            for i in range(node.deg):
                if (out_mask >> i) & 1:
                    node.mark_own_covered(i, 0, in_h=True)
                if (in_mask >> i) & 1:
                    node.mark_own_covered(i, 1, in_h=True)
        else:
            for k in range(node.ctx.d):
                if (node.star_state >> k) & 1:
                    node.mark_own_covered(node.pool[k], 0, in_h=True)
        payload = pack(T_CMIT, [])
        return {c: payload for c in node.chan}

    def _recv_commit(self, node: _Node, inbox) -> None:
        for cid, payload in inbox:
            tag, _ = unpack(payload)
            if tag != T_CMIT:
                continue
            i = node.chan_to_idx[cid]
            star = node.nbr_star.get(i)
            if star is None:
                continue
            if node.directed:
                bits = star.get(node.me, 0)
                if bits & 1:
                    node.mark_own_covered(i, 0, in_h=True)  # arc me->v
                if bits & 2:
                    node.mark_own_covered(i, 1, in_h=True)  # arc v->me
                for other, obits in star.items():
                    j = node.idx.get(other)
                    if j is None or other == node.me:
                        continue
                    if obits & 1:
                        node.clear_arc(j, i)  # star arc (other -> v)
                    if obits & 2:
                        node.clear_arc(i, j)  # star arc (v -> other)
            else:
                if node.me in star:
                    node.mark_own_covered(i, 0, in_h=True)
                for other in star:
                    j = node.idx.get(other)
                    if j is not None and other != node.me:
                        node.clear_pair(min(i, j), max(i, j))

    def _send_cova(self, node: _Node, tag: int = T_COVA) -> dict[int, bytes]:
        newly = node.newly_in_H
        node.newly_in_H = []
        if not newly:
            return {}
        sec_a: list[int] = []
        for (i, d) in newly:
            sec_a.extend((node.nbrs[i], 1 << d))
        notices: dict[int, list[tuple[int, int]]] = {}
        in_h_keys = self._own_in_h_keys(node)
        seen_pairs: set[tuple] = set()
        for key_new in newly:
            for key_old in in_h_keys:
                if key_old == key_new:
                    continue
                pkey = (min(key_new, key_old), max(key_new, key_old))
                if pkey in seen_pairs:
                    continue
                seen_pairs.add(pkey)
                self._spanned_pair_notice(node, key_new, key_old, notices)
        out = {}
        for k in range(node.deg):
            body = notices.get(k, [])
            vals = [len(sec_a) // 2] + sec_a + [len(body)]
            for (other, bits) in body:
                vals.extend((other, bits))
            out[node.chan[k]] = pack(tag, vals)
        return out

    def _own_in_h_keys(self, node: _Node) -> list[tuple[int, int]]:
        keys = []
        for i in range(node.deg):
            for d in (0, 1):
                eid = node.edge_of(i, d)
                if eid is not None and eid in node.in_H:
                    keys.append((i, d))
        return keys

    def _spanned_pair_notice(self, node: _Node, ka, kb, notices) -> None:
        """Both own edges ka=(i,d), kb=(j,d2) are in H; if they form a 2-path
        through me covering a tracked pair, clear it and notify the pair's
        endpoints (receiver-relative arc bits: 1 = your outgoing arc)."""
        (i, d), (j, d2) = ka, kb
        if node.directed:
            # need an in-arc (x -> me) and an out-arc (me -> y)
            if d == 1 and d2 == 0:
                x, y = i, j
            elif d == 0 and d2 == 1:
                x, y = j, i
            else:
                return
            if not ((node.fwd[x] >> y) & 1):
                return
            node.clear_arc(x, y)
            notices.setdefault(x, []).append((node.nbrs[y], 1))
            notices.setdefault(y, []).append((node.nbrs[x], 2))
        else:
            pa, pb = node.pidx[i], node.pidx[j]
            if pa < 0 or pb < 0 or not ((node.rows[pa] >> pb) & 1):
                return
            node.clear_pair(i, j)
            notices.setdefault(i, []).append((node.nbrs[j], 1))
            notices.setdefault(j, []).append((node.nbrs[i], 1))

    def _recv_cova(self, node: _Node, inbox, tag: int) -> None:
        for cid, payload in inbox:
            mtag, vals = unpack(payload)
            if mtag != tag:
                continue
            i = node.chan_to_idx[cid]
            k = 0
            if tag == T_COV0:
                node.maxw_seen = max(node.maxw_seen, vals[0])
                k = 1
            na = vals[k]
            k += 1
            for _ in range(na):
                other, bits = vals[k], vals[k + 1]
                k += 2
                if other == node.me:
                    # the sender's edge to me entered H
                    if bits & 1:
                        node.mark_own_covered(i, 1 if node.directed else 0, in_h=True)
                    if bits & 2:
                        node.mark_own_covered(i, 0, in_h=True)
                    continue
                j = node.idx.get(other)
                if j is None:
                    continue
                if node.directed:
                    if bits & 1:
                        node.clear_arc(i, j)
                    if bits & 2:
                        node.clear_arc(j, i)
                else:
                    node.clear_pair(min(i, j), max(i, j))
            nb = vals[k]
            k += 1
            for _ in range(nb):
                other, bits = vals[k], vals[k + 1]
                k += 2
                j = node.idx.get(other)
                if j is None:
                    continue
                if node.directed:
                    if bits & 1:
                        node.mark_own_covered(j, 0, in_h=False)
                    if bits & 2:
                        node.mark_own_covered(j, 1, in_h=False)
                else:
                    node.mark_own_covered(j, 0, in_h=False)

    def _send_covb(self, node: _Node, tag: int = T_COVB) -> dict[int, bytes]:
        newly = node.newly_cov
        node.newly_cov = []
        vals = [0]
        for (i, d) in newly:
            # the simulating endpoint announces each 2-spanned edge once
            if node.directed:
                if d != 0:
                    continue
            elif node.me > node.nbrs[i]:
                continue
            vals.extend((node.nbrs[i], 1 << d))
        if len(vals) == 1:
            return {}
        vals[0] = (len(vals) - 1) // 2
        payload = pack(tag, vals)
        return {c: payload for c in node.chan}

    def _recv_covb(self, node: _Node, inbox) -> None:
        idx_get = node.idx.get
        for cid, payload in inbox:
            tag, vals = unpack(payload)
            if tag not in (T_COVB, T_COV0B):
                continue
            i = node.chan_to_idx[cid]
            cnt = vals[0]
            k = 1
            for _ in range(cnt):
                other, bits = vals[k], vals[k + 1]
                k += 2
                if other == node.me:
                    if bits & 1:
                        node.mark_own_covered(i, 1 if node.directed else 0, in_h=False)
                    if bits & 2:
                        node.mark_own_covered(i, 0, in_h=False)
                    continue
                j = idx_get(other)
                if j is None:
                    continue
                if node.directed:
                    if bits & 1:
                        node.clear_arc(i, j)
                    if bits & 2:
                        node.clear_arc(j, i)
                else:
                    node.clear_pair(i, j)

    def _output(self, node: _Node) -> dict:
        return {
            "spanner": sorted(node.in_H),
            "h2": sorted(set(node.h2_added)),
            "uncoverable": sorted(node.uncoverable),
        }


# ---------------------------------------------------------------------------
# driver, cost assignment, certificate


def infer_variant(g: Graph) -> str:
    if g.directed:
        return "directed"
    if g.client_server:
        return "client-server"
    if g.weighted:
        return "weighted"
    return "unweighted"


def _edge_key(g: Graph, eid: int) -> tuple:
    e = g.edges[eid]
    if g.directed:
        return (e.u, e.v)
    return (min(e.u, e.v), max(e.u, e.v))


def replay_coverage(
    g: Graph, records: list[IterationRecord], variant: str
) -> tuple[dict[int, int], dict[int, Fraction], set[int], set[int]]:
    """Re-derive, from the per-iteration event records only, when each edge
    became covered and the resulting edge costs."""
    weighted = variant == "weighted"
    cs = variant == "client-server"
    in_h: set[int] = set()
    h_out: dict[int, set[int]] = {v: set() for v in range(g.n)}
    h_in: dict[int, set[int]] = {v: set() for v in range(g.n)}

    def h_add(eid: int) -> bool:
        if eid in in_h:
            return False
        in_h.add(eid)
        e = g.edges[eid]
        h_out[e.u].add(e.v)
        h_in[e.v].add(e.u)
        if not g.directed:
            h_out[e.v].add(e.u)
            h_in[e.u].add(e.v)
        return True

    def covered_now(eid: int) -> bool:
        if eid in in_h:
            return True
        e = g.edges[eid]
        return any(x in h_in[e.v] for x in h_out[e.u])

    covered_at: dict[int, int] = {}
    costs: dict[int, Fraction] = {}
    h1: set[int] = set()
    h2: set[int] = set()
    uncovered = {eid for eid in range(g.m) if not cs or g.edges[eid].client}
    if weighted:
        for eid in range(g.m):
            if g.edges[eid].w == 0:
                h_add(eid)
        for eid in sorted(uncovered):
            if covered_now(eid):
                covered_at[eid] = -1
                costs[eid] = Fraction(0)
        uncovered -= set(covered_at)
    for rec in records:
        it = rec.iteration
        changed = False
        for v in rec.winners:
            for eid in rec.candidates[v]["star"]:
                if h_add(eid):
                    h1.add(eid)
                    changed = True
        for v, eids in rec.h2.items():
            for eid in eids:
                if h_add(eid):
                    h2.add(eid)
                    changed = True
        if not changed:
            continue
        freshly = [eid for eid in sorted(uncovered) if covered_now(eid)]
        for eid in freshly:
            uncovered.discard(eid)
            covered_at[eid] = it
            cand = rec.votes.get(_edge_key(g, eid))
            if eid in h2:
                costs[eid] = Fraction(g.edges[eid].w) if weighted else Fraction(1)
            elif cand is not None and cand in rec.winners:
                info = rec.candidates[cand]
                costs[eid] = Fraction(info["den"], info["span"])
            else:
                costs[eid] = Fraction(0)
    return covered_at, costs, h1, h2


def build_certificate(g: Graph, records: list[IterationRecord], variant: str) -> CostCertificate:
    covered_at, costs, h1, h2 = replay_coverage(g, records, variant)
    rho_series: list[Optional[int]] = []
    phi_series: list[int] = []
    for rec in records:
        exps = [e for e in rec.exps.values() if e is not None]
        rho_max = max(exps) if exps else None
        rho_series.append(rho_max)
        phi = 0
        if rho_max is not None:
            for v, info in rec.candidates.items():
                if rec.exps.get(v) == rho_max:
                    phi += info["span"]
        phi_series.append(phi)
    return CostCertificate(
        costs=costs,
        h1=frozenset(h1),
        h2=frozenset(h2),
        cost_sum=sum(costs.values(), Fraction(0)),
        rho_max_series=rho_series,
        phi_series=phi_series,
        iterations=len(records),
    )


def two_spanner(
    g: Graph,
    seed: int,
    variant: Optional[str] = None,
    max_rounds: Optional[int] = None,
    workers: int = 1,
    keep_payloads: bool = False,
) -> SpannerResult:
    """Run the distributed 2-spanner program and assemble its certificate."""
    variant = variant or infer_variant(g)
    if variant == "weighted" and not g.weighted:
        raise ValueError("weighted variant requires edge weights")
    if variant == "client-server" and not g.client_server:
        raise ValueError("client-server variant requires edge flags")
    if variant == "directed" and not g.directed:
        raise ValueError("directed variant requires a directed graph")
    program = SpannerProgram(variant)
    trace = run(
        g,
        program,
        seed,
        max_rounds=max_rounds or default_max_rounds(g.n),
        workers=workers,
        keep_payloads=keep_payloads,
    )
    H: set[int] = set()
    uncoverable: set[int] = set()
    for v, out in trace.outputs.items():
        H.update(out["spanner"])
        uncoverable.update(out["uncoverable"])
    records = [IterationRecord(**rec) for rec in trace.metrics]
    while records and not records[-1].exps:
        records.pop()
    cert = build_certificate(g, records, variant)
    return SpannerResult(
        variant=variant,
        seed=seed,
        H=frozenset(H),
        certificate=cert,
        trace=trace,
        records=records,
        uncoverable_clients=frozenset(uncoverable),
    )


@dataclass
class CertificateReport:
    ok: bool
    violations: list[str]
    spanner_valid: bool
    cost_sum: Fraction
    size_bound_ok: bool
    phi_monotone: bool
    rho_monotone: bool


def certificate_check(result: SpannerResult, g: Graph) -> CertificateReport:
    """Independently re-derive costs and the run's structural laws from the
    per-iteration records, and verify every certified inequality exactly."""
    variant = result.variant
    violations: list[str] = []
    covered_at, costs, h1, h2 = replay_coverage(g, result.records, variant)
    weighted = variant == "weighted"
    cs = variant == "client-server"
    h = set(result.H)
    try:
        if cs:
            rep = verify_spanner(g, h, 2, mode="client-server")
            bad = [e for e in rep.uncovered if e not in result.uncoverable_clients]
            valid = not bad
        else:
            rep = verify_spanner(g, h, 2)
            valid = rep.valid
    except ValueError as exc:
        valid = False
        violations.append(f"spanner verification rejected H: {exc}")
        rep = None
    if rep is not None and not valid:
        violations.append(f"spanner invalid: uncovered={list(rep.uncovered)[:10]}")
    cost_sum = sum(costs.values(), Fraction(0))
    size = sum(g.edges[eid].w for eid in h) if weighted else len(h)
    size_ok = Fraction(size) <= 8 * cost_sum or size == 0
    if not size_ok:
        violations.append(f"cost certificate violated: size={size} > 8*{cost_sum}")
    rho_monotone = True
    phi_monotone = True
    prev_rho: Optional[int] = None
    prev_phi: Optional[int] = None
    prev_stars: dict[int, tuple[Optional[int], frozenset]] = {}
    shift = 3 if variant == "directed" else 2
    nbr2 = {}
    for rec in result.records:
        exps = [e for e in rec.exps.values() if e is not None]
        rho_max = max(exps) if exps else None
        if rho_max is not None and prev_rho is not None and rho_max > prev_rho:
            rho_monotone = False
            violations.append(f"rho_max increased at iteration {rec.iteration}")
        phi = 0
        for v, info in rec.candidates.items():
            exp_v = rec.exps.get(v)
            if exp_v == rho_max:
                phi += info["span"]
            if v not in nbr2:
                nbr2[v] = _two_hop(g, v)
            for u in nbr2[v]:
                eu = rec.exps.get(u)
                if eu is not None and (exp_v is None or eu > exp_v):
                    violations.append(
                        f"candidate {v} not a 2-hop maximum at iteration {rec.iteration}"
                    )
                    break
            num, den = info["span"], info["den"]
            if exp_v is None:
                violations.append(f"candidate {v} with zero density")
            else:
                e = exp_v - shift
                if num * (1 << max(0, -e)) < den * (1 << max(0, e)):
                    violations.append(
                        f"star of {v} below threshold at iteration {rec.iteration}"
                    )
            if v in rec.winners:
                got = sum(1 for _, c in rec.votes.items() if c == v)
                if 8 * got < num:
                    violations.append(
                        f"winner {v} with too few votes at iteration {rec.iteration}"
                    )
            p = prev_stars.get(v)
            if p is not None and p[0] == exp_v:
                if not frozenset(info["star"]) <= p[1]:
                    violations.append(
                        f"subset law violated for {v} at iteration {rec.iteration}"
                    )
        if rho_max is not None and prev_rho == rho_max and prev_phi is not None:
            if phi > prev_phi:
                phi_monotone = False
                violations.append(f"phi increased at iteration {rec.iteration}")
        prev_stars = {
            v: (rec.exps.get(v), frozenset(info["star"]))
            for v, info in rec.candidates.items()
        }
        prev_rho, prev_phi = rho_max, phi
    if variant == "unweighted":
        distinct = {e for e in result.certificate.rho_max_series if e is not None}
        bound = 2 * max(1, (g.max_degree + 1).bit_length()) + 2
        if len(distinct) > bound:
            violations.append(f"too many rho_max values: {len(distinct)} > {bound}")
    return CertificateReport(
        ok=not violations,
        violations=violations,
        spanner_valid=valid,
        cost_sum=cost_sum,
        size_bound_ok=size_ok,
        phi_monotone=phi_monotone,
        rho_monotone=rho_monotone,
    )


def _two_hop(g: Graph, v: int) -> set[int]:
    out = set()
    for u in g.neighbors(v):
        out.add(u)
        for w in g.neighbors(u):
            out.add(w)
    out.discard(v)
    return out
