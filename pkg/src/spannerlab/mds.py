"""Distributed minimum dominating set with a guaranteed-ratio certificate.

Same candidate/voting skeleton as the 2-spanner algorithm, but densities are
plain integers (the number of uncovered vertices in the closed neighborhood),
so every message fits in a few machine words and the program is
CONGEST-friendly.  Six simulator rounds per iteration: density, density max
relay, candidacy + rank, vote, winner announcement, cover announcement.

Certificate: a vertex voting for a winning candidate of density rho pays
1/rho, everyone else pays 0; |D| <= 8 * sum(cost) holds exactly on every run.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .graphs import Graph
from .simulate import LocalView, NodeProgram, Trace, pack, run, unpack

M_DENS, M_DMAX, M_CAND, M_VOTE, M_WIN, M_COV = 1, 2, 3, 4, 5, 6

PHASES = 6
PH_DENS, PH_DMAX, PH_CAND, PH_VOTE, PH_WIN, PH_COV = range(6)


def default_max_rounds(n: int) -> int:
    lg = max(1, n.bit_length())
    return PHASES * (40 * lg * lg + 40)


class _Node:
    def __init__(self, view: LocalView):
        self.me = view.node
        self.n = view.n
        nbr_chan = {ch.peer: ch.channel for ch in view.channels}
        self.nbrs = sorted(nbr_chan)
        self.deg = len(self.nbrs)
        self.chan = [nbr_chan[u] for u in self.nbrs]
        self.chan_to_idx = {c: i for i, c in enumerate(self.chan)}
        self.self_covered = False
        self.nbr_covered = [False] * self.deg
        self.in_D = False
        self.rho = 1 + self.deg
        self.nbr_rho = [0] * self.deg
        self.nbr_term = [False] * self.deg
        self.nbr_max = [0] * self.deg
        self.cand_ranks: dict[int, int] = {}
        self.is_cand = False
        self.c_v = 0
        self.rank = 0
        self.self_vote = False
        self.voted_for: Optional[int] = None
        self.newly_covered = False
        self.terminated = False
        self.it: dict = {}

    def recompute_rho(self) -> None:
        self.rho = (0 if self.self_covered else 1) + sum(
            1 for c in self.nbr_covered if not c
        )


@dataclass
class MdsIterationRecord:
    iteration: int
    rho: dict[int, int]
    candidates: dict[int, dict]  # v -> {"cv": int, "rank": int}
    votes: dict[int, int]  # voter -> candidate
    winners: list[int]
    covered: list[int]  # vertices newly covered this iteration


@dataclass
class MdsCertificate:
    costs: dict[int, Fraction]
    cost_sum: Fraction
    rho_max_series: list[int]
    phi_series: list[int]
    iterations: int


@dataclass
class MdsResult:
    seed: int
    D: frozenset[int]
    certificate: MdsCertificate
    trace: Trace
    records: list[MdsIterationRecord]


class MdsProgram(NodeProgram):
    def init(self, view: LocalView, rng: random.Random) -> _Node:
        return _Node(view)

    def step(self, node: _Node, round_no: int, inbox, rng: random.Random):
        phase = round_no % PHASES
        if phase == PH_DENS:
            self._recv_cov(node, inbox)
            node.recompute_rho()
            if not node.terminated and node.rho == 0:
                node.terminated = True
            if node.terminated and all(node.nbr_term):
                node.it = {}
                return node, {}, (1 if node.in_D else 0)
            node.it = {"rho": node.rho}
            # rounded density: the exponent of the smallest power of two
            # strictly above the uncovered count
            flags = (1 if node.terminated else 0) | (2 if node.self_covered else 0)
            payload = pack(M_DENS, [flags, node.rho.bit_length()])
            return node, {c: payload for c in node.chan}, None
        if phase == PH_DMAX:
            self._recv_dens(node, inbox)
            mx = max([node.rho.bit_length()] + node.nbr_rho)
            payload = pack(M_DMAX, [mx])
            return node, {c: payload for c in node.chan}, None
        if phase == PH_CAND:
            self._recv_dmax(node, inbox)
            node.cand_ranks = {}
            node.is_cand = False
            exp = node.rho.bit_length()
            m2 = max([exp] + node.nbr_rho + node.nbr_max)
            out = {}
            if not node.terminated and node.rho > 0 and exp >= m2:
                node.is_cand = True
                node.c_v = node.rho
                node.rank = rng.randrange(1, node.n**4 + 1)
                node.it["cand"] = {"cv": node.c_v, "rank": node.rank}
                payload = pack(M_CAND, [node.rank])
                out = {c: payload for c in node.chan}
            return node, out, None
        if phase == PH_VOTE:
            self._recv_cand(node, inbox)
            node.self_vote = False
            node.voted_for = None
            out = {}
            if not node.self_covered:
                best = None
                if node.is_cand:
                    best = ((node.rank, node.me), -1)
                for i, r in node.cand_ranks.items():
                    key = (r, node.nbrs[i])
                    if best is None or key < best[0]:
                        best = (key, i)
                if best is not None:
                    _, i = best
                    if i < 0:
                        node.self_vote = True
                        node.voted_for = node.me
                    else:
                        node.voted_for = node.nbrs[i]
                        out = {node.chan[i]: pack(M_VOTE, [])}
                    node.it["vote"] = node.voted_for
            return node, out, None
        if phase == PH_WIN:
            votes = sum(1 for _, p in inbox if unpack(p)[0] == M_VOTE)
            if node.self_vote:
                votes += 1
            out = {}
            if node.is_cand and 8 * votes >= node.c_v:
                node.in_D = True
                node.it["winner"] = True
                if not node.self_covered:
                    node.self_covered = True
                    node.newly_covered = True
                payload = pack(M_WIN, [])
                out = {c: payload for c in node.chan}
            return node, out, None
        # PH_COV
        for _, p in inbox:
            if unpack(p)[0] == M_WIN and not node.self_covered:
                node.self_covered = True
                node.newly_covered = True
        out = {}
        if node.newly_covered:
            node.newly_covered = False
            node.it["covered"] = True
            payload = pack(M_COV, [])
            out = {c: payload for c in node.chan}
        return node, out, None

    def _recv_cov(self, node: _Node, inbox) -> None:
        for cid, p in inbox:
            if unpack(p)[0] == M_COV:
                node.nbr_covered[node.chan_to_idx[cid]] = True

    def _recv_dens(self, node: _Node, inbox) -> None:
        for cid, p in inbox:
            tag, vals = unpack(p)
            if tag != M_DENS:
                continue
            i = node.chan_to_idx[cid]
            node.nbr_term[i] = bool(vals[0] & 1)
            node.nbr_covered[i] = node.nbr_covered[i] or bool(vals[0] & 2)
            node.nbr_rho[i] = vals[1]  # rounded exponent

    def _recv_dmax(self, node: _Node, inbox) -> None:
        for cid, p in inbox:
            tag, vals = unpack(p)
            if tag == M_DMAX:
                node.nbr_max[node.chan_to_idx[cid]] = vals[0]

    def _recv_cand(self, node: _Node, inbox) -> None:
        for cid, p in inbox:
            tag, vals = unpack(p)
            if tag == M_CAND:
                node.cand_ranks[node.chan_to_idx[cid]] = vals[0]

    def observe(self, round_no: int, states: list[_Node]) -> Optional[dict]:
        if round_no < 0 or round_no % PHASES != PH_COV:
            return None
        iteration = round_no // PHASES
        rho, candidates, votes, winners, covered = {}, {}, {}, [], []
        for node in states:
            it = node.it
            if not it:
                continue
            rho[node.me] = it["rho"]
            if "cand" in it:
                candidates[node.me] = it["cand"]
            if "vote" in it:
                votes[node.me] = it["vote"]
            if it.get("winner"):
                winners.append(node.me)
            if it.get("covered"):
                covered.append(node.me)
        return {
            "iteration": iteration,
            "rho": rho,
            "candidates": candidates,
            "votes": votes,
            "winners": sorted(winners),
            "covered": sorted(covered),
        }


def replay_mds(g: Graph, records: list[MdsIterationRecord]):
    """Re-derive coverage timeline and vertex costs from the event records."""
    covered = [False] * g.n
    costs: dict[int, Fraction] = {}
    D: set[int] = set()
    for rec in records:
        for w in rec.winners:
            D.add(w)
        newly = set()
        for w in rec.winners:
            if not covered[w]:
                newly.add(w)
            for u in g.neighbors(w):
                if not covered[u]:
                    newly.add(u)
        for u in sorted(newly):
            covered[u] = True
            cand = rec.votes.get(u)
            if cand is not None and cand in rec.winners:
                costs[u] = Fraction(1, rec.candidates[cand]["cv"])
            else:
                costs[u] = Fraction(0)
    return covered, costs, D


def mds(
    g: Graph,
    seed: int,
    max_rounds: Optional[int] = None,
    workers: int = 1,
    keep_payloads: bool = False,
) -> MdsResult:
    if g.directed:
        raise ValueError("dominating set requires an undirected graph")
    program = MdsProgram()
    trace = run(
        g,
        program,
        seed,
        max_rounds=max_rounds or default_max_rounds(g.n),
        workers=workers,
        keep_payloads=keep_payloads,
    )
    D = frozenset(v for v, out in trace.outputs.items() if out == 1)
    records = [MdsIterationRecord(**rec) for rec in trace.metrics]
    while records and not records[-1].rho:
        records.pop()
    _, costs, _ = replay_mds(g, records)
    rho_series, phi_series = [], []
    for rec in records:
        mx = max((r.bit_length() for r in rec.rho.values()), default=0)
        rho_series.append(mx)
        phi_series.append(
            sum(
                info["cv"]
                for v, info in rec.candidates.items()
                if rec.rho.get(v, 0).bit_length() == mx
            )
        )
    cert = MdsCertificate(
        costs=costs,
        cost_sum=sum(costs.values(), Fraction(0)),
        rho_max_series=rho_series,
        phi_series=phi_series,
        iterations=len(records),
    )
    return MdsResult(seed=seed, D=D, certificate=cert, trace=trace, records=records)


@dataclass
class MdsCheckReport:
    ok: bool
    violations: list[str]
    dominating: bool
    cost_sum: Fraction
    size_bound_ok: bool


def is_dominating(g: Graph, D) -> bool:
    D = set(D)
    for v in range(g.n):
        if v in D:
            continue
        if not any(u in D for u in g.neighbors(v)):
            return False
    return True


def mds_certificate_check(result: MdsResult, g: Graph) -> MdsCheckReport:
    violations = []
    dom = is_dominating(g, result.D)
    if not dom:
        violations.append("output is not a dominating set")
    covered, costs, D_replay = replay_mds(g, result.records)
    if D_replay != set(result.D):
        violations.append("recorded winners disagree with the output set")
    if not all(covered):
        violations.append("replay leaves vertices uncovered")
    cost_sum = sum(costs.values(), Fraction(0))
    size_ok = Fraction(len(result.D)) <= 8 * cost_sum or not result.D
    if not size_ok:
        violations.append(f"|D|={len(result.D)} exceeds 8*{cost_sum}")
    # structural laws over the rounded-density levels
    prev_max: Optional[int] = None
    for rec in result.records:
        mx = max((r.bit_length() for r in rec.rho.values()), default=0)
        if prev_max is not None and mx > prev_max:
            violations.append(f"rho_max increased at iteration {rec.iteration}")
        prev_max = mx
        for v, info in rec.candidates.items():
            rv = rec.rho.get(v, 0).bit_length()
            for u in _two_hop(g, v):
                ru = rec.rho.get(u)
                if ru is not None and ru.bit_length() > rv:
                    violations.append(
                        f"candidate {v} not a 2-hop maximum at iteration {rec.iteration}"
                    )
                    break
            if v in rec.winners:
                got = sum(1 for _, c in rec.votes.items() if c == v)
                if 8 * got < info["cv"]:
                    violations.append(
                        f"winner {v} with too few votes at iteration {rec.iteration}"
                    )
    distinct = {e for e in result.certificate.rho_max_series if e}
    bound = max(1, (g.max_degree + 1).bit_length()) + 1
    if len(distinct) > bound:
        violations.append("too many distinct rounded density levels")
    return MdsCheckReport(
        ok=not violations,
        violations=violations,
        dominating=dom,
        cost_sum=cost_sum,
        size_bound_ok=size_ok,
    )


def _two_hop(g: Graph, v: int):
    out = set()
    for u in g.neighbors(v):
        out.add(u)
        for w in g.neighbors(u):
            out.add(w)
    out.discard(v)
    return out
