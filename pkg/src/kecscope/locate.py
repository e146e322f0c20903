"""Locate the Keccak state and its input register in a blind netlist.

State bits of an iterative Keccak core are unusually well connected: one
round makes every next-state bit a function of 33 state bits, and any
operable accelerator must additionally read each state bit out, so a state
flip-flop has sequential fanin >= 33 and fanout >= 34. Filtering on those
windows yields the state candidate set; the input register is then the
lowest-scoring register group that the candidates depend on.

Pipeline order: dependencies -> scores -> levels/groups -> bounds search ->
grouped localization, falling back to per-flip-flop localization when
grouping was too fine to produce a full-width register.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .depgraph import DependencyGraph, extract_dependencies
from .grouping import GroupTable, compute_levels, group_by_levels
from .keccak import LANE_WIDTHS, round_dependency_sets
from .netlist import Netlist
from .scoring import ScoreTable, compute_zscores


class KeccakNotPresentError(Exception):
    """Raised when no bound window can produce the expected candidate count."""


@dataclass(frozen=True)
class SearchBounds:
    fif: float
    fic: float
    fof: float
    foc: float

    def __post_init__(self):
        if self.fif > self.fic or self.fof > self.foc:
            raise ValueError(f"floor above ceiling: {self}")

    def admits(self, fanin, fanout):
        return (self.fif <= fanin <= self.fic) and (self.fof <= fanout <= self.foc)


@dataclass
class RepqcResult:
    state_candidates: frozenset[str]
    input_candidates: list[str]
    winning_group: str | None
    variant: str                      # "grouped" | "individual" | "none"
    lane_width: int
    expected_state_count: int
    bounds: SearchBounds | None = None

    def found(self):
        return bool(self.input_candidates)


def filter_state_candidates(graph: DependencyGraph, bounds: SearchBounds) -> set[str]:
    """Exactly the flip-flops whose degrees fall inside both windows."""
    return {f for f in graph.ffs
            if bounds.admits(graph.fanin(f), graph.fanout(f))}


def derive_bounds(w: int) -> tuple[int, int]:
    """(fanin floor, fanout floor) for lane width w, from brute-force
    expansion of one round over all 25*w bits.

    The fanin floor is the smallest per-bit source-set size of the round
    itself. The fanout floor adds one to the smallest per-bit sink-set
    size: keeping the hash usable forces every state bit to also feed a
    readout path, so at least one sequential sink beyond the permutation
    always exists. For w = 64 this gives (33, 34).
    """
    sources, sinks = round_dependency_sets(w)
    return (min(len(s) for s in sources.values()),
            min(len(s) for s in sinks.values()) + 1)


def naive_bounds(w: int) -> SearchBounds:
    """Unbounded-ceiling windows from the structural floors."""
    if w not in LANE_WIDTHS:
        raise ValueError(f"unsupported lane width {w}")
    fif, fof = derive_bounds(w)
    return SearchBounds(fif, math.inf, fof, math.inf)


def clever_search(graph: DependencyGraph, w: int, instances: int = 1,
                  shares: int = 1) -> tuple[SearchBounds, set[str]]:
    """Tighten the fanout ceiling until the candidate count reaches the
    expected state size 25*w*instances*shares.

    Starts one above the naive fanin floor with the fanout window pinned
    to [floor, floor] and widens the ceiling one step at a time. Raises
    KeccakNotPresentError when even the widest window falls short.
    """
    expected = expected_state_count(w, instances, shares)
    if expected < 25:
        raise ValueError("expected candidate count below one minimal state")
    nb = naive_bounds(w)
    fif = nb.fif + 1
    foc = nb.fof
    max_fanout = max((graph.fanout(f) for f in graph.ffs), default=0)
    while True:
        bounds = SearchBounds(fif, math.inf, nb.fof, foc)
        candidates = filter_state_candidates(graph, bounds)
        if len(candidates) >= expected:
            return bounds, candidates
        if foc >= max_fanout:
            raise KeccakNotPresentError(
                f"Keccak not present: {len(candidates)}/{expected} candidates "
                f"at exhausted fanout ceiling {foc}")
        foc += 1


def expected_state_count(w, instances=1, shares=1):
    return 25 * w * instances * shares


def _mark_hits(groups: GroupTable, graph: DependencyGraph, ckff: set[str]):
    """Hit marking: a group member is hit when some state candidate
    sequentially depends on it. Members that are themselves state
    candidates are not eligible: the feedback of the state onto itself
    says nothing about where its input comes from. Group hit counts are
    per (candidate, member) pair and may exceed the group size.
    """
    member_group = {}
    for g in groups.groups:
        g.hits = 0
        g.member_hit = {m: False for m in g.members}
        for m in g.members:
            member_group[m] = g
    for f in ckff:
        for m in graph.rdeps[f]:
            if m in ckff:
                continue
            g = member_group.get(m)
            if g is None:
                continue
            g.member_hit[m] = True
            g.hits += 1


def _group_score(group, scores):
    hit = [m for m in group.members if group.member_hit[m]]
    return sum(scores.z[m] for m in hit) / len(hit)


def locate_inputs_grouped(scores: ScoreTable, groups: GroupTable,
                          graph: DependencyGraph, ckff: set[str],
                          w: int) -> RepqcResult:
    """Grouped localization: scan register groups for hits from the state
    candidates, drop groups with fewer than w hits, prune never-hit
    members, rank the survivors by ascending mean member score and return
    the w lowest-scoring members of the best group.

    Returns an empty result when no group survives or when the best group
    cannot supply w members (the imprecise-grouping failure mode).
    """
    if not ckff:
        raise ValueError("empty state candidate set")
    _mark_hits(groups, graph, ckff)
    survivors = []
    for g in groups.regular():
        if g.hits < w:
            continue
        members = [m for m in g.members if g.member_hit[m]]
        survivors.append((g, members))
    empty = RepqcResult(frozenset(ckff), [], None, "grouped", w,
                        expected_state_count(w))
    if not survivors:
        return empty
    survivors.sort(key=lambda gm: (_group_score(gm[0], scores), gm[0].key))
    best, members = survivors[0]
    if len(members) < w:
        return empty
    members = sorted(members, key=lambda m: (scores.z[m], m))[:w]
    return RepqcResult(frozenset(ckff), members, best.gid, "grouped", w,
                       expected_state_count(w))


def locate_inputs_individual(scores: ScoreTable, graph: DependencyGraph,
                             ckff: set[str], w: int) -> RepqcResult:
    """Groupless fallback: every flip-flop is its own group of one, the
    group-size filter disappears, and the answer is simply the w
    lowest-scoring hit flip-flops (ties broken by id)."""
    if not ckff:
        raise ValueError("empty state candidate set")
    hit = set()
    for f in ckff:
        hit.update(m for m in graph.rdeps[f] if m not in ckff)
    empty = RepqcResult(frozenset(ckff), [], None, "individual", w,
                        expected_state_count(w))
    if len(hit) < w:
        return empty
    members = sorted(hit, key=lambda m: (scores.z[m], m))[:w]
    return RepqcResult(frozenset(ckff), members, None, "individual", w,
                       expected_state_count(w))


@dataclass
class PipelineConfig:
    lane_width: int = 64
    instances: int = 1
    shares: int = 1
    bounds_override: SearchBounds | None = None
    recipe: str = "fanout"


def run_pipeline(netlist: Netlist, config: PipelineConfig | None = None
                 ) -> tuple[RepqcResult, dict[str, float]]:
    """Full attack analysis on one netlist; returns the localization result
    and per-stage wall-clock milliseconds."""
    config = config or PipelineConfig()
    timings: dict[str, float] = {}

    def staged(name, fn):
        t0 = time.perf_counter()
        out = fn()
        timings[name] = (time.perf_counter() - t0) * 1e3
        return out

    graph = staged("dependencies", lambda: extract_dependencies(netlist))
    scores = staged("scores", lambda: compute_zscores(graph, config.recipe))
    groups = staged("groups", lambda: group_by_levels(compute_levels(graph)))

    def search():
        if config.bounds_override is not None:
            bounds = config.bounds_override
            return bounds, filter_state_candidates(graph, bounds)
        return clever_search(graph, config.lane_width,
                             config.instances, config.shares)

    bounds, ckff = staged("bounds_search", search)

    def localize():
        result = locate_inputs_grouped(scores, groups, graph, ckff,
                                       config.lane_width)
        if not result.found():
            result = locate_inputs_individual(scores, graph, ckff,
                                              config.lane_width)
        return result

    result = staged("localize", localize)
    result.bounds = bounds
    result.expected_state_count = expected_state_count(
        config.lane_width, config.instances, config.shares)
    return result, timings


def remap_result(result: RepqcResult, rename: dict[str, str]) -> RepqcResult:
    """Push a result through an anonymization rename map."""
    return RepqcResult(
        state_candidates=frozenset(rename[f] for f in result.state_candidates),
        input_candidates=[rename[f] for f in result.input_candidates],
        winning_group=result.winning_group,
        variant=result.variant,
        lane_width=result.lane_width,
        expected_state_count=result.expected_state_count,
        bounds=result.bounds,
    )


def results_equivalent(a: RepqcResult, b: RepqcResult) -> bool:
    """Equality up to register bit order, which id renaming cannot preserve."""
    return (a.state_candidates == b.state_candidates
            and set(a.input_candidates) == set(b.input_candidates)
            and a.variant == b.variant
            and a.bounds == b.bounds
            and a.winning_group == b.winning_group)
