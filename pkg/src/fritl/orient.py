"""Stage II: orient undetermined edges by regression-residual independence.

For an unconfounded pair, regressing the effect on the cause leaves a
residual independent of the cause while the reverse regression does not, so
testing both directions decides the edge.  Variables with determined parents
are replaced by the residual of regressing them on those parents (the
residual system follows the same model class), which unlocks further pairs;
multiple regression on subsets of potential parents handles parents whose
confounding path runs through other observed variables.  Orientation rules
propagate after every new edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

from fritl.backends import PopulationBackend, SampleBackend
from fritl.fci import SepsetTable
from fritl.graph import (
    ARROW,
    CIRCLE,
    TAIL,
    LatentGroup,
    MixedGraph,
    apply_fci_rules,
)
from fritl.stats import CollinearityError

Backend = SampleBackend | PopulationBackend

# potential parent of x: j with j --> x, j o-o x, or j o-> x
_PP_PATTERNS = {(TAIL, ARROW), (CIRCLE, CIRCLE), (CIRCLE, ARROW)}


@dataclass(frozen=True)
class TriadAnnotation:
    """A triple where exactly one triad condition held, with its roles."""

    members: frozenset[str]
    conditioned: str
    pair: tuple[str, str]


@dataclass
class DiscoveryState:
    """Pipeline state threaded through stages II-IV."""

    graph: MixedGraph
    working: Backend
    confounded_pairs: set[tuple[str, str]] = field(default_factory=set)
    latent_groups: list[LatentGroup] = field(default_factory=list)
    provenance: dict[tuple[str, str], str] = field(default_factory=dict)
    triad_annotations: list[TriadAnnotation] = field(default_factory=list)
    sepsets: SepsetTable | None = None
    log: list[str] = field(default_factory=list)
    warning_flags: set[str] = field(default_factory=set)
    _confounded_at: dict[tuple[str, str], tuple[int, int]] = field(default_factory=dict)
    _replaced_for: dict[str, tuple[str, ...]] = field(default_factory=dict)
    _group_counter: int = 0

    @property
    def determined_parents(self) -> dict[str, list[str]]:
        """Parents read off the graph's directed edges (never stored)."""
        out: dict[str, list[str]] = {n: [] for n in self.graph.nodes}
        for a, b in self.graph.directed_edges():
            out[b].append(a)
        return {k: sorted(v) for k, v in out.items()}

    def note(self, message: str) -> None:
        self.log.append(message)

    def new_group_id(self) -> str:
        self._group_counter += 1
        return f"G{self._group_counter}"


def potential_parents(g: MixedGraph, x: str) -> list[str]:
    out = []
    for j in g.neighbors(x):
        if g.edge_marks(j, x) in _PP_PATTERNS:
            out.append(j)
    return out


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def _apply_rules_with_provenance(state: DiscoveryState, g: MixedGraph) -> MixedGraph:
    before = g.canonical_edges()
    after_graph = apply_fci_rules(g, state.sepsets.table if state.sepsets else None)
    for pair, marks in after_graph.canonical_edges().items():
        if before.get(pair) != marks:
            state.provenance[pair] = "rule-propagation"
    return after_graph


def orient_edge(state: DiscoveryState, parent: str, child: str, provenance: str) -> bool:
    """Orient parent --> child, then propagate rules.

    If the requested direction contradicts an existing arrow or tail the
    constraint evidence wins: the request is logged and dropped.
    """
    mark_parent, mark_child = state.graph.edge_marks(parent, child)
    if mark_parent is ARROW or mark_child is TAIL:
        state.note(
            f"residual evidence for {parent}->{child} conflicts with "
            f"constraint marks; keeping the graph"
        )
        return False
    g = state.graph.copy()
    g._set_mark(child, parent, TAIL)
    g._set_mark(parent, child, ARROW)
    state.provenance[_pair_key(parent, child)] = provenance
    state.graph = _apply_rules_with_provenance(state, g)
    state.confounded_pairs.discard(_pair_key(parent, child))
    return True


def orient_pairwise(state: DiscoveryState, alpha: float) -> DiscoveryState:
    """One-vs-one residual orientation over all undetermined adjacent pairs.

    Tests both directions per pair; exactly one independence orients the
    edge, neither flags the pair as confounded, both (a finite-sample tie)
    orients the direction with the larger p-value under a logged warning.
    Orientation rules run after every accepted edge; iterates to a fixpoint.
    """
    working = state.working
    while True:
        progressed = False
        for a, b in sorted(state.graph.undetermined_edges()):
            if not state.graph.adjacent(a, b) or not state.graph.is_undetermined(a, b):
                continue  # propagation got here first
            key = _pair_key(a, b)
            versions = (working.version(a), working.version(b))
            if state._confounded_at.get(key) == versions:
                continue
            res_b_on_a = working.residual(b, [a])
            res_a_on_b = working.residual(a, [b])
            v_a_causes_b = working.independent(a, res_b_on_a)
            v_b_causes_a = working.independent(b, res_a_on_b)
            fresh = versions == (0, 0)
            provenance = "lemma2" if fresh else "lemma3+2"
            if v_a_causes_b.independent and v_b_causes_a.independent:
                state.note(
                    f"both residual directions independent for {a}-{b} "
                    f"(p={v_a_causes_b.p_value:.3g}/{v_b_causes_a.p_value:.3g}); "
                    f"orienting the larger p-value"
                )
                if v_a_causes_b.p_value >= v_b_causes_a.p_value:
                    progressed |= orient_edge(state, a, b, provenance)
                else:
                    progressed |= orient_edge(state, b, a, provenance)
            elif v_a_causes_b.independent:
                progressed |= orient_edge(state, a, b, provenance)
            elif v_b_causes_a.independent:
                progressed |= orient_edge(state, b, a, provenance)
            else:
                state.confounded_pairs.add(key)
                state._confounded_at[key] = versions
        if not progressed:
            return state


def residual_replace(state: DiscoveryState) -> DiscoveryState:
    """Replace each variable having determined parents by its residual.

    The regression uses the original standardized columns of the variable
    and its parents, so the replacement depends only on the determined
    parent set, not on processing order; recomputed only when that set
    changes.
    """
    working = state.working
    plan: dict[str, tuple[str, ...]] = {}
    for var, parents in state.determined_parents.items():
        if parents and state._replaced_for.get(var) != tuple(parents):
            plan[var] = tuple(parents)
    for var in sorted(plan):
        parents = plan[var]
        resid = working.residual(
            working.original(var), [working.original(p) for p in parents]
        )
        working.replace(var, resid)
        state._replaced_for[var] = parents
    return state


def orient_by_subsets(
    state: DiscoveryState,
    alpha: float,
    max_subset: int = 3,
    subset_budget: int = 5000,
) -> DiscoveryState:
    """Multiple-regression orientation over subsets of potential parents.

    For each variable with undetermined edges, subsets of its potential
    parents are enumerated by increasing size from 2 up to ``max_subset``;
    a regressor independent of the multiple-regression residual is an
    unconfounded parent.  Stops when no subset yields a new independence.
    """
    working = state.working
    budget = subset_budget
    while True:
        changed = False
        for x in sorted(state.graph.nodes):
            pp = sorted(potential_parents(state.graph, x))
            undet = [j for j in pp if state.graph.is_undetermined(j, x)]
            if not undet or len(pp) < 2:
                continue
            restart = False
            for size in range(2, min(max_subset, len(pp)) + 1):
                for subset in combinations(pp, size):
                    if not any(j in undet for j in subset):
                        continue
                    budget -= 1
                    if budget < 0:
                        state.warning_flags.add("subset-budget-exceeded")
                        state.note("subset enumeration budget exceeded; partial result")
                        return state
                    try:
                        resid = working.residual(x, list(subset))
                    except CollinearityError:
                        state.note(f"collinear subset {subset} for {x}; skipped")
                        continue
                    for j in subset:
                        if not state.graph.is_undetermined(j, x):
                            continue
                        if working.independent(resid, j).independent:
                            if orient_edge(state, j, x, "lemma4"):
                                changed = True
                                restart = True
                    if restart:
                        break
                if restart:
                    break
        if not changed:
            return state


def run_stage2(
    state: DiscoveryState,
    alpha: float,
    max_subset: int = 3,
    subset_budget: int = 5000,
) -> DiscoveryState:
    """Pairwise orientation and residual replacement to a fixpoint, then
    subset regression; repeats while anything changes."""

    def versions() -> tuple[int, ...]:
        return tuple(state.working.version(n) for n in state.graph.nodes)

    for _ in range(4 * len(state.graph.nodes) + 4):
        while True:
            edges_before = state.graph.canonical_edges()
            versions_before = versions()
            orient_pairwise(state, alpha)
            residual_replace(state)
            if state.graph.canonical_edges() == edges_before and versions() == versions_before:
                break
        edges_before = state.graph.canonical_edges()
        orient_by_subsets(state, alpha, max_subset, subset_budget)
        residual_replace(state)
        if state.graph.canonical_edges() == edges_before:
            return state
    state.warning_flags.add("stage2-iteration-cap")
    return state
