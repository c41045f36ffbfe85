"""Constraint-based PAG construction: adjacency search, Possible-D-SEP
pruning, collider orientation, and complete rule propagation.

The search is fully deterministic: pairs are processed in lexicographic
order, conditioning subsets in size-then-lexicographic order, and the first
separating set found is recorded.  With a faithful conditional-independence
oracle the output is independent of the variable ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Protocol, Sequence

from fritl.graph import (
    ARROW,
    CIRCLE,
    DSepEngine,
    MixedGraph,
    apply_fci_rules,
    orient_colliders,
)


class CIProvider(Protocol):
    def independent(self, i: str, j: str, s: Iterable[str]) -> bool: ...


class DSeparationOracleCI:
    """CI oracle answering queries by d-separation on a DAG with latents."""

    def __init__(self, full_dag: MixedGraph):
        self._engine = DSepEngine(full_dag)

    def independent(self, i: str, j: str, s: Iterable[str]) -> bool:
        return self._engine.d_separated(i, j, s)


@dataclass
class SepsetTable:
    """Separating sets found during search, keyed by sorted name pair."""

    table: dict[tuple[str, str], frozenset[str]] = field(default_factory=dict)

    @staticmethod
    def _key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    def get(self, a: str, b: str) -> frozenset[str] | None:
        return self.table.get(self._key(a, b))

    def set(self, a: str, b: str, s: Iterable[str]) -> None:
        self.table[self._key(a, b)] = frozenset(s)

    def items(self):
        return self.table.items()

    def __contains__(self, pair: tuple[str, str]) -> bool:
        return self._key(*pair) in self.table


def _possible_d_sep(g: MixedGraph, x: str) -> list[str]:
    """Nodes reachable from x along paths whose inner triples are colliders
    or triangles."""
    pds: set[str] = set()
    seen_edges: set[tuple[str, str]] = set()
    frontier: list[tuple[str, str]] = []
    for nb in g.neighbors(x):
        pds.add(nb)
        frontier.append((x, nb))
        seen_edges.add((x, nb))
    while frontier:
        prev, mid = frontier.pop(0)
        for nxt in g.neighbors(mid):
            if nxt == prev or (mid, nxt) in seen_edges:
                continue
            collider = (
                g.end_mark(prev, mid) is ARROW and g.end_mark(nxt, mid) is ARROW
            )
            triangle = g.adjacent(prev, nxt)
            if collider or triangle:
                seen_edges.add((mid, nxt))
                pds.add(nxt)
                frontier.append((mid, nxt))
    pds.discard(x)
    return sorted(pds)


def run_fci(
    ci: CIProvider,
    variables: Sequence[str],
    alpha: float | None = None,
    *,
    max_cond_size: int = 4,
    conservative: bool = False,
) -> tuple[MixedGraph, SepsetTable]:
    """Full constraint search returning the PAG and the separating sets.

    ``alpha`` is accepted for interface symmetry; significance levels live
    inside sample-based CI providers.  Steps: PC-style skeleton to depth
    ``max_cond_size``, collider orientation, Possible-D-SEP re-pruning,
    mark reset, collider re-orientation, then the complete orientation rules
    to a fixpoint.
    """
    del alpha
    names = sorted(variables)
    adj: dict[str, set[str]] = {a: set(names) - {a} for a in names}
    sepsets = SepsetTable()
    tested: dict[tuple[str, str], set[frozenset[str]]] = {}

    def try_separate(a: str, b: str, pools: list[list[str]], size: int) -> bool:
        key = (a, b) if a <= b else (b, a)
        done = tested.setdefault(key, set())
        for pool in pools:
            if len(pool) < size:
                continue
            for s in combinations(pool, size):
                fs = frozenset(s)
                if fs in done:
                    continue
                done.add(fs)
                if ci.independent(a, b, s):
                    adj[a].discard(b)
                    adj[b].discard(a)
                    sepsets.set(a, b, s)
                    return True
        return False

    # -- adjacency search ----------------------------------------------------
    for depth in range(max_cond_size + 1):
        snapshot = {a: sorted(adj[a]) for a in names}
        if all(len(snapshot[a]) - 1 < depth for a in names):
            break
        for a, b in combinations(names, 2):
            if b not in adj[a]:
                continue
            pools = [
                [x for x in snapshot[a] if x != b],
                [x for x in snapshot[b] if x != a],
            ]
            try_separate(a, b, pools, depth)

    def skeleton_graph() -> MixedGraph:
        g = MixedGraph(tuple(variables), kind="pag")
        for a in names:
            for b in adj[a]:
                if a < b:
                    g._set_edge(a, b, CIRCLE, CIRCLE)
        return g

    def orient(g: MixedGraph) -> MixedGraph:
        if not conservative:
            return orient_colliders(g, sepsets.table)
        return _orient_colliders_majority(g, ci, max_cond_size)

    g = orient(skeleton_graph())

    # -- Possible-D-SEP re-pruning -------------------------------------------
    removed_any = False
    for a, b in combinations(names, 2):
        if b not in adj[a]:
            continue
        pools = [
            [x for x in _possible_d_sep(g, a) if x != b],
            [x for x in _possible_d_sep(g, b) if x != a],
        ]
        for size in range(1, max_cond_size + 1):
            if try_separate(a, b, pools, size):
                removed_any = True
                break
    if removed_any:
        g = orient(skeleton_graph())

    g = apply_fci_rules(g, sepsets.table)
    g.kind = "pag"
    return g, sepsets


def _orient_colliders_majority(
    g: MixedGraph, ci: CIProvider, max_cond_size: int
) -> MixedGraph:
    """Conservative collider orientation: majority vote over separating sets."""
    out = g.copy()
    for b in sorted(out.nodes):
        for a, c in combinations(out.neighbors(b), 2):
            if out.adjacent(a, c):
                continue
            votes_with = 0
            votes_without = 0
            pool = sorted(set(out.neighbors(a)) | set(out.neighbors(c)) - {a, c})
            for size in range(min(len(pool), max_cond_size) + 1):
                for s in combinations(pool, size):
                    if ci.independent(a, c, s):
                        if b in s:
                            votes_with += 1
                        else:
                            votes_without += 1
            if votes_without > votes_with:
                out._set_mark(a, b, ARROW)
                out._set_mark(c, b, ARROW)
    return out
