"""Mixed graphs with endpoint marks, d-separation, orientation rules, cliques.

A mixed graph stores at most one edge per node pair; each edge carries a mark
(tail / arrow / circle) at both endpoints.  The four ancestral-graph edge
kinds map onto mark pairs as

    (TAIL, ARROW)    directed        a --> b
    (ARROW, ARROW)   bidirected      a <-> b
    (CIRCLE, ARROW)  partially dir.  a o-> b
    (CIRCLE, CIRCLE) nondirected     a o-o b

DAGs use only (TAIL, ARROW) edges.  PAGs never contain (TAIL, TAIL) edges
because the models handled here exclude selection bias.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Mapping, Sequence


class Mark(enum.Enum):
    TAIL = "-"
    ARROW = ">"
    CIRCLE = "o"


TAIL = Mark.TAIL
ARROW = Mark.ARROW
CIRCLE = Mark.CIRCLE


class GraphError(ValueError):
    """Malformed graph or invalid query arguments."""


class OrientationConflictError(GraphError):
    """An orientation rule asked to overwrite a tail or arrow mark.

    On faithful input the complete rule set never conflicts, so a conflict
    signals contradictory constraint evidence (finite-sample CI errors).
    """


@dataclass(frozen=True)
class LatentGroup:
    """A set of observed variables sharing one latent confounder."""

    id: str
    members: frozenset[str]

    def __post_init__(self) -> None:
        if len(self.members) < 2:
            raise GraphError("latent group needs at least two members")

    def pairs(self) -> set[tuple[str, str]]:
        return {tuple(sorted(p)) for p in combinations(self.members, 2)}


# Edge-kind tokens of the text serialization format.  The left/right order of
# a token matches the (mark at left node, mark at right node) pair.
_TOKENS = {
    (TAIL, ARROW): "-->",
    (ARROW, ARROW): "<->",
    (CIRCLE, ARROW): "o->",
    (CIRCLE, CIRCLE): "o-o",
}
_TOKEN_MARKS = {v: k for k, v in _TOKENS.items()}


@dataclass
class MixedGraph:
    """Graph over named nodes with per-edge endpoint marks.

    Edges are keyed by the unordered index pair in canonical (low, high)
    order so mark lookup never depends on argument order.  Instances are
    treated as immutable values by the algorithms in this package: mutating
    helpers are private and every public operation returns a fresh graph.
    """

    nodes: tuple[str, ...]
    kind: str | None = None  # 'dag' | 'pag' | None
    _edges: dict[tuple[int, int], tuple[Mark, Mark]] = field(default_factory=dict)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.nodes = tuple(self.nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("duplicate node names")
        self._index = {name: i for i, name in enumerate(self.nodes)}

    # -- construction ------------------------------------------------------

    @classmethod
    def from_edges(
        cls,
        nodes: Sequence[str],
        edges: Iterable[tuple[str, str, Mark, Mark]],
        kind: str | None = None,
    ) -> "MixedGraph":
        g = cls(tuple(nodes), kind)
        for a, b, ma, mb in edges:
            g._set_edge(a, b, ma, mb)
        g.validate()
        return g

    @classmethod
    def dag(cls, nodes: Sequence[str], directed_edges: Iterable[tuple[str, str]]) -> "MixedGraph":
        """Build a DAG from (parent, child) pairs."""
        return cls.from_edges(
            nodes, [(a, b, TAIL, ARROW) for a, b in directed_edges], kind="dag"
        )

    def copy(self) -> "MixedGraph":
        g = MixedGraph(self.nodes, self.kind)
        g._edges = dict(self._edges)
        return g

    # -- internal mutation (private; public API treats graphs as values) ----

    def _key(self, a: str, b: str) -> tuple[int, int]:
        try:
            i, j = self._index[a], self._index[b]
        except KeyError as exc:
            raise GraphError(f"unknown node {exc.args[0]!r}") from None
        if i == j:
            raise GraphError(f"self edge at {a!r}")
        return (i, j) if i < j else (j, i)

    def _set_edge(self, a: str, b: str, ma: Mark, mb: Mark) -> None:
        key = self._key(a, b)
        if self._index[a] > self._index[b]:
            ma, mb = mb, ma
        self._edges[key] = (ma, mb)

    def _remove_edge(self, a: str, b: str) -> None:
        self._edges.pop(self._key(a, b), None)

    def _set_mark(self, a: str, b: str, mark: Mark) -> bool:
        """Set the mark at ``b`` on edge a-b; True if the mark changed."""
        key = self._key(a, b)
        ma, mb = self._edges[key]
        pos = 1 if self._index[a] < self._index[b] else 0
        cur = (ma, mb)[pos]
        if cur == mark:
            return False
        if cur is not CIRCLE:
            raise OrientationConflictError(
                f"cannot change {cur.name} to {mark.name} at {b!r} on edge {a!r}-{b!r}"
            )
        new = (ma, mark) if pos == 1 else (mark, mb)
        self._edges[key] = new
        return True

    # -- queries -----------------------------------------------------------

    def has_node(self, a: str) -> bool:
        return a in self._index

    def adjacent(self, a: str, b: str) -> bool:
        return self._key(a, b) in self._edges

    def end_mark(self, a: str, b: str) -> Mark:
        """Mark at the ``b`` end of edge a-b."""
        key = self._key(a, b)
        if key not in self._edges:
            raise GraphError(f"no edge {a!r}-{b!r}")
        ma, mb = self._edges[key]
        return mb if self._index[a] < self._index[b] else ma

    def edge_marks(self, a: str, b: str) -> tuple[Mark, Mark]:
        """(mark at a, mark at b) for edge a-b."""
        return self.end_mark(b, a), self.end_mark(a, b)

    def neighbors(self, a: str) -> list[str]:
        i = self._index[a]
        out = []
        for (x, y) in self._edges:
            if x == i:
                out.append(self.nodes[y])
            elif y == i:
                out.append(self.nodes[x])
        return sorted(out)

    def edges(self) -> Iterator[tuple[str, str, Mark, Mark]]:
        """Edges as (a, b, mark at a, mark at b), a before b in node order."""
        for (i, j) in sorted(self._edges):
            ma, mb = self._edges[(i, j)]
            yield self.nodes[i], self.nodes[j], ma, mb

    def n_edges(self) -> int:
        return len(self._edges)

    def parents(self, a: str) -> list[str]:
        """Nodes p with a directed edge p --> a."""
        return [b for b in self.neighbors(a)
                if self.end_mark(b, a) is ARROW and self.end_mark(a, b) is TAIL]

    def children(self, a: str) -> list[str]:
        return [b for b in self.neighbors(a)
                if self.end_mark(a, b) is ARROW and self.end_mark(b, a) is TAIL]

    def directed_edges(self) -> list[tuple[str, str]]:
        out = []
        for a, b, ma, mb in self.edges():
            if (ma, mb) == (TAIL, ARROW):
                out.append((a, b))
            elif (ma, mb) == (ARROW, TAIL):
                out.append((b, a))
        return out

    def bidirected_edges(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b, ma, mb in self.edges() if (ma, mb) == (ARROW, ARROW)]

    def is_undetermined(self, a: str, b: str) -> bool:
        """True if edge a-b carries at least one circle mark."""
        ma, mb = self.edge_marks(a, b)
        return ma is CIRCLE or mb is CIRCLE

    def undetermined_edges(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b, ma, mb in self.edges() if ma is CIRCLE or mb is CIRCLE]

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if self.kind == "dag":
            for a, b, ma, mb in self.edges():
                if (ma, mb) not in ((TAIL, ARROW), (ARROW, TAIL)):
                    raise GraphError(f"non-directed edge {a!r}-{b!r} in dag")
            if self.topological_order() is None:
                raise GraphError("dag contains a cycle")
        elif self.kind == "pag":
            for a, b, ma, mb in self.edges():
                if ma is TAIL and mb is TAIL:
                    raise GraphError(f"tail-tail edge {a!r}-{b!r} in pag")

    def topological_order(self) -> list[str] | None:
        """Topological order of the directed edges, or None on a cycle."""
        indeg = {a: 0 for a in self.nodes}
        children = {a: [] for a in self.nodes}
        for a, b in self.directed_edges():
            indeg[b] += 1
            children[a].append(b)
        queue = sorted(a for a in self.nodes if indeg[a] == 0)
        order: list[str] = []
        while queue:
            a = queue.pop(0)
            order.append(a)
            for c in sorted(children[a]):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
            queue.sort()
        return order if len(order) == len(self.nodes) else None

    # -- equality (name-canonical, node order irrelevant) --------------------

    def canonical_edges(self) -> dict[tuple[str, str], tuple[Mark, Mark]]:
        out: dict[tuple[str, str], tuple[Mark, Mark]] = {}
        for a, b, ma, mb in self.edges():
            if a <= b:
                out[(a, b)] = (ma, mb)
            else:
                out[(b, a)] = (mb, ma)
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return set(self.nodes) == set(other.nodes) and (
            self.canonical_edges() == other.canonical_edges()
        )

    def __hash__(self) -> int:  # pragma: no cover - not used as dict key
        return hash(frozenset(self.nodes))


# ---------------------------------------------------------------------------
# d-separation
# ---------------------------------------------------------------------------


class DSepEngine:
    """Reusable d-separation engine over one DAG.

    Precomputes integer-indexed parent/child lists once so repeated queries
    (CI oracles, exhaustive sweeps) stay cheap.
    """

    def __init__(self, g: MixedGraph):
        if g.kind != "dag" and g.topological_order() is None:
            raise GraphError("d-separation requires a DAG")
        self.names = g.nodes
        self.index = {a: i for i, a in enumerate(g.nodes)}
        n = len(g.nodes)
        self.parents: list[list[int]] = [[] for _ in range(n)]
        self.children: list[list[int]] = [[] for _ in range(n)]
        for a, b in g.directed_edges():
            ia, ib = self.index[a], self.index[b]
            self.parents[ib].append(ia)
            self.children[ia].append(ib)

    def d_separated(self, i: str, j: str, s: Iterable[str]) -> bool:
        s = frozenset(s)
        for name in (i, j, *s):
            if name not in self.index:
                raise GraphError(f"unknown node {name!r}")
        if i == j:
            raise GraphError("query endpoints must differ")
        if i in s or j in s:
            raise GraphError("conditioning set overlaps the query pair")
        return self._query(self.index[i], self.index[j], frozenset(self.index[x] for x in s))

    def _query(self, i: int, j: int, s: frozenset[int]) -> bool:
        # ancestors of s (inclusive)
        anc_s = set(s)
        stack = list(s)
        while stack:
            a = stack.pop()
            for p in self.parents[a]:
                if p not in anc_s:
                    anc_s.add(p)
                    stack.append(p)
        # reachability over (node, moving-toward-parents?) states; a path is
        # open iff every collider has a descendant (or itself) in s and no
        # non-collider is in s
        seen_up: set[int] = set()
        seen_dn: set[int] = set()
        stack2: list[tuple[int, bool]] = [(i, True)]
        while stack2:
            node, up = stack2.pop()
            if node == j:
                return False
            if up:
                if node in seen_up:
                    continue
                seen_up.add(node)
                if node in s:
                    continue
                for p in self.parents[node]:
                    stack2.append((p, True))
                for c in self.children[node]:
                    stack2.append((c, False))
            else:
                if node in seen_dn:
                    continue
                seen_dn.add(node)
                if node not in s:
                    for c in self.children[node]:
                        stack2.append((c, False))
                if node in anc_s:
                    for p in self.parents[node]:
                        stack2.append((p, True))
        return True


def d_separated(g: MixedGraph, i: str, j: str, s: Iterable[str]) -> bool:
    """Decide whether ``i`` and ``j`` are d-separated given ``s`` in a DAG.

    Every collider on an open path must have a descendant (or itself) in
    ``s`` and no non-collider may lie in ``s``; d-separation holds when no
    open path exists.  Symmetric in (i, j).
    """
    return DSepEngine(g).d_separated(i, j, s)


# ---------------------------------------------------------------------------
# complete orientation rule set (collider orientation plus R1-R10)
# ---------------------------------------------------------------------------


def orient_colliders(
    g: MixedGraph, sepsets: Mapping[tuple[str, str], frozenset[str]]
) -> MixedGraph:
    """Orient unshielded colliders a *-> b <-* c where b not in sepset(a, c)."""
    out = g.copy()

    def sep(a: str, c: str) -> frozenset[str]:
        key = (a, c) if a <= c else (c, a)
        return sepsets.get(key, frozenset())

    for b in sorted(out.nodes):
        for a, c in combinations(out.neighbors(b), 2):
            if out.adjacent(a, c):
                continue
            if b not in sep(a, c):
                out._set_mark(a, b, ARROW)
                out._set_mark(c, b, ARROW)
    return out


def _arrow_sources(g: MixedGraph, b: str) -> list[str]:
    return [a for a in g.neighbors(b) if g.end_mark(a, b) is ARROW]


def _is_directed(g: MixedGraph, a: str, b: str) -> bool:
    return g.adjacent(a, b) and g.end_mark(a, b) is ARROW and g.end_mark(b, a) is TAIL


def _pd_edge(g: MixedGraph, u: str, v: str) -> bool:
    """Edge u-v traversable as potentially directed u -> v."""
    return g.adjacent(u, v) and g.end_mark(v, u) is not ARROW and g.end_mark(u, v) is not TAIL


def _uncovered_pd_paths(
    g: MixedGraph, a: str, targets: set[str], first_not_adjacent: str | None = None
) -> Iterator[list[str]]:
    """Yield uncovered potentially-directed paths from ``a`` into ``targets``.

    Uncovered: the two ends of every consecutive triple are non-adjacent.
    ``first_not_adjacent`` additionally requires the first inner vertex to
    differ from and be non-adjacent to that node.
    """
    stack: list[list[str]] = [[a]]
    while stack:
        path = stack.pop()
        last = path[-1]
        for nxt in g.neighbors(last):
            if nxt in path:
                continue
            if not _pd_edge(g, last, nxt):
                continue
            if len(path) >= 2 and g.adjacent(path[-2], nxt):
                continue  # covered triple
            if len(path) == 1 and first_not_adjacent is not None:
                if nxt == first_not_adjacent or g.adjacent(nxt, first_not_adjacent):
                    continue
            new = path + [nxt]
            if nxt in targets:
                yield new
            else:
                stack.append(new)


def apply_fci_rules(
    g: MixedGraph,
    sepsets: Mapping[tuple[str, str], frozenset[str]] | None = None,
) -> MixedGraph:
    """Apply the complete orientation rule set R1-R10 to a fixpoint.

    Only circle marks are ever replaced; a request to overwrite a tail or an
    arrow raises :class:`OrientationConflictError`.  R4 consults ``sepsets``
    for its discriminating-path branch and is skipped when they are absent
    (skipping a rule is never unsound).  R5-R7 only matter under selection
    bias and thus never fire on graphs from the models in scope, but belong
    to the complete set.  Idempotent.
    """
    out = g.copy()
    nodes = sorted(out.nodes)

    def r1() -> bool:
        # a *-> b o-* c, a and c non-adjacent  =>  b --> c
        changed = False
        for b in nodes:
            for c in out.neighbors(b):
                if out.end_mark(c, b) is not CIRCLE:
                    continue
                for a in _arrow_sources(out, b):
                    if a != c and not out.adjacent(a, c):
                        changed |= out._set_mark(c, b, TAIL)
                        changed |= out._set_mark(b, c, ARROW)
                        break
        return changed

    def r2() -> bool:
        # (a --> b *-> c  or  a *-> b --> c) and a *-o c  =>  a *-> c
        changed = False
        for a in nodes:
            for c in out.neighbors(a):
                if out.end_mark(a, c) is not CIRCLE:
                    continue
                for b in out.neighbors(a):
                    if b == c or not out.adjacent(b, c):
                        continue
                    chain1 = _is_directed(out, a, b) and out.end_mark(b, c) is ARROW
                    chain2 = out.end_mark(a, b) is ARROW and _is_directed(out, b, c)
                    if chain1 or chain2:
                        changed |= out._set_mark(a, c, ARROW)
                        break
        return changed

    def r3() -> bool:
        # a *-> b <-* c, a *-o d o-* c, a and c non-adjacent, d *-o b
        #   =>  d *-> b
        changed = False
        for b in nodes:
            arrows = _arrow_sources(out, b)
            for a, c in combinations(sorted(arrows), 2):
                if out.adjacent(a, c):
                    continue
                for d in out.neighbors(b):
                    if d in (a, c) or out.end_mark(d, b) is not CIRCLE:
                        continue
                    if not (out.adjacent(a, d) and out.adjacent(c, d)):
                        continue
                    if out.end_mark(a, d) is CIRCLE and out.end_mark(c, d) is CIRCLE:
                        changed |= out._set_mark(d, b, ARROW)
        return changed

    def r4() -> bool:
        # Discriminating path <theta, ..., a, b, c> for b: every vertex
        # strictly between theta and b is a collider on the path and a parent
        # of c; theta and c non-adjacent; b o-* c.  If b is in sepset(theta,
        # c) orient b --> c, else orient a <-> b <-> c.
        if sepsets is None:
            return False
        for b in nodes:
            for c in sorted(out.neighbors(b)):
                if out.end_mark(c, b) is not CIRCLE:
                    continue
                starts = [a for a in out.neighbors(b)
                          if a != c and _is_directed(out, a, c)
                          and out.end_mark(b, a) is ARROW]
                stack = [[b, a] for a in sorted(starts)]
                while stack:
                    path = stack.pop()
                    last = path[-1]
                    for nxt in sorted(out.neighbors(last)):
                        if nxt in path or nxt == c:
                            continue
                        if out.end_mark(nxt, last) is not ARROW:
                            continue  # completes last's collider status
                        if not out.adjacent(nxt, c):
                            key = (nxt, c) if nxt <= c else (c, nxt)
                            sep = sepsets.get(key)
                            changed = False
                            if sep is not None and b in sep:
                                changed |= out._set_mark(c, b, TAIL)
                                changed |= out._set_mark(b, c, ARROW)
                            else:
                                a = path[1]
                                changed |= out._set_mark(b, a, ARROW)
                                changed |= out._set_mark(a, b, ARROW)
                                changed |= out._set_mark(c, b, ARROW)
                                changed |= out._set_mark(b, c, ARROW)
                            if changed:
                                return True
                            continue
                        if _is_directed(out, nxt, c) and out.end_mark(last, nxt) is ARROW:
                            stack.append(path + [nxt])
        return False

    def r5() -> bool:
        # a o-o b with an uncovered all-circle path a, g1, ..., g2, b where
        # a,g2 and b,g1 are non-adjacent  =>  orient a-b and the whole path
        # as undirected (selection bias only)
        changed = False
        for a in nodes:
            for b in out.neighbors(a):
                if a >= b or out.edge_marks(a, b) != (CIRCLE, CIRCLE):
                    continue
                found: list[str] | None = None
                stack: list[list[str]] = [[a]]
                while stack and found is None:
                    path = stack.pop()
                    last = path[-1]
                    for nxt in out.neighbors(last):
                        if nxt in path:
                            continue
                        if out.edge_marks(last, nxt) != (CIRCLE, CIRCLE):
                            continue
                        if len(path) >= 2 and out.adjacent(path[-2], nxt):
                            continue
                        if nxt == b:
                            if len(path) >= 3 and not out.adjacent(a, last) \
                                    and not out.adjacent(b, path[1]):
                                found = path + [nxt]
                                break
                            continue
                        if len(path) == 1 and out.adjacent(nxt, b):
                            continue
                        stack.append(path + [nxt])
                if found:
                    for u, v in zip(found, found[1:]):
                        changed |= out._set_mark(u, v, TAIL)
                        changed |= out._set_mark(v, u, TAIL)
                    changed |= out._set_mark(a, b, TAIL)
                    changed |= out._set_mark(b, a, TAIL)
        return changed

    def r6() -> bool:
        # a --- b o-* c  =>  b --* c
        changed = False
        for b in nodes:
            if not any(out.edge_marks(a, b) == (TAIL, TAIL) for a in out.neighbors(b)):
                continue
            for c in out.neighbors(b):
                if out.end_mark(c, b) is CIRCLE:
                    changed |= out._set_mark(c, b, TAIL)
        return changed

    def r7() -> bool:
        # a --o b o-* c, a and c non-adjacent  =>  b --* c
        changed = False
        for b in nodes:
            for a in out.neighbors(b):
                if not (out.end_mark(b, a) is TAIL and out.end_mark(a, b) is CIRCLE):
                    continue
                for c in out.neighbors(b):
                    if c == a or out.adjacent(a, c):
                        continue
                    if out.end_mark(c, b) is CIRCLE:
                        changed |= out._set_mark(c, b, TAIL)
        return changed

    def r8() -> bool:
        # (a --> b --> c or a --o b --> c) and a o-> c  =>  a --> c
        changed = False
        for a in nodes:
            for c in out.neighbors(a):
                if not (out.end_mark(c, a) is CIRCLE and out.end_mark(a, c) is ARROW):
                    continue
                for b in out.neighbors(a):
                    if b == c or not out.adjacent(b, c):
                        continue
                    a_to_b = _is_directed(out, a, b) or (
                        out.end_mark(b, a) is TAIL and out.end_mark(a, b) is CIRCLE
                    )
                    if a_to_b and _is_directed(out, b, c):
                        changed |= out._set_mark(c, a, TAIL)
                        break
        return changed

    def r9() -> bool:
        # a o-> c with an uncovered potentially-directed path a, b, ..., c
        # where b and c are non-adjacent  =>  a --> c
        changed = False
        for a in nodes:
            for c in out.neighbors(a):
                if not (out.end_mark(c, a) is CIRCLE and out.end_mark(a, c) is ARROW):
                    continue
                for _path in _uncovered_pd_paths(out, a, {c}, first_not_adjacent=c):
                    changed |= out._set_mark(c, a, TAIL)
                    break
        return changed

    def r10() -> bool:
        # a o-> c, b --> c <-- d, uncovered p.d. paths p1: a..b and p2: a..d
        # whose first inner vertices mu, omega are distinct and non-adjacent
        #   =>  a --> c
        changed = False
        for c in nodes:
            dir_parents = [p for p in out.neighbors(c) if _is_directed(out, p, c)]
            if len(dir_parents) < 2:
                continue
            for a in out.neighbors(c):
                if not (out.end_mark(c, a) is CIRCLE and out.end_mark(a, c) is ARROW):
                    continue
                done = False
                for b, d in combinations(sorted(dir_parents), 2):
                    if a in (b, d):
                        continue
                    firsts_b = {p[1] for p in _uncovered_pd_paths(out, a, {b})}
                    firsts_d = {p[1] for p in _uncovered_pd_paths(out, a, {d})}
                    if any(mu != om and not out.adjacent(mu, om)
                           for mu in firsts_b for om in firsts_d):
                        changed |= out._set_mark(c, a, TAIL)
                        done = True
                        break
                if done:
                    break
        return changed

    rules = [r1, r2, r3, r4, r5, r6, r7, r8, r9, r10]
    while True:
        changed = False
        for rule in rules:
            changed |= rule()
        if not changed:
            break
    return out


# ---------------------------------------------------------------------------
# maximal cliques of the undetermined subgraph
# ---------------------------------------------------------------------------


def maximal_undetermined_cliques(g: MixedGraph) -> list[frozenset[str]]:
    """All maximal cliques (size >= 2) over edges with at least one circle mark.

    Bron-Kerbosch with pivoting; inputs stay small because only undetermined
    edges participate.  Cliques may overlap; singletons are excluded.
    """
    adj: dict[str, set[str]] = {}
    for a, b in g.undetermined_edges():
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)

    cliques: list[frozenset[str]] = []

    def expand(clique: set[str], cand: set[str], excl: set[str]) -> None:
        if not cand and not excl:
            if len(clique) >= 2:
                cliques.append(frozenset(clique))
            return
        pivot = max(sorted(cand | excl), key=lambda u: len(adj[u] & cand))
        for v in sorted(cand - adj[pivot]):
            expand(clique | {v}, cand & adj[v], excl & adj[v])
            cand = cand - {v}
            excl = excl | {v}

    expand(set(), set(adj), set())
    return sorted(cliques, key=lambda c: tuple(sorted(c)))


# ---------------------------------------------------------------------------
# text serialization (grammar shared with the CLI file formats)
# ---------------------------------------------------------------------------


def emit_graph_text(g: MixedGraph, latent_groups: Sequence[LatentGroup] | None = None) -> str:
    """Serialize a graph: one edge per line, lines sorted, LF endings, UTF-8.

    Edge tokens are ``-->``, ``<->``, ``o->``, ``o-o``; latent groups are
    ``latent <id>: <member> <member> ...`` with members sorted.
    """
    lines = []
    for a, b, ma, mb in g.edges():
        if (ma, mb) in _TOKENS:
            lines.append(f"{a} {_TOKENS[(ma, mb)]} {b}")
        elif (mb, ma) in _TOKENS:
            lines.append(f"{b} {_TOKENS[(mb, ma)]} {a}")
        else:
            raise GraphError(
                f"edge {a!r}-{b!r} with marks {ma.name},{mb.name} has no text token"
            )
    for group in latent_groups or []:
        members = " ".join(sorted(group.members))
        lines.append(f"latent {group.id}: {members}")
    return "".join(line + "\n" for line in sorted(lines))


def parse_graph_text(
    text: str, nodes: Sequence[str] | None = None, kind: str | None = None
) -> tuple[MixedGraph, list[LatentGroup]]:
    """Parse the text format back into (graph, latent groups).

    When ``nodes`` is omitted the node set is collected from the edge and
    latent lines and sorted by name.
    """
    edge_specs: list[tuple[str, str, Mark, Mark]] = []
    groups: list[LatentGroup] = []
    seen_nodes: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("latent "):
            head, sep, members = line.partition(":")
            gid = head[len("latent "):].strip()
            names = members.split()
            if not sep or not gid or len(names) < 2:
                raise GraphError(f"line {lineno}: malformed latent group {line!r}")
            groups.append(LatentGroup(gid, frozenset(names)))
            seen_nodes.update(names)
            continue
        parts = line.split(" ")
        if len(parts) != 3 or parts[1] not in _TOKEN_MARKS:
            raise GraphError(f"line {lineno}: malformed edge line {line!r}")
        a, token, b = parts
        ma, mb = _TOKEN_MARKS[token]
        edge_specs.append((a, b, ma, mb))
        seen_nodes.update((a, b))
    node_list = tuple(nodes) if nodes is not None else tuple(sorted(seen_nodes))
    g = MixedGraph.from_edges(node_list, edge_specs, kind=kind)
    return g, groups
