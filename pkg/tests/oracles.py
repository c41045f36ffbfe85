"""Independent brute-force oracles used to pin expected values.

These deliberately re-derive results from first principles (path
enumeration, explicit normal equations, exhaustive subset scans) and stay
independent of the implementation paths they check.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

from fritl.graph import MixedGraph


class PathDSepOracle:
    """d-separation by enumerating every undirected path and applying the
    two blocking clauses directly; subset queries are vectorized over
    bitmasks so exhaustive sweeps stay fast."""

    def __init__(self, g: MixedGraph):
        self.names = g.nodes
        self.index = {a: i for i, a in enumerate(g.nodes)}
        n = len(g.nodes)
        self.children = [[] for _ in range(n)]
        self.parents = [[] for _ in range(n)]
        for a, b in g.directed_edges():
            self.children[self.index[a]].append(self.index[b])
            self.parents[self.index[b]].append(self.index[a])
        self.adj = [sorted(set(self.children[i]) | set(self.parents[i])) for i in range(n)]
        # descendant bitmask (inclusive) per node
        self.desc = [0] * n
        for i in range(n):
            seen = {i}
            stack = [i]
            while stack:
                u = stack.pop()
                for c in self.children[u]:
                    if c not in seen:
                        seen.add(c)
                        stack.append(c)
            for u in seen:
                self.desc[i] |= 1 << u
        self._paths_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    def _all_paths(self, i: int, j: int) -> list[list[int]]:
        paths = []
        stack = [[i]]
        while stack:
            path = stack.pop()
            last = path[-1]
            for nxt in self.adj[last]:
                if nxt in path:
                    continue
                if nxt == j:
                    paths.append(path + [nxt])
                else:
                    stack.append(path + [nxt])
        return paths

    def _classified(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        """(noncollider mask per path, collider descendant-mask matrix)."""
        key = (i, j) if i < j else (j, i)
        if key in self._paths_cache:
            return self._paths_cache[key]
        paths = self._all_paths(*key)
        noncol = np.zeros(len(paths), dtype=np.int64)
        collider_lists = []
        width = 1
        for p, path in enumerate(paths):
            colliders = []
            for pos in range(1, len(path) - 1):
                prev, mid, nxt = path[pos - 1], path[pos], path[pos + 1]
                into_mid = (mid in self.children[prev]) and (mid in self.children[nxt])
                if into_mid:
                    colliders.append(self.desc[mid])
                else:
                    noncol[p] |= 1 << mid
            collider_lists.append(colliders)
            width = max(width, len(colliders) or 1)
        # pad with full masks: full & s != 0 whenever s != 0, and s == 0 is
        # handled by the noncollider clause alone
        full = (1 << len(self.names)) - 1 or 1
        coll = np.full((len(paths), width), full, dtype=np.int64)
        for p, colliders in enumerate(collider_lists):
            for w, mask in enumerate(colliders):
                coll[p, w] = mask
        self._paths_cache[key] = (noncol, coll)
        return noncol, coll

    def d_separated(self, i: str, j: str, s) -> bool:
        s_mask = 0
        for name in s:
            s_mask |= 1 << self.index[name]
        return bool(self.d_separated_masks(self.index[i], self.index[j],
                                           np.array([s_mask], dtype=np.int64))[0])

    def d_separated_masks(self, i: int, j: int, s_masks: np.ndarray) -> np.ndarray:
        """Vector verdicts for many conditioning sets given as bitmasks."""
        noncol, coll = self._classified(i, j)
        if noncol.shape[0] == 0:
            return np.ones(s_masks.shape[0], dtype=bool)
        s = s_masks[None, :]
        blocked_noncol = (noncol[:, None] & s) != 0
        opened = (coll[:, :, None] & s[None, :, :]) != 0  # (P, W, S)
        # a path with no real colliders has pad masks; when s == 0 the pads
        # read "not opened", but such a path has no colliders to block it
        has_collider = (coll != ((1 << len(self.names)) - 1 or 1)).any(axis=1)
        blocked_col = ~opened.all(axis=1)  # some collider not opened
        blocked_col &= has_collider[:, None]
        blocked = blocked_noncol | blocked_col
        return blocked.all(axis=0)


def normal_equation_coefficients(y: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """OLS coefficients by explicit inversion of the normal equations."""
    gram = xs.T @ xs
    return np.linalg.inv(gram) @ (xs.T @ y)


def brute_force_cliques(nodes, edges) -> list[frozenset]:
    """All maximal cliques (size >= 2) by scanning every vertex subset."""
    adj = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    cliques = []
    node_list = sorted(nodes)
    all_subsets = []
    for size in range(2, len(node_list) + 1):
        for sub in combinations(node_list, size):
            if all(b in adj[a] for a, b in combinations(sub, 2)):
                all_subsets.append(frozenset(sub))
    for c in all_subsets:
        if not any(c < other for other in all_subsets):
            cliques.append(c)
    return sorted(cliques, key=lambda c: tuple(sorted(c)))


def brute_force_pair_candidates(members) -> int:
    """Independent count of valid (edges, latent-children) structures for a
    no-annotation clique, deduplicated by the mixing-support multiset."""
    members = tuple(sorted(members))
    pairs = list(combinations(members, 2))
    seen = set()
    count = 0
    for size in range(2, len(members) + 1):
        for latent in combinations(members, size):
            for marks in product((0, 1, 2), repeat=len(pairs)):
                edges = []
                ok = True
                for pair, mark in zip(pairs, marks):
                    if mark == 0:
                        if not (pair[0] in latent and pair[1] in latent):
                            ok = False
                            break
                    else:
                        edges.append(pair if mark == 1 else (pair[1], pair[0]))
                if not ok or _cyclic(members, edges):
                    continue
                key = _support_key(members, edges, latent)
                if key not in seen:
                    seen.add(key)
                    count += 1
    return count


def _cyclic(members, edges) -> bool:
    children = {m: [] for m in members}
    for a, b in edges:
        children[a].append(b)
    color = {m: 0 for m in members}

    def visit(u) -> bool:
        color[u] = 1
        for v in children[u]:
            if color[v] == 1 or (color[v] == 0 and visit(v)):
                return True
        color[u] = 2
        return False

    return any(color[m] == 0 and visit(m) for m in members)


def _support_key(members, edges, latent):
    idx = {m: i for i, m in enumerate(members)}
    m = len(members)
    reach = np.eye(m, dtype=bool)
    for _ in range(m):
        for a, b in edges:
            reach[idx[b]] |= reach[idx[a]]
    cols = []
    lat = np.zeros(m, dtype=bool)
    for child in latent:
        lat |= reach[:, idx[child]]
    cols.append(tuple(lat))
    for v in members:
        cols.append(tuple(reach[:, idx[v]]))
    return tuple(sorted(cols))


def pair_confusion_counts(est_pairs: set, true_pairs: set) -> tuple[int, int, int]:
    """(true positives, returned, actual) counted pair by pair."""
    tp = sum(1 for p in est_pairs if p in true_pairs)
    return tp, len(est_pairs), len(true_pairs)
