"""Stage III: detect latent confounders shared by variable triples.

For a triple (i, j, k), the reference variable

    e = x_k - (cov(x_i, x_k) / cov(x_i, x_j)) * x_j

is independent of x_i exactly when the triple's structure routes all of
x_i's association with the pair through a shared source that the linear
combination cancels.  When all three conditionings of a mutually
undetermined triple pass, the triple shares one latent confounder and has
no direct edges; the edges are removed and the members grouped.  A triple
where exactly one conditioning passes is annotated for the local model
selection stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from fritl.backends import SampleBackend
from fritl.graph import LatentGroup
from fritl.orient import Backend, DiscoveryState, TriadAnnotation, _pair_key
from fritl.stats import Dataset, StatsError, TestVerdict


class UndefinedTriadError(StatsError):
    """Denominator covariance too close to zero for a stable reference."""


DEFAULT_EPS_CORR = 0.02


@dataclass
class TriadStatistic:
    conditioned: str
    pair: tuple[str, str]
    reference_values: np.ndarray
    ratio: float
    verdict: TestVerdict


def triad_condition(
    data: Dataset | Backend,
    i: str,
    j: str,
    k: str,
    alpha: float,
    eps_corr: float = DEFAULT_EPS_CORR,
) -> TriadStatistic:
    """Test whether the pair (j, k) is triad-consistent conditional on i.

    Raises :class:`UndefinedTriadError` when |corr(i, j)| < ``eps_corr``
    (the reference variable's denominator); a verdict with
    ``independent=True`` means the condition holds.
    """
    backend: Backend = SampleBackend(data, alpha) if isinstance(data, Dataset) else data
    cov_ij = backend.cov(i, j)
    var_i = backend.cov(i, i)
    var_j = backend.cov(j, j)
    denom = math.sqrt(max(var_i, 1e-300) * max(var_j, 1e-300))
    if abs(cov_ij) < eps_corr * denom:
        raise UndefinedTriadError(
            f"corr({i},{j}) = {cov_ij / denom:.4g} below eps_corr={eps_corr}"
        )
    ratio = backend.cov(i, k) / cov_ij
    reference = backend.combine(1.0, k, -ratio, j)
    verdict = backend.independent(i, reference, alpha)
    return TriadStatistic(i, (j, k), reference, ratio, verdict)


def triad_holds(
    backend: Backend,
    i: str,
    j: str,
    k: str,
    alpha: float,
    eps_corr: float = DEFAULT_EPS_CORR,
) -> bool:
    """Conjunction over both pair orders; undefined counts as failed.

    The triad condition is symmetric in (j, k) at the population level, so
    requiring both finite-sample statistics to pass trims false positives.
    """
    try:
        if not triad_condition(backend, i, j, k, alpha, eps_corr).verdict.independent:
            return False
        return triad_condition(backend, i, k, j, alpha, eps_corr).verdict.independent
    except UndefinedTriadError:
        return False


def detect_shared_confounders(
    state: DiscoveryState,
    alpha: float,
    eps_corr: float = DEFAULT_EPS_CORR,
) -> DiscoveryState:
    """Rewrite all-triad triples into latent groups; annotate one-triad triples.

    Triples mutually connected by undetermined edges are processed in
    lexicographic order and candidates re-derived after every rewrite.
    Groups sharing two or more members merge (they describe one latent).
    """
    working = state.working
    cache: dict[tuple, bool] = {}

    def holds(cond: str, a: str, b: str) -> bool:
        key = (
            cond,
            a,
            b,
            working.version(cond),
            working.version(a),
            working.version(b),
        )
        if key not in cache:
            cache[key] = triad_holds(working, cond, a, b, alpha, eps_corr)
        return cache[key]

    while True:
        changed = False
        triples = _undetermined_triangles(state)
        for a, b, c in triples:
            verdicts = {
                a: holds(a, b, c),
                b: holds(b, a, c),
                c: holds(c, a, b),
            }
            if all(verdicts.values()):
                g = state.graph.copy()
                for u, v in ((a, b), (a, c), (b, c)):
                    g._remove_edge(u, v)
                    state.provenance[_pair_key(u, v)] = "triad"
                    state.confounded_pairs.discard(_pair_key(u, v))
                state.graph = g
                group = LatentGroup(state.new_group_id(), frozenset((a, b, c)))
                state.latent_groups.append(group)
                state.provenance[("latent", group.id)] = "triad"  # type: ignore[index]
                state.note(f"triad triple {{{a},{b},{c}}} grouped under a shared latent")
                changed = True
                break
            held = [x for x, ok in verdicts.items() if ok]
            if len(held) == 1:
                cond = held[0]
                pair = tuple(sorted(set((a, b, c)) - {cond}))
                ann = TriadAnnotation(frozenset((a, b, c)), cond, pair)  # type: ignore[arg-type]
                if ann not in state.triad_annotations:
                    state.triad_annotations.append(ann)
        if not changed:
            break
    state.latent_groups = merge_latent_groups(state.latent_groups)
    return state


def _undetermined_triangles(state: DiscoveryState) -> list[tuple[str, str, str]]:
    und = state.graph.undetermined_edges()
    adj: dict[str, set[str]] = {}
    for a, b in und:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    triples = []
    for a in sorted(adj):
        for b, c in combinations(sorted(adj[a]), 2):
            if a < b and c in adj.get(b, set()):
                triples.append((a, b, c))
    return triples


def merge_latent_groups(groups: list[LatentGroup]) -> list[LatentGroup]:
    """Union-find merge of groups sharing at least two members."""
    merged: list[set[str]] = []
    ids: list[str] = []
    for group in groups:
        members = set(group.members)
        gid = group.id
        while True:
            hit = next(
                (idx for idx, other in enumerate(merged) if len(other & members) >= 2),
                None,
            )
            if hit is None:
                break
            members |= merged.pop(hit)
            other_id = ids.pop(hit)
            gid = min(gid, other_id)
        merged.append(members)
        ids.append(gid)
    out = [LatentGroup(gid, frozenset(m)) for gid, m in zip(ids, merged)]
    return sorted(out, key=lambda g: tuple(sorted(g.members)))
