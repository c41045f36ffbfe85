"""Stage IV: resolve undetermined cliques by penalized-likelihood selection.

Each maximal clique of undetermined edges gets a small set of candidate
local structures (directed edges among members plus at most one shared
latent).  A candidate fixes the sparsity pattern of the local mixing matrix
A = (I-B)^{-1} [Lam | I]; the observed clique columns are then an
overcomplete linear mix of independent sources.  Every source is modeled as
a zero-mean two-component location-scale Gaussian mixture (components
N(+d, s1^2) and N(-d, s2^2) with equal weights), which makes the observed
density an exact 2^q-component Gaussian mixture.  The likelihood and its
analytic gradient are maximized with L-BFGS from several restarts and
candidates are compared by BIC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product

import numpy as np
from scipy.optimize import minimize

from fritl.graph import ARROW, TAIL, LatentGroup, MixedGraph, maximal_undetermined_cliques
from fritl.orient import (
    DiscoveryState,
    TriadAnnotation,
    _pair_key,
    orient_edge,
    residual_replace,
)
from fritl.stats import Dataset
from fritl.triad import merge_latent_groups


class CliqueTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateStructure:
    """One local structure hypothesis for a clique.

    ``directed_edges`` is an acyclic edge set within ``members``;
    ``latent_children`` lists the members attached to the one shared latent
    (empty for a latent-free structure).
    """

    members: tuple[str, ...]
    directed_edges: tuple[tuple[str, str], ...]
    latent_children: tuple[str, ...]

    @property
    def label(self) -> str:
        parts = []
        if self.latent_children:
            parts.append("L(" + ",".join(self.latent_children) + ")")
        parts.extend(f"{a}->{b}" for a, b in self.directed_edges)
        return "+".join(parts) if parts else "empty"

    def mixing_support(self) -> np.ndarray:
        """Boolean support of the mixing matrix, columns = [latent?, noises]."""
        m = len(self.members)
        idx = {v: i for i, v in enumerate(self.members)}
        reach = np.eye(m, dtype=bool)  # reach[i, j]: j is an ancestor-or-self of i
        for _ in range(m):
            for a, b in self.directed_edges:
                reach[idx[b]] |= reach[idx[a]]
        cols = []
        if self.latent_children:
            lat = np.zeros(m, dtype=bool)
            for child in self.latent_children:
                lat |= reach[:, idx[child]]
            cols.append(lat)
        for v in self.members:
            cols.append(reach[:, idx[v]].copy())
        return np.column_stack(cols)

    def canonical_key(self) -> tuple:
        """Support pattern up to column permutation (observational equivalence
        of canonical models with these source counts)."""
        support = self.mixing_support()
        return tuple(sorted(tuple(col) for col in support.T))

    def validate(self) -> None:
        if self.latent_children and len(self.latent_children) < 2:
            raise ValueError("a latent needs at least two children")
        if _topological(self.members, self.directed_edges) is None:
            raise ValueError("cyclic directed edges in candidate")


def _topological(members, edges) -> list[str] | None:
    indeg = {v: 0 for v in members}
    out = {v: [] for v in members}
    for a, b in edges:
        indeg[b] += 1
        out[a].append(b)
    queue = sorted(v for v in members if indeg[v] == 0)
    order = []
    while queue:
        v = queue.pop(0)
        order.append(v)
        for w in sorted(out[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
        queue.sort()
    return order if len(order) == len(members) else None


# ---------------------------------------------------------------------------
# candidate enumeration
# ---------------------------------------------------------------------------


def enumerate_candidates(
    clique: frozenset[str] | tuple[str, ...],
    annotations: list[TriadAnnotation] | TriadAnnotation | None = None,
    clique_cap: int = 4,
) -> list[CandidateStructure]:
    """Candidate structures for one undetermined clique.

    * pair: shared latent alone, or shared latent plus one directed edge
      (either direction);
    * triple with exactly one recorded triad condition Triad(j, k | i): the
      four structures consistent with it (latent over all three members with
      no direct edge, with j->k, or with k->j; or latent over {j, k} with i
      an unconfounded parent of both);
    * otherwise: every structure with one shared latent over >= 2 members
      plus an acyclic edge set covering the remaining pairs, deduplicated up
      to observational equivalence of the canonical models.
    """
    members = tuple(sorted(clique))
    if len(members) > clique_cap:
        raise CliqueTooLargeError(f"clique {members} exceeds cap {clique_cap}")
    if len(members) < 2:
        raise ValueError("clique must have at least two members")

    if len(members) == 2:
        a, b = members
        return [
            CandidateStructure(members, (), (a, b)),
            CandidateStructure(members, ((a, b),), (a, b)),
            CandidateStructure(members, ((b, a),), (a, b)),
        ]

    annotation = _matching_annotation(members, annotations)
    if len(members) == 3 and annotation is not None:
        i = annotation.conditioned
        j, k = annotation.pair
        lat_all = tuple(sorted((i, j, k)))
        return [
            CandidateStructure(members, (), lat_all),
            CandidateStructure(members, ((j, k),), lat_all),
            CandidateStructure(members, ((k, j),), lat_all),
            CandidateStructure(members, tuple(sorted(((i, j), (i, k)))), tuple(sorted((j, k)))),
        ]

    return _enumerate_general(members)


def _matching_annotation(members, annotations) -> TriadAnnotation | None:
    if annotations is None:
        return None
    if isinstance(annotations, TriadAnnotation):
        annotations = [annotations]
    for ann in annotations:
        if ann.members == frozenset(members):
            return ann
    return None


def _enumerate_general(members: tuple[str, ...]) -> list[CandidateStructure]:
    pairs = list(combinations(members, 2))
    out: list[CandidateStructure] = []
    seen: set[tuple] = set()
    latent_subsets = [
        tuple(s)
        for size in range(2, len(members) + 1)
        for s in combinations(members, size)
    ]
    for latent_children in latent_subsets:
        covered = {
            p for p in pairs if p[0] in latent_children and p[1] in latent_children
        }
        for directions in product((None, 0, 1), repeat=len(pairs)):
            edges = []
            ok = True
            for pair, direction in zip(pairs, directions):
                if direction is None:
                    if pair not in covered:
                        ok = False
                        break
                else:
                    edges.append(pair if direction == 0 else (pair[1], pair[0]))
            if not ok:
                continue
            cand = CandidateStructure(members, tuple(edges), latent_children)
            if _topological(members, cand.directed_edges) is None:
                continue
            key = cand.canonical_key()
            if key in seen:
                continue
            seen.add(key)
            out.append(cand)
    return sorted(out, key=lambda c: c.label)


# ---------------------------------------------------------------------------
# likelihood fitting
# ---------------------------------------------------------------------------


@dataclass
class ModelScore:
    log_likelihood: float
    parameter_count: int
    bic: float
    reliable: bool
    params: dict | None = None


@lru_cache(maxsize=8)
def _sign_patterns(q: int) -> np.ndarray:
    return np.array(list(product((1.0, -1.0), repeat=q)))


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _inv_softplus(y: float) -> float:
    return math.log(math.expm1(y)) if y < 30 else y


class CandidateFitter:
    """Maximum likelihood for one candidate on standardized clique columns.

    Every source is an equal-weight mixture of N(+delta, s1^2) and
    N(-delta, s2^2) (zero-mean two-component location-scale family), so the
    observed density is an exact 2^q-component Gaussian mixture over source
    sign patterns.  ``value_and_grad`` returns the mean negative
    log-likelihood and its analytic gradient (mixture responsibilities plus
    matrix chain rules; checked against finite differences in the tests).

    Parameter vector layout: edge coefficients, latent loadings, two latent
    shape logits (location share of the unit latent variance and the scale
    split), then (delta_i, raw_s1_i, raw_s2_i) per member noise with
    s = floor + softplus(raw).
    """

    _SCALE_FLOOR = 1e-3
    _LOGIT_LO, _LOGIT_SPAN = 0.01, 0.98

    def __init__(self, data: np.ndarray, candidate: CandidateStructure):
        candidate.validate()
        self.candidate = candidate
        self.members = candidate.members
        std = data.std(axis=0)
        if np.any(std <= 0):
            raise ValueError("constant column in clique data")
        self.y = (data - data.mean(axis=0)) / std
        self.n, self.m = data.shape
        self.has_latent = bool(candidate.latent_children)
        self.q = self.m + (1 if self.has_latent else 0)
        idx = {v: i for i, v in enumerate(self.members)}
        self.edge_index = [(idx[b], idx[a]) for a, b in candidate.directed_edges]
        self.latent_rows = [idx[v] for v in candidate.latent_children]
        self.n_edges = len(self.edge_index)
        self.n_load = len(self.latent_rows)
        self.n_params = (
            self.n_edges + self.n_load + (2 if self.has_latent else 0) + 3 * self.m
        )
        self.signs = _sign_patterns(self.q)  # (K, q) of +-1
        self._pos_mask = self.signs > 0
        self._const = -0.5 * self.m * math.log(2.0 * math.pi) - self.q * math.log(2.0)
        k = self.signs.shape[0]
        self._diff = np.empty((k, self.n, self.m))
        self._pd = np.empty((k, self.n, self.m))
        self._prod = np.empty((k, self.n, self.m))
        self._w = np.empty((k, self.n))

    # -- parameter transforms ----------------------------------------------

    def _unpack(self, theta: np.ndarray):
        pos = 0
        b = theta[pos:pos + self.n_edges]; pos += self.n_edges
        lam = theta[pos:pos + self.n_load]; pos += self.n_load
        shape = theta[pos:pos + 2] if self.has_latent else None
        pos += 2 if self.has_latent else 0
        noise = theta[pos:].reshape(self.m, 3)
        return b, lam, shape, noise

    def _sources(self, shape, noise):
        """Per-source (delta, s1, s2) and transform auxiliaries."""
        delta = np.empty(self.q)
        s1 = np.empty(self.q)
        s2 = np.empty(self.q)
        aux = {}
        off = 0
        if self.has_latent:
            t = self._LOGIT_LO + self._LOGIT_SPAN * _sigmoid(shape[0])
            r = self._LOGIT_LO + self._LOGIT_SPAN * _sigmoid(shape[1])
            delta[0] = math.sqrt(t)
            s1[0] = math.sqrt(2.0 * (1.0 - t) * r)
            s2[0] = math.sqrt(2.0 * (1.0 - t) * (1.0 - r))
            aux["t"], aux["r"] = t, r
            off = 1
        delta[off:] = noise[:, 0]
        s1[off:] = self._SCALE_FLOOR + _softplus(noise[:, 1])
        s2[off:] = self._SCALE_FLOOR + _softplus(noise[:, 2])
        aux["soft_jac"] = 1.0 / (1.0 + np.exp(-noise[:, 1:]))
        return delta, s1, s2, aux

    def _mixing(self, b, lam):
        m = self.m
        bmat = np.zeros((m, m))
        for coeff, (row, col) in zip(b, self.edge_index):
            bmat[row, col] = coeff
        c = np.linalg.inv(np.eye(m) - bmat)
        blocks = []
        if self.has_latent:
            lvec = np.zeros((m, 1))
            lvec[self.latent_rows, 0] = lam
            blocks.append(lvec)
        blocks.append(np.eye(m))
        mmat = np.concatenate(blocks, axis=1)
        return c @ mmat, c, mmat

    # -- likelihood ----------------------------------------------------------

    def value_and_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        b, lam, shape, noise = self._unpack(theta)
        delta, s1, s2, aux = self._sources(shape, noise)
        a, c, mmat = self._mixing(b, lam)

        signs = self.signs  # (K, q)
        src_means = signs * delta
        src_sds = np.where(self._pos_mask, s1, s2)
        src_vars = src_sds**2
        mu = src_means @ a.T  # (K, m)
        av = a[None, :, :] * src_vars[:, None, :]  # (K, m, q)
        cov = av @ a.T  # (K, m, m)
        prec = np.linalg.inv(cov)
        sign_det, logdet = np.linalg.slogdet(cov)
        if np.any(sign_det <= 0):
            raise FloatingPointError("non-positive component covariance")

        diff, pd, prod, w = self._diff, self._pd, self._prod, self._w
        np.subtract(self.y[None, :, :], mu[:, None, :], out=diff)
        np.matmul(diff, prec, out=pd)  # prec is symmetric
        np.multiply(pd, diff, out=prod)
        log_comp = prod.sum(axis=2)  # (K, n)
        log_comp *= -0.5
        log_comp += self._const - 0.5 * logdet[:, None]

        top = log_comp.max(axis=0)
        np.subtract(log_comp, top[None, :], out=w)
        np.exp(w, out=w)
        tot = w.sum(axis=0)
        loglik_mean = float(np.mean(np.log(tot) + top))
        w /= tot[None, :] * self.n
        resp = w  # (K, n), grand total 1

        g_k = resp.sum(axis=1)
        np.multiply(resp[:, :, None], pd, out=prod)
        u = prod.sum(axis=1)  # (K, m)
        wmat = prod.transpose(0, 2, 1) @ pd  # (K, m, m)
        q_sigma = 0.5 * (wmat - g_k[:, None, None] * prec)  # dL/dSigma_k

        qa = q_sigma @ a  # (K, m, q)
        grad_a = u.T @ src_means + 2.0 * (qa * src_vars[:, None, :]).sum(axis=0)
        grad_delta = ((u @ a) * signs).sum(axis=0)
        grad_vars = (qa * a[None, :, :]).sum(axis=1)  # (K, q) diag of A'QA
        grad_sds = 2.0 * src_sds * grad_vars
        grad_s1 = np.where(self._pos_mask, grad_sds, 0.0).sum(axis=0)
        grad_s2 = np.where(self._pos_mask, 0.0, grad_sds).sum(axis=0)

        grad_c = grad_a @ mmat.T
        grad_b_full = c.T @ grad_c @ c.T
        grad_m = c.T @ grad_a

        grad = np.zeros_like(theta)
        pos = 0
        for e, (row, col) in enumerate(self.edge_index):
            grad[pos + e] = grad_b_full[row, col]
        pos += self.n_edges
        if self.has_latent:
            grad[pos:pos + self.n_load] = grad_m[self.latent_rows, 0]
        pos += self.n_load
        off = 1 if self.has_latent else 0
        if self.has_latent:
            t, r = aux["t"], aux["r"]
            d_t = (
                grad_delta[0] * 0.5 / max(delta[0], 1e-12)
                - grad_s1[0] * r / max(s1[0], 1e-12)
                - grad_s2[0] * (1.0 - r) / max(s2[0], 1e-12)
            )
            d_r = (
                grad_s1[0] * (1.0 - t) / max(s1[0], 1e-12)
                - grad_s2[0] * (1.0 - t) / max(s2[0], 1e-12)
            )
            sig_a = (t - self._LOGIT_LO) / self._LOGIT_SPAN
            sig_b = (r - self._LOGIT_LO) / self._LOGIT_SPAN
            grad[pos] = d_t * self._LOGIT_SPAN * sig_a * (1.0 - sig_a)
            grad[pos + 1] = d_r * self._LOGIT_SPAN * sig_b * (1.0 - sig_b)
            pos += 2
        soft_jac = aux["soft_jac"]
        for i in range(self.m):
            grad[pos + 3 * i] = grad_delta[off + i]
            grad[pos + 3 * i + 1] = grad_s1[off + i] * soft_jac[i, 0]
            grad[pos + 3 * i + 2] = grad_s2[off + i] * soft_jac[i, 1]

        # minimizing the mean negative log-likelihood
        return -loglik_mean, -grad

    def loglik(self, theta: np.ndarray) -> float:
        value, _ = self.value_and_grad(theta)
        return -value * self.n

    # -- initialization ------------------------------------------------------

    def heuristic_init(self) -> np.ndarray:
        """Moment-matched start: OLS edge coefficients, factor-style latent
        loadings from residual covariances, and noise mixtures whose
        location share matches the residual kurtosis."""
        theta = np.zeros(self.n_params)
        pos = 0
        parents: dict[int, list[int]] = {i: [] for i in range(self.m)}
        for row, col in self.edge_index:
            parents[row].append(col)
        coef: dict[tuple[int, int], float] = {}
        resid = {}
        for i in range(self.m):
            if parents[i]:
                xs = self.y[:, parents[i]]
                beta = np.linalg.lstsq(xs, self.y[:, i], rcond=None)[0]
                for p, bv in zip(parents[i], beta):
                    coef[(i, p)] = float(bv)
                resid[i] = self.y[:, i] - xs @ beta
            else:
                resid[i] = self.y[:, i]
        for e, (row, col) in enumerate(self.edge_index):
            theta[pos + e] = coef[(row, col)]
        pos += self.n_edges

        loads = {i: 0.0 for i in self.latent_rows}
        if self.has_latent:
            rows = self.latent_rows
            cov = {
                (u, v): float(resid[u] @ resid[v]) / self.n
                for u in rows
                for v in rows
            }
            first = rows[0]
            if len(rows) >= 3:
                u, v, w = rows[0], rows[1], rows[2]
                prod_uv, prod_uw, prod_vw = cov[(u, v)], cov[(u, w)], cov[(v, w)]
                if abs(prod_vw) > 1e-6:
                    loads[first] = math.sqrt(
                        min(max(abs(prod_uv * prod_uw / prod_vw), 1e-4),
                            0.95 * cov[(first, first)])
                    )
            if loads[first] <= 0.0:
                other = rows[1]
                loads[first] = math.sqrt(
                    min(max(abs(cov[(first, other)]), 1e-2), 0.95 * cov[(first, first)])
                )
            for v in rows[1:]:
                loads[v] = cov[(first, v)] / max(loads[first], 1e-6)
        for l, i in enumerate(self.latent_rows):
            theta[pos + l] = loads[i]
        pos += self.n_load

        if self.has_latent:
            # location share ~0.78 reproduces the kurtosis of uniform sources
            theta[pos] = math.log(0.78 / (1 - 0.78))
            theta[pos + 1] = 0.0
            pos += 2
        lat_set = set(self.latent_rows)
        for i in range(self.m):
            r = resid[i]
            v = float(r.var())
            if i in lat_set:
                v = max(v - loads[i] ** 2, 0.05 * v)
            kurt = float(np.mean(r**4) / max(float(r.var()), 1e-12) ** 2)
            share = math.sqrt(max((3.0 - kurt) / 2.0, 0.01))
            share = min(max(share, 0.05), 0.9)
            delta = math.sqrt(share * v)
            sd = math.sqrt((1.0 - share) * v)
            raw = _inv_softplus(max(sd - self._SCALE_FLOOR, 1e-4))
            theta[pos + 3 * i] = delta
            theta[pos + 3 * i + 1] = raw
            theta[pos + 3 * i + 2] = raw
        return theta

    def fit(
        self,
        restarts: int = 5,
        seed: int = 0,
        init: np.ndarray | None = None,
        max_iter: int = 200,
    ) -> tuple[np.ndarray, float, bool]:
        """Best parameters, total log-likelihood, and a convergence flag.

        Start 0 is the moment-matched init, start 1 the supplied warm init
        when given, and the remaining starts jitter the moment init.
        """
        rng = np.random.default_rng(seed)
        base = self.heuristic_init()
        starts: list[np.ndarray] = [base]
        if init is not None:
            starts.append(np.asarray(init, dtype=float))
        while len(starts) < max(1, restarts):
            starts.append(base + rng.normal(0.0, 0.3, size=base.shape))
        best_x, best_val, converged = None, np.inf, False
        for x0 in starts:
            try:
                res = minimize(
                    self.value_and_grad,
                    x0,
                    jac=True,
                    method="L-BFGS-B",
                    # stop when the relative log-likelihood change drops below 1e-7
                    options={"maxiter": max_iter, "ftol": 1e-7, "gtol": 1e-6},
                )
            except FloatingPointError:  # pragma: no cover - defensive
                continue
            if np.isfinite(res.fun) and res.fun < best_val:
                best_val, best_x = float(res.fun), res.x.copy()
                converged = converged or bool(res.success)
        if best_x is None:
            return base, -np.inf, False
        return best_x, -best_val * self.n, converged


def fit_candidate(
    d: Dataset,
    c: CandidateStructure,
    *,
    restarts: int = 5,
    seed: int = 0,
    init: np.ndarray | None = None,
    max_iter: int = 200,
) -> ModelScore:
    """Maximize the candidate's likelihood on the clique columns; BIC score.

    The clique columns are standardized internally, which makes the BIC
    comparison invariant to positive column rescaling.  A fit that never
    converges within the restart budget is flagged unreliable.
    """
    if d.n_samples < 100:
        raise ValueError("need at least 100 samples for local model fitting")
    cols = d.subset(c.members).values
    fitter = CandidateFitter(cols, c)
    theta, loglik, converged = fitter.fit(restarts, seed, init, max_iter)
    k = fitter.n_params
    bic = -2.0 * loglik + k * math.log(d.n_samples)
    return ModelScore(loglik, k, bic, converged, {"theta": theta, "label": c.label})


def select_candidate(
    data: Dataset,
    candidates: list[CandidateStructure],
    *,
    restarts: int = 5,
    seed: int = 0,
    finalist_margin: float = 100.0,
) -> list[tuple[CandidateStructure, ModelScore]]:
    """BIC-rank candidates with a two-round tournament.

    Round one gives every candidate a short moment-initialized fit; round
    two spends the full restart budget on candidates within
    ``finalist_margin`` nats of the leader (warm-started from round one).
    BIC gaps between structures dwarf restart refinement, so losers far from
    the leader keep their short-fit score.  Returns (candidate, score)
    pairs, best first.
    """
    prelim: list[tuple[CandidateStructure, ModelScore]] = []
    for c_index, cand in enumerate(candidates):
        score = fit_candidate(
            data, cand, restarts=1, seed=seed + c_index, max_iter=60
        )
        prelim.append((cand, score))
    prelim.sort(key=lambda cs: (not cs[1].reliable, cs[1].bic, cs[0].label))
    best_bic = prelim[0][1].bic
    scores = []
    for rank, (cand, first) in enumerate(prelim):
        if restarts > 1 and (rank < 2 or first.bic - best_bic < finalist_margin):
            refit = fit_candidate(
                data,
                cand,
                restarts=restarts,
                seed=seed + 31 * (rank + 1),
                init=None if first.params is None else first.params["theta"],
            )
            if refit.bic < first.bic:
                first = refit
        scores.append((cand, first))
    scores.sort(key=lambda cs: (not cs[1].reliable, cs[1].bic, cs[0].label))
    return scores


# ---------------------------------------------------------------------------
# stage runner
# ---------------------------------------------------------------------------


def _consistent_with_marks(g: MixedGraph, cand: CandidateStructure) -> bool:
    for a, b in cand.directed_edges:
        if not g.adjacent(a, b):
            return False
        ma, mb = g.edge_marks(a, b)
        if ma is ARROW or mb is TAIL:
            return False
    return True


def run_stage4(
    state: DiscoveryState,
    d: Dataset,
    *,
    clique_cap: int = 4,
    restarts: int = 5,
    seed: int = 0,
    max_candidates: int = 64,
) -> DiscoveryState:
    """Resolve each undetermined clique by BIC over its candidate structures.

    Member columns come from the stage II working data (ancestral influences
    already regressed out); cliques larger than ``clique_cap`` are left
    undetermined with a warning.  The winning structure's directed edges are
    oriented, latent-covered pairs without a direct edge lose their edge,
    and the latent children become a group.
    """
    del d  # the residualized working columns supersede the raw dataset
    if state.working.kind != "sample":
        raise ValueError("local model selection needs sample data")
    residual_replace(state)
    cliques = maximal_undetermined_cliques(state.graph)
    for count, clique in enumerate(cliques):
        members = tuple(sorted(clique))
        if any(
            not state.graph.adjacent(a, b) or not state.graph.is_undetermined(a, b)
            for a, b in combinations(members, 2)
        ):
            continue  # an earlier clique rewrite consumed part of this one
        if len(members) > clique_cap:
            state.warning_flags.add("clique-too-large")
            state.note(f"clique {members} exceeds cap {clique_cap}; left undetermined")
            continue
        candidates = enumerate_candidates(members, state.triad_annotations, clique_cap)
        candidates = [c for c in candidates if _consistent_with_marks(state.graph, c)]
        if not candidates:
            state.note(f"no mark-consistent candidate for clique {members}; skipped")
            continue
        if len(candidates) > max_candidates:
            state.warning_flags.add("candidate-budget-exceeded")
            state.note(f"clique {members}: {len(candidates)} candidates exceeds budget")
            continue
        cols = np.column_stack([state.working.column(v) for v in members])
        data = Dataset(members, cols)
        scores = select_candidate(
            data, candidates, restarts=restarts, seed=seed + 7919 * count
        )
        winner, winner_score = scores[0]
        state.note(
            f"clique {members}: selected {winner.label} "
            f"(bic={winner_score.bic:.2f}, reliable={winner_score.reliable})"
        )
        _write_candidate(state, members, winner)
    state.latent_groups = merge_latent_groups(state.latent_groups)
    return state


def _write_candidate(
    state: DiscoveryState, members: tuple[str, ...], cand: CandidateStructure
) -> None:
    edge_set = set(cand.directed_edges)
    latent = set(cand.latent_children)
    g = state.graph.copy()
    for a, b in combinations(members, 2):
        if (a, b) in edge_set or (b, a) in edge_set:
            continue
        if a in latent and b in latent and g.adjacent(a, b):
            g._remove_edge(a, b)
            state.provenance[_pair_key(a, b)] = "stage4"
            state.confounded_pairs.discard(_pair_key(a, b))
    state.graph = g
    for a, b in sorted(edge_set):
        orient_edge(state, a, b, "stage4")
    if cand.latent_children:
        group = LatentGroup(state.new_group_id(), frozenset(cand.latent_children))
        state.latent_groups.append(group)
        state.provenance[("latent", group.id)] = "stage4"  # type: ignore[index]
