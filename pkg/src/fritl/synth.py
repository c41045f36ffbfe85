"""Ground-truth model generation and sampling for linear non-Gaussian systems.

Models follow  x = B x + Lam l + e  with acyclic B over observed variables,
latent variables that are roots with at least two observed children, at most
one shared latent per observed pair, and mutually independent non-Gaussian
noise.  Sampling solves x = (I - B)^{-1} (Lam l + e).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from fritl.graph import MixedGraph
from fritl.stats import Dataset


class GeneratorError(ValueError):
    pass


#: Available noise shapes; all non-Gaussian.  Latent sources use the same
#: shape scaled to unit variance.
NOISE_MENU = ("uniform", "exp_centered", "cube_gauss")

_NOISE_VARIANCE = {
    "uniform": 1.0 / 12.0,  # U(-0.5, 0.5)
    "exp_centered": 1.0,  # Exp(1) - 1
    "cube_gauss": 1.0,  # N(0,1)^3 / sqrt(15)
}


def noise_variance(noise: str) -> float:
    try:
        return _NOISE_VARIANCE[noise]
    except KeyError:
        raise GeneratorError(f"unknown noise distribution {noise!r}") from None


def draw_noise(noise: str, size, rng: np.random.Generator, unit_variance: bool = False) -> np.ndarray:
    if noise == "uniform":
        x = rng.uniform(-0.5, 0.5, size)
        return x * math.sqrt(12.0) if unit_variance else x
    if noise == "exp_centered":
        return rng.exponential(1.0, size) - 1.0
    if noise == "cube_gauss":
        return rng.standard_normal(size) ** 3 / math.sqrt(15.0)
    raise GeneratorError(f"unknown noise distribution {noise!r}")


@dataclass(frozen=True)
class GeneratorConfig:
    n_observed: int
    avg_indegree: float
    latent_ratio: float
    max_latent_children: int = 3
    coeff_range: tuple[float, float] = (0.2, 1.0)
    noise: str = "uniform"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_observed < 2:
            raise GeneratorError("need at least two observed variables")
        if self.latent_ratio < 0:
            raise GeneratorError("latent_ratio must be non-negative")
        low, high = self.coeff_range
        if not (0 < low < high):
            raise GeneratorError("coefficient magnitudes must satisfy 0 < low < high")
        if self.max_latent_children < 2:
            raise GeneratorError("latents need at least two children")
        if self.edge_probability > 1.0:
            raise GeneratorError(
                f"avg_indegree {self.avg_indegree} exceeds the complete-graph bound "
                f"of {(self.n_observed - 1) / 2} for {self.n_observed} variables"
            )
        noise_variance(self.noise)

    @property
    def edge_probability(self) -> float:
        # expected edges = p * C(n, 2) = avg_indegree * n
        return 2.0 * self.avg_indegree / (self.n_observed - 1)

    @property
    def n_latents(self) -> int:
        return int(round(self.latent_ratio * self.n_observed))


@dataclass
class LvLingamModel:
    """Ground-truth generative model.

    ``b[i, j]`` is the coefficient of observed variable j in the equation of
    observed variable i (edge j -> i); ``lam[i, k]`` the loading of latent k
    on variable i.  Latent sources have unit variance by convention, noise
    terms carry the literal variance of their distribution.
    """

    observed_names: tuple[str, ...]
    latent_names: tuple[str, ...]
    b: np.ndarray
    lam: np.ndarray
    noise: str = "uniform"

    def __post_init__(self) -> None:
        self.observed_names = tuple(self.observed_names)
        self.latent_names = tuple(self.latent_names)
        self.b = np.asarray(self.b, dtype=np.float64)
        n = len(self.observed_names)
        m = len(self.latent_names)
        self.lam = np.asarray(self.lam, dtype=np.float64).reshape(n, m)
        if self.b.shape != (n, n):
            raise GeneratorError("b matrix shape mismatch")

    # -- structure ----------------------------------------------------------

    def observed_edges(self) -> list[tuple[str, str]]:
        rows, cols = np.nonzero(self.b)
        return [
            (self.observed_names[j], self.observed_names[i])
            for i, j in sorted(zip(rows.tolist(), cols.tolist()))
        ]

    def latent_children(self, latent: str) -> tuple[str, ...]:
        k = self.latent_names.index(latent)
        return tuple(
            self.observed_names[i] for i in np.nonzero(self.lam[:, k])[0]
        )

    def shared_latent_pairs(self) -> set[tuple[str, str]]:
        pairs: set[tuple[str, str]] = set()
        for latent in self.latent_names:
            for a, b in combinations(sorted(self.latent_children(latent)), 2):
                pairs.add((a, b))
        return pairs

    def observed_dag(self) -> MixedGraph:
        return MixedGraph.dag(self.observed_names, self.observed_edges())

    def full_dag(self) -> MixedGraph:
        """DAG over observed plus latent variables (latents are roots)."""
        edges = list(self.observed_edges())
        for latent in self.latent_names:
            for child in self.latent_children(latent):
                edges.append((latent, child))
        return MixedGraph.dag(self.observed_names + self.latent_names, edges)

    def validate(self) -> None:
        self.observed_dag()  # raises on a cycle
        counts: dict[tuple[str, str], int] = {}
        for latent in self.latent_names:
            children = self.latent_children(latent)
            if len(children) < 2:
                raise GeneratorError(f"latent {latent!r} has fewer than two children")
            for a, b in combinations(sorted(children), 2):
                counts[(a, b)] = counts.get((a, b), 0) + 1
        for pair, c in counts.items():
            if c > 1:
                raise GeneratorError(f"pair {pair} shares {c} latent confounders")


def generate_model(cfg: GeneratorConfig) -> LvLingamModel:
    """Draw a random model satisfying all structural invariants.

    A uniformly random topological order is drawn, each forward pair becomes
    an edge independently with probability calibrated to the requested
    average indegree, and latent children are sampled without replacement,
    rejecting assignments that would give a pair two shared latents.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_observed
    order = rng.permutation(n)
    b = np.zeros((n, n))

    def coeff() -> float:
        low, high = cfg.coeff_range
        mag = rng.uniform(low, high)
        return mag if rng.integers(2) else -mag

    p_edge = cfg.edge_probability
    for pos_child in range(n):
        for pos_parent in range(pos_child):
            if rng.random() < p_edge:
                b[order[pos_child], order[pos_parent]] = coeff()

    m = cfg.n_latents
    lam = np.zeros((n, m))
    covered: set[frozenset[int]] = set()
    for k in range(m):
        for attempt in range(1000):
            n_children = int(rng.integers(2, cfg.max_latent_children + 1))
            children = sorted(rng.choice(n, size=n_children, replace=False).tolist())
            pairs = {frozenset(p) for p in combinations(children, 2)}
            if pairs & covered:
                continue
            covered |= pairs
            for child in children:
                lam[child, k] = coeff()
            break
        else:
            raise GeneratorError(
                "could not place latent children without violating the "
                "one-shared-latent-per-pair constraint"
            )

    model = LvLingamModel(
        tuple(f"X{i + 1}" for i in range(n)),
        tuple(f"L{k + 1}" for k in range(m)),
        b,
        lam,
        cfg.noise,
    )
    model.validate()
    return model


def sample_data(model: LvLingamModel, n_samples: int, seed: int = 0) -> Dataset:
    """Draw latent and noise values and solve the structural equations."""
    if n_samples < 1:
        raise GeneratorError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    n = len(model.observed_names)
    m = len(model.latent_names)
    lat = draw_noise(model.noise, (n_samples, m), rng, unit_variance=True) if m else np.zeros((n_samples, 0))
    eps = draw_noise(model.noise, (n_samples, n), rng)
    rhs = model.lam @ lat.T + eps.T
    eye_minus_b = np.eye(n) - model.b
    # acyclicity makes (I - B) a permuted unit-triangular matrix
    assert abs(np.linalg.det(eye_minus_b)) > 1e-12
    x = np.linalg.solve(eye_minus_b, rhs).T
    return Dataset(model.observed_names, x)


def analytic_covariance(model: LvLingamModel) -> np.ndarray:
    """Closed-form covariance (I-B)^{-1} (Lam Lam' + Sigma_E) (I-B)^{-T}."""
    n = len(model.observed_names)
    a = np.linalg.inv(np.eye(n) - model.b)
    inner = model.lam @ model.lam.T + noise_variance(model.noise) * np.eye(n)
    return a @ inner @ a.T


def source_coefficients(model: LvLingamModel) -> tuple[np.ndarray, tuple[str, ...]]:
    """Observed variables as linear mixes of unit-variance independent sources.

    Returns (M, source_names) with one row per observed variable and one
    column per source (latents first, then per-variable noises);
    M @ M.T equals the analytic covariance.
    """
    n = len(model.observed_names)
    a = np.linalg.inv(np.eye(n) - model.b)
    noise_sd = math.sqrt(noise_variance(model.noise))
    mix = a @ np.hstack([model.lam, noise_sd * np.eye(n)])
    names = model.latent_names + tuple(f"E_{v}" for v in model.observed_names)
    return mix, names


def true_pag(model: LvLingamModel) -> MixedGraph:
    """Population PAG: constraint search with the d-separation oracle."""
    from fritl.fci import DSeparationOracleCI, run_fci

    oracle = DSeparationOracleCI(model.full_dag())
    pag, _ = run_fci(oracle, model.observed_names)
    return pag
