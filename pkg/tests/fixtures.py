"""Shared reconstruction fixtures and model-building helpers.

The two named fixtures reconstruct the worked examples used across the test
suite: a 7-observed / 3-latent graph whose population PAG contains a
bidirected pair and a fully nondirected pair, and the 8-observed / 2-latent
pipeline showcase with one shared-latent triple, one latent-plus-edge pair,
and a chain that needs residual replacement.  Expected PAGs were derived by
hand (adjacency via inducing paths, unshielded colliders from separating
sets, then the orientation rules) and are frozen here.
"""

from __future__ import annotations

import numpy as np

from fritl.graph import ARROW, CIRCLE, TAIL, MixedGraph
from fritl.synth import LvLingamModel


def build_model(
    observed: tuple[str, ...],
    latents: tuple[str, ...],
    edges: dict[tuple[str, str], float],
    loadings: dict[tuple[str, str], float],
    noise: str = "uniform",
) -> LvLingamModel:
    """Model from explicit (parent, child) -> coefficient maps."""
    n, m = len(observed), len(latents)
    b = np.zeros((n, n))
    lam = np.zeros((n, m))
    for (parent, child), coef in edges.items():
        b[observed.index(child), observed.index(parent)] = coef
    for (latent, child), coef in loadings.items():
        lam[observed.index(child), latents.index(latent)] = coef
    model = LvLingamModel(observed, latents, b, lam, noise)
    model.validate()
    return model


# -- seven observed, three latents -----------------------------------------

SEVEN_OBSERVED = tuple(f"X{i}" for i in range(1, 8))


def seven_node_model() -> LvLingamModel:
    return build_model(
        SEVEN_OBSERVED,
        ("L1", "L2", "L3"),
        {
            ("X1", "X2"): 0.8,
            ("X2", "X4"): 0.7,
            ("X3", "X5"): -0.6,
            ("X4", "X6"): 0.9,
        },
        {
            ("L1", "X4"): 0.8,
            ("L1", "X5"): 0.7,
            ("L2", "X6"): -0.6,
            ("L2", "X7"): 0.8,
            ("L3", "X5"): 0.9,
            ("L3", "X7"): 0.5,
        },
    )


def seven_node_expected_pag() -> MixedGraph:
    return MixedGraph.from_edges(
        SEVEN_OBSERVED,
        [
            ("X1", "X2", CIRCLE, CIRCLE),
            ("X2", "X4", CIRCLE, ARROW),
            ("X3", "X5", CIRCLE, ARROW),
            ("X4", "X5", ARROW, ARROW),
            ("X4", "X6", TAIL, ARROW),
            ("X5", "X7", ARROW, ARROW),
            ("X6", "X7", ARROW, ARROW),
        ],
        kind="pag",
    )


# -- eight observed, two latents (pipeline showcase) -------------------------

EIGHT_OBSERVED = tuple(f"X{i}" for i in range(1, 9))


def eight_node_model(rng: np.random.Generator | None = None) -> LvLingamModel:
    """Pipeline fixture; pass an rng to randomize coefficient draws."""

    def coef(default: float) -> float:
        if rng is None:
            return default
        return float((0.3 + 0.6 * rng.random()) * np.sign(default))

    return build_model(
        EIGHT_OBSERVED,
        ("L1", "L2"),
        {
            ("X1", "X2"): coef(0.8),
            ("X2", "X3"): coef(0.7),
            ("X2", "X5"): coef(0.5),
            ("X3", "X5"): coef(0.6),
            ("X4", "X5"): coef(0.9),
            ("X5", "X6"): coef(0.8),
            ("X4", "X7"): coef(0.7),
        },
        {
            ("L1", "X5"): coef(0.8),
            ("L1", "X7"): coef(0.6),
            ("L1", "X8"): coef(0.9),
            ("L2", "X4"): coef(0.7),
            ("L2", "X7"): coef(0.5),
        },
    )


def eight_node_expected_pag() -> MixedGraph:
    return MixedGraph.from_edges(
        EIGHT_OBSERVED,
        [
            ("X1", "X2", CIRCLE, CIRCLE),
            ("X2", "X3", CIRCLE, CIRCLE),
            ("X2", "X5", CIRCLE, ARROW),
            ("X3", "X5", CIRCLE, ARROW),
            ("X4", "X5", CIRCLE, ARROW),
            ("X4", "X7", CIRCLE, ARROW),
            ("X5", "X6", TAIL, ARROW),
            ("X7", "X5", CIRCLE, ARROW),
            ("X8", "X5", CIRCLE, ARROW),
            ("X8", "X7", CIRCLE, ARROW),
        ],
        kind="pag",
    )


# -- single latent with three children (nondirected triangle) ---------------


def latent_triple_model() -> LvLingamModel:
    return build_model(
        ("X1", "X2", "X3"),
        ("L1",),
        {},
        {("L1", "X1"): 0.8, ("L1", "X2"): 0.7, ("L1", "X3"): 0.9},
    )


def nondirected_triangle() -> MixedGraph:
    return MixedGraph.from_edges(
        ("X1", "X2", "X3"),
        [
            ("X1", "X2", CIRCLE, CIRCLE),
            ("X1", "X3", CIRCLE, CIRCLE),
            ("X2", "X3", CIRCLE, CIRCLE),
        ],
        kind="pag",
    )


# -- case-1 walkthrough: L1 -> {X1, X3}, X1 -> X2 -> X3 ----------------------


def case1_model(rng: np.random.Generator | None = None) -> LvLingamModel:
    def coef(default: float) -> float:
        if rng is None:
            return default
        return float((0.3 + 0.6 * rng.random()) * np.sign(default))

    return build_model(
        ("X1", "X2", "X3"),
        ("L1",),
        {("X1", "X2"): coef(0.8), ("X2", "X3"): coef(0.7)},
        {("L1", "X1"): coef(0.9), ("L1", "X3"): coef(0.8)},
    )


# -- two undetermined cliques fixture ----------------------------------------


def two_clique_model(rng: np.random.Generator | None = None) -> LvLingamModel:
    """L1 -> {X1, X2, X3} with X2 -> X3, plus L2 -> {X3, X4}."""

    def coef(default: float) -> float:
        if rng is None:
            return default
        return float((0.3 + 0.6 * rng.random()) * np.sign(default))

    return build_model(
        ("X1", "X2", "X3", "X4"),
        ("L1", "L2"),
        {("X2", "X3"): coef(0.7)},
        {
            ("L1", "X1"): coef(0.8),
            ("L1", "X2"): coef(0.7),
            ("L1", "X3"): coef(0.9),
            ("L2", "X3"): coef(0.6),
            ("L2", "X4"): coef(0.8),
        },
    )


def two_clique_expected_pag() -> MixedGraph:
    return MixedGraph.from_edges(
        ("X1", "X2", "X3", "X4"),
        [
            ("X1", "X2", CIRCLE, CIRCLE),
            ("X1", "X3", CIRCLE, ARROW),
            ("X2", "X3", CIRCLE, ARROW),
            ("X4", "X3", CIRCLE, ARROW),
        ],
        kind="pag",
    )


def random_dag(rng: np.random.Generator, n: int, edge_prob: float) -> MixedGraph:
    names = tuple(f"V{i}" for i in range(1, n + 1))
    order = rng.permutation(n)
    edges = []
    for pos_child in range(n):
        for pos_parent in range(pos_child):
            if rng.random() < edge_prob:
                edges.append((names[order[pos_parent]], names[order[pos_child]]))
    return MixedGraph.dag(names, edges)
