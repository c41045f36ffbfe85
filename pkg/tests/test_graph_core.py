"""Mixed graph, d-separation, orientation rules, cliques, serialization."""

from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from fritl.fci import DSeparationOracleCI, run_fci
from fritl.graph import (
    ARROW,
    CIRCLE,
    TAIL,
    DSepEngine,
    GraphError,
    LatentGroup,
    MixedGraph,
    OrientationConflictError,
    apply_fci_rules,
    d_separated,
    emit_graph_text,
    maximal_undetermined_cliques,
    parse_graph_text,
)
from fritl.synth import GeneratorConfig, generate_model, true_pag

from fixtures import random_dag, two_clique_expected_pag
from oracles import PathDSepOracle, brute_force_cliques


# -- d-separation ------------------------------------------------------------


def test_chain_mediator_blocks():
    g = MixedGraph.dag(("X1", "X2", "X3"), [("X1", "X2"), ("X2", "X3")])
    assert d_separated(g, "X1", "X3", {"X2"})
    assert not d_separated(g, "X1", "X3", set())


def test_collider_clause():
    g = MixedGraph.dag(("X1", "X2", "X3"), [("X1", "X3"), ("X2", "X3")])
    assert not d_separated(g, "X1", "X2", {"X3"})
    assert d_separated(g, "X1", "X2", set())


def test_collider_descendant_opens_path():
    g = MixedGraph.dag(
        ("X1", "X2", "X3", "X4"), [("X1", "X3"), ("X2", "X3"), ("X3", "X4")]
    )
    assert not d_separated(g, "X1", "X2", {"X4"})


def test_dsep_argument_validation():
    g = MixedGraph.dag(("X1", "X2"), [("X1", "X2")])
    with pytest.raises(GraphError):
        d_separated(g, "X1", "nope", set())
    with pytest.raises(GraphError):
        d_separated(g, "X1", "X2", {"X1"})
    with pytest.raises(GraphError):
        d_separated(g, "X1", "X1", set())


def test_dsep_agrees_with_path_enumeration_oracle():
    rng = np.random.default_rng(5)
    for trial in range(40):
        n = int(rng.integers(4, 8))
        g = random_dag(rng, n, float(rng.uniform(0.2, 0.5)))
        engine = DSepEngine(g)
        oracle = PathDSepOracle(g)
        names = g.nodes
        for i, j in combinations(names, 2):
            rest = [x for x in names if x not in (i, j)]
            for size in range(len(rest) + 1):
                for s in combinations(rest, size):
                    got = engine.d_separated(i, j, s)
                    want = oracle.d_separated(i, j, s)
                    assert got == want, (trial, i, j, s)
                    # symmetry in the query pair
                    assert engine.d_separated(j, i, s) == got


# -- orientation rules ---------------------------------------------------------


def test_rule_r1_orients_unshielded_noncollider():
    g = MixedGraph.from_edges(
        ("A", "B", "C"),
        [("A", "B", CIRCLE, ARROW), ("B", "C", CIRCLE, CIRCLE)],
        kind="pag",
    )
    out = apply_fci_rules(g)
    assert out.edge_marks("B", "C") == (TAIL, ARROW)


def test_rule_r2_adds_arrowhead():
    g = MixedGraph.from_edges(
        ("A", "B", "C"),
        [("A", "B", TAIL, ARROW), ("B", "C", CIRCLE, ARROW), ("A", "C", CIRCLE, CIRCLE)],
    )
    out = apply_fci_rules(g)
    assert out.end_mark("A", "C") is ARROW


def test_rule_r8_orients_triangle_chain():
    # chain A --> B --> C with A o-> C: the circle at A becomes a tail
    g = MixedGraph.from_edges(
        ("X2", "X3", "X5"),
        [
            ("X2", "X3", TAIL, ARROW),
            ("X3", "X5", TAIL, ARROW),
            ("X2", "X5", CIRCLE, ARROW),
        ],
    )
    out = apply_fci_rules(g)
    assert out.edge_marks("X2", "X5") == (TAIL, ARROW)


def test_fully_oriented_graph_unchanged():
    g = MixedGraph.from_edges(
        ("A", "B", "C"),
        [("A", "B", TAIL, ARROW), ("B", "C", TAIL, ARROW)],
    )
    assert apply_fci_rules(g) == g


def test_rules_idempotent_and_mark_monotone_on_oracle_pags():
    rng = np.random.default_rng(11)
    for trial in range(100):
        cfg = GeneratorConfig(
            n_observed=int(rng.integers(4, 8)),
            avg_indegree=float(rng.uniform(0.5, 1.5)),
            latent_ratio=float(rng.choice([0.0, 0.2, 0.4])),
            seed=int(rng.integers(1 << 30)),
        )
        model = generate_model(cfg)
        pag = true_pag(model)
        once = apply_fci_rules(pag)
        assert apply_fci_rules(once) == once, trial
        # never removes an edge, never changes a tail or an arrow
        before = pag.canonical_edges()
        after = once.canonical_edges()
        assert set(after) == set(before)
        for pair, marks in before.items():
            for pos in (0, 1):
                if marks[pos] is not CIRCLE:
                    assert after[pair][pos] is marks[pos]


def test_conflicting_orientation_raises():
    g = MixedGraph.from_edges(
        ("A", "B", "C"),
        [("A", "B", CIRCLE, ARROW), ("B", "C", CIRCLE, TAIL)],
    )
    with pytest.raises(OrientationConflictError):
        apply_fci_rules(g)


# -- maximal undetermined cliques ---------------------------------------------


def test_two_clique_fixture_cliques():
    pag = two_clique_expected_pag()
    cliques = maximal_undetermined_cliques(pag)
    assert cliques == [frozenset({"X1", "X2", "X3"}), frozenset({"X3", "X4"})]


def test_no_circles_means_no_cliques():
    g = MixedGraph.from_edges(
        ("A", "B", "C"),
        [("A", "B", TAIL, ARROW), ("B", "C", ARROW, ARROW)],
    )
    assert maximal_undetermined_cliques(g) == []


def test_cliques_match_subset_enumeration():
    rng = np.random.default_rng(3)
    marks = [
        (CIRCLE, CIRCLE),
        (CIRCLE, ARROW),
        (TAIL, ARROW),
        (ARROW, ARROW),
    ]
    for trial in range(60):
        n = int(rng.integers(3, 11))
        names = tuple(f"N{i}" for i in range(n))
        edges = []
        for a, b in combinations(names, 2):
            if rng.random() < 0.35:
                ma, mb = marks[int(rng.integers(len(marks)))]
                edges.append((a, b, ma, mb))
        g = MixedGraph.from_edges(names, edges)
        undetermined = [
            (a, b) for a, b, ma, mb in g.edges() if CIRCLE in (ma, mb)
        ]
        got = maximal_undetermined_cliques(g)
        want = brute_force_cliques(names, undetermined)
        assert got == want, trial
        for clique in got:
            # complete in the undetermined subgraph and maximal
            assert all(
                g.adjacent(a, b) and g.is_undetermined(a, b)
                for a, b in combinations(sorted(clique), 2)
            )
            assert not any(clique < other for other in got)


# -- serialization --------------------------------------------------------------


def test_graph_text_roundtrip():
    g = MixedGraph.from_edges(
        ("X1", "X2", "X3", "X4"),
        [
            ("X1", "X2", TAIL, ARROW),
            ("X2", "X3", CIRCLE, ARROW),
            ("X3", "X4", ARROW, ARROW),
            ("X1", "X4", CIRCLE, CIRCLE),
        ],
    )
    groups = [LatentGroup("L1", frozenset({"X3", "X4"}))]
    text = emit_graph_text(g, groups)
    assert text == (
        "X1 --> X2\n"
        "X1 o-o X4\n"
        "X2 o-> X3\n"
        "X3 <-> X4\n"
        "latent L1: X3 X4\n"
    )
    parsed, parsed_groups = parse_graph_text(text)
    assert parsed == g
    assert parsed_groups == groups


def test_graph_text_reversed_asymmetric_edges():
    g = MixedGraph.from_edges(("B", "A"), [("B", "A", ARROW, TAIL)])
    assert emit_graph_text(g) == "A --> B\n"
    g2 = MixedGraph.from_edges(("B", "A"), [("B", "A", ARROW, CIRCLE)])
    assert emit_graph_text(g2) == "A o-> B\n"


def test_parse_rejects_malformed_lines():
    with pytest.raises(GraphError, match="line 1"):
        parse_graph_text("X1 -> X2\n")
    with pytest.raises(GraphError, match="line 2"):
        parse_graph_text("X1 --> X2\nlatent L1 X1 X2\n")


# -- invariants ------------------------------------------------------------------


def test_dag_validation():
    with pytest.raises(GraphError):
        MixedGraph.dag(("A", "B", "C"), [("A", "B"), ("B", "C"), ("C", "A")])
    with pytest.raises(GraphError):
        MixedGraph.from_edges(("A", "B"), [("A", "B", CIRCLE, ARROW)], kind="dag")
    with pytest.raises(GraphError):
        MixedGraph.from_edges(("A", "B"), [("A", "B", TAIL, TAIL)], kind="pag")


def test_edge_lookup_is_order_insensitive():
    g = MixedGraph.from_edges(("A", "B"), [("A", "B", CIRCLE, ARROW)])
    assert g.end_mark("A", "B") is ARROW
    assert g.end_mark("B", "A") is CIRCLE
    assert g.edge_marks("B", "A") == (ARROW, CIRCLE)
