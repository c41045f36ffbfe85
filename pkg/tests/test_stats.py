"""Standardization, regression, kernel independence, conditional independence."""

from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from fritl.graph import DSepEngine
from fritl.stats import (
    CollinearityError,
    ConstantColumnError,
    CovarianceOracleCI,
    DataFormatError,
    Dataset,
    FisherZCI,
    StatsError,
    ci_test,
    independence_test,
    ols_residual,
    read_data_csv,
    standardize,
    write_data_csv,
)
from fritl.synth import analytic_covariance, generate_model, GeneratorConfig

from fixtures import build_model, seven_node_model
from oracles import normal_equation_coefficients


# -- datasets and CSV ---------------------------------------------------------


def test_dataset_validation():
    with pytest.raises(StatsError):
        Dataset(("a", "a"), np.zeros((5, 2)))
    with pytest.raises(StatsError):
        Dataset(("a",), np.array([[1.0], [np.inf], [0.0]]))
    with pytest.raises(StatsError):
        Dataset(("a", "b"), np.zeros((2, 2)))


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    d = Dataset(("x", "y"), rng.normal(size=(50, 2)))
    path = tmp_path / "data.csv"
    write_data_csv(d, path)
    back = read_data_csv(path)
    assert back.column_names == d.column_names
    np.testing.assert_array_equal(back.values, d.values)


def test_csv_error_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1.0,2.0\n3.0\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="line 3"):
        read_data_csv(path)
    path.write_text("x,y\n1.0,2.0\n3.0,oops\n5.0,6.0\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="line 3"):
        read_data_csv(path)


# -- standardize ----------------------------------------------------------------


def test_standardize_simple_column():
    d = standardize(Dataset(("x",), np.array([[1.0], [2.0], [3.0]])))
    assert abs(d.values.mean()) < 1e-12
    assert abs(d.values.var() - 1.0) < 1e-12


def test_standardize_idempotent():
    rng = np.random.default_rng(1)
    d = Dataset(tuple(f"c{i}" for i in range(10)), rng.normal(2.0, 3.0, (1000, 10)))
    once = standardize(d)
    twice = standardize(once)
    assert np.max(np.abs(twice.values - once.values)) < 1e-9
    assert np.max(np.abs(once.values.mean(axis=0))) < 1e-9
    assert np.max(np.abs(once.values.var(axis=0) - 1.0)) < 1e-9


def test_standardize_rejects_constant():
    with pytest.raises(ConstantColumnError):
        standardize(Dataset(("x",), np.ones((5, 1))))


# -- regression -------------------------------------------------------------------


def test_exact_linear_relation():
    x = np.linspace(-1, 1, 50)
    d = Dataset(("x", "y"), np.column_stack([x, 2.0 * x]))
    res = ols_residual(d, "y", ("x",))
    assert abs(res.coefficients[0] - 2.0) < 1e-12
    assert np.max(np.abs(res.residuals)) < 1e-12


def test_single_regressor_coefficient_is_cov_over_var():
    rng = np.random.default_rng(2)
    x = rng.normal(size=400)
    y = 0.7 * x + rng.normal(size=400)
    d = standardize(Dataset(("x", "y"), np.column_stack([x, y])))
    res = ols_residual(d, "y", ("x",))
    xs, ys = d.column("x"), d.column("y")
    expected = np.cov(xs, ys, bias=True)[0, 1] / xs.var()
    assert abs(res.coefficients[0] - expected) < 1e-10


def test_matches_normal_equation_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        xs = rng.normal(size=(200, 5))
        y = xs @ rng.normal(size=5) + rng.normal(size=200)
        d = Dataset(tuple("abcdef"), np.column_stack([xs, y]))
        res = ols_residual(d, "f", tuple("abcde"))
        want = normal_equation_coefficients(y, xs)
        assert np.max(np.abs(res.coefficients - want)) < 1e-8
        # residual orthogonality invariant
        for k in range(5):
            assert abs(res.residuals @ xs[:, k]) <= 1e-8 * 200


def test_collinear_regressors_raise():
    rng = np.random.default_rng(4)
    x = rng.normal(size=100)
    d = Dataset(("a", "b", "y"), np.column_stack([x, 2 * x, rng.normal(size=100)]))
    with pytest.raises(CollinearityError):
        ols_residual(d, "y", ("a", "b"))


# -- kernel independence test ------------------------------------------------------


def test_size_calibration_under_independence():
    rng = np.random.default_rng(5)
    rejections = 0
    n_reps = 200
    for _ in range(n_reps):
        u = rng.uniform(-1, 1, 1000)
        v = rng.uniform(-1, 1, 1000)
        if not independence_test(u, v, 0.05).independent:
            rejections += 1
    assert rejections / n_reps <= 0.05 + 0.03


def test_perfect_dependence():
    rng = np.random.default_rng(6)
    u = rng.uniform(-1, 1, 500)
    verdict = independence_test(u, u, 0.05)
    assert not verdict.independent
    assert verdict.p_value < 1e-6


def test_power_on_uncorrelated_dependence():
    # v = u^2 with symmetric u: zero correlation but strong dependence,
    # which separates the kernel test from any correlation test
    rng = np.random.default_rng(7)
    rejected = 0
    for _ in range(100):
        u = rng.uniform(-1, 1, 1000)
        v = u**2
        if not independence_test(u, v, 0.05).independent:
            rejected += 1
    assert rejected >= 95


def test_symmetry_identical_p_values():
    rng = np.random.default_rng(8)
    u = rng.uniform(-1, 1, 300)
    v = 0.5 * u + rng.uniform(-1, 1, 300)
    a = independence_test(u, v, 0.05)
    b = independence_test(v, u, 0.05)
    assert a.p_value == b.p_value
    assert a.statistic == b.statistic


def test_verdict_threshold_invariant():
    rng = np.random.default_rng(9)
    u = rng.uniform(-1, 1, 200)
    v = rng.uniform(-1, 1, 200)
    verdict = independence_test(u, v, 0.05)
    assert verdict.independent == (verdict.p_value > verdict.alpha)


def test_kernel_test_input_validation():
    rng = np.random.default_rng(10)
    with pytest.raises(ConstantColumnError):
        independence_test(np.ones(50), rng.normal(size=50), 0.05)
    with pytest.raises(StatsError):
        independence_test(np.arange(10.0), np.arange(10.0), 0.05)


def test_permutation_null_agrees_directionally():
    rng = np.random.default_rng(11)
    u = rng.uniform(-1, 1, 150)
    dep = independence_test(u, u**2, 0.05, method="permutation", seed=3)
    ind = independence_test(u, rng.uniform(-1, 1, 150), 0.05, method="permutation", seed=3)
    assert not dep.independent
    assert ind.independent
    again = independence_test(u, u**2, 0.05, method="permutation", seed=3)
    assert again.p_value == dep.p_value  # deterministic given the seed


# -- conditional independence --------------------------------------------------------


def test_fisher_z_on_known_chain():
    hits_cond = 0
    hits_marg = 0
    for rep in range(100):
        model = build_model(
            ("X1", "X2", "X3"),
            (),
            {("X1", "X2"): 0.8, ("X2", "X3"): 0.7},
            {},
        )
        from fritl.synth import sample_data

        d = sample_data(model, 2000, seed=rep)
        if ci_test(d, "X1", "X3", ("X2",), 0.05).independent:
            hits_cond += 1
        if not ci_test(d, "X1", "X3", (), 0.05).independent:
            hits_marg += 1
    assert hits_cond >= 90
    assert hits_marg >= 90


def test_fisher_z_size_on_disconnected_pair():
    from fritl.synth import sample_data

    model = build_model(("X1", "X2"), (), {}, {})
    accepts = 0
    for rep in range(200):
        d = sample_data(model, 500, seed=rep)
        if ci_test(d, "X1", "X2", (), 0.05).independent:
            accepts += 1
    assert abs(accepts / 200 - 0.95) < 0.05


def test_covariance_oracle_matches_d_separation_on_fixture():
    model = seven_node_model()
    sigma = analytic_covariance(model)
    oracle = CovarianceOracleCI(sigma, model.observed_names)
    engine = DSepEngine(model.full_dag())
    names = model.observed_names
    for i, j in combinations(names, 2):
        rest = [x for x in names if x not in (i, j)]
        for size in range(3):
            for s in combinations(rest, size):
                assert oracle.independent(i, j, s) == engine.d_separated(i, j, s)


def test_fisher_z_population_sweep_small_graphs():
    # population covariances: partial-correlation zeros reproduce
    # d-separation on random faithful DAGs
    rng = np.random.default_rng(12)
    for trial in range(40):
        cfg = GeneratorConfig(
            n_observed=int(rng.integers(4, 8)),
            avg_indegree=float(rng.uniform(0.5, 1.5)),
            latent_ratio=0.0,
            seed=int(rng.integers(1 << 30)),
        )
        model = generate_model(cfg)
        oracle = CovarianceOracleCI(analytic_covariance(model), model.observed_names)
        engine = DSepEngine(model.observed_dag())
        names = model.observed_names
        for i, j in combinations(names, 2):
            rest = [x for x in names if x not in (i, j)]
            for size in range(min(3, len(rest)) + 1):
                for s in combinations(rest, size):
                    assert oracle.independent(i, j, s) == engine.d_separated(i, j, s), (
                        trial, i, j, s,
                    )


def test_kernel_ci_variant_residualizes():
    from fritl.synth import sample_data

    model = build_model(
        ("X1", "X2", "X3"), (), {("X1", "X2"): 0.9, ("X2", "X3"): 0.8}, {}
    )
    d = sample_data(model, 1500, seed=0)
    assert ci_test(d, "X1", "X3", ("X2",), 0.05, method="kernel").independent
    assert not ci_test(d, "X1", "X3", (), 0.05, method="kernel").independent


def test_fisher_z_provider_collinear_conditioning():
    rng = np.random.default_rng(13)
    x = rng.normal(size=200)
    d = Dataset(
        ("a", "b", "c", "y"),
        np.column_stack([x, 2 * x, rng.normal(size=200), rng.normal(size=200)]),
    )
    provider = FisherZCI(d, 0.05)
    with pytest.raises(CollinearityError):
        provider.independent("c", "y", ("a", "b"))
