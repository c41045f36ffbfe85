"""Data backends for the residual-orientation and triad stages.

Both stages only need column access, regression residuals, covariances, and
a marginal independence verdict, so they run against either backend:

* :class:`SampleBackend` holds working copies of standardized sample columns
  and answers independence with the kernel test (Gram matrices of named
  columns are cached per version).
* :class:`PopulationBackend` represents every column as its coefficient
  vector over the model's independent unit-variance sources; independence is
  exact (two linear mixes of independent non-Gaussian sources are dependent
  iff they share a source with nonzero coefficients) and regression uses the
  analytic covariances.

A column reference is either a column name (tracked, replaceable) or a raw
derived column (ndarray / coefficient vector).
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Sequence, Union

import numpy as np

from fritl.stats import (
    Dataset,
    GramBundle,
    TestVerdict,
    gram_bundle,
    hsic_test_from_grams,
    independence_test,
    regress,
    standardize,
)
from fritl.synth import LvLingamModel, source_coefficients

ColumnRef = Union[str, np.ndarray]


class SampleBackend:
    kind = "sample"

    def __init__(
        self,
        data: Dataset,
        alpha: float,
        *,
        method: str = "gamma",
        n_permutations: int = 500,
        seed: int = 0,
        max_cached_grams: int = 8,
    ):
        std = standardize(data)
        self.names = std.column_names
        self.alpha = alpha
        self.method = method
        self.n_permutations = n_permutations
        self.seed = seed
        self._original = {n: std.column(n).copy() for n in self.names}
        self._working = {n: self._original[n] for n in self.names}
        self._version = {n: 0 for n in self.names}
        self._grams: OrderedDict[tuple[str, int], GramBundle] = OrderedDict()
        self._max_cached = max_cached_grams

    # -- columns -------------------------------------------------------------

    def column(self, ref: ColumnRef) -> np.ndarray:
        return self._working[ref] if isinstance(ref, str) else ref

    def original(self, name: str) -> np.ndarray:
        return self._original[name]

    def version(self, name: str) -> int:
        return self._version[name]

    def replace(self, name: str, values: np.ndarray) -> None:
        self._working[name] = np.asarray(values, dtype=np.float64)
        self._version[name] += 1

    def working_dataset(self) -> Dataset:
        return Dataset(self.names, np.column_stack([self._working[n] for n in self.names]))

    # -- algebra ---------------------------------------------------------------

    def residual(self, y: ColumnRef, xs: Sequence[ColumnRef]) -> np.ndarray:
        mat = np.column_stack([self.column(x) for x in xs])
        _, resid = regress(self.column(y), mat)
        return resid

    def cov(self, u: ColumnRef, v: ColumnRef) -> float:
        a, b = self.column(u), self.column(v)
        return float(a @ b) / a.shape[0]

    def combine(self, a: float, u: ColumnRef, b: float, v: ColumnRef) -> np.ndarray:
        return a * self.column(u) + b * self.column(v)

    # -- independence ----------------------------------------------------------

    def _gram(self, ref: ColumnRef) -> GramBundle:
        if isinstance(ref, str):
            key = (ref, self._version[ref])
            bundle = self._grams.get(key)
            if bundle is None:
                bundle = gram_bundle(self._working[ref])
                self._grams[key] = bundle
                while len(self._grams) > self._max_cached:
                    self._grams.popitem(last=False)
            else:
                self._grams.move_to_end(key)
            return bundle
        return gram_bundle(ref)

    def independent(self, u: ColumnRef, v: ColumnRef, alpha: float | None = None) -> TestVerdict:
        level = self.alpha if alpha is None else alpha
        if self.method == "gamma":
            return hsic_test_from_grams(self._gram(u), self._gram(v), level)
        return independence_test(
            self.column(u),
            self.column(v),
            level,
            method=self.method,
            n_permutations=self.n_permutations,
            seed=self.seed,
        )


class PopulationBackend:
    kind = "population"

    def __init__(self, names: Sequence[str], coefficients: np.ndarray, tol: float = 1e-9):
        self.names = tuple(names)
        self.alpha = 0.5  # synthetic p-values are exactly 0 or 1
        self.tol = tol
        self._original = {n: coefficients[i].copy() for i, n in enumerate(self.names)}
        self._working = {n: self._original[n] for n in self.names}
        self._version = {n: 0 for n in self.names}

    @classmethod
    def from_model(cls, model: LvLingamModel, tol: float = 1e-9) -> "PopulationBackend":
        mix, _ = source_coefficients(model)
        return cls(model.observed_names, mix, tol)

    def column(self, ref: ColumnRef) -> np.ndarray:
        return self._working[ref] if isinstance(ref, str) else ref

    def original(self, name: str) -> np.ndarray:
        return self._original[name]

    def version(self, name: str) -> int:
        return self._version[name]

    def replace(self, name: str, values: np.ndarray) -> None:
        self._working[name] = np.asarray(values, dtype=np.float64)
        self._version[name] += 1

    def residual(self, y: ColumnRef, xs: Sequence[ColumnRef]) -> np.ndarray:
        from fritl.stats import CollinearityError

        mat = np.vstack([self.column(x) for x in xs])  # rows are regressors
        gram = mat @ mat.T
        if np.linalg.cond(gram) > 1e12:
            raise CollinearityError("collinear regressors in population backend")
        beta = np.linalg.solve(gram, mat @ self.column(y))
        return self.column(y) - beta @ mat

    def cov(self, u: ColumnRef, v: ColumnRef) -> float:
        return float(self.column(u) @ self.column(v))

    def combine(self, a: float, u: ColumnRef, b: float, v: ColumnRef) -> np.ndarray:
        return a * self.column(u) + b * self.column(v)

    def independent(self, u: ColumnRef, v: ColumnRef, alpha: float | None = None) -> TestVerdict:
        level = self.alpha if alpha is None else alpha
        cu, cv = self.column(u), self.column(v)
        scale = max(float(np.max(np.abs(cu))) * float(np.max(np.abs(cv))), 1e-300)
        overlap = float(np.max(np.abs(cu * cv))) / scale
        independent = overlap < self.tol
        return TestVerdict(overlap, 1.0 if independent else 0.0, independent, level)
