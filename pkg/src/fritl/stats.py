"""Numerical substrate: datasets, regression, and independence tests.

The kernel independence test is an HSIC test with Gaussian kernels, a
median-heuristic bandwidth, and a gamma approximation to the null (with an
optional permutation null for small samples).  Conditional independence for
the constraint stage defaults to Fisher-z on partial correlations, which is
sound for linear models; a kernel variant residualizes on the conditioning
set first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import gamma as gamma_dist
from scipy.stats import norm as norm_dist


class StatsError(ValueError):
    pass


class ConstantColumnError(StatsError):
    """A column with (numerically) zero variance where variation is required."""


class CollinearityError(StatsError):
    """Singular regressor Gram matrix or conditioning set."""


class DataFormatError(StatsError):
    """Malformed tabular input; carries the offending 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """Column-named sample matrix; rows are samples."""

    column_names: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.column_names = tuple(self.column_names)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise StatsError("values must be a 2-d matrix")
        if self.values.shape[1] != len(self.column_names):
            raise StatsError("column count does not match names")
        if len(set(self.column_names)) != len(self.column_names):
            raise StatsError("duplicate column names")
        if self.values.shape[0] < 3:
            raise StatsError("need at least 3 samples")
        if not np.all(np.isfinite(self.values)):
            raise StatsError("non-finite values in dataset")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.column_names.index(name)
        except ValueError:
            raise StatsError(f"unknown column {name!r}") from None
        return self.values[:, idx]

    def subset(self, names: Sequence[str]) -> "Dataset":
        cols = [self.column(n) for n in names]
        return Dataset(tuple(names), np.column_stack(cols))


def write_data_csv(d: Dataset, path: str | Path) -> None:
    """Write a dataset with 17-significant-digit decimals (byte-stable)."""
    lines = [",".join(d.column_names)]
    for row in d.values:
        lines.append(",".join(format(v, ".17g") for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_data_csv(path: str | Path) -> Dataset:
    """Read a dataset, reporting malformed rows with their line number."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines()]
    if not lines or not lines[0].strip():
        raise DataFormatError(1, "missing header row")
    names = [c.strip() for c in lines[0].split(",")]
    if any(not c for c in names):
        raise DataFormatError(1, "empty column name in header")
    rows: list[list[float]] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cells = raw.split(",")
        if len(cells) != len(names):
            raise DataFormatError(
                lineno, f"expected {len(names)} cells, found {len(cells)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise DataFormatError(lineno, f"non-numeric cell in row {raw!r}") from None
    if len(rows) < 3:
        raise DataFormatError(len(lines), "fewer than 3 data rows")
    return Dataset(tuple(names), np.asarray(rows))


def standardize(d: Dataset) -> Dataset:
    """Center each column to mean 0 and scale to variance 1 (idempotent)."""
    mean = d.values.mean(axis=0)
    std = d.values.std(axis=0)
    bad = np.where(std <= 0)[0]
    if bad.size:
        raise ConstantColumnError(f"constant column {d.column_names[bad[0]]!r}")
    return Dataset(d.column_names, (d.values - mean) / std)


def standardize_vector(x: np.ndarray) -> np.ndarray:
    sd = x.std()
    if sd <= 0:
        raise ConstantColumnError("constant vector")
    return (x - x.mean()) / sd


# ---------------------------------------------------------------------------
# ordinary least squares
# ---------------------------------------------------------------------------


@dataclass
class RegressionResult:
    coefficients: np.ndarray
    residuals: np.ndarray
    regressand: str
    regressors: tuple[str, ...]


_GRAM_RCOND = 1e-12


def regress(y: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """OLS of y on the columns of xs without intercept: (beta, residuals)."""
    xs = np.atleast_2d(xs)
    if xs.shape[0] != y.shape[0]:
        xs = xs.T
    gram = xs.T @ xs
    if gram.shape[0] and np.linalg.cond(gram) > 1 / _GRAM_RCOND:
        raise CollinearityError("singular regressor Gram matrix")
    beta = np.linalg.solve(gram, xs.T @ y)
    return beta, y - xs @ beta


def ols_residual(d: Dataset, y: str, regressors: Sequence[str]) -> RegressionResult:
    """Least squares of ``y`` on ``regressors`` (no intercept).

    Callers are expected to pass standardized data; coefficients are then in
    standardized units and residuals are orthogonal to every regressor.
    """
    regressors = tuple(regressors)
    if not regressors:
        raise StatsError("empty regressor set")
    if y in regressors:
        raise StatsError("regressand cannot be a regressor")
    xs = np.column_stack([d.column(x) for x in regressors])
    beta, resid = regress(d.column(y), xs)
    return RegressionResult(beta, resid, y, regressors)


# ---------------------------------------------------------------------------
# independence tests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestVerdict:
    statistic: float
    p_value: float
    independent: bool
    alpha: float


_MEDIAN_SUBSAMPLE = 2000


@dataclass
class GramBundle:
    """Precomputed Gaussian-kernel Gram matrix for one vector.

    Kernels are held in float32 (the gamma-null moments are far coarser than
    single precision); all reductions accumulate in float64.
    """

    kernel: np.ndarray
    n: int


def _sq_dists(x: np.ndarray) -> np.ndarray:
    x32 = np.ascontiguousarray(x, dtype=np.float32).reshape(-1, 1)
    sq = x32 * x32
    d2 = sq + sq.T - 2.0 * (x32 @ x32.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _median_heuristic(x: np.ndarray) -> float:
    """Squared bandwidth per the median heuristic: 2*sigma^2 = median d^2."""
    if x.shape[0] > _MEDIAN_SUBSAMPLE:
        step = int(math.ceil(x.shape[0] / _MEDIAN_SUBSAMPLE))
        x = x[::step]
    d2 = _sq_dists(x)
    iu = np.triu_indices(d2.shape[0], k=1)
    vals = d2[iu]
    vals = vals[vals > 0]
    if vals.size == 0:
        raise ConstantColumnError("constant input vector in kernel test")
    return float(np.median(vals))


def gram_bundle(x: np.ndarray) -> GramBundle:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    med = _median_heuristic(x)
    d2 = _sq_dists(x)
    k = np.exp(-d2 / np.float32(med))
    return GramBundle(k, x.shape[0])


def _centered(k: np.ndarray) -> np.ndarray:
    row = k.mean(axis=1, keepdims=True)
    grand = row.mean()
    return k - row - row.T + grand


def hsic_test_from_grams(gu: GramBundle, gv: GramBundle, alpha: float) -> TestVerdict:
    """HSIC with the gamma-approximation null from precomputed Grams."""
    n = gu.n
    if n != gv.n:
        raise StatsError("length mismatch")
    kc = _centered(gu.kernel)
    lc = _centered(gv.kernel)
    prod = kc * lc
    test_stat = float(prod.sum(dtype=np.float64)) / n

    var_term = (prod / 6.0) ** 2
    var_hsic = (var_term.sum(dtype=np.float64) - np.trace(var_term, dtype=np.float64)) / (
        n * (n - 1)
    )
    var_hsic *= 72.0 * (n - 4) * (n - 5) / (n * (n - 1) * (n - 2) * (n - 3))

    mu_x = (gu.kernel.sum(dtype=np.float64) - np.trace(gu.kernel, dtype=np.float64)) / (
        n * (n - 1)
    )
    mu_y = (gv.kernel.sum(dtype=np.float64) - np.trace(gv.kernel, dtype=np.float64)) / (
        n * (n - 1)
    )
    m_hsic = (1.0 + mu_x * mu_y - mu_x - mu_y) / n

    if var_hsic <= 0 or m_hsic <= 0:
        # degenerate null moments (near-constant kernels); fail safe toward
        # dependence only if the statistic is clearly positive
        p_value = 1.0 if test_stat <= 0 else 0.0
    else:
        shape = m_hsic**2 / var_hsic
        scale = var_hsic * n / m_hsic
        p_value = float(gamma_dist.sf(test_stat, shape, scale=scale))
    return TestVerdict(test_stat, p_value, p_value > alpha, alpha)


def _hsic_permutation(
    gu: GramBundle, gv: GramBundle, alpha: float, n_permutations: int, seed: int
) -> TestVerdict:
    n = gu.n
    kc = _centered(gu.kernel)
    l_raw = gv.kernel
    observed = float((kc * _centered(l_raw)).sum(dtype=np.float64)) / n
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_permutations):
        perm = rng.permutation(n)
        lp = l_raw[np.ix_(perm, perm)]
        # kc is doubly centered, so centering lp would not change the sum
        stat = float((kc * lp).sum(dtype=np.float64)) / n
        if stat >= observed:
            hits += 1
    p_value = (1 + hits) / (1 + n_permutations)
    return TestVerdict(observed, p_value, p_value > alpha, alpha)


def independence_test(
    u: np.ndarray,
    v: np.ndarray,
    alpha: float,
    *,
    method: str = "gamma",
    n_permutations: int = 500,
    seed: int = 0,
) -> TestVerdict:
    """Nonparametric test of marginal independence between two vectors.

    ``method='gamma'`` uses the moment-matched gamma null; ``'permutation'``
    uses ``n_permutations`` kernel-matrix permutations with the RNG stream
    derived from ``seed``.  Symmetric in (u, v).
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.shape[0] != v.shape[0]:
        raise StatsError("length mismatch")
    if u.shape[0] < 20:
        raise StatsError("need at least 20 samples for the kernel test")
    gu, gv = gram_bundle(u), gram_bundle(v)
    if method == "gamma":
        return hsic_test_from_grams(gu, gv, alpha)
    if method == "permutation":
        return _hsic_permutation(gu, gv, alpha, n_permutations, seed)
    raise StatsError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# conditional independence
# ---------------------------------------------------------------------------


def partial_correlation(corr: np.ndarray, i: int, j: int, s: Sequence[int]) -> float:
    """Partial correlation of variables i, j given s from a correlation matrix."""
    if not s:
        return float(corr[i, j])
    idx = [i, j, *s]
    sub = corr[np.ix_(idx, idx)]
    if np.linalg.cond(sub) > 1 / _GRAM_RCOND:
        raise CollinearityError("singular conditioning set")
    prec = np.linalg.inv(sub)
    return float(-prec[0, 1] / math.sqrt(prec[0, 0] * prec[1, 1]))


def fisher_z_verdict(r: float, n: int, cond_size: int, alpha: float) -> TestVerdict:
    dof = n - cond_size - 3
    if dof <= 0:
        raise StatsError("too few samples for Fisher-z at this conditioning size")
    r = min(0.9999999, max(-0.9999999, r))
    stat = math.sqrt(dof) * abs(math.atanh(r))
    p_value = float(2.0 * norm_dist.sf(stat))
    return TestVerdict(stat, p_value, p_value > alpha, alpha)


def ci_test(
    d: Dataset,
    i: str,
    j: str,
    s: Iterable[str],
    alpha: float,
    *,
    method: str = "fisher_z",
) -> TestVerdict:
    """Conditional-independence decision between columns i and j given s.

    ``fisher_z`` tests the partial correlation; ``kernel`` regresses both
    sides on ``s`` and applies the marginal kernel test to the residuals.
    """
    s = tuple(s)
    if i in s or j in s:
        raise StatsError("conditioning set overlaps the tested pair")
    if method == "fisher_z":
        names = (i, j, *s)
        sub = d.subset(names).values
        sub = (sub - sub.mean(axis=0)) / sub.std(axis=0)
        corr = (sub.T @ sub) / sub.shape[0]
        r = partial_correlation(corr, 0, 1, list(range(2, 2 + len(s))))
        return fisher_z_verdict(r, d.n_samples, len(s), alpha)
    if method == "kernel":
        if s:
            xs = np.column_stack([d.column(x) for x in s])
            _, ri = regress(d.column(i), xs)
            _, rj = regress(d.column(j), xs)
        else:
            ri, rj = d.column(i), d.column(j)
        return independence_test(ri, rj, alpha)
    raise StatsError(f"unknown ci method {method!r}")


class FisherZCI:
    """Fisher-z CI provider over one dataset; caches the correlation matrix."""

    def __init__(self, d: Dataset, alpha: float):
        vals = d.values
        std = vals.std(axis=0)
        if np.any(std <= 0):
            raise ConstantColumnError("constant column in CI input")
        z = (vals - vals.mean(axis=0)) / std
        self.corr = (z.T @ z) / vals.shape[0]
        self.names = {name: k for k, name in enumerate(d.column_names)}
        self.n = d.n_samples
        self.alpha = alpha

    def independent(self, i: str, j: str, s: Iterable[str]) -> bool:
        s = tuple(s)
        r = partial_correlation(
            self.corr, self.names[i], self.names[j], [self.names[x] for x in s]
        )
        return fisher_z_verdict(r, self.n, len(s), self.alpha).independent


class KernelResidualCI:
    """Kernel CI provider: residualize on the conditioning set, then HSIC."""

    def __init__(self, d: Dataset, alpha: float):
        self.data = standardize(d)
        self.alpha = alpha

    def independent(self, i: str, j: str, s: Iterable[str]) -> bool:
        return ci_test(self.data, i, j, tuple(s), self.alpha, method="kernel").independent


class CovarianceOracleCI:
    """Population CI oracle from an analytic covariance matrix.

    Declares independence when the partial correlation vanishes to within
    ``tol``; with a faithful covariance this reproduces d-separation.
    """

    def __init__(self, sigma: np.ndarray, names: Sequence[str], tol: float = 1e-9):
        sd = np.sqrt(np.diag(sigma))
        self.corr = sigma / np.outer(sd, sd)
        self.names = {name: k for k, name in enumerate(names)}
        self.tol = tol

    def independent(self, i: str, j: str, s: Iterable[str]) -> bool:
        r = partial_correlation(
            self.corr, self.names[i], self.names[j], [self.names[x] for x in tuple(s)]
        )
        return abs(r) < self.tol
