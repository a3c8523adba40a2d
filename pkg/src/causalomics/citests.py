"""Conditional-independence tests over mixed data.

Four interchangeable testers sharing one result type and cache contract:
a stratified Pearson chi-square for categorical variables, a
conditional-Gaussian likelihood-ratio test for mixed blocks, a random
Fourier-feature approximation of the kernel conditional-independence
test, and an infinite-sample oracle that answers from a known DAG.

Every tester canonicalizes its arguments before computing, so swapping x
and y returns bit-identical results, and results are cached under the
symmetric key.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist

from .cglik import CgError, cg_loglik, config_index
from .graphs import MixedGraph, d_separated
from .tabular import DataTable


class CITestError(ValueError):
    """Raised for invalid test inputs."""


@dataclass(frozen=True)
class CITestResult:
    """Outcome of one conditional-independence test."""

    statistic: float
    dof: float
    p_value: float
    independent: bool
    alpha: float
    flags: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "independent": self.independent,
            "alpha": self.alpha,
            "flags": list(self.flags),
        }


def _result(statistic: float, dof: float, p: float, alpha: float,
            flags: tuple[str, ...] = ()) -> CITestResult:
    return CITestResult(float(statistic), float(dof), float(p),
                        bool(p > alpha), float(alpha), flags)


class CITester:
    """Shared canonicalization, caching and accounting for all testers.

    Subclasses implement ``_position`` (canonical variable order) and
    ``_run``.  The cache supports concurrent reads and atomic inserts;
    duplicated computation under a race is harmless because tests are
    pure.
    """

    name = "base"

    def __init__(self, alpha: float = 0.05, cache: bool = True):
        if not 0.0 < alpha < 1.0:
            raise CITestError("alpha must be in (0, 1)")
        self.alpha = float(alpha)
        self._cache: dict | None = {} if cache else None
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    def _position(self, name: str) -> int:
        raise NotImplementedError

    def _run(self, x: str, y: str, z: tuple[str, ...]) -> CITestResult:
        raise NotImplementedError

    def key(self, x: str, y: str, z) -> tuple[str, str, tuple[str, ...]]:
        """Symmetric cache key: (x, y) sorted canonically, z sorted."""
        a, b = sorted((x, y), key=self._position)
        return a, b, tuple(sorted(set(z), key=self._position))

    def test(self, x: str, y: str, z=()) -> CITestResult:
        x, y, z = self.key(x, y, z)
        if x == y:
            raise CITestError("x and y must differ")
        if x in z or y in z:
            raise CITestError("x and y must not appear in the conditioning set")
        if self._cache is None:
            return self._run(x, y, z)
        cache_key = (x, y, z)
        with self._lock:
            found = self._cache.get(cache_key)
            if found is not None:
                self._hits += 1
        if found is not None:
            return found
        result = self._run(x, y, z)
        with self._lock:
            self._misses += 1
            self._cache.setdefault(cache_key, result)
        return result

    def cache_stats(self) -> dict:
        with self._lock:
            return {
                "hits": self._hits,
                "misses": self._misses,
                "size": len(self._cache) if self._cache is not None else 0,
            }


class TableTester(CITester):
    """Tester bound to one immutable data table."""

    def __init__(self, table: DataTable, alpha: float = 0.05,
                 cache: bool = True):
        super().__init__(alpha, cache)
        self.table = table
        self._pos = {n: i for i, n in enumerate(table.names)}

    def _position(self, name: str) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise CITestError(f"unknown variable {name!r}") from None


class ChiSquareTester(TableTester):
    """Pearson chi-square of x and y summed over the strata of z.

    Zero rows and columns within a stratum are dropped and the degrees of
    freedom reduced accordingly; a stratum left without a 2x2 core
    contributes nothing.
    """

    name = "chi_square"

    def _run(self, x, y, z):
        t = self.table
        for name in (x, y, *z):
            if not t.is_categorical(name):
                raise CITestError(
                    f"chi-square requires categorical variables; {name!r} "
                    "is continuous")
        cx, cy = t.column(x), t.column(y)
        shape = (t.cardinality(x), t.cardinality(y))
        if z:
            cards = [t.cardinality(v) for v in z]
            cfg = config_index([t.column(v) for v in z], cards, t.n_rows)
        else:
            cfg = np.zeros(t.n_rows, dtype=np.int64)

        statistic = 0.0
        dof = 0
        for code in np.unique(cfg):
            rows = cfg == code
            counts = np.zeros(shape)
            np.add.at(counts, (cx[rows], cy[rows]), 1.0)
            counts = counts[counts.sum(axis=1) > 0]
            counts = counts[:, counts.sum(axis=0) > 0]
            r, c = counts.shape
            if r < 2 or c < 2:
                continue
            expected = np.outer(counts.sum(axis=1),
                                counts.sum(axis=0)) / counts.sum()
            statistic += float(((counts - expected) ** 2 / expected).sum())
            dof += (r - 1) * (c - 1)
        if dof == 0:
            return _result(0.0, 0.0, 1.0, self.alpha, ("degenerate",))
        return _result(statistic, dof, stats.chi2.sf(statistic, dof),
                       self.alpha)


class CgLrtTester(TableTester):
    """Likelihood-ratio test under the conditional-Gaussian model.

    The statistic is twice the gap between the maximized log-likelihood
    of the full block {x, y, z} and the one that factors x and y apart
    given z; degrees of freedom equal the fitted-parameter difference.
    """

    name = "cg_lrt"

    # required margin of rows beyond the largest fitted parameter count
    MIN_EXTRA_ROWS = 5

    def _run(self, x, y, z):
        t = self.table
        try:
            ll_xyz, k_xyz = cg_loglik(t, (x, y, *z))
            ll_z, k_z = cg_loglik(t, z)
            ll_xz, k_xz = cg_loglik(t, (x, *z))
            ll_yz, k_yz = cg_loglik(t, (y, *z))
        except CgError as exc:
            raise CITestError(str(exc)) from None
        needed = k_xyz + self.MIN_EXTRA_ROWS
        if t.n_rows < needed:
            raise CITestError(
                f"insufficient rows for cg_lrt on ({x}, {y} | "
                f"{', '.join(z) or 'nothing'}): need {needed}, "
                f"have {t.n_rows}")
        statistic = max(0.0, 2.0 * (ll_xyz + ll_z - ll_xz - ll_yz))
        dof = (k_xyz + k_z) - (k_xz + k_yz)
        if dof <= 0:
            return _result(statistic, max(dof, 0), 1.0, self.alpha,
                           ("degenerate",))
        return _result(statistic, dof, stats.chi2.sf(statistic, dof),
                       self.alpha)


@dataclass(frozen=True)
class RcitParams:
    """Knobs of the random-Fourier-feature test.

    ``d_xy`` features represent each tested variable, ``d_z`` the
    conditioning block; the seed combines with the canonical variable
    key so repeated calls (and x/y swaps) reuse the same draws.
    """

    d_xy: int = 5
    d_z: int = 100
    ridge: float = 1e-3
    seed: int = 0
    bandwidth_rows: int = 500


class RcitTester(TableTester):
    """Randomized approximation of the kernel conditional-independence
    test: Fourier features for x, y and z, ridge residualization of the
    x- and y-features on the z-features, and a moment-matched gamma null
    for the scaled cross-covariance norm."""

    name = "rcit"

    MIN_ROWS = 50

    def __init__(self, table: DataTable, alpha: float = 0.05,
                 params: RcitParams | None = None, cache: bool = True):
        super().__init__(table, alpha, cache)
        self.params = params or RcitParams()

    def _encode(self, name: str) -> np.ndarray:
        t = self.table
        col = t.column(name)
        if t.is_categorical(name):
            if np.unique(col).size < 2:
                raise CITestError(f"variable {name!r} has zero variance")
            onehot = np.zeros((t.n_rows, t.cardinality(name)))
            onehot[np.arange(t.n_rows), col] = 1.0
            return onehot
        sd = col.std()
        if sd == 0.0:
            raise CITestError(f"variable {name!r} has zero variance")
        return ((col - col.mean()) / sd)[:, None]

    def _bandwidth(self, block: np.ndarray) -> float:
        """Median pairwise distance over an evenly spaced, value-ordered
        subsample; value ordering keeps the result row-order invariant."""
        n = len(block)
        order = np.lexsort(block.T[::-1])
        take = np.linspace(0, n - 1, min(n, self.params.bandwidth_rows))
        sub = block[order][np.unique(take.astype(np.int64))]
        dists = pdist(sub)
        dists = dists[dists > 0]
        return float(np.median(dists)) if dists.size else 1.0

    def _fourier(self, block: np.ndarray, d: int,
                 rng: np.random.Generator) -> np.ndarray:
        sigma = self._bandwidth(block)
        w = rng.standard_normal((block.shape[1], d))
        b = rng.uniform(0.0, 2.0 * np.pi, size=d)
        return np.sqrt(2.0 / d) * np.cos(block @ w / sigma + b)

    def _residualize(self, f: np.ndarray, fz: np.ndarray) -> np.ndarray:
        n = len(f)
        f_c = f - f.mean(axis=0)
        z_c = fz - fz.mean(axis=0)
        gram = z_c.T @ z_c / n + self.params.ridge * np.eye(fz.shape[1])
        beta = np.linalg.solve(gram, z_c.T @ f_c / n)
        return f_c - z_c @ beta

    def _run(self, x, y, z):
        t = self.table
        n = t.n_rows
        if n < self.MIN_ROWS:
            raise CITestError(f"rcit needs at least {self.MIN_ROWS} rows, "
                              f"have {n}")
        xb = self._encode(x)
        yb = self._encode(y)
        rng = np.random.default_rng(
            (self.params.seed, self._pos[x], self._pos[y],
             *(self._pos[v] for v in z)))
        fx = self._fourier(xb, self.params.d_xy, rng)
        fy = self._fourier(yb, self.params.d_xy, rng)
        if z:
            zb = np.hstack([self._encode(v) for v in z])
            fz = self._fourier(zb, self.params.d_z, rng)
            rx = self._residualize(fx, fz)
            ry = self._residualize(fy, fz)
        else:
            rx = fx - fx.mean(axis=0)
            ry = fy - fy.mean(axis=0)

        cross = rx.T @ ry / n
        statistic = n * float((cross * cross).sum())
        # null moments from the covariance of per-row outer products
        outer = (rx[:, :, None] * ry[:, None, :]).reshape(n, -1)
        outer = outer - outer.mean(axis=0)
        cov = outer.T @ outer / n
        mean = float(np.trace(cov))
        var = 2.0 * float((cov * cov).sum())
        if mean <= 0.0 or var <= 0.0:
            return _result(statistic, 0.0, 1.0, self.alpha, ("degenerate",))
        shape = mean * mean / var
        scale = var / mean
        p = stats.gamma.sf(statistic, a=shape, scale=scale)
        return _result(statistic, 2.0 * shape, p, self.alpha)


class DsepOracle(CITester):
    """Infinite-sample test answering from a known DAG."""

    name = "dsep"

    def __init__(self, dag: MixedGraph, alpha: float = 0.05,
                 cache: bool = True):
        super().__init__(alpha, cache)
        dag.require_dag()
        self.dag = dag
        self._pos = {n: i for i, n in enumerate(dag.nodes)}

    def _position(self, name: str) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise CITestError(f"unknown node {name!r}") from None

    def _run(self, x, y, z):
        p = 1.0 if d_separated(self.dag, x, y, z) else 0.0
        return _result(0.0, 0.0, p, self.alpha)


def chi_square_test(table: DataTable, x: str, y: str, z=(),
                    alpha: float = 0.05) -> CITestResult:
    return ChiSquareTester(table, alpha=alpha, cache=False).test(x, y, z)


def cg_lrt(table: DataTable, x: str, y: str, z=(),
           alpha: float = 0.05) -> CITestResult:
    return CgLrtTester(table, alpha=alpha, cache=False).test(x, y, z)


def rcit(table: DataTable, x: str, y: str, z=(), alpha: float = 0.05,
         params: RcitParams | None = None) -> CITestResult:
    return RcitTester(table, alpha=alpha, params=params,
                      cache=False).test(x, y, z)


def dsep_oracle_test(dag: MixedGraph, x: str, y: str, z=(),
                     alpha: float = 0.05) -> CITestResult:
    return DsepOracle(dag, alpha=alpha, cache=False).test(x, y, z)
