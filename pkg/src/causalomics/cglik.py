"""Maximized conditional-Gaussian log-likelihood of a variable block.

The joint over a mixed block factors as a multinomial over the discrete
configuration times a Gaussian over the continuous sub-block within each
configuration.  Both the likelihood-ratio independence test and the mixed
BIC score are built on this one function, so their values stay mutually
consistent.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .tabular import DataTable

LOG_2PI = float(np.log(2.0 * np.pi))

# a configuration with fewer rows than the continuous dimension plus this
# margin falls back to the pooled Gaussian
DENSE_MARGIN = 2

RIDGE_SCALE = 1e-8


class CgError(ValueError):
    """Raised when a conditional-Gaussian fit is impossible."""


def config_index(codes: list[np.ndarray], cards: list[int],
                 n_rows: int) -> np.ndarray:
    """Row-wise mixed-radix index of a discrete configuration."""
    idx = np.zeros(n_rows, dtype=np.int64)
    for col, card in zip(codes, cards):
        idx = idx * card + col
    return idx


def _ridged(cov: np.ndarray) -> np.ndarray:
    dim = cov.shape[0]
    return cov + (RIDGE_SCALE * np.trace(cov) / dim) * np.eye(dim)


def _gaussian_ll(block: np.ndarray, mean: np.ndarray, cov: np.ndarray,
                 names: tuple[str, ...]) -> float:
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise CgError("singular covariance over continuous block "
                      f"{list(names)}") from None
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    dev = block - mean
    white = solve_triangular(chol, dev.T, lower=True)
    quad = float(np.sum(white * white))
    n, dim = block.shape
    return -0.5 * (n * dim * LOG_2PI + n * logdet + quad)


def cg_loglik(table: DataTable, names) -> tuple[float, int]:
    """Maximized log-likelihood and fitted-parameter count of a block.

    Discrete part: saturated multinomial over the full configuration
    space.  Continuous part: per-configuration mean and covariance when
    the configuration holds enough rows, otherwise the pooled mean and
    covariance (counted once).  A tiny trace-scaled ridge keeps nearly
    collinear blocks invertible; exact singularity is an error.
    """
    names = list(names)
    for n in names:
        table.meta(n)
    names.sort(key=table.names.index)
    if not names:
        return 0.0, 0
    disc = [n for n in names if table.is_categorical(n)]
    cont = tuple(n for n in names if not table.is_categorical(n))
    n_rows = table.n_rows
    c = len(cont)
    ll = 0.0
    params = 0

    if disc:
        cards = [table.cardinality(d) for d in disc]
        cfg = config_index([table.column(d) for d in disc], cards, n_rows)
        m_full = int(np.prod(cards, dtype=np.int64))
        counts = np.bincount(cfg, minlength=m_full)
        observed = np.flatnonzero(counts)
        ll += float(np.sum(counts[observed]
                           * np.log(counts[observed] / n_rows)))
        params += m_full - 1
        strata = [np.flatnonzero(cfg == k) for k in observed]
    else:
        strata = [np.arange(n_rows)]

    if c:
        block = np.column_stack([table.column(nm) for nm in cont])
        per_stratum = c + c * (c + 1) // 2
        if any(len(s) < c + DENSE_MARGIN for s in strata):
            pooled_mean = block.mean(axis=0)
            dev = block - pooled_mean
            pooled_cov = _ridged(dev.T @ dev / n_rows)
            params += per_stratum
        for rows in strata:
            sub = block[rows]
            if len(rows) >= c + DENSE_MARGIN:
                mean = sub.mean(axis=0)
                dev = sub - mean
                cov = _ridged(dev.T @ dev / len(rows))
                params += per_stratum
            else:
                mean, cov = pooled_mean, pooled_cov
            ll += _gaussian_ll(sub, mean, cov, cont)

    return ll, params
