"""Closed-form conditional variances of a linear Gaussian model.

For a subset ``u`` of inputs the conditional variance of the output given
``X_u`` is the quadratic form of the remaining coefficients over the Schur
complement of ``gamma[u, u]``. It does not depend on the observed value of
``X_u``, so a single number per subset is the whole story, and the full
table over all ``2**p`` subsets is the input to every index extraction.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import LinearGaussianModel, total_variance
from . import subsets

#: Relative eigenvalue threshold of the symmetric generalized inverse.
PINV_RTOL = 1e-12
#: Condition estimate above which the factorization path defers to the
#: generalized inverse.
COND_LIMIT = 1e12
#: A clamped negative result below ``-NEG_WARN_FACTOR * var_y`` triggers a
#: warning instead of being silently zeroed.
NEG_WARN_FACTOR = 1e-9

#: Environment variable capping thread count for table evaluation (0 = auto).
THREADS_ENV_VAR = "SHAPLEY_LG_THREADS"


@dataclass(frozen=True, eq=False)
class CondVarTable:
    """Conditional variances of all subsets, indexed by their bitmask.

    ``values[j]`` is the conditional variance given the subset encoded by
    mask ``j``; ``values[0] == var_y`` and the entry of the full set is 0.
    """

    values: np.ndarray
    var_y: float

    @property
    def p(self) -> int:
        return int(self.values.size).bit_length() - 1


def _pseudo_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``mat @ x = rhs`` through the symmetric generalized inverse."""
    w, q = np.linalg.eigh(mat)
    tau = PINV_RTOL * max(float(w[-1]), 0.0)
    inv_w = np.zeros_like(w)
    np.divide(1.0, w, out=inv_w, where=w > tau)
    proj = q.T @ rhs
    if proj.ndim == 1:
        return q @ (inv_w * proj)
    return q @ (inv_w[:, None] * proj)


def _factor_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray | None:
    """Cholesky solve, or None when the matrix is not safely positive definite."""
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return None
    diag = np.diagonal(chol)
    # (max/min diag)**2 lower-bounds the condition number of ``mat``.
    if (diag.max() / diag.min()) ** 2 > COND_LIMIT:
        return None
    return scipy.linalg.cho_solve((chol, True), rhs, check_finite=False)


def _solve(mat: np.ndarray, rhs: np.ndarray, solver: str) -> np.ndarray:
    if solver == "pseudo":
        return _pseudo_solve(mat, rhs)
    if solver == "cholesky":
        out = _factor_solve(mat, rhs)
        if out is None:
            raise np.linalg.LinAlgError("matrix not positive definite")
        return out
    if solver == "auto":
        out = _factor_solve(mat, rhs)
        return _pseudo_solve(mat, rhs) if out is None else out
    raise ValueError(f"unknown solver {solver!r}")


def conditional_variance(model: LinearGaussianModel, j: int, *,
                         solver: str = "auto") -> float:
    """Conditional variance of the output given the inputs in mask ``j``.

    Singular ``gamma[u, u]`` blocks are handled through the symmetric
    generalized inverse; tiny negative round-off is clamped to zero.

    Parameters
    ----------
    model : LinearGaussianModel
    j : int
        Subset bitmask in ``[0, 2**p)``.
    solver : {"auto", "cholesky", "pseudo"}
        "auto" tries a positive-definite factorization and falls back to the
        generalized inverse; the other values force one path (used for
        cross-checks).
    """
    p = model.p
    if not 0 <= j < (1 << p):
        raise ValueError(f"mask {j} outside [0:2**{p}-1]")
    if j == 0:
        return float(model.beta @ model.gamma @ model.beta)
    if j == subsets.full_mask(p):
        return 0.0

    sel = (j >> np.arange(p)) & 1
    u_idx = np.flatnonzero(sel)
    r_idx = np.flatnonzero(sel == 0)
    beta_r = model.beta[r_idx]
    gamma = model.gamma
    t = gamma[np.ix_(u_idx, r_idx)] @ beta_r
    q = float(beta_r @ gamma[np.ix_(r_idx, r_idx)] @ beta_r)
    q -= float(t @ _solve(gamma[np.ix_(u_idx, u_idx)], t, solver))
    if q < 0.0:
        var_y = float(model.beta @ model.gamma @ model.beta)
        if q < -NEG_WARN_FACTOR * var_y:
            warnings.warn(
                f"conditional variance {q:.3e} for mask {j} clamped to 0; "
                "the covariance appears badly conditioned",
                RuntimeWarning,
                stacklevel=2,
            )
        q = 0.0
    return q


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        raw = os.environ.get(THREADS_ENV_VAR, "0")
        try:
            threads = int(raw)
        except ValueError:
            threads = 0
    if threads < 0:
        threads = 0
    if threads == 0:
        # Auto. Per-entry work is interpreter-bound for the matrix sizes the
        # cap allows, so a single worker is the fastest safe default.
        return 1
    return threads


def all_conditional_variances(model: LinearGaussianModel, *,
                              threads: int | None = None) -> CondVarTable:
    """Table of conditional variances for every subset mask of ``[1:p]``.

    Entries are evaluated independently, optionally across ``threads``
    workers (``None`` reads the ``SHAPLEY_LG_THREADS`` environment variable),
    and the result is identical for any worker count.
    """
    p = model.p
    subsets.check_lattice_cap(p)
    size = 1 << p
    values = np.empty(size)
    values[0] = total_variance(model)
    values[size - 1] = 0.0

    def fill(lo: int, hi: int) -> None:
        for j in range(lo, hi):
            values[j] = conditional_variance(model, j)

    n_workers = _resolve_threads(threads)
    if n_workers <= 1 or size < 4:
        fill(1, size - 1)
    else:
        bounds = np.linspace(1, size - 1, n_workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(fill, int(bounds[w]), int(bounds[w + 1]))
                for w in range(n_workers)
            ]
            for fut in futures:
                fut.result()
    return CondVarTable(values=values, var_y=float(values[0]))
