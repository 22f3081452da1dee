"""Dense row-space primitives.

Row normalization, extremal singular values of the row Gram matrix, and the
restricted smallest singular value over row subsets of a fixed size -- the
quantity that controls how badly conditioned an accepted block of rows can be.
Everything here is a pure function of its inputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NoConvergenceError,
    ShapeError,
    TooManySubsetsError,
    ZeroRowError,
)

# Exhaustive enumeration refuses to start above this many subsets; callers
# fall back to the sampled estimator instead of silently degrading exactness.
SUBSET_ENUMERATION_CAP = 2_000_000

_ZERO_ROW_FLOOR = 1e-300
_EIG_CHUNK = 4096


def as_matrix(matrix) -> np.ndarray:
    """Validate and return ``matrix`` as a 2-D float64 array.

    Raises
    ------
    ShapeError
        If the input is not a 2-D array with at least one row and one column,
        or contains non-finite entries.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    m, n = a.shape
    if m < 1 or n < 1:
        raise ShapeError(f"matrix must be at least 1x1, got {m}x{n}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("matrix entries must be finite")
    return a


def row_norms(matrix) -> np.ndarray:
    return np.linalg.norm(as_matrix(matrix), axis=1)


def row_normalize(matrix) -> np.ndarray:
    """Scale every row to unit Euclidean norm, preserving row directions.

    Raises
    ------
    ZeroRowError
        If any row norm falls below 1e-300; such a row has no direction.
    """
    a = as_matrix(matrix)
    norms = np.linalg.norm(a, axis=1)
    bad = np.flatnonzero(norms < _ZERO_ROW_FLOOR)
    if bad.size:
        raise ZeroRowError(int(bad[0]))
    return a / norms[:, None]


def is_row_normalized(matrix, tol: float = 1e-9) -> bool:
    return bool(np.max(np.abs(row_norms(matrix) - 1.0)) <= tol)


def gram(matrix) -> np.ndarray:
    a = as_matrix(matrix)
    return a.T @ a


def sigma_max_sq(matrix, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of ``matrix.T @ matrix`` by power iteration.

    The iteration runs on the n x n Gram matrix and starts from the
    normalized all-ones vector so that repeated calls are reproducible.  If
    the Rayleigh quotient stagnates at zero (the start vector lies in the
    kernel), it restarts once from a fixed seeded random vector.  Convergence
    is declared when the relative change of the Rayleigh quotient drops
    below ``tol``.

    Raises
    ------
    NoConvergenceError
        If the relative change still exceeds ``tol`` after ``max_iter``
        sweeps.
    """
    if tol <= 0:
        raise ShapeError("tol must be positive")
    g = gram(matrix)
    n = g.shape[0]

    def iterate(v0: np.ndarray) -> float | None:
        v = v0 / np.linalg.norm(v0)
        lam = float(v @ (g @ v))
        for _ in range(max_iter):
            w = g @ v
            norm_w = float(np.linalg.norm(w))
            if norm_w == 0.0:
                # v is in the kernel: stagnation at zero.
                return 0.0 if lam == 0.0 else lam
            v = w / norm_w
            lam_new = float(v @ (g @ v))
            if abs(lam_new - lam) <= tol * max(abs(lam_new), _ZERO_ROW_FLOOR):
                return lam_new
            lam = lam_new
        return None

    lam = iterate(np.ones(n))
    if lam == 0.0:
        # All-ones start may be orthogonal to the range; retry from a fixed
        # random direction before trusting the zero.
        rng = np.random.default_rng(0x5EED)
        lam = iterate(rng.standard_normal(n))
    if lam is None:
        raise NoConvergenceError(
            f"power iteration did not converge in {max_iter} sweeps (tol={tol})"
        )
    return max(lam, 0.0)


def sigma_min_sq(matrix) -> float:
    """Smallest eigenvalue of ``matrix.T @ matrix`` for a tall matrix.

    Uses a dense symmetric eigendecomposition of the n x n Gram matrix;
    sized for n up to a few hundred.  The result is clipped at zero since
    the Gram matrix is positive semi-definite.

    Raises
    ------
    ShapeError
        If the matrix has fewer rows than columns.
    """
    a = as_matrix(matrix)
    m, n = a.shape
    if m < n:
        raise ShapeError(f"need rows >= cols, got {m}x{n}")
    w = np.linalg.eigvalsh(a.T @ a)
    return float(max(w[0], 0.0))


@dataclass(frozen=True)
class SpectralSummary:
    """Spectral quantities of a matrix and its size-k row submatrices.

    ``exact`` is True only when every subset of the prescribed size was
    enumerated; sampled estimates always carry ``exact=False`` and can only
    overestimate the true restricted minimum.
    """

    sigma_max_sq: float
    sigma_restricted_min_sq: float
    restricted_fraction: float
    exact: bool
    subsets_examined: int


def _min_over_subsets(a: np.ndarray, subsets: np.ndarray) -> float:
    # subsets: (chunk, k) integer array of row indices
    sub = a[subsets]                       # (chunk, k, n)
    grams = np.einsum("ckn,ckm->cnm", sub, sub)
    eigs = np.linalg.eigvalsh(grams)       # ascending
    return float(max(np.min(eigs[:, 0]), 0.0))


def _validate_subset_size(a: np.ndarray, k: int) -> None:
    m, n = a.shape
    if not n <= k <= m:
        raise ShapeError(f"subset size k={k} must satisfy cols <= k <= rows ({n} <= k <= {m})")


def restricted_min_sv_bruteforce(
    matrix, k: int, cap: int = SUBSET_ENUMERATION_CAP
) -> SpectralSummary:
    """Exact infimum of ``sigma_min_sq`` over all row subsets of size ``k``.

    Enumerates every subset, so the binomial count must stay below ``cap``.

    Raises
    ------
    TooManySubsetsError
        If ``C(rows, k)`` exceeds ``cap``; callers should fall back to
        :func:`restricted_min_sv_sampled`.
    """
    a = as_matrix(matrix)
    m, _ = a.shape
    _validate_subset_size(a, k)
    total = math.comb(m, k)
    if total > cap:
        raise TooManySubsetsError(
            f"C({m},{k}) = {total} subsets exceeds the enumeration cap {cap}"
        )
    best = np.inf
    combos = itertools.combinations(range(m), k)
    while True:
        chunk = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, _EIG_CHUNK)),
            dtype=np.intp,
        )
        if chunk.size == 0:
            break
        best = min(best, _min_over_subsets(a, chunk.reshape(-1, k)))
    return SpectralSummary(
        sigma_max_sq=sigma_max_sq(a),
        sigma_restricted_min_sq=best,
        restricted_fraction=k / m,
        exact=True,
        subsets_examined=total,
    )


def restricted_min_sv_sampled(
    matrix, k: int, samples: int, seed: int
) -> SpectralSummary:
    """Minimum of ``sigma_min_sq`` over ``samples`` uniformly drawn size-k subsets.

    A heuristic stand-in for the exhaustive infimum when the subset count is
    combinatorially out of reach.  Deterministic given ``seed``; the estimate
    never undershoots the exact value.
    """
    a = as_matrix(matrix)
    m, _ = a.shape
    _validate_subset_size(a, k)
    if samples < 1:
        raise ShapeError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    best = np.inf
    done = 0
    while done < samples:
        count = min(_EIG_CHUNK, samples - done)
        idx = np.empty((count, k), dtype=np.intp)
        for i in range(count):
            idx[i] = rng.choice(m, size=k, replace=False)
        best = min(best, _min_over_subsets(a, idx))
        done += count
    return SpectralSummary(
        sigma_max_sq=sigma_max_sq(a),
        sigma_restricted_min_sq=best,
        restricted_fraction=k / m,
        exact=False,
        subsets_examined=samples,
    )
