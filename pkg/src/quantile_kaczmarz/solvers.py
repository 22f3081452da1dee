"""Iterative solvers for corrupted overdetermined systems.

Six methods behind one trace-producing entry point :func:`solve`:

- ``rk``: classical randomized Kaczmarz, one row projection per iteration.
- ``quantile-rk``: residual-quantile gated single-row projection; a sampled
  candidate row is used only if its absolute residual falls strictly below
  the quantile of a sampled subresidual.
- ``averaged-block``: uniformly weighted average of single-row projection
  directions over a randomly sampled block, scaled by a step size.
- ``quantile-averaged-block``: averaged step over every row whose absolute
  residual passes the quantile test on the full residual.
- ``sampled-quantile-averaged-block``: same, but quantile and accepted set
  are computed over a uniformly sampled subset of rows.
- ``quantile-projective-block``: least-squares projection onto the
  intersection of all accepted rows' hyperplanes via the pseudoinverse.

All step functions are pure; :func:`solve` owns the RNG stream, the stopping
rules, and the per-iteration trace.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DivergedError,
    DomainError,
    EmptyInputError,
    ShapeError,
)
from .linalg import is_row_normalized, sigma_max_sq
from .problems import CorruptedSystem

METHODS = (
    "rk",
    "quantile-rk",
    "averaged-block",
    "quantile-averaged-block",
    "sampled-quantile-averaged-block",
    "quantile-projective-block",
)
COMPARATORS = ("strict-below", "at-or-below")

DIVERGENCE_LIMIT = 1e12

_QUANTILE_METHODS = (
    "quantile-rk",
    "quantile-averaged-block",
    "sampled-quantile-averaged-block",
    "quantile-projective-block",
)


@dataclass(frozen=True)
class SolverConfig:
    """Method selector plus every tunable the six methods share.

    ``alpha`` may be a positive float or the string ``"auto"``, in which case
    the step size is resolved from the convergence-rate formulas (only
    supported for the averaged quantile methods).  ``t`` is the sample size
    for the sampled methods and defaults to the full row count; ``block_size``
    is required for ``averaged-block``.
    """

    method: str
    q: float = 0.7
    alpha: float | str = "auto"
    t: int | None = None
    block_size: int | None = None
    max_iters: int = 100
    stop_rel_error: float = 0.0
    comparator: str = "strict-below"
    seed: int = 0


@dataclass
class StepStats:
    quantile: float
    tau: np.ndarray  # accepted row indices; empty for a no-op step


@dataclass
class IterationTrace:
    """Per-iteration record of a solve plus the final iterate.

    Row ``k`` stores the quantile threshold used to produce iterate ``x_k``
    (i.e. the quantile of the residual at ``x_{k-1}``) and the relative error
    of ``x_k`` itself.  ``elapsed_ns`` is cumulative wall time and therefore
    monotone within a trace.
    """

    method: str
    q: float
    alpha: float
    alpha_source: str  # "explicit" | "auto-exact" | "auto-sampled" | "none"
    comparator: str
    seed: int
    base_error: float
    rel_error: list[float] = field(default_factory=list)
    quantile: list[float] = field(default_factory=list)
    tau_size: list[int] = field(default_factory=list)
    tau_corrupted: list[int] = field(default_factory=list)
    elapsed_ns: list[int] = field(default_factory=list)
    x_final: np.ndarray | None = None
    iterates: list[np.ndarray] | None = None

    @property
    def iterations(self) -> int:
        return len(self.rel_error)

    def config_dict(self) -> dict:
        return {
            "method": self.method,
            "q": self.q,
            "alpha": self.alpha,
            "alpha_source": self.alpha_source,
            "comparator": self.comparator,
            "seed": self.seed,
            "base_error": self.base_error,
            "iterations": self.iterations,
        }

    def write_csv(self, path, timing: str = "real") -> Path:
        """Write the trace in the ``iter,rel_error,quantile,tau_size,
        tau_corrupted,elapsed_ns`` schema.  ``timing="none"`` zeroes the
        elapsed column so identical runs produce identical bytes."""
        if timing not in ("real", "none"):
            raise ConfigError(f"timing must be 'real' or 'none', got {timing!r}")
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iter,rel_error,quantile,tau_size,tau_corrupted,elapsed_ns\n")
            for k in range(self.iterations):
                ns = self.elapsed_ns[k] if timing == "real" else 0
                fh.write(
                    f"{k + 1},{self.rel_error[k]!r},{self.quantile[k]!r},"
                    f"{self.tau_size[k]},{self.tau_corrupted[k]},{ns}\n"
                )
        return path

    def write_config_json(self, path) -> Path:
        path = Path(path)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.config_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


# ---------------------------------------------------------------------------
# Primitive operations

def quantile_of_multiset(values, q: float) -> float:
    """The ceil(q*S)-th smallest element of a multiset of S reals.

    Duplicates count; selection is 1-indexed, so ``q=1`` returns the maximum.
    Uses a partial sort, O(S) expected time.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise EmptyInputError("quantile of an empty multiset")
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    k = math.ceil(q * arr.size)
    return float(np.partition(arr, k - 1)[k - 1])


def residual(matrix, b, x) -> np.ndarray:
    """The signed distances b - matrix @ x."""
    a = np.asarray(matrix, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if a.ndim != 2 or b.shape != (a.shape[0],) or x.shape != (a.shape[1],):
        raise ShapeError(
            f"incompatible shapes: matrix {a.shape}, b {b.shape}, x {x.shape}"
        )
    return b - a @ x


def _accepted_mask(abs_residual: np.ndarray, threshold: float, comparator: str) -> np.ndarray:
    if comparator == "strict-below":
        return abs_residual < threshold
    if comparator == "at-or-below":
        return abs_residual <= threshold
    raise ConfigError(f"unknown comparator {comparator!r}")


def quantile_abk_step(
    matrix, b, x, q: float, alpha: float, comparator: str = "strict-below"
) -> tuple[np.ndarray, StepStats]:
    """One averaged step over the rows passing the full-residual quantile test.

    An empty accepted set (e.g. at the exact solution under the strict
    comparator) is a defined no-op, never an error.
    """
    r = matrix @ x - b
    abs_r = np.abs(r)
    threshold = quantile_of_multiset(abs_r, q)
    tau = np.flatnonzero(_accepted_mask(abs_r, threshold, comparator))
    if tau.size == 0:
        return x.copy(), StepStats(threshold, tau)
    x_next = x - (alpha / tau.size) * (matrix[tau].T @ r[tau])
    return x_next, StepStats(threshold, tau)


def sampled_qabk_step(
    matrix,
    b,
    x,
    q: float,
    t: int,
    alpha: float,
    rng: np.random.Generator,
    comparator: str = "strict-below",
) -> tuple[np.ndarray, StepStats]:
    """Averaged quantile step restricted to a uniform sample of ``t`` rows.

    Full-sample policy: when ``t`` equals the row count, the sample is the
    identity ordering, which makes the step bitwise identical to
    :func:`quantile_abk_step`.
    """
    m = matrix.shape[0]
    if t == m:
        return quantile_abk_step(matrix, b, x, q, alpha, comparator)
    sample = rng.choice(m, size=t, replace=False)
    r_s = matrix[sample] @ x - b[sample]
    abs_r = np.abs(r_s)
    threshold = quantile_of_multiset(abs_r, q)
    keep = _accepted_mask(abs_r, threshold, comparator)
    tau = sample[keep]
    if tau.size == 0:
        return x.copy(), StepStats(threshold, tau)
    x_next = x - (alpha / tau.size) * (matrix[tau].T @ r_s[keep])
    return x_next, StepStats(threshold, tau)


def _gram_solve(gram_matrix: np.ndarray, rhs: np.ndarray, ridge: float) -> np.ndarray:
    # Cholesky detects rank deficiency; the ridge keeps the projection
    # well-defined when accepted rows are linearly dependent.
    try:
        np.linalg.cholesky(gram_matrix)
    except np.linalg.LinAlgError:
        gram_matrix = gram_matrix + ridge * np.eye(gram_matrix.shape[0])
    return np.linalg.solve(gram_matrix, rhs)


def quantile_pbk_step(
    matrix,
    b,
    x,
    q: float,
    comparator: str = "strict-below",
    ridge: float = 0.0,
) -> tuple[np.ndarray, StepStats]:
    """Projective step onto the accepted rows' hyperplanes.

    Computes the least-norm pseudoinverse update through the smaller of the
    two Gram systems.  When the accepted submatrix has full row rank this is
    the exact projection onto {x : A_tau x = b_tau}; otherwise it lands on
    the least-squares affine set, with ``ridge`` regularizing a rank-deficient
    factorization.
    """
    r = matrix @ x - b
    abs_r = np.abs(r)
    threshold = quantile_of_multiset(abs_r, q)
    tau = np.flatnonzero(_accepted_mask(abs_r, threshold, comparator))
    if tau.size == 0:
        return x.copy(), StepStats(threshold, tau)
    sub = matrix[tau]
    gap = -r[tau]  # b_tau - A_tau x
    if tau.size <= matrix.shape[1]:
        y = _gram_solve(sub @ sub.T, gap, ridge)
        delta = sub.T @ y
    else:
        delta = _gram_solve(sub.T @ sub, sub.T @ gap, ridge)
    return x + delta, StepStats(threshold, tau)


def rk_step(matrix, b, x, rng: np.random.Generator) -> tuple[np.ndarray, StepStats]:
    """Project onto one uniformly sampled row (rows are unit-norm)."""
    i = int(rng.integers(matrix.shape[0]))
    ai = matrix[i]
    x_next = x - (ai @ x - b[i]) * ai
    return x_next, StepStats(math.nan, np.array([i], dtype=np.intp))


def quantile_rk_step(
    matrix, b, x, q: float, t: int, rng: np.random.Generator
) -> tuple[np.ndarray, StepStats]:
    """Quantile-gated single-row projection.

    The quantile is computed over a uniform sample of ``t`` rows, then one
    candidate row is sampled uniformly from the whole system and used only
    if its absolute residual lies strictly below that quantile.
    """
    m = matrix.shape[0]
    sample = np.arange(m) if t == m else rng.choice(m, size=t, replace=False)
    abs_r = np.abs(matrix[sample] @ x - b[sample])
    threshold = quantile_of_multiset(abs_r, q)
    j = int(rng.integers(m))
    gap = matrix[j] @ x - b[j]
    if abs(gap) < threshold:
        return x - gap * matrix[j], StepStats(threshold, np.array([j], dtype=np.intp))
    return x.copy(), StepStats(threshold, np.array([], dtype=np.intp))


def averaged_rbk_step(
    matrix, b, x, block, alpha: float
) -> tuple[np.ndarray, StepStats]:
    """Uniformly weighted averaged projection step over a given row block."""
    block = np.asarray(block, dtype=np.intp)
    if block.size == 0:
        raise ShapeError("block must be nonempty")
    r = matrix[block] @ x - b[block]
    x_next = x - (alpha / block.size) * (matrix[block].T @ r)
    return x_next, StepStats(math.nan, block)


# ---------------------------------------------------------------------------
# Driver

def _validate_config(config: SolverConfig, system: CorruptedSystem) -> int:
    if config.method not in METHODS:
        raise ConfigError(f"unknown method {config.method!r}; expected one of {METHODS}")
    if config.comparator not in COMPARATORS:
        raise ConfigError(f"unknown comparator {config.comparator!r}")
    if config.max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    if config.stop_rel_error < 0:
        raise ConfigError("stop_rel_error must be >= 0")
    m = system.m
    t = config.t if config.t is not None else m
    if not 1 <= t <= m:
        raise ConfigError(f"sample size t={t} must satisfy 1 <= t <= m={m}")
    if config.method in _QUANTILE_METHODS:
        if not 0.0 < config.q <= 1.0:
            raise ConfigError(f"q must lie in (0, 1], got {config.q}")
        scope = t if config.method in ("sampled-quantile-averaged-block", "quantile-rk") else m
        if config.q * scope < 1.0:
            raise ConfigError(f"q*{scope} must be >= 1, got {config.q * scope}")
    if config.method == "averaged-block":
        if config.block_size is None or not 1 <= config.block_size <= m:
            raise ConfigError("averaged-block requires 1 <= block_size <= m")
    if not isinstance(config.alpha, str):
        if not config.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {config.alpha}")
    elif config.alpha != "auto":
        raise ConfigError(f"alpha must be a positive float or 'auto', got {config.alpha!r}")
    return t


def _resolve_alpha(config: SolverConfig, system: CorruptedSystem) -> tuple[float, str]:
    if config.method in ("rk", "quantile-rk", "quantile-projective-block"):
        # Pure projection methods have no step size.
        return math.nan, "none"
    if not isinstance(config.alpha, str):
        return float(config.alpha), "explicit"
    if config.method not in ("quantile-averaged-block", "sampled-quantile-averaged-block"):
        raise ConfigError(f"alpha='auto' is not supported for method {config.method!r}")
    from .rates import resolve_alpha_auto  # local import: rates depends on solvers

    try:
        alpha, exact = resolve_alpha_auto(system, config.q, seed=config.seed)
    except Exception as exc:
        raise ConfigError(f"automatic step-size resolution failed: {exc}") from exc
    return alpha, "auto-exact" if exact else "auto-sampled"


def solve(
    system: CorruptedSystem,
    config: SolverConfig,
    x0,
    keep_iterates: bool = False,
) -> IterationTrace:
    """Run the configured method from ``x0`` and record a per-iteration trace.

    Stops after ``max_iters`` iterations or as soon as the relative error
    drops to ``stop_rel_error``.  Raises :class:`DivergedError` (carrying the
    partial trace) if the relative error exceeds 1e12 or turns non-finite.
    """
    a = system.matrix
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.n,):
        raise ConfigError(f"x0 must have shape ({system.n},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ConfigError("x0 must be finite")
    if not is_row_normalized(a):
        raise ConfigError("system matrix must have unit-norm rows")
    t = _validate_config(config, system)
    alpha, alpha_source = _resolve_alpha(config, system)

    base = float(np.linalg.norm(x0 - system.x_star))

    def rel(x: np.ndarray) -> float:
        err = float(np.linalg.norm(x - system.x_star))
        if base == 0.0:
            # Degenerate start at the exact solution: report the absolute
            # distance instead of 0/0.
            return err
        return err / base

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    corrupted = system.corrupted_mask()
    ridge = 0.0
    if config.method == "quantile-projective-block":
        ridge = 1e-12 * sigma_max_sq(a)

    trace = IterationTrace(
        method=config.method,
        q=config.q,
        alpha=alpha,
        alpha_source=alpha_source,
        comparator=config.comparator,
        seed=config.seed,
        base_error=base,
        iterates=[] if keep_iterates else None,
    )

    x = x0.copy()
    elapsed = 0
    for _ in range(config.max_iters):
        started = time.perf_counter_ns()
        if config.method == "rk":
            x_next, stats = rk_step(a, system.b_observed, x, rng)
        elif config.method == "quantile-rk":
            x_next, stats = quantile_rk_step(a, system.b_observed, x, config.q, t, rng)
        elif config.method == "averaged-block":
            block = rng.choice(system.m, size=config.block_size, replace=False)
            x_next, stats = averaged_rbk_step(a, system.b_observed, x, block, alpha)
        elif config.method == "quantile-averaged-block":
            x_next, stats = quantile_abk_step(
                a, system.b_observed, x, config.q, alpha, config.comparator
            )
        elif config.method == "sampled-quantile-averaged-block":
            x_next, stats = sampled_qabk_step(
                a, system.b_observed, x, config.q, t, alpha, rng, config.comparator
            )
        else:  # quantile-projective-block
            x_next, stats = quantile_pbk_step(
                a, system.b_observed, x, config.q, config.comparator, ridge
            )
        elapsed += time.perf_counter_ns() - started

        rel_k = rel(x_next)
        trace.rel_error.append(rel_k)
        trace.quantile.append(stats.quantile)
        trace.tau_size.append(int(stats.tau.size))
        trace.tau_corrupted.append(int(np.count_nonzero(corrupted[stats.tau])))
        trace.elapsed_ns.append(elapsed)
        if trace.iterates is not None:
            trace.iterates.append(x_next.copy())

        if not math.isfinite(rel_k) or rel_k > DIVERGENCE_LIMIT:
            trace.x_final = x_next
            raise DivergedError(
                f"relative error {rel_k!r} left the trust region at iteration "
                f"{trace.iterations}",
                trace=trace,
            )
        x = x_next
        if rel_k <= config.stop_rel_error:
            break

    trace.x_final = x
    return trace
