"""Test-system construction.

Random overdetermined systems with unit-norm rows (incoherent Gaussian rows
or highly coherent nonnegative rows), a sparse additive corruption model for
the right-hand side, and the adversarial duplicate-row construction that
defeats projective block updates.  Generation is deterministic for a fixed
seed within one build: each concern (matrix entries, solution, corruption
placement, corruption magnitudes) draws from its own derived stream, so
toggling the corruption never perturbs the matrix.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import SpecError, ZeroBaselineError
from .linalg import row_normalize

FAMILIES = ("gaussian", "coherent", "sphere", "adversarial-duplicate")
PLACEMENTS = ("uniform", "given-indices")

_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CorruptionSpec:
    """Sparse corruption model: a fraction ``beta`` of rows gets an additive
    offset drawn uniformly from [magnitude_low, magnitude_high]."""

    beta: float = 0.0
    magnitude_low: float = -100.0
    magnitude_high: float = 100.0
    placement: str = "uniform"
    indices: tuple[int, ...] | None = None


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    m: int
    n: int
    seed: int
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)


@dataclass(frozen=True)
class CorruptedSystem:
    """A consistent system plus an observed right-hand side that differs from
    the consistent one exactly on ``corrupted_indices``."""

    matrix: np.ndarray
    x_star: np.ndarray
    b_true: np.ndarray
    b_observed: np.ndarray
    corrupted_indices: np.ndarray
    beta: float

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def corrupted_mask(self) -> np.ndarray:
        mask = np.zeros(self.m, dtype=bool)
        mask[self.corrupted_indices] = True
        return mask

    def validate(self, atol: float = 1e-10) -> None:
        if np.max(np.abs(self.matrix @ self.x_star - self.b_true), initial=0.0) > atol:
            raise SpecError("b_true is not consistent with x_star")
        diff = np.flatnonzero(self.b_observed != self.b_true)
        if not np.array_equal(np.sort(diff), np.sort(self.corrupted_indices)):
            raise SpecError("b_observed differs from b_true off the corrupted index set")


def _validate_spec(spec: GeneratorSpec) -> None:
    if spec.family not in FAMILIES:
        raise SpecError(f"unknown family {spec.family!r}; expected one of {FAMILIES}")
    if not (spec.m > spec.n >= 1):
        raise SpecError(f"need m > n >= 1, got m={spec.m}, n={spec.n}")
    c = spec.corruption
    if not 0.0 <= c.beta < 1.0:
        raise SpecError(f"beta must lie in [0, 1), got {c.beta}")
    if c.magnitude_low >= c.magnitude_high:
        raise SpecError("magnitude_low must be strictly below magnitude_high")
    if c.placement not in PLACEMENTS:
        raise SpecError(f"unknown placement {c.placement!r}")
    if c.placement == "given-indices":
        if c.indices is None:
            raise SpecError("placement 'given-indices' requires indices")
        idx = np.asarray(c.indices, dtype=np.intp)
        if idx.size != len(set(map(int, idx))):
            raise SpecError("given indices must be unique")
        if idx.size and (idx.min() < 0 or idx.max() >= spec.m):
            raise SpecError("given indices out of range")


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(c) for c in children]


def generate(spec: GeneratorSpec) -> CorruptedSystem:
    """Build a corrupted system from a generator specification.

    Row families: ``gaussian``/``sphere`` draw i.i.d. standard-normal entries
    and normalize each row (equivalent to uniform directions on the sphere);
    ``coherent`` draws i.i.d. Uniform(0,1) entries and normalizes, producing
    nearly parallel rows.  The solution vector has standard-normal entries.
    Corruption offsets are drawn uniformly from the configured magnitude
    range and added to the consistent right-hand side on the chosen rows.
    """
    _validate_spec(spec)
    if spec.family == "adversarial-duplicate":
        raise SpecError(
            "use generate_adversarial_duplicate() for the duplicate-row construction"
        )
    rng_matrix, rng_xstar, rng_place, rng_mag = _streams(spec.seed, 4)

    if spec.family == "coherent":
        entries = rng_matrix.uniform(0.0, 1.0, size=(spec.m, spec.n))
    else:
        entries = rng_matrix.standard_normal((spec.m, spec.n))
    a = row_normalize(entries)

    x_star = rng_xstar.standard_normal(spec.n)
    b_true = a @ x_star

    c = spec.corruption
    count = int(np.floor(c.beta * spec.m))
    if c.placement == "given-indices":
        indices = np.sort(np.asarray(c.indices, dtype=np.intp))
        count = indices.size
    else:
        indices = np.sort(rng_place.permutation(spec.m)[:count])

    b_observed = b_true.copy()
    if indices.size:
        b_observed[indices] = b_observed[indices] + rng_mag.uniform(
            c.magnitude_low, c.magnitude_high, size=indices.size
        )
    return CorruptedSystem(
        matrix=a,
        x_star=x_star,
        b_true=b_true,
        b_observed=b_observed,
        corrupted_indices=indices,
        beta=indices.size / spec.m,
    )


def generate_adversarial_duplicate(
    n: int = 100,
    clean_rows: int = 1000,
    dup_rows: int = 250,
    target: float = 500.0,
    seed: int = 0,
) -> tuple[CorruptedSystem, np.ndarray]:
    """Duplicate-row construction that pins projective block updates.

    The system stacks ``clean_rows`` unit-norm Gaussian rows with
    ``dup_rows`` identical copies of one further unit-norm Gaussian row
    ``a``; the observed right-hand side on every copy is replaced by
    ``target``.  The returned start vector is the orthogonal projection of
    the all-ones vector onto the hyperplane {x : <a, x> = target}, so every
    duplicated row starts with residual zero.

    Returns the system together with that start vector.
    """
    if n < 2 or clean_rows < 1 or dup_rows < 1:
        raise SpecError("need n >= 2, clean_rows >= 1, dup_rows >= 1")
    rng_matrix, rng_xstar, rng_dup = _streams(seed, 3)

    clean = row_normalize(rng_matrix.standard_normal((clean_rows, n)))
    a_dup = row_normalize(rng_dup.standard_normal((1, n)))[0]
    matrix = np.vstack([clean, np.tile(a_dup, (dup_rows, 1))])
    m = clean_rows + dup_rows

    x_star = rng_xstar.standard_normal(n)
    b_true = matrix @ x_star
    b_observed = b_true.copy()
    b_observed[clean_rows:] = target
    indices = np.arange(clean_rows, m, dtype=np.intp)

    ones = np.ones(n)
    x0 = ones + (target - a_dup @ ones) * a_dup
    system = CorruptedSystem(
        matrix=matrix,
        x_star=x_star,
        b_true=b_true,
        b_observed=b_observed,
        corrupted_indices=indices,
        beta=dup_rows / m,
    )
    return system, x0


def relative_error(x, system: CorruptedSystem, x0) -> float:
    """Distance to the true solution, normalized by the starting distance."""
    x = np.asarray(x, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    base = float(np.linalg.norm(x0 - system.x_star))
    if base == 0.0:
        raise ZeroBaselineError("x0 equals the true solution; relative error undefined")
    return float(np.linalg.norm(x - system.x_star)) / base


# ---------------------------------------------------------------------------
# On-disk round trip: matrix.csv, b_observed.csv, metadata.json.  Floats are
# written with 17 significant digits so the decimal form round-trips exactly.

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_system(
    system: CorruptedSystem, directory, spec: GeneratorSpec | None = None
) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "matrix.csv", "w", encoding="utf-8") as fh:
        for row in system.matrix:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    with open(out / "b_observed.csv", "w", encoding="utf-8") as fh:
        for v in system.b_observed:
            fh.write(_fmt(v) + "\n")
    meta = {
        "format_version": _FORMAT_VERSION,
        "m": system.m,
        "n": system.n,
        "beta": system.beta,
        "corrupted_indices": [int(i) for i in system.corrupted_indices],
        "x_star": [float(v) for v in system.x_star],
        "spec": asdict(spec) if spec is not None else None,
    }
    with open(out / "metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def load_system(directory) -> CorruptedSystem:
    src = Path(directory)
    matrix = np.loadtxt(src / "matrix.csv", delimiter=",", ndmin=2)
    b_observed = np.loadtxt(src / "b_observed.csv", ndmin=1)
    with open(src / "metadata.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    x_star = np.asarray(meta["x_star"], dtype=float)
    indices = np.asarray(meta["corrupted_indices"], dtype=np.intp)
    # Uncorrupted entries of b_observed are the consistent values; only the
    # corrupted ones need recomputation from the stored solution.
    b_true = b_observed.copy()
    if indices.size:
        b_true[indices] = matrix[indices] @ x_star
    return CorruptedSystem(
        matrix=matrix,
        x_star=x_star,
        b_true=b_true,
        b_observed=b_observed,
        corrupted_indices=indices,
        beta=float(meta["beta"]),
    )
