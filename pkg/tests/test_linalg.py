import itertools
import math

import numpy as np
import pytest

from quantile_kaczmarz.errors import (
    NoConvergenceError,
    ShapeError,
    TooManySubsetsError,
    ZeroRowError,
)
from quantile_kaczmarz.linalg import (
    restricted_min_sv_bruteforce,
    restricted_min_sv_sampled,
    row_normalize,
    sigma_max_sq,
    sigma_min_sq,
)

SQRT2 = math.sqrt(2.0)


def worked_4x2():
    return np.array([[1.0, 0.0], [0.0, 1.0], [1 / SQRT2, 1 / SQRT2], [1 / SQRT2, -1 / SQRT2]])


def unit_rows(rng, m, n):
    a = rng.standard_normal((m, n))
    return a / np.linalg.norm(a, axis=1, keepdims=True)


class TestRowNormalize:
    def test_three_four_five(self):
        out = row_normalize([[3.0, 4.0]])
        np.testing.assert_allclose(out, [[0.6, 0.8]], rtol=0, atol=1e-15)

    def test_identity_unchanged(self):
        eye = np.eye(3)
        np.testing.assert_array_equal(row_normalize(eye), eye)

    def test_zero_row_raises(self):
        with pytest.raises(ZeroRowError) as exc:
            row_normalize([[1.0, 0.0], [0.0, 0.0]])
        assert exc.value.row_index == 1

    def test_unit_norms_and_directions(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((20, 6)) * 37.0
        out = row_normalize(a)
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)
        cosines = np.sum(out * a, axis=1) / np.linalg.norm(a, axis=1)
        np.testing.assert_allclose(cosines, 1.0, atol=1e-12)


class TestSigmaMaxSq:
    def test_identity(self):
        assert sigma_max_sq(np.eye(2)) == pytest.approx(1.0, abs=1e-12)

    def test_duplicated_row(self):
        assert sigma_max_sq([[1.0, 0.0], [1.0, 0.0]]) == pytest.approx(2.0, abs=1e-12)

    def test_worked_4x2_gram_is_twice_identity(self):
        m = worked_4x2()
        np.testing.assert_allclose(m.T @ m, 2.0 * np.eye(2), atol=1e-15)
        assert sigma_max_sq(m) == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_dense_eigensolver(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((6, 3))
        expected = np.linalg.eigvalsh(a.T @ a)[-1]
        assert sigma_max_sq(a, tol=1e-14, max_iter=100000) == pytest.approx(expected, rel=1e-8)

    def test_closed_form_2x2(self):
        # rows e1 and (e1+e2)/sqrt(2): Gram eigenvalues 1 +/- sqrt(2)/2
        a = np.array([[1.0, 0.0], [1 / SQRT2, 1 / SQRT2]])
        assert sigma_max_sq(a, tol=1e-14, max_iter=100000) == pytest.approx(
            1 + SQRT2 / 2, rel=1e-8
        )

    def test_no_convergence_budget(self):
        a = np.array([[1.0, 0.0], [0.6, 0.8]])
        with pytest.raises(NoConvergenceError):
            sigma_max_sq(a, tol=1e-15, max_iter=1)

    def test_zero_matrix(self):
        assert sigma_max_sq(np.zeros((3, 2))) == 0.0


class TestSigmaMinSq:
    def test_identity(self):
        assert sigma_min_sq(np.eye(2)) == pytest.approx(1.0, abs=1e-12)

    def test_rank_deficient(self):
        assert sigma_min_sq([[1.0, 0.0], [1.0, 0.0]]) == pytest.approx(0.0, abs=1e-12)

    def test_closed_form(self):
        a = np.array([[1.0, 0.0], [1 / SQRT2, 1 / SQRT2]])
        assert sigma_min_sq(a) == pytest.approx(1 - SQRT2 / 2, rel=1e-10)

    def test_wide_raises(self):
        with pytest.raises(ShapeError):
            sigma_min_sq(np.ones((2, 3)))


class TestRestrictedBruteforce:
    def test_worked_4x2_pairs(self):
        summary = restricted_min_sv_bruteforce(worked_4x2(), 2)
        assert summary.sigma_restricted_min_sq == pytest.approx(1 - SQRT2 / 2, rel=1e-10)
        assert summary.exact is True
        assert summary.subsets_examined == 6
        assert summary.restricted_fraction == pytest.approx(0.5)

    def test_parallel_pair_is_singular(self):
        a = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        summary = restricted_min_sv_bruteforce(a, 2)
        assert summary.sigma_restricted_min_sq == pytest.approx(0.0, abs=1e-12)

    def test_orthonormal_full_subset(self):
        summary = restricted_min_sv_bruteforce(np.eye(3), 3)
        assert summary.sigma_restricted_min_sq == pytest.approx(1.0, abs=1e-12)
        assert summary.subsets_examined == 1

    def test_cap_exceeded(self):
        rng = np.random.default_rng(1)
        with pytest.raises(TooManySubsetsError):
            restricted_min_sv_bruteforce(unit_rows(rng, 30, 2), 15)

    def test_bad_subset_size(self):
        with pytest.raises(ShapeError):
            restricted_min_sv_bruteforce(np.eye(3), 1)  # k < n

    @pytest.mark.parametrize("seed", range(5))
    def test_against_svd_enumeration_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        a = unit_rows(rng, 7, 2)
        k = 3
        oracle = min(
            np.linalg.svd(a[list(idx)], compute_uv=False)[-1] ** 2
            for idx in itertools.combinations(range(7), k)
        )
        summary = restricted_min_sv_bruteforce(a, k)
        assert summary.sigma_restricted_min_sq == pytest.approx(oracle, rel=1e-10, abs=1e-12)

    def test_never_exceeds_any_subset(self):
        rng = np.random.default_rng(7)
        a = unit_rows(rng, 8, 3)
        summary = restricted_min_sv_bruteforce(a, 4)
        for idx in itertools.combinations(range(8), 4):
            assert sigma_min_sq(a[list(idx)]) >= summary.sigma_restricted_min_sq - 1e-12

    def test_restricted_below_sigma_max(self):
        rng = np.random.default_rng(8)
        a = unit_rows(rng, 9, 3)
        summary = restricted_min_sv_bruteforce(a, 5)
        assert summary.sigma_restricted_min_sq <= summary.sigma_max_sq


class TestRestrictedSampled:
    def test_full_subset_equals_sigma_min(self):
        rng = np.random.default_rng(2)
        a = unit_rows(rng, 6, 3)
        summary = restricted_min_sv_sampled(a, 6, samples=3, seed=0)
        assert summary.sigma_restricted_min_sq == pytest.approx(sigma_min_sq(a), rel=1e-12)
        assert summary.exact is False

    def test_finds_singular_pair(self):
        a = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        summary = restricted_min_sv_sampled(a, 2, samples=50, seed=3)
        assert summary.sigma_restricted_min_sq == pytest.approx(0.0, abs=1e-12)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(4)
        a = unit_rows(rng, 10, 3)
        one = restricted_min_sv_sampled(a, 5, samples=20, seed=11)
        two = restricted_min_sv_sampled(a, 5, samples=20, seed=11)
        assert one == two

    @pytest.mark.parametrize("seed", range(4))
    def test_never_undershoots_bruteforce(self, seed):
        rng = np.random.default_rng(200 + seed)
        a = unit_rows(rng, 9, 2)
        exact = restricted_min_sv_bruteforce(a, 4).sigma_restricted_min_sq
        estimate = restricted_min_sv_sampled(a, 4, samples=10, seed=seed)
        assert estimate.sigma_restricted_min_sq >= exact - 1e-12


class TestMonotonicity:
    def test_sigma_min_grows_with_rows(self):
        rng = np.random.default_rng(5)
        a = unit_rows(rng, 8, 3)
        order = list(range(8))
        for size in range(3, 8):
            smaller = sigma_min_sq(a[order[:size]])
            larger = sigma_min_sq(a[order[: size + 1]])
            assert larger >= smaller - 1e-10


class TestRowSumBounds:
    """Deterministic bounds on selected-row sums, exhaustively over subsets."""

    @pytest.mark.parametrize("seed", range(10))
    def test_inner_product_and_norm_sum(self, seed):
        rng = np.random.default_rng(300 + seed)
        m, n = int(rng.integers(2, 9)), int(rng.integers(1, 5))
        a = unit_rows(rng, m, n)
        x = rng.standard_normal(n)
        smax = math.sqrt(np.linalg.eigvalsh(a.T @ a)[-1])
        inner = np.abs(a @ x)
        for mask in range(1, 2**m):
            idx = [i for i in range(m) if mask >> i & 1]
            size = len(idx)
            assert inner[idx].sum() <= smax * math.sqrt(size) * np.linalg.norm(x) + 1e-10
            assert np.sum(a[idx].sum(axis=0) ** 2) <= smax**2 * size + 1e-10
