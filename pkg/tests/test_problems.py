import itertools
import json
import math

import numpy as np
import pytest

from quantile_kaczmarz.errors import SpecError, ZeroBaselineError
from quantile_kaczmarz.problems import (
    CorruptedSystem,
    CorruptionSpec,
    GeneratorSpec,
    generate,
    generate_adversarial_duplicate,
    load_system,
    relative_error,
    save_system,
)


def spec(family="gaussian", m=120, n=10, seed=0, beta=0.0, **corruption):
    return GeneratorSpec(
        family=family, m=m, n=n, seed=seed,
        corruption=CorruptionSpec(beta=beta, **corruption),
    )


class TestGenerate:
    def test_deterministic_within_build(self):
        one = generate(spec(seed=42, beta=0.3))
        two = generate(spec(seed=42, beta=0.3))
        np.testing.assert_array_equal(one.matrix, two.matrix)
        np.testing.assert_array_equal(one.x_star, two.x_star)
        np.testing.assert_array_equal(one.b_observed, two.b_observed)
        np.testing.assert_array_equal(one.corrupted_indices, two.corrupted_indices)

    def test_no_corruption_means_equal_rhs(self):
        system = generate(spec(m=100, n=10, beta=0.0))
        np.testing.assert_array_equal(system.b_observed, system.b_true)
        assert system.corrupted_indices.size == 0

    def test_floor_of_beta_m_rows_corrupted(self):
        system = generate(spec(m=100, n=10, beta=0.2))
        assert system.corrupted_indices.size == 20
        system = generate(spec(m=103, n=10, beta=0.2))
        assert system.corrupted_indices.size == 20  # floor(20.6)

    def test_consistency_and_corruption_support(self):
        system = generate(spec(m=200, n=15, seed=9, beta=0.25))
        system.validate()
        assert np.max(np.abs(system.matrix @ system.x_star - system.b_true)) <= 1e-10

    def test_rows_unit_norm(self):
        for family in ("gaussian", "coherent", "sphere"):
            system = generate(spec(family=family, seed=3))
            np.testing.assert_allclose(
                np.linalg.norm(system.matrix, axis=1), 1.0, atol=1e-12
            )

    def test_magnitudes_within_range(self):
        system = generate(spec(m=400, n=10, seed=5, beta=0.5))
        offsets = (system.b_observed - system.b_true)[system.corrupted_indices]
        assert np.all(np.abs(offsets) <= 100.0)
        assert np.all(offsets != 0.0)

    def test_custom_magnitude_range(self):
        system = generate(spec(m=200, n=5, seed=6, beta=0.5,
                               magnitude_low=2.0, magnitude_high=3.0))
        offsets = (system.b_observed - system.b_true)[system.corrupted_indices]
        assert np.all((offsets >= 2.0) & (offsets <= 3.0))

    def test_corruption_stream_independent_of_matrix(self):
        clean = generate(spec(seed=11, beta=0.0))
        dirty = generate(spec(seed=11, beta=0.4))
        np.testing.assert_array_equal(clean.matrix, dirty.matrix)
        np.testing.assert_array_equal(clean.x_star, dirty.x_star)

    def test_given_indices_placement(self):
        indices = (3, 7, 11)
        system = generate(
            GeneratorSpec(
                family="gaussian", m=50, n=5, seed=1,
                corruption=CorruptionSpec(beta=0.0, placement="given-indices", indices=indices),
            )
        )
        np.testing.assert_array_equal(system.corrupted_indices, indices)
        assert system.beta == pytest.approx(3 / 50)

    def test_coherent_rows_strongly_aligned(self):
        # sample-mean of pairwise inner products over 10^4 pairs must exceed 1/2
        system = generate(spec(family="coherent", m=1000, n=50, seed=2))
        rng = np.random.default_rng(0)
        i = rng.integers(0, 1000, size=10_000)
        j = rng.integers(0, 1000, size=10_000)
        keep = i != j
        dots = np.sum(system.matrix[i[keep]] * system.matrix[j[keep]], axis=1)
        assert dots.mean() > 0.5

    def test_placement_uniform_over_frozen_batch(self):
        # 200 seeds, m=50, beta=0.2: every index corrupted 40 +/- 10 times
        # (frequency 0.2 +/- 0.05).  Frozen batch; counts checked in integers.
        counts = np.zeros(50, dtype=int)
        for seed in range(20000, 20200):
            system = generate(spec(m=50, n=5, seed=seed, beta=0.2))
            counts[system.corrupted_indices] += 1
        assert counts.sum() == 200 * 10
        assert np.all(np.abs(counts - 40) <= 10)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(m=10, n=10),                     # not overdetermined
            dict(m=10, n=20),
            dict(beta=1.0),
            dict(magnitude_low=5.0, magnitude_high=5.0),
            dict(family="pareto"),
        ],
    )
    def test_spec_errors(self, kwargs):
        base = dict(family="gaussian", m=100, n=10, seed=0, beta=0.1)
        base.update(kwargs)
        with pytest.raises(SpecError):
            generate(spec(**base))

    def test_adversarial_family_needs_dedicated_constructor(self):
        with pytest.raises(SpecError):
            generate(GeneratorSpec(family="adversarial-duplicate", m=100, n=10, seed=0))


class TestAdversarialDuplicate:
    def test_default_shape_matches_construction(self):
        system, x0 = generate_adversarial_duplicate(seed=0)
        assert system.matrix.shape == (1250, 100)
        assert system.corrupted_indices.size == 250

    def test_duplicate_rows_bit_identical(self):
        system, _ = generate_adversarial_duplicate(n=20, clean_rows=50, dup_rows=10, seed=1)
        dup = system.matrix[50:]
        for row in dup:
            np.testing.assert_array_equal(row, dup[0])

    def test_start_lies_on_target_hyperplane(self):
        system, x0 = generate_adversarial_duplicate(n=30, clean_rows=40, dup_rows=8,
                                                    target=500.0, seed=2)
        a = system.matrix[40]
        assert abs(a @ x0 - 500.0) <= 1e-8

    def test_start_is_projection_of_all_ones(self):
        system, x0 = generate_adversarial_duplicate(n=25, clean_rows=30, dup_rows=5,
                                                    target=77.0, seed=3)
        a = system.matrix[30]
        # x0 - ones is parallel to a, and x0 satisfies the hyperplane equation
        residual_dir = x0 - np.ones(25)
        cross = residual_dir - (residual_dir @ a) * a
        assert np.linalg.norm(cross) <= 1e-10

    def test_observed_entries_replaced_by_target(self):
        system, _ = generate_adversarial_duplicate(n=10, clean_rows=20, dup_rows=4,
                                                   target=-3.5, seed=4)
        np.testing.assert_array_equal(system.b_observed[20:], -3.5)
        assert np.all(system.b_observed[:20] == system.b_true[:20])

    def test_degenerate_counts_rejected(self):
        with pytest.raises(SpecError):
            generate_adversarial_duplicate(n=1)
        with pytest.raises(SpecError):
            generate_adversarial_duplicate(clean_rows=0)
        with pytest.raises(SpecError):
            generate_adversarial_duplicate(dup_rows=0)


class TestRelativeError:
    def setup_method(self):
        self.system = generate(spec(m=30, n=4, seed=8))
        self.x0 = np.zeros(4)

    def test_at_solution(self):
        assert relative_error(self.system.x_star, self.system, self.x0) == 0.0

    def test_at_start(self):
        assert relative_error(self.x0, self.system, self.x0) == pytest.approx(1.0)

    def test_midpoint(self):
        mid = 0.5 * (self.x0 + self.system.x_star)
        assert relative_error(mid, self.system, self.x0) == pytest.approx(0.5)

    def test_zero_baseline(self):
        with pytest.raises(ZeroBaselineError):
            relative_error(self.x0, self.system, self.system.x_star)


class TestRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        original = generate(spec(m=60, n=7, seed=13, beta=0.3))
        gen_spec = spec(m=60, n=7, seed=13, beta=0.3)
        save_system(original, tmp_path / "sys", spec=gen_spec)
        loaded = load_system(tmp_path / "sys")
        np.testing.assert_array_equal(loaded.matrix, original.matrix)
        np.testing.assert_array_equal(loaded.b_observed, original.b_observed)
        np.testing.assert_array_equal(loaded.x_star, original.x_star)
        np.testing.assert_array_equal(loaded.corrupted_indices, original.corrupted_indices)
        np.testing.assert_array_equal(loaded.b_true, original.b_true)
        assert loaded.beta == original.beta
        loaded.validate()

    def test_metadata_contents(self, tmp_path):
        original = generate(spec(m=20, n=3, seed=2, beta=0.5))
        save_system(original, tmp_path / "sys", spec=spec(m=20, n=3, seed=2, beta=0.5))
        meta = json.loads((tmp_path / "sys" / "metadata.json").read_text())
        assert meta["m"] == 20 and meta["n"] == 3
        assert meta["spec"]["seed"] == 2
        assert len(meta["corrupted_indices"]) == 10

    def test_identical_saves_are_byte_identical(self, tmp_path):
        system = generate(spec(m=25, n=4, seed=3, beta=0.2))
        save_system(system, tmp_path / "a")
        save_system(system, tmp_path / "b")
        for name in ("matrix.csv", "b_observed.csv", "metadata.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
