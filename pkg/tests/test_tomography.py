import math

import numpy as np
import pytest

from focktomo import linear_optics as lo
from focktomo import tomography as tg
from focktomo.combinatorics import enumerate_fock_basis, fock_dimension, min_configs

import oracles

BS_5050 = lo.InterferometerConfig(2, np.array([[1, 1], [1, -1]]) / math.sqrt(2))


def haar_configs(modes, count, seed):
    rng = np.random.default_rng(seed)
    return [lo.haar_random_unitary(modes, int(rng.integers(2**63))) for _ in range(count)]


class TestDensityMatrix:
    def test_factories_are_valid_states(self):
        basis = enumerate_fock_basis(2, 3)
        for rho in (
            tg.maximally_mixed(basis),
            tg.fock_projector(basis, (1, 1, 0)),
            tg.random_density_matrix(basis, 4),
            tg.random_density_matrix(basis, 4, rank=2),
            tg.pure_state(basis, np.arange(1, basis.dimension + 1)),
        ):
            assert abs(rho.matrix.trace() - 1.0) < 1e-12

    def test_validation_rejects_unphysical_matrices(self):
        basis = enumerate_fock_basis(1, 2)
        with pytest.raises(ValueError):
            tg.DensityMatrix(basis, np.array([[0.5, 0.5j], [0.5j, 0.5]]))
        with pytest.raises(ValueError):
            tg.DensityMatrix(basis, np.eye(2, dtype=complex))
        with pytest.raises(ValueError):
            tg.DensityMatrix(basis, np.diag([1.5, -0.5]).astype(complex))

    def test_json_round_trip(self):
        basis = enumerate_fock_basis(2, 2)
        rho = tg.random_density_matrix(basis, 8)
        restored = tg.DensityMatrix.from_json_dict(rho.to_json_dict())
        np.testing.assert_array_equal(restored.matrix, rho.matrix)


class TestTraceDistance:
    def test_extreme_values(self):
        basis = enumerate_fock_basis(1, 2)
        a = tg.fock_projector(basis, (1, 0))
        b = tg.fock_projector(basis, (0, 1))
        assert tg.trace_distance(a, a) == pytest.approx(0.0, abs=1e-14)
        assert tg.trace_distance(a, b) == pytest.approx(1.0)


class TestOutcomeProbabilities:
    def test_identity_config_gives_indicator(self):
        basis = enumerate_fock_basis(3, 2)
        rho = tg.fock_projector(basis, (3, 0))
        identity = lo.InterferometerConfig(2, np.eye(2))
        p = tg.outcome_probabilities(rho, identity)
        expected = np.zeros(basis.dimension)
        expected[basis.index_of((3, 0))] = 1.0
        np.testing.assert_allclose(p, expected, atol=1e-12)

    def test_hong_ou_mandel_distribution(self):
        basis = enumerate_fock_basis(2, 2)
        rho = tg.fock_projector(basis, (1, 1))
        p = tg.outcome_probabilities(rho, BS_5050)
        assert p[basis.index_of((1, 1))] == pytest.approx(0.0, abs=1e-12)
        assert p[basis.index_of((2, 0))] == pytest.approx(0.5, abs=1e-12)
        assert p[basis.index_of((0, 2))] == pytest.approx(0.5, abs=1e-12)

    def test_maximally_mixed_is_uniform_under_any_config(self):
        basis = enumerate_fock_basis(2, 3)
        rho = tg.maximally_mixed(basis)
        p = tg.outcome_probabilities(rho, lo.haar_random_unitary(3, 6))
        np.testing.assert_allclose(p, 1.0 / basis.dimension, atol=1e-12)

    def test_padding_into_more_measured_modes(self):
        basis = enumerate_fock_basis(2, 2)
        rho = tg.random_density_matrix(basis, 3)
        p = tg.outcome_probabilities(rho, lo.haar_random_unitary(4, 1))
        assert p.shape == (fock_dimension(2, 4),)
        assert p.sum() == pytest.approx(1.0, abs=1e-10)

    def test_rejects_too_few_modes(self):
        basis = enumerate_fock_basis(1, 3)
        rho = tg.maximally_mixed(basis)
        with pytest.raises(ValueError):
            tg.outcome_probabilities(rho, lo.haar_random_unitary(2, 0))


class TestSuperoperator:
    def test_matches_outcome_probabilities(self):
        for photons, modes, meas in [(1, 2, 2), (2, 2, 3), (2, 3, 3)]:
            basis = enumerate_fock_basis(photons, modes)
            rho = tg.random_density_matrix(basis, photons + meas)
            configs = haar_configs(meas, 3, seed=photons)
            superop = tg.build_superoperator(configs, photons, modes)
            stacked = np.concatenate(
                [tg.outcome_probabilities(rho, c) for c in configs]
            )
            assert np.abs(superop.apply(rho) - stacked).max() < 1e-12

    def test_single_photon_row_structure(self):
        config = lo.haar_random_unitary(2, 9)
        superop = tg.build_superoperator([config], 1, 2)
        assert superop.matrix.shape == (2, 4)
        u = lo.lift_unitary(config, 1).matrix
        for outcome in range(2):
            expected = [
                np.conj(u[a, outcome]) * u[b, outcome]
                for a in range(2)
                for b in range(2)
            ]
            np.testing.assert_allclose(superop.matrix[outcome], expected, atol=1e-14)

    def test_row_count_scales_with_configs(self):
        configs = haar_configs(3, 4, seed=2)
        superop = tg.build_superoperator(configs, 2, 2)
        assert superop.matrix.shape == (4 * fock_dimension(2, 3), 9)

    def test_rejects_inconsistent_mode_counts(self):
        configs = [lo.haar_random_unitary(2, 0), lo.haar_random_unitary(3, 1)]
        with pytest.raises(ValueError):
            tg.build_superoperator(configs, 1, 2)
        with pytest.raises(ValueError):
            tg.build_superoperator([], 1, 2)


class TestGramianRank:
    def test_single_config_single_photon_rank(self):
        # One config contributes D' rows that sum to vec(identity), so R
        # configs reach rank at most R*(D'-1)+1: here 2 of the required 4.
        superop = tg.build_superoperator([lo.haar_random_unitary(2, 3)], 1, 2)
        report = tg.gramian_rank(superop)
        assert superop.matrix.shape == (2, 4)
        assert report.rank == np.linalg.matrix_rank(superop.matrix) == 2

    def test_rank_cap_from_row_sums(self):
        # Each configuration's outcome rows sum to the vectorized identity.
        for photons, modes in [(1, 2), (2, 2), (2, 3)]:
            for count in (1, 2, 3):
                configs = haar_configs(modes, count, seed=photons + count)
                superop = tg.build_superoperator(configs, photons, modes)
                d_out = fock_dimension(photons, modes)
                cap = count * (d_out - 1) + 1
                assert tg.gramian_rank(superop).rank <= cap

    def test_three_haar_configs_complete_one_photon(self):
        configs = haar_configs(2, 3, seed=5)
        assert tg.is_complete(configs, 1, 2)

    def test_duplicated_configs_do_not_raise_rank(self):
        configs = haar_configs(2, 2, seed=8)
        base = tg.gramian_rank(tg.build_superoperator(configs, 1, 2)).rank
        doubled = tg.gramian_rank(
            tg.build_superoperator(configs + configs, 1, 2)
        ).rank
        assert doubled == base

    def test_identity_config_only_is_incomplete(self):
        identity = lo.InterferometerConfig(2, np.eye(2))
        assert not tg.is_complete([identity], 2, 2)

    def test_report_fields(self):
        superop = tg.build_superoperator(haar_configs(2, 2, seed=4), 1, 2)
        report = tg.gramian_rank(superop)
        assert report.sigma_max == report.singular_values[0]
        assert report.smallest_kept is not None
        assert "rank" in report.summary()


class TestCompletenessThresholds:
    @pytest.mark.parametrize("photons,modes", [(1, 2), (2, 2), (2, 3)])
    def test_threshold_at_the_counting_bound(self, photons, modes):
        bound = min_configs(photons, modes)
        configs = haar_configs(modes, bound, seed=31 * photons + modes)
        assert tg.is_complete(configs, photons, modes)
        assert not tg.is_complete(configs[: bound - 1], photons, modes)


class TestReconstruct:
    def test_exact_round_trip(self):
        basis = enumerate_fock_basis(2, 2)
        configs = haar_configs(2, 5, seed=77)
        superop = tg.build_superoperator(configs, 2, 2)
        for seed in range(5):
            rho = tg.random_density_matrix(basis, 100 + seed)
            records = tg.simulate_records(rho, configs)
            result = tg.reconstruct(superop, records)
            assert tg.trace_distance(result.projected, rho) < 1e-8
            assert tg.trace_distance(result.raw, rho.matrix) < 1e-8
            assert result.residual < 1e-10

    def test_projector_recovery_is_nearly_exact(self):
        basis = enumerate_fock_basis(2, 2)
        configs = haar_configs(2, 5, seed=13)
        superop = tg.build_superoperator(configs, 2, 2)
        rho = tg.fock_projector(basis, (1, 1))
        result = tg.reconstruct(superop, tg.simulate_records(rho, configs))
        assert tg.trace_distance(result.projected, rho) < 1e-10

    def test_matches_normal_equation_solution(self):
        basis = enumerate_fock_basis(2, 2)
        configs = haar_configs(2, 6, seed=19)
        superop = tg.build_superoperator(configs, 2, 2)
        rho = tg.random_density_matrix(basis, 55)
        p = superop.apply(rho)
        result = tg.reconstruct(superop, p)
        explicit = oracles.normal_equation_solve(superop.matrix, p.astype(complex))
        assert np.abs(result.raw.reshape(-1) - explicit).max() < 1e-8

    def test_sampled_error_shrinks_with_shots(self):
        basis = enumerate_fock_basis(2, 2)
        configs = haar_configs(2, 5, seed=23)
        superop = tg.build_superoperator(configs, 2, 2)
        rho = tg.random_density_matrix(basis, 7)
        errors = []
        for shots in (10_000, 1_000_000):
            per_seed = []
            for seed in range(5):
                records = tg.simulate_records(rho, configs, shots=shots, seed=seed)
                result = tg.reconstruct(superop, records)
                per_seed.append(tg.trace_distance(result.projected, rho))
            errors.append(np.mean(per_seed))
        assert errors[1] < errors[0] / 3.0

    def test_incomplete_superoperator_reports_deficit(self):
        configs = haar_configs(2, 3, seed=3)
        superop = tg.build_superoperator(configs, 2, 2)
        rho = tg.random_density_matrix(enumerate_fock_basis(2, 2), 1)
        with pytest.raises(tg.IncompleteConfigurationsError) as err:
            tg.reconstruct(superop, superop.apply(rho))
        assert err.value.required == 9
        assert err.value.deficit >= 1

    def test_rejects_misordered_records(self):
        configs = haar_configs(2, 5, seed=41)
        superop = tg.build_superoperator(configs, 2, 2)
        rho = tg.random_density_matrix(enumerate_fock_basis(2, 2), 2)
        records = tg.simulate_records(rho, configs)
        records[0], records[1] = records[1], records[0]
        with pytest.raises(ValueError):
            tg.reconstruct(superop, records)


class TestSearches:
    def test_min_configs_two_photons_two_modes(self):
        search = tg.find_min_configs(2, 2, seed=11)
        assert search.found == 5
        ranks = [rank for _, rank in search.rank_trace]
        assert ranks == sorted(ranks)
        d_out = fock_dimension(2, 2)
        steps = np.diff([0] + ranks)
        assert (steps <= d_out).all()

    def test_min_configs_matches_bound_on_more_modes(self):
        assert tg.find_min_configs(2, 3, seed=5).found == 9
        assert tg.find_min_configs(2, 2, 4, seed=5).found == 1

    def test_min_configs_saturates_bound_on_larger_cells(self):
        assert tg.find_min_configs(3, 3, seed=17).found == min_configs(3, 3) == 16
        assert tg.find_min_configs(4, 2, seed=17).found == min_configs(4, 2) == 9

    def test_min_configs_mesh_generator(self):
        assert tg.find_min_configs(2, 2, generator="mesh", seed=6).found == 5

    def test_r_max_exhaustion_reports_best_rank(self):
        search = tg.find_min_configs(2, 2, seed=1, r_max=2)
        assert search.found is None
        assert 0 < search.best_rank < search.required_rank

    def test_min_modes_search(self):
        for seed in (0, 1):
            search = tg.find_min_modes(2, 2, seed=seed)
            assert search.found == 4
            assert search.found >= search.lower_bound
        assert tg.find_min_modes(1, 2, seed=3).found == 4

    def test_min_modes_cap_exhaustion_is_reported(self):
        search = tg.find_min_modes(2, 2, seed=0, meas_modes_max=3)
        assert search.found is None
        assert [m for m, _, _ in search.rank_by_meas_modes] == [2, 3]
        assert all(rank < req for _, rank, req in search.rank_by_meas_modes)

    def test_unknown_generator_rejected(self):
        with pytest.raises(ValueError):
            tg.find_min_configs(2, 2, generator="bogus")


class TestSampleShots:
    def test_indicator_and_zero_shots(self):
        p = np.array([0.0, 1.0, 0.0])
        counts = tg.sample_shots(p, 500, seed=0)
        np.testing.assert_array_equal(counts, [0, 500, 0])
        np.testing.assert_array_equal(tg.sample_shots(p, 0, seed=0), [0, 0, 0])

    def test_uniform_counts_within_five_sigma(self):
        dim = 6
        shots = 100_000
        counts = tg.sample_shots(np.full(dim, 1.0 / dim), shots, seed=3)
        assert counts.sum() == shots
        expected = shots / dim
        sigma = math.sqrt(shots * (1.0 / dim) * (1.0 - 1.0 / dim))
        assert np.abs(counts - expected).max() < 5.0 * sigma

    def test_determinism_and_validation(self):
        p = np.array([0.25, 0.75])
        np.testing.assert_array_equal(
            tg.sample_shots(p, 1000, seed=9), tg.sample_shots(p, 1000, seed=9)
        )
        with pytest.raises(ValueError):
            tg.sample_shots(np.array([0.5, 0.4]), 10, seed=0)
        with pytest.raises(ValueError):
            tg.sample_shots(np.array([1.1, -0.1]), 10, seed=0)


class TestMeasurementRecord:
    def test_exact_and_sampled_validation(self):
        record = tg.MeasurementRecord.exact(0, np.array([0.5, 0.5]))
        np.testing.assert_array_equal(record.frequencies(), [0.5, 0.5])
        sampled = tg.MeasurementRecord.sampled(1, np.array([3, 7]))
        assert sampled.shots == 10
        np.testing.assert_allclose(sampled.frequencies(), [0.3, 0.7])
        with pytest.raises(ValueError):
            tg.MeasurementRecord.exact(0, np.array([0.9, 0.2]))
        with pytest.raises(ValueError):
            tg.MeasurementRecord.sampled(0, np.array([3, 7]), shots=11)
        with pytest.raises(ValueError):
            tg.MeasurementRecord(0)
