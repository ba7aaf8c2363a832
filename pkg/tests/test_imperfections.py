import json

import numpy as np
import pytest

from focktomo import imperfections as imp
from focktomo import linear_optics as lo
from focktomo import tomography as tg
from focktomo.combinatorics import enumerate_fock_basis, min_configs_extended


def haar_configs(modes, count, seed):
    rng = np.random.default_rng(seed)
    return [lo.haar_random_unitary(modes, int(rng.integers(2**63))) for _ in range(count)]


def two_component_mixture(seed=0):
    rho1 = tg.random_density_matrix(enumerate_fock_basis(1, 2), seed + 1)
    rho2 = tg.random_density_matrix(enumerate_fock_basis(2, 2), seed + 2)
    return imp.PhotonNumberMixture(((0.5, rho1), (0.5, rho2))), rho1, rho2


class TestTruncatedBasis:
    def test_ordering_and_sectors(self):
        basis = imp.truncated_basis(2, 2)
        assert basis.states == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
        assert basis.sector_slice(0) == slice(0, 1)
        assert basis.sector_slice(1) == slice(1, 3)
        assert basis.sector_slice(2) == slice(3, 6)
        assert basis.index_of((1, 1)) == 4
        with pytest.raises(ValueError):
            basis.sector_slice(3)
        with pytest.raises(ValueError):
            basis.index_of((3, 0))


class TestPhotonNumberMixture:
    def test_validation(self):
        rho1 = tg.maximally_mixed(enumerate_fock_basis(1, 2))
        rho2 = tg.maximally_mixed(enumerate_fock_basis(2, 2))
        with pytest.raises(ValueError):
            imp.PhotonNumberMixture(((0.7, rho1), (0.7, rho2)))
        with pytest.raises(ValueError):
            imp.PhotonNumberMixture(((0.5, rho1), (0.5, rho1)))
        rho3 = tg.maximally_mixed(enumerate_fock_basis(2, 3))
        with pytest.raises(ValueError):
            imp.PhotonNumberMixture(((0.5, rho1), (0.5, rho3)))

    def test_json_round_trip(self):
        mixture, _, _ = two_component_mixture()
        payload = json.dumps(mixture.to_json_dict())
        restored = imp.PhotonNumberMixture.from_json_dict(json.loads(payload))
        assert restored.weights() == mixture.weights()
        for (_, a), (_, b) in zip(restored.components, mixture.components):
            np.testing.assert_array_equal(a.matrix, b.matrix)


class TestMixtureProbabilities:
    def test_single_component_reduces_to_plain_probabilities(self):
        rho = tg.random_density_matrix(enumerate_fock_basis(2, 2), 9)
        mixture = imp.PhotonNumberMixture(((1.0, rho),))
        config = lo.haar_random_unitary(2, 4)
        weight, conditional = imp.mixture_probabilities(mixture, config)[2]
        assert weight == 1.0
        np.testing.assert_allclose(
            conditional, tg.outcome_probabilities(rho, config), atol=1e-14
        )

    def test_joint_distribution_and_sector_masses(self):
        mixture, rho1, rho2 = two_component_mixture()
        config = lo.haar_random_unitary(2, 8)
        basis, joint = imp.mixture_joint_probabilities(mixture, config)
        assert joint.sum() == pytest.approx(1.0, abs=1e-12)
        for total, rho in ((1, rho1), (2, rho2)):
            conditional, mass = imp.postselect_total(joint, basis, total)
            assert mass == pytest.approx(0.5, abs=1e-12)
            np.testing.assert_allclose(
                conditional, tg.outcome_probabilities(rho, config), atol=1e-12
            )

    def test_truncation_must_cover_all_components(self):
        mixture, _, _ = two_component_mixture()
        with pytest.raises(ValueError):
            imp.mixture_joint_probabilities(
                mixture, lo.haar_random_unitary(2, 0), max_total=1
            )


class TestPostselectTotal:
    def test_lossless_single_component_is_identity(self):
        basis = enumerate_fock_basis(2, 2)
        rho = tg.random_density_matrix(basis, 5)
        config = lo.haar_random_unitary(2, 5)
        p = tg.outcome_probabilities(rho, config)
        tbasis = imp.truncated_basis(2, 2)
        conditional, mass = imp.postselect_total(
            imp.embed_sector(p, 2, tbasis), tbasis, 2
        )
        np.testing.assert_allclose(conditional, p, atol=1e-14)
        assert mass == pytest.approx(1.0)

    def test_sector_mass_under_uniform_loss_is_eta_to_the_n(self):
        eta = 0.75
        photons = 3
        basis = enumerate_fock_basis(photons, 2)
        rho = tg.random_density_matrix(basis, 11)
        config = lo.haar_random_unitary(2, 3)
        p = tg.outcome_probabilities(rho, config)
        tbasis = imp.truncated_basis(photons, 2)
        detected = imp.detector_response(
            imp.embed_sector(p, photons, tbasis),
            tbasis,
            imp.DetectorModel.uniform(eta, 2),
        )
        conditional, mass = imp.postselect_total(detected, tbasis, photons)
        assert mass == pytest.approx(eta**photons, abs=1e-12)
        np.testing.assert_allclose(conditional, p, atol=1e-12)

    def test_empty_sector_is_an_error(self):
        tbasis = imp.truncated_basis(1, 2)
        p = np.array([1.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            imp.postselect_total(p, tbasis, 1)

    def test_counts_work_like_probabilities(self):
        tbasis = imp.truncated_basis(1, 2)
        counts = np.array([10, 60, 30])
        conditional, mass = imp.postselect_total(counts, tbasis, 1)
        np.testing.assert_allclose(conditional, [2.0 / 3.0, 1.0 / 3.0])
        assert mass == pytest.approx(0.9)


class TestDetectorResponse:
    def test_perfect_detectors_are_the_identity(self):
        basis = imp.truncated_basis(2, 2)
        matrix = imp.response_matrix(basis, imp.DetectorModel.uniform(1.0, 2))
        np.testing.assert_allclose(matrix, np.eye(len(basis)), atol=1e-14)

    def test_single_mode_single_photon_binomial(self):
        basis = imp.truncated_basis(1, 1)
        q = imp.detector_response(
            np.array([0.0, 1.0]), basis, imp.DetectorModel.uniform(0.5, 1)
        )
        np.testing.assert_allclose(q, [0.5, 0.5])

    def test_two_modes_coincidence_probability(self):
        eta = 0.6
        basis = imp.truncated_basis(2, 2)
        p = np.zeros(len(basis))
        p[basis.index_of((1, 1))] = 1.0
        q = imp.detector_response(p, basis, imp.DetectorModel.uniform(eta, 2))
        assert q[basis.index_of((1, 1))] == pytest.approx(eta**2)
        assert q[basis.index_of((1, 0))] == pytest.approx(eta * (1 - eta))
        assert q.sum() == pytest.approx(1.0, abs=1e-12)

    def test_support_never_gains_photons(self):
        basis = imp.truncated_basis(2, 2)
        matrix = imp.response_matrix(basis, imp.DetectorModel((0.5, 0.8)))
        for i, detected in enumerate(basis.states):
            for j, incident in enumerate(basis.states):
                gains = any(k > n for k, n in zip(detected, incident))
                if gains:
                    assert matrix[i, j] == 0.0
        # mass is preserved on the downward-closed space
        np.testing.assert_allclose(matrix.sum(axis=0), 1.0, atol=1e-12)

    def test_efficiency_validation(self):
        with pytest.raises(ValueError):
            imp.DetectorModel.uniform(0.0, 2)
        with pytest.raises(ValueError):
            imp.DetectorModel.uniform(1.2, 2)


class TestInvertDetectorResponse:
    @pytest.mark.parametrize("eta", [0.5, 0.7, 0.9])
    @pytest.mark.parametrize("modes,max_total", [(2, 3), (3, 2), (3, 3)])
    def test_round_trip_on_random_distributions(self, eta, modes, max_total):
        basis = imp.truncated_basis(max_total, modes)
        model = imp.DetectorModel.uniform(eta, modes)
        rng = np.random.default_rng(max_total * 10 + modes)
        p = rng.random(len(basis))
        p /= p.sum()
        recovered = imp.invert_detector_response(
            imp.detector_response(p, basis, model), basis, model
        )
        assert np.abs(recovered - p).max() < 1e-10

    def test_perfect_detectors_invert_to_identity(self):
        basis = imp.truncated_basis(2, 2)
        model = imp.DetectorModel.uniform(1.0, 2)
        p = np.array([0.1, 0.2, 0.3, 0.1, 0.2, 0.1])
        np.testing.assert_allclose(
            imp.invert_detector_response(p, basis, model), p, atol=1e-12
        )

    def test_single_mode_hand_solution(self):
        # One mode, one photon: q(1) = eta p(1), so p(1) = q(1) / eta.
        eta = 0.4
        basis = imp.truncated_basis(1, 1)
        model = imp.DetectorModel.uniform(eta, 1)
        q = np.array([1.0 - 0.3, 0.3])
        p = imp.invert_detector_response(q, basis, model)
        assert p[1] == pytest.approx(0.3 / eta)
        assert p.sum() == pytest.approx(1.0)

    def test_truncation_warning(self):
        basis = imp.truncated_basis(1, 2)
        model = imp.DetectorModel.uniform(0.9, 2)
        with pytest.warns(RuntimeWarning, match="missing"):
            imp.invert_detector_response(np.array([0.5, 0.2, 0.2]), basis, model)

    def test_simplex_projection_flag(self):
        basis = imp.truncated_basis(1, 2)
        model = imp.DetectorModel.uniform(0.6, 2)
        noisy = np.array([0.62, 0.21, 0.17])
        raw = imp.invert_detector_response(noisy, basis, model)
        projected = imp.invert_detector_response(noisy, basis, model, project=True)
        assert projected.min() >= 0.0
        assert projected.sum() == pytest.approx(1.0)
        if raw.min() >= 0.0:
            np.testing.assert_allclose(projected, raw, atol=1e-12)

    def test_simplex_projection_is_euclidean(self):
        v = np.array([0.8, 0.5, -0.3])
        projected = imp.simplex_projection(v)
        assert projected.sum() == pytest.approx(1.0)
        # brute-force check on a fine simplex grid
        best = None
        grid = np.linspace(0, 1, 101)
        for a in grid:
            for b in grid[grid <= 1 - a + 1e-12]:
                candidate = np.array([a, b, 1 - a - b])
                if candidate[2] < -1e-12:
                    continue
                dist = np.linalg.norm(candidate - v)
                if best is None or dist < best[0]:
                    best = (dist, candidate)
        assert np.abs(projected - best[1]).max() < 0.02


class TestUniformLossFactorization:
    def test_detected_sector_equals_scaled_lossless_distribution(self):
        for eta in (0.5, 0.9):
            for photons in (1, 2, 3):
                basis = enumerate_fock_basis(photons, 2)
                rho = tg.random_density_matrix(basis, photons)
                config = lo.haar_random_unitary(2, photons + 7)
                p = tg.outcome_probabilities(rho, config)
                tbasis = imp.truncated_basis(photons, 2)
                detected = imp.detector_response(
                    imp.embed_sector(p, photons, tbasis),
                    tbasis,
                    imp.DetectorModel.uniform(eta, 2),
                )
                sector = detected[tbasis.sector_slice(photons)]
                assert np.abs(sector - eta**photons * p).max() < 1e-12


class TestReconstructMixture:
    def test_exact_round_trip(self):
        mixture, rho1, rho2 = two_component_mixture(seed=5)
        required = max(min_configs_extended(n, 2, 2) for n in (1, 2))
        assert required == 5
        configs = haar_configs(2, required, seed=33)
        records = [
            imp.mixture_joint_probabilities(mixture, c)[1] for c in configs
        ]
        estimate = imp.reconstruct_mixture(records, configs, 2, 2)
        assert estimate.weights[1] == pytest.approx(0.5, abs=1e-10)
        assert estimate.weights[2] == pytest.approx(0.5, abs=1e-10)
        assert tg.trace_distance(estimate.states[1].projected, rho1) < 1e-8
        assert tg.trace_distance(estimate.states[2].projected, rho2) < 1e-8

    def test_round_trip_through_imperfect_detectors(self):
        mixture, rho1, rho2 = two_component_mixture(seed=8)
        model = imp.DetectorModel.uniform(0.9, 2)
        basis = imp.truncated_basis(2, 2)
        configs = haar_configs(2, 5, seed=44)
        records = [
            imp.detector_response(
                imp.mixture_joint_probabilities(mixture, c)[1], basis, model
            )
            for c in configs
        ]
        estimate = imp.reconstruct_mixture(records, configs, 2, 2, model=model)
        assert estimate.weights[1] == pytest.approx(0.5, abs=1e-10)
        assert estimate.weights[2] == pytest.approx(0.5, abs=1e-10)
        assert tg.trace_distance(estimate.states[1].projected, rho1) < 1e-8
        assert tg.trace_distance(estimate.states[2].projected, rho2) < 1e-8

    def test_component_order_does_not_matter(self):
        mixture, _, _ = two_component_mixture(seed=2)
        flipped = imp.PhotonNumberMixture(tuple(reversed(mixture.components)))
        configs = haar_configs(2, 5, seed=3)
        records_a = [imp.mixture_joint_probabilities(mixture, c)[1] for c in configs]
        records_b = [imp.mixture_joint_probabilities(flipped, c)[1] for c in configs]
        est_a = imp.reconstruct_mixture(records_a, configs, 2, 2)
        est_b = imp.reconstruct_mixture(records_b, configs, 2, 2)
        assert est_a.weights == est_b.weights
        for total in est_a.states:
            assert (
                tg.trace_distance(
                    est_a.states[total].projected, est_b.states[total].projected
                )
                < 1e-12
            )

    def test_incomplete_sector_is_reported(self):
        mixture, _, _ = two_component_mixture(seed=6)
        configs = haar_configs(2, 3, seed=1)  # enough for N=1, not for N=2
        records = [imp.mixture_joint_probabilities(mixture, c)[1] for c in configs]
        with pytest.raises(imp.IncompleteSectorError) as err:
            imp.reconstruct_mixture(records, configs, 2, 2)
        assert [n for n, _, _ in err.value.deficits] == [2]

    def test_vacuum_component_yields_trivial_state(self):
        vacuum = tg.DensityMatrix(
            enumerate_fock_basis(0, 2), np.ones((1, 1), dtype=complex)
        )
        one = tg.random_density_matrix(enumerate_fock_basis(1, 2), 4)
        mixture = imp.PhotonNumberMixture(((0.3, vacuum), (0.7, one)))
        configs = haar_configs(2, 3, seed=21)
        records = [
            imp.mixture_joint_probabilities(mixture, c, max_total=1)[1]
            for c in configs
        ]
        estimate = imp.reconstruct_mixture(records, configs, 2, 1)
        assert estimate.weights[0] == pytest.approx(0.3, abs=1e-12)
        assert estimate.weights[1] == pytest.approx(0.7, abs=1e-12)
        assert tg.trace_distance(estimate.states[1].projected, one) < 1e-8
