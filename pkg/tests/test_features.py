import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamloc.beam import BeamConfig, analyze
from beamloc.errors import InvalidInputError
from beamloc.features import (
    FeatureKind,
    FeatureVector,
    compute_features,
    curvature_index,
    element_strain_energies,
    flexibility_index,
    frequency_index,
    modal_flexibility,
    msecr_index,
)
from beamloc.measurements import MeasuredModes, expand_shapes, synthesize_measurement

from conftest import damaged_measurement


@pytest.fixture(scope="module")
def single_site(paper_beam):
    return damaged_measurement(paper_beam, [(9, 0.25)])


def test_feature_vector_rejects_negative():
    with pytest.raises(InvalidInputError):
        FeatureVector(FeatureKind.FREQUENCY, np.array([1.0, -0.1]))


def test_all_features_zero_for_identical_states(paper_beam, healthy_model, measured_healthy):
    features = compute_features(measured_healthy, measured_healthy, healthy_model)
    for kind, fv in features.items():
        np.testing.assert_array_equal(fv.values, np.zeros(20), err_msg=kind.value)


class TestFrequencyIndex:
    def test_weights_normalized_per_mode(self, paper_beam, healthy_model, measured_healthy, single_site):
        dam, _ = single_site
        full = expand_shapes(dam, healthy_model)
        energy = np.array([
            np.abs(np.einsum("dj,dj->j", full, K_i @ full))
            for K_i in healthy_model.element_stiffness
        ])
        np.testing.assert_allclose(energy.sum(axis=0) / energy.sum(axis=0), np.ones(5))
        shifts = np.abs(dam.frequencies - measured_healthy.frequencies)
        expected = (energy / energy.sum(axis=0)) @ shifts
        fv = frequency_index(measured_healthy, dam, healthy_model)
        np.testing.assert_allclose(fv.values, expected, rtol=1e-12)

    def test_nonnegative_on_paper_case(self, paper_beam, healthy_model, measured_healthy, case1):
        # A weak localizer by construction; only nonnegativity is
        # contractual.
        dam, _ = case1
        fv = frequency_index(measured_healthy, dam, healthy_model)
        assert np.all(fv.values >= 0)
        assert np.any(fv.values > 0)

    def test_mode_count_mismatch(self, paper_beam, healthy_model, measured_healthy):
        short = synthesize_measurement(paper_beam, paper_beam.healthy_params(), 3)
        with pytest.raises(InvalidInputError):
            frequency_index(measured_healthy, short, healthy_model)


class TestCurvatureIndex:
    def test_single_node_difference_hits_adjacent_elements(self, measured_healthy):
        kappa = measured_healthy.curvatures.copy()
        kappa[:, 10] += 1.0
        bumped = MeasuredModes(
            frequencies=measured_healthy.frequencies,
            mode_shapes=measured_healthy.mode_shapes,
            curvatures=kappa,
            grid=measured_healthy.grid,
        )
        fv = curvature_index(measured_healthy, bumped)
        expected = np.zeros(20)
        expected[9] = expected[10] = 0.5
        np.testing.assert_allclose(fv.values, expected, atol=1e-12)

    def test_single_mode_reduces_to_absolute_difference(self, paper_beam):
        und = synthesize_measurement(paper_beam, paper_beam.healthy_params(), 1)
        kappa = und.curvatures + 0.25
        dam = MeasuredModes(und.frequencies, und.mode_shapes, kappa, und.grid)
        fv = curvature_index(und, dam)
        np.testing.assert_allclose(fv.values, np.full(20, 0.25), rtol=1e-12)

    def test_grid_mismatch_rejected(self, measured_healthy, paper_beam):
        other_cfg = BeamConfig(n_elements=10)
        other = synthesize_measurement(other_cfg, other_cfg.healthy_params(), 5)
        with pytest.raises(InvalidInputError):
            curvature_index(measured_healthy, other)


class TestStrainEnergyIndex:
    def test_partition_sums_to_eigenvalues(self, paper_beam, healthy_model):
        # With exact eigenvectors, sum_i phi^T K_i phi = sum_j lambda_j.
        shapes = healthy_model.mode_shapes[:, :5]
        per_element = element_strain_energies(shapes, healthy_model.element_stiffness)
        assert per_element.sum() == pytest.approx(healthy_model.eigenvalues[:5].sum(), rel=1e-10)

    def test_paper_case_top_two(self, paper_beam, healthy_model, measured_healthy, case1):
        dam, _ = case1
        und_full = expand_shapes(measured_healthy, healthy_model)
        dam_full = expand_shapes(dam, healthy_model)
        fv = msecr_index(und_full, dam_full, healthy_model.element_stiffness)
        top2 = set(np.argsort(-fv.values)[:2].tolist())
        assert top2 == {6, 7}

    def test_dimension_mismatch(self, healthy_model):
        with pytest.raises(InvalidInputError):
            msecr_index(np.zeros((10, 2)), np.zeros((10, 2)), healthy_model.element_stiffness)


class TestFlexibilityIndex:
    def test_mode_one_dominates(self, healthy_model):
        # Truncation error of the one-mode flexibility is bounded by the
        # next modal term, (omega_1/omega_2)^2 relative in the mass-weighted
        # spectral norm (the norm in which the modes are orthonormal).
        freqs = healthy_model.frequencies[:2]
        shapes = healthy_model.mode_shapes[:, :2]
        f1 = modal_flexibility(freqs[:1], shapes[:, :1])
        f2 = modal_flexibility(freqs, shapes)
        root = np.linalg.cholesky(healthy_model.global_mass)
        weighted = lambda F: np.linalg.norm(root.T @ F @ root, 2)
        diff = weighted(f2 - f1)
        bound = (freqs[0] / freqs[1]) ** 2 * weighted(f2)
        assert diff <= bound * (1 + 1e-9)

    def test_single_damage_argmax(self, paper_beam, healthy_model, measured_healthy, single_site):
        dam, _ = single_site
        fv = flexibility_index(measured_healthy, dam, healthy_model)
        assert int(np.argmax(fv.values)) == 9


class TestInvariances:
    @settings(max_examples=10, deadline=None)
    @given(flips=st.lists(st.sampled_from([1.0, -1.0]), min_size=5, max_size=5))
    def test_sign_flip_invariance(self, flips, paper_beam, healthy_model, measured_healthy, case1):
        # Simultaneously flipping a mode in both states changes nothing:
        # every feature is quadratic in the shapes.
        dam, _ = case1
        flips = np.asarray(flips)

        def flip(measured):
            return MeasuredModes(
                frequencies=measured.frequencies,
                mode_shapes=flips[:, None] * measured.mode_shapes,
                curvatures=flips[:, None] * measured.curvatures,
                grid=measured.grid,
            )

        base = compute_features(measured_healthy, dam, healthy_model)
        flipped = compute_features(flip(measured_healthy), flip(dam), healthy_model)
        for kind in FeatureKind:
            np.testing.assert_allclose(
                flipped[kind].values, base[kind].values, rtol=1e-9, atol=1e-30,
                err_msg=kind.value,
            )

    def test_scaling_preserves_ranking(self, paper_beam, healthy_model, measured_healthy, case1):
        dam, _ = case1
        fv = flexibility_index(measured_healthy, dam, healthy_model)
        scaled = FeatureVector(fv.kind, 37.5 * fv.values)
        np.testing.assert_array_equal(np.argsort(scaled.values), np.argsort(fv.values))
