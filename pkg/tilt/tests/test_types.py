import math

import numpy as np
from django.test import SimpleTestCase

from extra_backend.exceptions import DomainError, InputShapeError
from tilt.types import DiscretePopulation, LabeledDataset, SufficientStatistic, TiltParams, UnlabeledDataset
from .populations import anchor_population


class SufficientStatisticTest(SimpleTestCase):
    def test_output_dim_per_kind(self):
        self.assertEqual(SufficientStatistic.identity().output_dim(3), 3)
        self.assertEqual(SufficientStatistic.subset([0, 2]).output_dim(3), 2)
        self.assertEqual(SufficientStatistic.affine([[1, 0, 0]]).output_dim(3), 1)

    def test_unknown_kind_rejected(self):
        with self.assertRaises(InputShapeError):
            SufficientStatistic(kind='quadratic')

    def test_affine_offset_length_checked(self):
        with self.assertRaises(InputShapeError):
            SufficientStatistic.affine([[1.0, 0.0]], offset=[1.0, 2.0])

    def test_dict_form_rebuilds_statistic(self):
        spec = SufficientStatistic.affine([[2.0, 0.0], [0.0, 1.0]], [1.0, 0.0])
        rebuilt = SufficientStatistic.from_dict(spec.to_dict())
        np.testing.assert_array_equal(rebuilt.matrix, spec.matrix)
        np.testing.assert_array_equal(rebuilt.offset, spec.offset)

    def test_arrays_are_read_only(self):
        spec = SufficientStatistic.affine([[1.0]])
        with self.assertRaises(ValueError):
            spec.matrix[0, 0] = 5.0


class TiltParamsTest(SimpleTestCase):
    def test_zeros_are_unnormalized(self):
        params = TiltParams.zeros(2)
        self.assertFalse(params.normalized)
        np.testing.assert_array_equal(params.to_vector(), np.zeros(6))

    def test_vector_layout(self):
        params = TiltParams([1.0], 2.0, [3.0], 4.0)
        np.testing.assert_array_equal(params.to_vector(), [1.0, 3.0, 2.0, 4.0])
        self.assertEqual(TiltParams.from_vector([1.0, 3.0, 2.0, 4.0]).alpha1, 4.0)

    def test_non_finite_rejected(self):
        with self.assertRaises(DomainError):
            TiltParams([math.inf], 0.0, [0.0], 0.0)

    def test_theta_lengths_must_match(self):
        with self.assertRaises(InputShapeError):
            TiltParams([0.0, 1.0], 0.0, [0.0], 0.0)


class DatasetTest(SimpleTestCase):
    def test_labels_must_be_binary(self):
        with self.assertRaises(InputShapeError):
            LabeledDataset([[0.0], [1.0]], [0, 2])

    def test_row_counts_must_match(self):
        with self.assertRaises(InputShapeError):
            LabeledDataset([[0.0], [1.0]], [0])

    def test_empty_target_rejected(self):
        with self.assertRaises(InputShapeError):
            UnlabeledDataset(np.zeros((0, 2)))

    def test_non_finite_features_rejected(self):
        with self.assertRaises(InputShapeError):
            UnlabeledDataset([[np.nan, 1.0]])

    def test_take_selects_rows(self):
        data = LabeledDataset([[0.0], [1.0], [2.0]], [0, 1, 1])
        subset = data.take([2, 0])
        np.testing.assert_array_equal(subset.features[:, 0], [2.0, 0.0])
        np.testing.assert_array_equal(subset.labels, [1, 0])


class DiscretePopulationTest(SimpleTestCase):
    def test_tables_must_sum_to_one(self):
        with self.assertRaises(DomainError):
            DiscretePopulation([[0.0], [1.0]], [[0.5, 0.5], [0.5, 0.5]], [[0.25, 0.25], [0.25, 0.25]])

    def test_negative_mass_rejected(self):
        with self.assertRaises(DomainError):
            DiscretePopulation([[0.0]], [[1.5, -0.5]], [[0.5, 0.5]])

    def test_duplicate_alphabet_point_rejected(self):
        with self.assertRaises(DomainError):
            DiscretePopulation([[0.0], [0.0]], [[0.25, 0.25], [0.25, 0.25]], [[0.25, 0.25], [0.25, 0.25]])

    def test_lookup_by_exact_coordinates(self):
        pop = anchor_population()
        self.assertEqual(pop.index_of([2.0]), 2)
        with self.assertRaises(DomainError):
            pop.index_of([2.0000001])

    def test_marginals(self):
        pop = anchor_population()
        np.testing.assert_allclose(pop.source_marginal(), [0.2, 0.2, 0.3, 0.3])
        np.testing.assert_allclose(pop.target_marginal(), [0.2, 0.4, 4 / 15, 2 / 15])

    def test_dict_form_rebuilds_population(self):
        pop = anchor_population()
        rebuilt = DiscretePopulation.from_dict(pop.to_dict())
        np.testing.assert_array_equal(rebuilt.source_pmf, pop.source_pmf)
        np.testing.assert_array_equal(rebuilt.target_pmf, pop.target_pmf)
