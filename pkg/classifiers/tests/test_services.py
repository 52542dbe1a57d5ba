import math

import numpy as np
import pytest
from django.test import SimpleTestCase
from scipy.special import expit

from classifiers.services import ClassifierService
from classifiers.types import SourceClassifier, TabulatedClassifier, TrainConfig, classifier_from_dict
from extra_backend.exceptions import DomainError, InputShapeError
from tilt.types import DiscretePopulation, LabeledDataset
from tilt.tests.populations import anchor_population, two_point_population


class PredictProbaTest(SimpleTestCase):
    def test_zero_parameters_are_symmetric(self):
        clf = SourceClassifier(np.zeros(2), 0.0)
        self.assertEqual(ClassifierService.predict_proba(clf, [3.0, -1.0]), (0.5, 0.5))

    def test_decision_boundary(self):
        clf = SourceClassifier([1.0], 0.0)
        self.assertEqual(ClassifierService.predict_proba(clf, [0.0]), (0.5, 0.5))

    def test_sigmoid_of_log_three(self):
        clf = SourceClassifier([1.0], 0.0)
        eta0, eta1 = ClassifierService.predict_proba(clf, [math.log(3.0)])
        self.assertAlmostEqual(eta1, 0.75, places=12)
        self.assertAlmostEqual(eta0, 0.25, places=12)

    def test_outputs_sum_to_one_and_respect_clipping(self):
        clf = SourceClassifier([3.0], -0.2, clip_epsilon=1e-6)
        X = np.linspace(-20.0, 20.0, 401).reshape(-1, 1)
        eta = clf.predict_proba_matrix(X)
        self.assertTrue(np.all(eta[:, 0] + eta[:, 1] == 1.0))
        self.assertTrue(np.all(eta >= 1e-6))
        self.assertTrue(np.all(eta <= 1.0 - 1e-6))

    def test_dimension_mismatch(self):
        with self.assertRaises(InputShapeError):
            ClassifierService.predict_proba(SourceClassifier([1.0, 2.0], 0.0), [1.0])

    def test_clip_epsilon_range(self):
        with self.assertRaises(DomainError):
            SourceClassifier([1.0], 0.0, clip_epsilon=0.5)


class LogisticLossGradientTest(SimpleTestCase):
    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(42)
        X = rng.standard_normal((200, 3))
        y = (rng.random(200) < 0.4).astype(float)
        s = rng.uniform(0.5, 2.0, 200)
        h = 1e-6
        for _ in range(10):
            params = rng.normal(scale=1.5, size=4)
            _, analytic = ClassifierService.logistic_loss_and_gradient(params, X, y, s, l2_penalty=0.3)
            numeric = np.zeros_like(params)
            for k in range(params.shape[0]):
                step = np.zeros_like(params)
                step[k] = h
                up, _ = ClassifierService.logistic_loss_and_gradient(params + step, X, y, s, l2_penalty=0.3)
                down, _ = ClassifierService.logistic_loss_and_gradient(params - step, X, y, s, l2_penalty=0.3)
                numeric[k] = (up - down) / (2 * h)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


class TrainClassifierTest(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(12000)
        self.separable = LabeledDataset(x[:10000].reshape(-1, 1), (x[:10000] > 0).astype(int))
        self.holdout = LabeledDataset(x[10000:].reshape(-1, 1), (x[10000:] > 0).astype(int))

    def test_separable_data_held_out_accuracy(self):
        clf = ClassifierService.train_classifier(self.separable, TrainConfig(seed=1))
        predicted = clf.predict_proba_matrix(self.holdout.features)[:, 1] >= 0.5
        self.assertGreater(np.mean(predicted == self.holdout.labels), 0.95)

    def test_one_class_data_gives_near_zero_probability(self):
        data = LabeledDataset(self.separable.features[:500], np.zeros(500, dtype=int))
        clf = ClassifierService.train_classifier(data, TrainConfig())
        self.assertTrue(np.all(clf.predict_proba_matrix(data.features)[:, 1] <= 0.01))

    def test_full_batch_loss_never_increases_with_small_steps(self):
        cfg = TrainConfig(learning_rate=0.01, epochs=30, batch_size=len(self.separable))
        clf = ClassifierService.train_classifier(self.separable, cfg)
        losses = np.array(clf.training_loss)
        self.assertEqual(losses.shape[0], 30)
        self.assertTrue(np.all(np.diff(losses) <= 1e-12))

    def test_same_seed_same_classifier(self):
        first = ClassifierService.train_classifier(self.separable, TrainConfig(seed=4, epochs=3))
        second = ClassifierService.train_classifier(self.separable, TrainConfig(seed=4, epochs=3))
        self.assertEqual(first.weights.tobytes(), second.weights.tobytes())
        self.assertEqual(first.bias, second.bias)

    def test_sample_weights_validated(self):
        with self.assertRaises(InputShapeError):
            ClassifierService.train_classifier(self.separable, TrainConfig(), sample_weights=np.ones(3))
        with self.assertRaises(DomainError):
            ClassifierService.train_classifier(
                self.separable, TrainConfig(), sample_weights=np.zeros(len(self.separable)),
            )

    @pytest.mark.slow
    def test_recovers_logistic_model_parameters(self):
        rng = np.random.default_rng(2024)
        X = rng.standard_normal((100000, 2))
        y = (rng.random(100000) < expit(X @ np.array([2.0, -1.0]) + 0.5)).astype(int)
        clf = ClassifierService.train_classifier(LabeledDataset(X, y), TrainConfig(seed=0))
        np.testing.assert_allclose(clf.weights, [2.0, -1.0], atol=0.1)
        self.assertAlmostEqual(clf.bias, 0.5, delta=0.1)


class OracleClassifierTest(SimpleTestCase):
    def test_equal_class_mass_gives_half(self):
        pop = DiscretePopulation([[0.0], [1.0]], [[0.25, 0.25], [0.1, 0.4]], [[0.25, 0.25], [0.1, 0.4]])
        clf = ClassifierService.oracle_classifier(pop)
        self.assertEqual(ClassifierService.predict_proba(clf, [0.0]), (0.5, 0.5))

    def test_two_point_conditional(self):
        clf = ClassifierService.oracle_classifier(two_point_population())
        self.assertAlmostEqual(ClassifierService.predict_proba(clf, [0.0])[1], 0.2, places=12)

    def test_anchor_point_is_clipped(self):
        clf = ClassifierService.oracle_classifier(anchor_population(), clip_epsilon=1e-6)
        self.assertEqual(ClassifierService.predict_proba(clf, [0.0])[1], 1.0 - 1e-6)

    def test_zero_source_marginal(self):
        pop = DiscretePopulation([[0.0], [1.0]], [[0.0, 0.0], [0.5, 0.5]], [[0.5, 0.0], [0.0, 0.5]])
        with self.assertRaises(DomainError):
            ClassifierService.oracle_classifier(pop)

    def test_unknown_point(self):
        clf = ClassifierService.oracle_classifier(two_point_population())
        with self.assertRaises(DomainError):
            clf.predict_proba_matrix([[0.5]])


class ClassifierDictTest(SimpleTestCase):
    def test_logistic_form(self):
        clf = SourceClassifier([1.5, -0.5], 0.25, clip_epsilon=1e-4)
        rebuilt = classifier_from_dict(clf.to_dict())
        self.assertIsInstance(rebuilt, SourceClassifier)
        np.testing.assert_array_equal(rebuilt.weights, clf.weights)
        self.assertEqual(rebuilt.clip_epsilon, 1e-4)

    def test_tabulated_form(self):
        clf = ClassifierService.oracle_classifier(two_point_population())
        rebuilt = classifier_from_dict(clf.to_dict())
        self.assertIsInstance(rebuilt, TabulatedClassifier)
        np.testing.assert_array_equal(rebuilt.eta1, clf.eta1)

    def test_unknown_kind(self):
        with self.assertRaises(DomainError):
            classifier_from_dict({'kind': 'forest'})

    def test_train_config_validation(self):
        with self.assertRaises(DomainError):
            TrainConfig(learning_rate=0.0)
        self.assertEqual(TrainConfig().to_dict()['batch_size'], 256)
