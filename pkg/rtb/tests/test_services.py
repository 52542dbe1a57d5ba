import math

import numpy as np
import pytest
from django.test import SimpleTestCase
from scipy.special import expit
from scipy.stats import norm

from extra_backend.exceptions import ConfigValidationError, DomainError, EmptySourceError, InputShapeError
from rtb.services import AuctionSimulator
from rtb.types import AuctionStream, MarketModel
from tilt.services import PopulationService
from tilt.types import LabeledDataset


def market(**overrides):
    values = dict(
        feature_dim=1, utility_weights=[0.0], utility_bias=-1.0, price_loc_weights=[0.0],
        price_coupling=0.0, price_scale=1.0, bid=1.0,
    )
    values.update(overrides)
    return MarketModel(**values)


def grid_market(**overrides):
    values = dict(
        utility_weights=[1.0], price_loc_weights=[0.8], price_coupling=1.0,
        feature_support=np.linspace(-1.5, 1.5, 7).reshape(-1, 1),
    )
    values.update(overrides)
    return market(**values)


def binomial_se(p, n):
    return math.sqrt(p * (1.0 - p) / n)


class MarketModelTest(SimpleTestCase):
    def test_nonpositive_price_scale(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            market(price_scale=0.0)
        self.assertIn('price_scale', ctx.exception.errors)

    def test_weight_lengths_checked(self):
        with self.assertRaises(ConfigValidationError) as ctx:
            market(utility_weights=[1.0, 2.0])
        self.assertIn('utility_weights', ctx.exception.errors)

    def test_support_probabilities_checked(self):
        with self.assertRaises(ConfigValidationError):
            market(feature_support=[[0.0], [1.0]], support_probs=[0.7, 0.7])

    def test_dict_form_rebuilds_model(self):
        model = grid_market()
        rebuilt = MarketModel.from_dict(model.to_dict())
        np.testing.assert_array_equal(rebuilt.feature_support, model.feature_support)
        self.assertEqual(rebuilt.price_coupling, 1.0)


class SimulateAuctionsTest(SimpleTestCase):
    def test_win_rate_matches_lognormal_cdf(self):
        model = market(bid=1.5, price_scale=0.8)
        stream = AuctionSimulator.simulate_auctions(model, 100000, seed=1)
        expected = norm.cdf(math.log(1.5) / 0.8)
        self.assertLess(abs(stream.won.mean() - expected), 3 * binomial_se(expected, len(stream)))

    def test_huge_bid_wins_everything(self):
        stream = AuctionSimulator.simulate_auctions(market(bid=1e12), 5000, seed=2)
        self.assertEqual(stream.n_won, 5000)

    def test_utility_base_rate(self):
        stream = AuctionSimulator.simulate_auctions(market(utility_bias=-3.0), 100000, seed=3)
        expected = expit(-3.0)
        self.assertAlmostEqual(expected, 0.0474, places=4)
        self.assertLess(abs(stream.utilities.mean() - expected), 3 * binomial_se(expected, len(stream)))

    def test_won_iff_price_below_bid(self):
        stream = AuctionSimulator.simulate_auctions(grid_market(), 20000, seed=4)
        np.testing.assert_array_equal(stream.won, stream.prices < stream.model.bid)
        for record in list(stream.records())[:50]:
            self.assertEqual(record.won, record.market_price < 1.0)

    def test_same_seed_same_stream_bytes(self):
        model = market(feature_dim=3, utility_weights=[1, 0, -1], price_loc_weights=[0.2, 0.2, 0.2])
        first = AuctionSimulator.simulate_auctions(model, 1000, seed=9)
        second = AuctionSimulator.simulate_auctions(model, 1000, seed=9)
        for name in ('features', 'utilities', 'prices', 'won'):
            self.assertEqual(getattr(first, name).tobytes(), getattr(second, name).tobytes())

    def test_grid_features_stay_on_support(self):
        model = grid_market()
        stream = AuctionSimulator.simulate_auctions(model, 2000, seed=5)
        self.assertTrue(np.all(np.isin(stream.features[:, 0], model.feature_support[:, 0])))

    def test_invalid_size(self):
        with self.assertRaises(InputShapeError):
            AuctionSimulator.simulate_auctions(market(), 0, seed=0)


class SplitDomainsTest(SimpleTestCase):
    def test_all_won(self):
        stream = AuctionSimulator.simulate_auctions(market(bid=1e12), 200, seed=6)
        source, target = AuctionSimulator.split_domains(stream)
        np.testing.assert_array_equal(source.features, target.features)
        np.testing.assert_array_equal(source.labels, stream.utilities)

    def test_none_won(self):
        stream = AuctionSimulator.simulate_auctions(market(bid=1e-30), 200, seed=7)
        with self.assertRaises(EmptySourceError):
            AuctionSimulator.split_domains(stream)

    def test_counts_of_mixed_stream(self):
        prices = np.array([0.5, 2.0, 0.3, 3.0, 4.0, 0.9, 5.0, 6.0, 0.1, 7.0])
        stream = AuctionStream(
            features=np.arange(10.0).reshape(-1, 1), utilities=np.arange(10) % 2,
            prices=prices, won=prices < 1.0, model=market(), seed=0,
        )
        source, target = AuctionSimulator.split_domains(stream)
        self.assertEqual((len(source), len(target)), (4, 10))
        np.testing.assert_array_equal(source.features[:, 0], [0.0, 2.0, 5.0, 8.0])

    def test_selection_vanishes_without_coupling(self):
        stream = AuctionSimulator.simulate_auctions(market(), 200000, seed=8)
        source, _ = AuctionSimulator.split_domains(stream)
        pi = expit(-1.0)
        self.assertLess(abs(source.labels.mean() - pi), 3 * binomial_se(pi, len(source)))
        self.assertLess(abs(source.features.mean()), 3 / math.sqrt(len(source)))

    def test_coupling_depresses_winner_utility_rate(self):
        stream = AuctionSimulator.simulate_auctions(market(price_coupling=1.0), 200000, seed=9)
        source, _ = AuctionSimulator.split_domains(stream)
        self.assertLess(source.labels.mean(), stream.utilities.mean())


class WinConditionalRateTest(SimpleTestCase):
    def test_matches_selection_identity(self):
        # F0(b) = 0.4 and F1(b) = 0.8 at sigma = 1 put ln b at the 0.4 quantile
        log_bid = norm.ppf(0.4)
        model = market(
            utility_bias=-math.log(9.0), bid=math.exp(log_bid), price_coupling=log_bid - norm.ppf(0.8),
        )
        estimate = AuctionSimulator.win_conditional_rate(model, 200000, seed=10)
        expected = 0.1 * 0.8 / (0.9 * 0.4 + 0.1 * 0.8)
        self.assertAlmostEqual(expected, 0.181818, places=6)
        self.assertLess(abs(estimate.p_win_conditional - expected), 3 * estimate.standard_error)
        self.assertLess(abs(estimate.f0 - 0.4), 0.01)
        self.assertLess(abs(estimate.f1 - 0.8), 0.01)
        self.assertAlmostEqual(
            estimate.analytic_p, estimate.pi * estimate.f1 / estimate.f_marginal, places=12,
        )

    def test_no_coupling_gives_base_rate(self):
        estimate = AuctionSimulator.win_conditional_rate(market(), 200000, seed=11)
        self.assertLess(abs(estimate.p_win_conditional - expit(-1.0)), 3 * estimate.standard_error)

    def test_huge_bid_gives_base_rate(self):
        estimate = AuctionSimulator.win_conditional_rate(market(price_coupling=1.0, bid=1e12), 200000, seed=12)
        self.assertEqual(estimate.n_won, 200000)
        self.assertLess(abs(estimate.p_win_conditional - expit(-1.0)), 3 * binomial_se(expit(-1.0), 200000))

    def test_no_wins(self):
        with self.assertRaises(EmptySourceError):
            AuctionSimulator.win_conditional_rate(market(bid=1e-30), 1000, seed=13)

    def test_report_keys(self):
        estimate = AuctionSimulator.win_conditional_rate(market(), 1000, seed=14)
        self.assertEqual(
            set(estimate.to_dict()),
            {'p_win_conditional', 'pi', 'f0', 'f1', 'win_rate', 'analytic_p', 'standard_error', 'n', 'n_won'},
        )


class MarketStatFeaturesTest(SimpleTestCase):
    def test_constant_without_price_dependence(self):
        model = market(price_scale=0.7, utility_weights=[1.0])
        X = np.linspace(-2.0, 2.0, 9).reshape(-1, 1)
        augmented = AuctionSimulator.market_stat_features(model, X)
        s2 = 0.49
        np.testing.assert_allclose(augmented[:, 1], math.exp(s2 / 2))
        np.testing.assert_allclose(augmented[:, 2], math.sqrt(math.exp(2 * s2) - math.exp(s2)))
        np.testing.assert_array_equal(augmented[:, 0], X[:, 0])

    def test_identical_rows_identical_columns(self):
        model = grid_market()
        augmented = AuctionSimulator.market_stat_features(model, np.array([[0.5], [0.5]]))
        self.assertEqual(augmented[0].tobytes(), augmented[1].tobytes())

    def test_coupling_raises_mean_with_utility_probability(self):
        model = market(utility_weights=[2.0], price_coupling=0.8)
        augmented = AuctionSimulator.market_stat_features(model, np.array([[-1.0], [1.0]]))
        self.assertGreater(augmented[1, 1], augmented[0, 1])

    def test_accepts_stream(self):
        stream = AuctionSimulator.simulate_auctions(market(), 50, seed=15)
        self.assertEqual(AuctionSimulator.market_stat_features(stream.model, stream).shape, (50, 3))


@pytest.mark.oracle
class DiscretizedPopulationTest(SimpleTestCase):
    def test_selection_weights_equal_exact_ratios(self):
        model = grid_market()
        pop = AuctionSimulator.discretized_population(model)
        exact = PopulationService.exact_weights(pop)
        features = np.repeat(pop.alphabet, 2, axis=0)
        labels = np.tile([0, 1], pop.size)
        source = LabeledDataset(features, labels)
        weights = AuctionSimulator.selection_weights(model, source, AuctionSimulator.win_probability(model))
        np.testing.assert_allclose(weights, exact.values.reshape(-1), rtol=1e-10)

    def test_win_probability_matches_simulation(self):
        model = grid_market()
        p_win = AuctionSimulator.win_probability(model)
        stream = AuctionSimulator.simulate_auctions(model, 200000, seed=16)
        self.assertLess(abs(stream.won.mean() - p_win), 3 * binomial_se(p_win, len(stream)))

    def test_target_is_the_joint_table(self):
        model = grid_market()
        pop = AuctionSimulator.discretized_population(model)
        np.testing.assert_allclose(pop.target_marginal(), np.full(7, 1 / 7))

    def test_requires_grid(self):
        with self.assertRaises(DomainError):
            AuctionSimulator.discretized_population(market())
        with self.assertRaises(DomainError):
            AuctionSimulator.win_probability(market())
