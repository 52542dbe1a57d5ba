import logging
from typing import Tuple, Union

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from extra_backend.exceptions import DomainError, EmptySourceError, InputShapeError
from tilt.types import DiscretePopulation, LabeledDataset, UnlabeledDataset, as_feature_matrix
from .types import AuctionStream, MarketModel, WinRateEstimate

logger = logging.getLogger(__name__)


class AuctionSimulator:
    """
    Simulator for a first-price RTB auction stream where the market price is
    coupled to the utility of the impression
    """

    @staticmethod
    def utility_probability(model: MarketModel, X: np.ndarray) -> np.ndarray:
        """P(U=1 | x)"""
        return expit(X @ model.utility_weights + model.utility_bias)

    @staticmethod
    def conditional_win_probability(model: MarketModel, X: np.ndarray, u) -> np.ndarray:
        """P(M < b | x, u) under the lognormal price model"""
        location = X @ model.price_loc_weights + model.price_coupling * np.asarray(u, dtype=float)
        return norm.cdf((np.log(model.bid) - location) / model.price_scale)

    @classmethod
    def simulate_auctions(cls, model: MarketModel, n: int, seed: int) -> AuctionStream:
        """Generate n bid opportunities; deterministic given seed"""
        n = int(n)
        if n < 1:
            raise InputShapeError(f"stream size must be at least 1, got {n}")
        rng = np.random.default_rng(seed)
        if model.feature_support is not None:
            rows = rng.choice(model.feature_support.shape[0], size=n, p=model.support_probs)
            X = model.feature_support[rows]
        else:
            X = rng.standard_normal((n, model.feature_dim))
        utilities = (rng.random(n) < cls.utility_probability(model, X)).astype(np.int64)
        log_prices = (X @ model.price_loc_weights + model.price_coupling * utilities
                      + model.price_scale * rng.standard_normal(n))
        prices = np.exp(log_prices)
        won = prices < model.bid
        logger.info(f"Simulated {n} auctions (seed {seed}): win rate {won.mean():.4f}, utility rate {utilities.mean():.4f}")
        return AuctionStream(X, utilities, prices, won, model, int(seed))

    @classmethod
    def split_domains(cls, stream: AuctionStream) -> Tuple[LabeledDataset, UnlabeledDataset]:
        """Source = won auctions with labels; target = every auction, unlabeled"""
        if len(stream) < 1:
            raise InputShapeError("auction stream is empty")
        if stream.n_won == 0:
            raise EmptySourceError(f"none of the {len(stream)} auctions was won; the source domain is empty")
        source = LabeledDataset(stream.features[stream.won], stream.utilities[stream.won])
        target = UnlabeledDataset(stream.features)
        return source, target

    @classmethod
    def labeled_target(cls, stream: AuctionStream) -> LabeledDataset:
        """All auctions with their utilities; for held-out evaluation only"""
        return LabeledDataset(stream.features, stream.utilities)

    @classmethod
    def win_conditional_rate(cls, model: MarketModel, mc_n: int, seed: int) -> WinRateEstimate:
        """Monte-Carlo check of p = pi F1(b) / F(b) on a fresh stream"""
        stream = cls.simulate_auctions(model, mc_n, seed)
        if stream.n_won == 0:
            raise EmptySourceError(f"no wins in {mc_n} simulated auctions; raise mc_n or the bid")
        u, won = stream.utilities, stream.won
        pi = float(u.mean())
        n_class1 = int((u == 1).sum())
        n_class0 = len(stream) - n_class1
        f1 = float(won[u == 1].mean()) if n_class1 else 0.0
        f0 = float(won[u == 0].mean()) if n_class0 else 0.0
        if not (n_class0 and n_class1):
            logger.warning(f"Only one utility class present in {mc_n} auctions; its counterpart CDF is reported as 0")
        f_marginal = (1.0 - pi) * f0 + pi * f1
        p = float(u[won].mean())
        return WinRateEstimate(
            p_win_conditional=p,
            pi=pi,
            f0=f0,
            f1=f1,
            f_marginal=f_marginal,
            analytic_p=pi * f1 / f_marginal,
            standard_error=float(np.sqrt(p * (1.0 - p) / stream.n_won)),
            n=len(stream),
            n_won=stream.n_won,
        )

    @classmethod
    def market_stat_features(cls, model: MarketModel, stream: Union[AuctionStream, np.ndarray]) -> np.ndarray:
        """
        Append E[M | x] and SD[M | x], the closed-form moments of the
        two-component lognormal mixture over U, as two extra columns.
        """
        X = as_feature_matrix(stream.features if isinstance(stream, AuctionStream) else stream,
                              model.feature_dim)
        pi_x = cls.utility_probability(model, X)
        location = X @ model.price_loc_weights
        s2 = model.price_scale ** 2
        first, second = [], []
        for u in (0, 1):
            shifted = location + model.price_coupling * u
            first.append(np.exp(shifted + 0.5 * s2))
            second.append(np.exp(2.0 * shifted + 2.0 * s2))
        mean = (1.0 - pi_x) * first[0] + pi_x * first[1]
        raw_second = (1.0 - pi_x) * second[0] + pi_x * second[1]
        sd = np.sqrt(np.maximum(raw_second - mean ** 2, 0.0))
        return np.column_stack([X, mean, sd])

    @classmethod
    def win_probability(cls, model: MarketModel) -> float:
        """Exact P(M < b) for a grid-supported model"""
        if model.feature_support is None:
            raise DomainError("exact win probability needs a finite feature support")
        joint = cls._joint_table(model)
        X = model.feature_support
        g = np.column_stack([cls.conditional_win_probability(model, X, u) for u in (0, 1)])
        return float((joint * g).sum())

    @classmethod
    def selection_weights(cls, model: MarketModel, source: LabeledDataset, win_probability: float) -> np.ndarray:
        """
        True importance weights P(win) / P(win | x, u) of winning rows; the
        quantity the tilt model approximates on simulated data.
        """
        if not 0.0 < win_probability <= 1.0:
            raise DomainError(f"win probability must lie in (0, 1], got {win_probability}")
        g = cls.conditional_win_probability(model, source.features, source.labels)
        if np.any(g <= 0):
            raise DomainError("conditional win probability underflows to zero on some rows")
        return win_probability / g

    @classmethod
    def _joint_table(cls, model: MarketModel) -> np.ndarray:
        pi_x = cls.utility_probability(model, model.feature_support)
        return model.support_probs[:, None] * np.column_stack([1.0 - pi_x, pi_x])

    @classmethod
    def discretized_population(cls, model: MarketModel) -> DiscretePopulation:
        """
        Exact winners (source) and all-auction (target) pmfs of a
        grid-supported market model.
        """
        if model.feature_support is None:
            raise DomainError("discretized population needs a finite feature support")
        joint = cls._joint_table(model)
        X = model.feature_support
        g = np.column_stack([cls.conditional_win_probability(model, X, u) for u in (0, 1)])
        selected = joint * g
        source = selected / selected.sum()
        return DiscretePopulation(X, source, joint / joint.sum())
