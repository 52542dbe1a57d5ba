"""
First-price RTB auction stream types.

Prices are in the same currency units as the bid.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, Optional

import numpy as np

from extra_backend.exceptions import ConfigValidationError
from tilt.types import as_feature_matrix, frozen_array


@dataclass(frozen=True, eq=False)
class MarketModel:
    """
    x ~ N(0, I_d), or uniform draws from feature_support weighted by
    support_probs when a finite grid is declared;
    u ~ Bernoulli(sigmoid(utility_weights . x + utility_bias));
    log m ~ N(price_loc_weights . x + price_coupling * u, price_scale^2);
    the auction is won when m < bid.
    """

    feature_dim: int
    utility_weights: np.ndarray
    utility_bias: float
    price_loc_weights: np.ndarray
    price_coupling: float
    price_scale: float
    bid: float
    feature_support: Optional[np.ndarray] = None
    support_probs: Optional[np.ndarray] = None

    def __post_init__(self):
        errors = {}
        d = int(self.feature_dim)
        if d < 1:
            errors['feature_dim'] = 'must be at least 1'
        w_u = np.asarray(self.utility_weights, dtype=float).reshape(-1)
        w_m = np.asarray(self.price_loc_weights, dtype=float).reshape(-1)
        if w_u.shape[0] != d:
            errors['utility_weights'] = f"has length {w_u.shape[0]}, expected {d}"
        if w_m.shape[0] != d:
            errors['price_loc_weights'] = f"has length {w_m.shape[0]}, expected {d}"
        scalars = (self.utility_bias, self.price_coupling, self.price_scale, self.bid)
        if not (np.all(np.isfinite(w_u)) and np.all(np.isfinite(w_m)) and np.all(np.isfinite(scalars))):
            errors['values'] = 'all parameters must be finite'
        if not self.price_scale > 0:
            errors['price_scale'] = 'must be positive'
        if not self.bid > 0:
            errors['bid'] = 'must be positive'
        support, probs = None, None
        if self.feature_support is not None:
            support = as_feature_matrix(self.feature_support)
            probs = (np.full(support.shape[0], 1.0 / support.shape[0]) if self.support_probs is None
                     else np.asarray(self.support_probs, dtype=float).reshape(-1))
            if support.shape[1] != d:
                errors['feature_support'] = f"has {support.shape[1]} columns, expected {d}"
            if probs.shape[0] != support.shape[0] or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                errors['support_probs'] = 'must be a probability vector over the support rows'
        if errors:
            raise ConfigValidationError(f"invalid market model: {errors}", errors=errors)
        object.__setattr__(self, 'feature_dim', d)
        object.__setattr__(self, 'utility_weights', frozen_array(w_u))
        object.__setattr__(self, 'price_loc_weights', frozen_array(w_m))
        object.__setattr__(self, 'utility_bias', float(self.utility_bias))
        object.__setattr__(self, 'price_coupling', float(self.price_coupling))
        object.__setattr__(self, 'price_scale', float(self.price_scale))
        object.__setattr__(self, 'bid', float(self.bid))
        if support is not None:
            object.__setattr__(self, 'feature_support', frozen_array(support))
            object.__setattr__(self, 'support_probs', frozen_array(probs))

    def to_dict(self) -> Dict:
        data = {
            'feature_dim': self.feature_dim,
            'utility_weights': self.utility_weights.tolist(),
            'utility_bias': self.utility_bias,
            'price_loc_weights': self.price_loc_weights.tolist(),
            'price_coupling': self.price_coupling,
            'price_scale': self.price_scale,
            'bid': self.bid,
        }
        if self.feature_support is not None:
            data['feature_support'] = self.feature_support.tolist()
            data['support_probs'] = self.support_probs.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'MarketModel':
        return cls(
            feature_dim=data['feature_dim'],
            utility_weights=data['utility_weights'],
            utility_bias=data['utility_bias'],
            price_loc_weights=data['price_loc_weights'],
            price_coupling=data['price_coupling'],
            price_scale=data['price_scale'],
            bid=data['bid'],
            feature_support=data.get('feature_support'),
            support_probs=data.get('support_probs'),
        )


@dataclass(frozen=True)
class AuctionRecord:
    features: tuple
    utility: int
    market_price: float
    won: bool


@dataclass(frozen=True, eq=False)
class AuctionStream:
    """Columnar auction records; won[j] holds exactly when prices[j] < bid"""

    features: np.ndarray
    utilities: np.ndarray
    prices: np.ndarray
    won: np.ndarray
    model: MarketModel
    seed: int

    def __post_init__(self):
        object.__setattr__(self, 'features', frozen_array(self.features))
        object.__setattr__(self, 'utilities', frozen_array(self.utilities, dtype=np.int64))
        object.__setattr__(self, 'prices', frozen_array(self.prices))
        object.__setattr__(self, 'won', frozen_array(self.won, dtype=bool))

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_won(self) -> int:
        return int(self.won.sum())

    def records(self) -> Iterator[AuctionRecord]:
        for x, u, m, won in zip(self.features, self.utilities, self.prices, self.won):
            yield AuctionRecord(tuple(x.tolist()), int(u), float(m), bool(won))


@dataclass(frozen=True)
class WinRateEstimate:
    """Monte-Carlo estimates around p = pi * F1(b) / F(b)"""

    p_win_conditional: float
    pi: float
    f0: float
    f1: float
    f_marginal: float
    analytic_p: float
    standard_error: float
    n: int
    n_won: int

    def to_dict(self) -> Dict:
        return {
            'p_win_conditional': self.p_win_conditional,
            'pi': self.pi,
            'f0': self.f0,
            'f1': self.f1,
            'win_rate': self.f_marginal,
            'analytic_p': self.analytic_p,
            'standard_error': self.standard_error,
            'n': self.n,
            'n_won': self.n_won,
        }
