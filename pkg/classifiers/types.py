"""
Probabilistic source classifiers eta_W(x) = (p(U=0|x), p(U=1|x)).
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.special import expit

from extra_backend.exceptions import DomainError, InputShapeError
from tilt.types import frozen_array, as_feature_matrix

DEFAULT_CLIP_EPSILON = 1e-6


def _check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 0.5:
        raise DomainError(f"clip_epsilon must lie in (0, 0.5), got {epsilon}")
    return epsilon


def _proba_pair(eta1: np.ndarray, epsilon: float) -> np.ndarray:
    eta1 = np.clip(eta1, epsilon, 1.0 - epsilon)
    return np.column_stack([1.0 - eta1, eta1])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 20
    batch_size: int = 256
    l2_penalty: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.epochs) < 1:
            raise DomainError(f"epochs must be positive, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise DomainError(f"batch_size must be positive, got {self.batch_size}")
        if self.l2_penalty < 0:
            raise DomainError(f"l2_penalty must be nonnegative, got {self.l2_penalty}")

    def to_dict(self) -> Dict:
        return {
            'learning_rate': float(self.learning_rate),
            'epochs': int(self.epochs),
            'batch_size': int(self.batch_size),
            'l2_penalty': float(self.l2_penalty),
            'seed': int(self.seed),
        }


@dataclass(frozen=True, eq=False)
class SourceClassifier:
    """
    Logistic classifier in raw feature space.

    Standardization constants used during training are kept for the record;
    they are already folded into weights and bias.
    """

    weights: np.ndarray
    bias: float
    clip_epsilon: float = DEFAULT_CLIP_EPSILON
    feature_mean: np.ndarray = None
    feature_scale: np.ndarray = None
    training_loss: Tuple[float, ...] = ()

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if not (np.all(np.isfinite(weights)) and np.isfinite(self.bias)):
            raise DomainError("classifier parameters must be finite")
        mean = np.zeros_like(weights) if self.feature_mean is None else self.feature_mean
        scale = np.ones_like(weights) if self.feature_scale is None else self.feature_scale
        object.__setattr__(self, 'weights', frozen_array(weights))
        object.__setattr__(self, 'bias', float(self.bias))
        object.__setattr__(self, 'clip_epsilon', _check_epsilon(self.clip_epsilon))
        object.__setattr__(self, 'feature_mean', frozen_array(np.asarray(mean, dtype=float).reshape(-1)))
        object.__setattr__(self, 'feature_scale', frozen_array(np.asarray(scale, dtype=float).reshape(-1)))
        object.__setattr__(self, 'training_loss', tuple(float(v) for v in self.training_loss))

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def predict_proba_matrix(self, X) -> np.ndarray:
        X = as_feature_matrix(X, self.dim)
        return _proba_pair(expit(X @ self.weights + self.bias), self.clip_epsilon)

    def to_dict(self) -> Dict:
        return {
            'kind': 'logistic',
            'weights': self.weights.tolist(),
            'bias': self.bias,
            'clip_epsilon': self.clip_epsilon,
            'feature_mean': self.feature_mean.tolist(),
            'feature_scale': self.feature_scale.tolist(),
        }


@dataclass(frozen=True, eq=False)
class TabulatedClassifier:
    """Exact p(U=1|x) per alphabet point of a discrete population, clipped"""

    alphabet: np.ndarray
    eta1: np.ndarray
    clip_epsilon: float = DEFAULT_CLIP_EPSILON

    def __post_init__(self):
        alphabet = as_feature_matrix(self.alphabet)
        eta1 = np.asarray(self.eta1, dtype=float).reshape(-1)
        if eta1.shape[0] != alphabet.shape[0]:
            raise InputShapeError(f"{alphabet.shape[0]} alphabet points but {eta1.shape[0]} probabilities")
        epsilon = _check_epsilon(self.clip_epsilon)
        object.__setattr__(self, 'alphabet', frozen_array(alphabet))
        object.__setattr__(self, 'eta1', frozen_array(np.clip(eta1, epsilon, 1.0 - epsilon)))
        object.__setattr__(self, 'clip_epsilon', epsilon)
        object.__setattr__(self, '_lookup', {tuple(row.tolist()): i for i, row in enumerate(alphabet)})

    @property
    def dim(self) -> int:
        return int(self.alphabet.shape[1])

    def predict_proba_matrix(self, X) -> np.ndarray:
        X = as_feature_matrix(X, self.dim)
        try:
            rows = np.array([self._lookup[tuple(x.tolist())] for x in X], dtype=np.int64)
        except KeyError as e:
            raise DomainError(f"point {e.args[0]} is not in the classifier alphabet") from None
        return _proba_pair(self.eta1[rows], self.clip_epsilon)

    def to_dict(self) -> Dict:
        return {
            'kind': 'tabulated',
            'alphabet': self.alphabet.tolist(),
            'eta1': self.eta1.tolist(),
            'clip_epsilon': self.clip_epsilon,
        }


def classifier_from_dict(data: Dict):
    """Rebuild either classifier kind from its JSON form"""
    kind = data.get('kind', 'logistic')
    if kind == 'tabulated':
        return TabulatedClassifier(data['alphabet'], data['eta1'], data.get('clip_epsilon', DEFAULT_CLIP_EPSILON))
    if kind != 'logistic':
        raise DomainError(f"unknown classifier kind: {kind}")
    return SourceClassifier(
        weights=data['weights'],
        bias=data['bias'],
        clip_epsilon=data.get('clip_epsilon', DEFAULT_CLIP_EPSILON),
        feature_mean=data.get('feature_mean'),
        feature_scale=data.get('feature_scale'),
    )
