import logging
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import expit, logit

from extra_backend.exceptions import DivergenceError, DomainError, InputShapeError
from tilt.types import DiscretePopulation, LabeledDataset, as_feature_vector
from .types import DEFAULT_CLIP_EPSILON, SourceClassifier, TabulatedClassifier, TrainConfig

logger = logging.getLogger(__name__)

Classifier = Union[SourceClassifier, TabulatedClassifier]


class ClassifierService:
    """
    Service for training and querying the probabilistic source classifier
    """

    @staticmethod
    def logistic_loss_and_gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray,
                                   sample_weights: Optional[np.ndarray] = None,
                                   l2_penalty: float = 0.0) -> Tuple[float, np.ndarray]:
        """
        Weighted, L2-regularized logistic loss and its gradient.

        params is (w_1..w_d, b). The loss is mean_j s_j * log-loss_j plus
        l2/2 * |w|^2; the bias is not penalized.
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        s = np.ones_like(y) if sample_weights is None else np.asarray(sample_weights, dtype=float)
        w, b = params[:-1], params[-1]
        z = X @ w + b
        n = y.shape[0]
        loss = float(np.sum(s * (np.logaddexp(0.0, z) - y * z)) / n + 0.5 * l2_penalty * (w @ w))
        residual = s * (expit(z) - y)
        grad_w = X.T @ residual / n + l2_penalty * w
        grad_b = residual.sum() / n
        return loss, np.append(grad_w, grad_b)

    @classmethod
    def train_classifier(cls, data: LabeledDataset, cfg: TrainConfig,
                         sample_weights: Optional[np.ndarray] = None,
                         clip_epsilon: float = DEFAULT_CLIP_EPSILON) -> SourceClassifier:
        """Minibatch gradient descent on the (weighted) logistic loss"""
        n, d = len(data), data.dim
        if sample_weights is None:
            s = np.ones(n)
        else:
            s = np.asarray(sample_weights, dtype=float).reshape(-1)
            if s.shape[0] != n:
                raise InputShapeError(f"{n} rows but {s.shape[0]} sample weights")
            if np.any(s <= 0) or not np.all(np.isfinite(s)):
                raise DomainError("sample weights must be positive and finite")

        labels = data.labels
        if np.all(labels == labels[0]):
            # MLE sits at infinity; return the clipped constant classifier
            level = clip_epsilon if labels[0] == 0 else 1.0 - clip_epsilon
            logger.warning(f"All {n} training labels are {labels[0]}; returning constant classifier at {level}")
            return SourceClassifier(np.zeros(d), float(logit(level)), clip_epsilon=clip_epsilon)

        mean = data.features.mean(axis=0)
        scale = data.features.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        Xs = (data.features - mean) / scale
        y = labels.astype(float)

        rng = np.random.default_rng(cfg.seed)
        params = np.zeros(d + 1)
        batch_size = min(int(cfg.batch_size), n)
        history = []
        for epoch in range(int(cfg.epochs)):
            order = rng.permutation(n)
            for start in range(0, n, batch_size):
                rows = order[start:start + batch_size]
                _, grad = cls.logistic_loss_and_gradient(params, Xs[rows], y[rows], s[rows], cfg.l2_penalty)
                params = params - cfg.learning_rate * grad
            loss, _ = cls.logistic_loss_and_gradient(params, Xs, y, s, cfg.l2_penalty)
            if not np.isfinite(loss) or not np.all(np.isfinite(params)):
                raise DivergenceError(
                    f"logistic loss became non-finite at epoch {epoch + 1}",
                    trace=history,
                    hint=f"Try a learning_rate smaller than {cfg.learning_rate}",
                )
            history.append(loss)
            logger.debug(f"Classifier epoch {epoch + 1}/{cfg.epochs}: loss {loss:.6f}")

        # fold standardization into raw-space parameters
        weights = params[:-1] / scale
        bias = params[-1] - float(weights @ mean)
        logger.info(f"Trained source classifier on {n} rows, final loss {history[-1]:.6f}")
        return SourceClassifier(
            weights=weights,
            bias=bias,
            clip_epsilon=clip_epsilon,
            feature_mean=mean,
            feature_scale=scale,
            training_loss=tuple(history),
        )

    @classmethod
    def predict_proba(cls, clf: Classifier, x) -> Tuple[float, float]:
        """(eta0, eta1) for one feature vector"""
        x = as_feature_vector(x, clf.dim)
        eta = clf.predict_proba_matrix(x.reshape(1, -1))[0]
        return float(eta[0]), float(eta[1])

    @classmethod
    def oracle_classifier(cls, pop: DiscretePopulation,
                          clip_epsilon: float = DEFAULT_CLIP_EPSILON) -> TabulatedClassifier:
        """Exact p(U=1|x) from the source pmf"""
        marginal = pop.source_marginal()
        empty = np.flatnonzero(marginal <= 0)
        if empty.size:
            x = pop.alphabet[empty[0]].tolist()
            raise DomainError(f"source marginal is zero at x={x}; p(U|x) undefined")
        return TabulatedClassifier(pop.alphabet, pop.source_pmf[:, 1] / marginal, clip_epsilon)
