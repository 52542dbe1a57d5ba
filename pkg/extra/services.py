"""
Exponential Tilt Reweighting Alignment.

The fitting loop minimizes, over theta_u and the pre-normalization
intercepts beta_u,

    O = -L + log N + lam * N + lam / N
    L = mean_j log sum_u eta_u(xT_j) exp(theta_u . T(xT_j) + beta_u)
    N = mean_j exp(theta_{u_j} . T(xW_j) + beta_{u_j})

with plain SGD on independent uniform minibatches of the source and target
samples, then sets alpha_u = beta_u - log N on the full source sample.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from extra_backend.conf import get_extra_setting
from extra_backend.exceptions import DivergenceError, DomainError, InputShapeError, NumericRangeError
from tilt.services import TiltService
from tilt.types import LabeledDataset, SufficientStatistic, TiltParams, UnlabeledDataset, as_feature_matrix
from .types import ExtraConfig, FitResult, FitTrace

logger = logging.getLogger(__name__)


def _masses(n: int, mass: Optional[np.ndarray]) -> np.ndarray:
    if n == 0:
        raise InputShapeError("batch is empty")
    if mass is None:
        return np.full(n, 1.0 / n)
    mass = np.asarray(mass, dtype=float).reshape(-1)
    if mass.shape[0] != n:
        raise InputShapeError(f"{n} rows but {mass.shape[0]} row masses")
    if np.any(mass < 0):
        raise DomainError("row masses must be nonnegative")
    return mass


@dataclass(frozen=True)
class _Blocks:
    """Precomputed statistic and classifier arrays for one fitting problem"""

    T_source: np.ndarray
    labels: np.ndarray
    T_target: np.ndarray
    eta_target: np.ndarray

    @property
    def p(self) -> int:
        return int(self.T_source.shape[1])


def _split(vector: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    """(2, p) theta block and (2,) intercepts from the flat layout"""
    return vector[:2 * p].reshape(2, p), vector[2 * p:]


def _loss_and_responsibilities(vector, T, eta, mass, p):
    thetas, betas = _split(vector, p)
    scores = T @ thetas.T + betas
    row_terms = logsumexp(scores, axis=1, b=eta)
    bad = np.flatnonzero(~np.isfinite(row_terms))
    if bad.size:
        raise NumericRangeError(f"batch loss is non-finite at row {int(bad[0])}", row=int(bad[0]))
    responsibilities = eta * np.exp(scores - row_terms[:, None])
    return float(mass @ row_terms), responsibilities


def _normalizer_terms(vector, T, labels, mass, p):
    thetas, betas = _split(vector, p)
    exponents = np.einsum('ij,ij->i', T, thetas[labels]) + betas[labels]
    limit = get_extra_setting('EXPONENT_LIMIT')
    bad = np.flatnonzero(~np.isfinite(exponents) | (np.abs(exponents) > limit))
    if bad.size:
        TiltService.check_exponent(float(exponents[bad[0]]), row=int(bad[0]))
    values = np.exp(exponents)
    return float(mass @ values), values


def _evaluate(vector, blocks: _Blocks, lam: float, source_rows=None, target_rows=None,
              source_mass=None, target_mass=None, with_gradient=True):
    """Objective, loss, normalizer and (optionally) gradient of O"""
    p = blocks.p
    T_s, labels = blocks.T_source, blocks.labels
    T_t, eta = blocks.T_target, blocks.eta_target
    if source_rows is not None:
        T_s, labels = T_s[source_rows], labels[source_rows]
    if target_rows is not None:
        T_t, eta = T_t[target_rows], eta[target_rows]
    m_s = _masses(T_s.shape[0], source_mass)
    m_t = _masses(T_t.shape[0], target_mass)

    loss, resp = _loss_and_responsibilities(vector, T_t, eta, m_t, p)
    normalizer, values = _normalizer_terms(vector, T_s, labels, m_s, p)
    value = ExtraService.objective(loss, normalizer, lam)
    if not with_gradient:
        return value, loss, normalizer, None

    weighted_resp = resp * m_t[:, None]
    d_loss_theta = weighted_resp.T @ T_t
    d_loss_beta = weighted_resp.sum(axis=0)
    weighted_values = m_s * values
    d_norm_theta = np.zeros((2, p))
    d_norm_beta = np.zeros(2)
    for u in (0, 1):
        rows = labels == u
        d_norm_theta[u] = weighted_values[rows] @ T_s[rows]
        d_norm_beta[u] = weighted_values[rows].sum()
    d_objective_norm = 1.0 / normalizer + lam - lam / normalizer ** 2
    grad_theta = -d_loss_theta + d_objective_norm * d_norm_theta
    grad_beta = -d_loss_beta + d_objective_norm * d_norm_beta
    return value, loss, normalizer, np.concatenate([grad_theta.reshape(-1), grad_beta])


class ExtraService:
    """
    Service for fitting the exponential tilt model from labeled source and
    unlabeled target samples
    """

    @staticmethod
    def _blocks(clf, spec: SufficientStatistic, source_X=None, source_labels=None, target_X=None) -> _Blocks:
        T_s = np.zeros((0, 0)) if source_X is None else spec.evaluate_matrix(source_X)
        T_t = np.zeros((0, 0)) if target_X is None else spec.evaluate_matrix(target_X)
        eta = np.zeros((0, 2)) if target_X is None else clf.predict_proba_matrix(target_X)
        labels = np.zeros(0, dtype=np.int64) if source_labels is None else np.asarray(source_labels, dtype=np.int64)
        return _Blocks(T_s, labels, T_t, eta)

    @staticmethod
    def _check_params(params: TiltParams, p: int) -> None:
        if params.dim != p:
            raise InputShapeError(f"parameters have dimension {params.dim}, statistic has {p}")

    @classmethod
    def batch_loss(cls, clf, params: TiltParams, spec: SufficientStatistic, target_batch,
                   mass: Optional[np.ndarray] = None) -> float:
        """L over a target batch (rows of features)"""
        X = as_feature_matrix(target_batch.features if isinstance(target_batch, UnlabeledDataset) else target_batch)
        if X.shape[0] < 1:
            raise InputShapeError("target batch is empty")
        T = spec.evaluate_matrix(X)
        cls._check_params(params, T.shape[1])
        eta = clf.predict_proba_matrix(X)
        loss, _ = _loss_and_responsibilities(params.to_vector(), T, eta, _masses(X.shape[0], mass), params.dim)
        return loss

    @classmethod
    def batch_normalizer(cls, params: TiltParams, spec: SufficientStatistic, source_batch: LabeledDataset,
                         mass: Optional[np.ndarray] = None) -> float:
        """N over a labeled source batch"""
        T = spec.evaluate_matrix(source_batch.features)
        cls._check_params(params, T.shape[1])
        normalizer, _ = _normalizer_terms(
            params.to_vector(), T, source_batch.labels, _masses(len(source_batch), mass), params.dim,
        )
        return normalizer

    @staticmethod
    def objective(loss: float, normalizer: float, lam: float) -> float:
        """O = -L + log N + lam * N + lam / N"""
        if not normalizer > 0:
            raise DomainError(f"normalizer must be positive, got {normalizer}")
        return float(-loss + np.log(normalizer) + lam * normalizer + lam / normalizer)

    @classmethod
    def gradient(cls, clf, params: TiltParams, spec: SufficientStatistic, source_batch: LabeledDataset,
                 target_batch, lam: float, source_mass: Optional[np.ndarray] = None,
                 target_mass: Optional[np.ndarray] = None) -> np.ndarray:
        """Analytic gradient of O in the layout (theta0, theta1, beta0, beta1)"""
        target_X = as_feature_matrix(target_batch.features if isinstance(target_batch, UnlabeledDataset) else target_batch)
        if len(source_batch) < 1 or target_X.shape[0] < 1:
            raise InputShapeError("source and target batches must be non-empty")
        blocks = cls._blocks(clf, spec, source_batch.features, source_batch.labels, target_X)
        cls._check_params(params, blocks.p)
        *_, grad = _evaluate(params.to_vector(), blocks, lam, source_mass=source_mass, target_mass=target_mass)
        return grad

    @classmethod
    def full_objective(cls, clf, params: TiltParams, spec: SufficientStatistic, source: LabeledDataset,
                       target: UnlabeledDataset, lam: float) -> float:
        """O evaluated on the complete source and target samples"""
        blocks = cls._blocks(clf, spec, source.features, source.labels, target.features)
        cls._check_params(params, blocks.p)
        value, *_ = _evaluate(params.to_vector(), blocks, lam, with_gradient=False)
        return value

    @classmethod
    def fit_extra(cls, source: LabeledDataset, target: UnlabeledDataset, clf, spec: SufficientStatistic,
                  cfg: ExtraConfig) -> FitResult:
        """Run the minibatch fitting loop and normalize the intercepts"""
        if source.dim != target.dim:
            raise InputShapeError(f"source has dimension {source.dim}, target has {target.dim}")
        if clf.dim != source.dim:
            raise InputShapeError(f"classifier expects dimension {clf.dim}, data has {source.dim}")
        blocks = cls._blocks(clf, spec, source.features, source.labels, target.features)
        p = blocks.p
        n_source, n_target = len(source), len(target)
        interval = int(get_extra_setting('CHECK_INTERVAL'))
        decay = float(get_extra_setting('EMA_DECAY'))

        logger.info(
            f"Fitting tilt model: n_source={n_source}, n_target={n_target}, p={p}, "
            f"lr={cfg.learning_rate}, batch={cfg.batch_size}, lambda={cfg.lam}"
        )
        rng = np.random.default_rng(cfg.seed)
        vector = np.zeros(2 * p + 2)
        trace = FitTrace()
        step = 0

        try:
            value, loss, normalizer, _ = _evaluate(vector, blocks, cfg.lam, with_gradient=False)
            trace.record(0, value, loss, normalizer)
            previous, ema, calm = value, None, 0
            for step in range(1, int(cfg.max_steps) + 1):
                source_rows = rng.integers(0, n_source, size=int(cfg.batch_size))
                target_rows = rng.integers(0, n_target, size=int(cfg.batch_size))
                *_, grad = _evaluate(vector, blocks, cfg.lam, source_rows, target_rows)
                if not np.all(np.isfinite(grad)):
                    trace.n_steps = step
                    raise DivergenceError(f"gradient became non-finite at step {step}", trace=trace,
                                          hint="Try a smaller learning_rate")
                vector = vector - cfg.learning_rate * grad

                if step % interval and step != cfg.max_steps:
                    continue
                value, loss, normalizer, _ = _evaluate(vector, blocks, cfg.lam, with_gradient=False)
                if not np.isfinite(value):
                    trace.n_steps = step
                    raise DivergenceError(f"objective became non-finite at step {step}", trace=trace,
                                          hint="Try a smaller learning_rate")
                trace.record(step, value, loss, normalizer)
                improvement = previous - value
                previous = value
                ema = improvement if ema is None else decay * ema + (1.0 - decay) * improvement
                calm = calm + 1 if ema < cfg.tol else 0
                logger.debug(f"step {step}: objective {value:.8f} loss {loss:.8f} normalizer {normalizer:.6f}")
                if calm >= cfg.patience:
                    trace.converged = True
                    break
            trace.n_steps = step
        except NumericRangeError as e:
            trace.n_steps = step
            logger.error(f"Tilt fit diverged: {e}")
            raise DivergenceError(f"fit diverged: {e}", trace=trace, hint="Try a smaller learning_rate") from e

        if not trace.converged:
            logger.warning(f"Tilt fit did not converge within {cfg.max_steps} steps")

        thetas, betas = _split(vector, p)
        final_normalizer, _ = _normalizer_terms(vector, blocks.T_source, blocks.labels,
                                                _masses(n_source, None), p)
        log_norm = float(np.log(final_normalizer))
        params = TiltParams(thetas[0], betas[0] - log_norm, thetas[1], betas[1] - log_norm, normalized=True)

        band = 1.0 + float(get_extra_setting('NORMALIZER_BAND_FACTOR')) * cfg.lam
        if not 1.0 / band <= final_normalizer <= band:
            logger.warning(f"Normalizer {final_normalizer:.6g} left the sanity band [{1.0 / band:.4g}, {band:.4g}]")
        logger.info(
            f"Tilt fit finished after {trace.n_steps} steps (converged={trace.converged}), "
            f"normalizer before correction {final_normalizer:.6f}"
        )
        return FitResult(params=params, trace=trace, final_normalizer=final_normalizer, config=cfg)

    @classmethod
    def weight_table(cls, result: Union[FitResult, TiltParams], spec: SufficientStatistic,
                     data: LabeledDataset) -> np.ndarray:
        """w_j = exp(theta_{u_j} . T(x_j) + alpha_{u_j}) for every source row"""
        params = result.params if isinstance(result, FitResult) else result
        if not params.normalized:
            raise DomainError("weight_table needs normalized parameters")
        T = spec.evaluate_matrix(data.features)
        cls._check_params(params, T.shape[1])
        return TiltService.row_weights(params, T, data.labels)
