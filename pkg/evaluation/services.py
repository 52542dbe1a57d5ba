import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.special import rel_entr

from classifiers.services import ClassifierService
from classifiers.types import SourceClassifier, TrainConfig
from extra_backend.conf import get_extra_setting
from extra_backend.exceptions import DomainError, InputShapeError, SupportViolationError
from tilt.services import PopulationService
from tilt.types import DiscretePopulation, ExactWeights, LabeledDataset, SufficientStatistic, TiltParams
from .types import LOSS_NAMES, AnchorReport, KLDiagnostics, RiskReport, WeightSummary

logger = logging.getLogger(__name__)

LOG_LOSS_FLOOR = 1e-15


class EvaluationService:
    """
    Service for estimating target-domain performance from reweighted source
    data and for exact diagnostics on discrete populations
    """

    @staticmethod
    def pointwise_loss(predictions, labels, loss: str) -> np.ndarray:
        """
        Per-row loss of class-1 probabilities against 0/1 labels.
        zero_one predicts class 1 when the probability is at least 0.5.
        """
        if loss not in LOSS_NAMES:
            raise DomainError(f"unknown loss {loss!r}; expected one of {LOSS_NAMES}")
        p = np.asarray(predictions, dtype=float).reshape(-1)
        y = np.asarray(labels, dtype=float).reshape(-1)
        if p.shape != y.shape:
            raise InputShapeError(f"{p.shape[0]} predictions but {y.shape[0]} labels")
        if loss == 'zero_one':
            return ((p >= 0.5).astype(float) != y).astype(float)
        p = np.clip(p, LOG_LOSS_FLOOR, 1.0 - LOG_LOSS_FLOOR)
        return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))

    @classmethod
    def reweighted_risk(cls, predictions, labels, weights, loss: str = 'zero_one') -> float:
        """(1/n_W) sum_j l(f(x_j), u_j) w_j"""
        losses = cls.pointwise_loss(predictions, labels, loss)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape != losses.shape:
            raise InputShapeError(f"{losses.shape[0]} rows but {w.shape[0]} weights")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be positive and finite")
        return float(np.mean(losses * w))

    @classmethod
    def risk_report(cls, predictions, labels, weights, loss: str = 'zero_one',
                    target_predictions=None, target_labels=None) -> RiskReport:
        labels = np.asarray(labels)
        true_risk = None
        if target_predictions is not None and target_labels is not None:
            true_risk = float(np.mean(cls.pointwise_loss(target_predictions, target_labels, loss)))
        return RiskReport(
            unweighted_source_risk=float(np.mean(cls.pointwise_loss(predictions, labels, loss))),
            reweighted_risk=cls.reweighted_risk(predictions, labels, weights, loss),
            loss_name=loss,
            true_target_risk=true_risk,
        )

    @classmethod
    def population_risk(cls, pop: DiscretePopulation, predictions,
                        weights: Union[ExactWeights, np.ndarray], loss: str = 'zero_one') -> Tuple[float, float]:
        """
        Population form on a discrete instance: returns
        (sum p(x,u) l(f(x),u) w(x,u), sum q(x,u) l(f(x),u)).
        predictions holds p(U=1|x) per alphabet point.
        """
        predictions = np.asarray(predictions, dtype=float).reshape(-1)
        if predictions.shape[0] != pop.size:
            raise InputShapeError(f"{pop.size} alphabet points but {predictions.shape[0]} predictions")
        table = weights.values if isinstance(weights, ExactWeights) else np.asarray(weights, dtype=float)
        reweighted, target = 0.0, 0.0
        for u in (0, 1):
            losses = cls.pointwise_loss(predictions, np.full(pop.size, u), loss)
            present = pop.source_pmf[:, u] > 0
            reweighted += float(np.sum(pop.source_pmf[present, u] * losses[present] * table[present, u]))
            target += float(np.sum(pop.target_pmf[:, u] * losses))
        return reweighted, target

    @staticmethod
    def _kl(q: np.ndarray, r: np.ndarray, pop: DiscretePopulation) -> float:
        missing = np.flatnonzero((q > 0) & (r <= 0))
        if missing.size:
            x = pop.alphabet[missing[0]].tolist()
            raise SupportViolationError(f"target marginal is positive at x={x} where the reweighted source is zero", x=x)
        return max(float(np.sum(rel_entr(q, r / r.sum()))), 0.0)

    @classmethod
    def discrete_kl(cls, pop: DiscretePopulation, params: TiltParams, spec: SufficientStatistic) -> KLDiagnostics:
        """KL(q_X || normalized tilted source marginal) at params and at zero params"""
        q = pop.target_marginal()
        tilted = PopulationService.tilted_marginal_table(pop, params, spec)
        return KLDiagnostics(
            kl_fitted=cls._kl(q, tilted, pop),
            kl_unweighted=cls._kl(q, pop.source_marginal(), pop),
        )

    @staticmethod
    def _affine_rank(T: np.ndarray) -> int:
        if T.shape[0] == 0:
            return 0
        return int(np.linalg.matrix_rank(np.hstack([T, np.ones((T.shape[0], 1))])))

    @classmethod
    def anchor_sets(cls, pop: DiscretePopulation, spec: SufficientStatistic) -> AnchorReport:
        """Anchor points per class and whether they pin the tilt parameters"""
        T = spec.evaluate_matrix(pop.alphabet)
        p = T.shape[1]
        anchors, ranks = {}, {}
        for u in (0, 1):
            rows = np.flatnonzero((pop.source_pmf[:, u] > 0) & (pop.source_pmf[:, 1 - u] == 0))
            anchors[u] = [pop.alphabet[i].tolist() for i in rows]
            ranks[u] = cls._affine_rank(T[rows])
        statistic_rank = min(ranks.values())
        return AnchorReport(
            anchors=anchors,
            anchor_ranks=ranks,
            statistic_dim=p,
            statistic_rank=statistic_rank,
            identifiable=statistic_rank == p + 1,
        )

    @staticmethod
    def effective_sample_size(weights) -> float:
        """(sum w)^2 / sum w^2; equals n only for constant weights"""
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] == 0:
            raise InputShapeError("effective sample size needs at least one weight")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be positive and finite")
        n = float(w.shape[0])
        if np.all(w == w[0]):
            return n
        return float(min(w.sum() ** 2 / np.sum(w ** 2), np.nextafter(n, 0.0)))

    @classmethod
    def fine_tune(cls, source: LabeledDataset, weights, cfg: TrainConfig) -> SourceClassifier:
        """Logistic classifier trained on the reweighted source log loss"""
        logger.info(f"Fine-tuning on {len(source)} reweighted source rows")
        return ClassifierService.train_classifier(source, cfg, sample_weights=weights)

    @staticmethod
    def weight_histogram(weights, bins: Optional[int] = None) -> List[Dict]:
        """Rows of (bin_left, bin_right, count)"""
        bins = int(bins or get_extra_setting('HISTOGRAM_BINS'))
        counts, edges = np.histogram(np.asarray(weights, dtype=float), bins=bins)
        return [
            {'bin_left': float(edges[i]), 'bin_right': float(edges[i + 1]), 'count': int(counts[i])}
            for i in range(bins)
        ]

    @classmethod
    def class_weight_summary(cls, weights, labels) -> Dict[int, WeightSummary]:
        """Per-utility-class view of fitted weights"""
        w = np.asarray(weights, dtype=float).reshape(-1)
        labels = np.asarray(labels).reshape(-1)
        if w.shape != labels.shape:
            raise InputShapeError(f"{labels.shape[0]} labels but {w.shape[0]} weights")
        summary = {}
        for u in (0, 1):
            rows = w[labels == u]
            if rows.size == 0:
                continue
            summary[u] = WeightSummary(
                count=int(rows.size),
                mean=float(rows.mean()),
                minimum=float(rows.min()),
                maximum=float(rows.max()),
                effective_sample_size=cls.effective_sample_size(rows),
            )
        return summary
