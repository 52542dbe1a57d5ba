"""
Run configuration and the bodies of the simulate / fit / evaluate commands.
"""

import copy
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from classifiers.services import ClassifierService
from classifiers.types import TrainConfig
from evaluation.services import EvaluationService
from extra.services import ExtraService
from extra.types import ExtraConfig, FitTrace
from extra_backend.exceptions import ConfigValidationError, DivergenceError, ExtraError, SchemaError
from rtb.services import AuctionSimulator
from rtb.types import MarketModel
from tilt.types import LabeledDataset, SufficientStatistic, UnlabeledDataset
from . import formats
from .serializers import RunConfigSerializer

logger = logging.getLogger(__name__)


def _flatten_errors(errors, prefix: str = '') -> List[str]:
    """DRF error tree as dotted `field: message` lines"""
    if isinstance(errors, dict):
        lines = []
        for key, value in errors.items():
            name = key if key != 'non_field_errors' else ''
            lines.extend(_flatten_errors(value, f"{prefix}.{name}".strip('.')))
        return lines
    if isinstance(errors, list):
        return [line for item in errors for line in _flatten_errors(item, prefix)]
    return [f"{prefix}: {errors}" if prefix else str(errors)]


@dataclass(frozen=True)
class RunConfig:
    """
    One validated run document. Nested train/extra seeds that the document
    leaves out follow the top-level seed, so a --seed override moves them too.
    """

    market: MarketModel
    train: TrainConfig
    extra: ExtraConfig
    statistic: SufficientStatistic
    n_stream: int
    n_oracle: int
    seed: int
    out_dir: Path
    market_features: bool = False
    clip_epsilon: float = 1e-6

    @property
    def feature_dim(self) -> int:
        """Columns of the source and target CSVs"""
        return self.market.feature_dim + (2 if self.market_features else 0)

    @classmethod
    def from_validated(cls, data: Dict, seed: Optional[int] = None, out_dir: Optional[str] = None) -> 'RunConfig':
        data = copy.deepcopy(data)
        if seed is not None:
            data['seed'] = int(seed)
        if out_dir is not None:
            data['out_dir'] = str(out_dir)
        train = dict(data.get('train') or {})
        extra = dict(data.get('extra') or {})
        train.setdefault('seed', data['seed'])
        extra.setdefault('seed', data['seed'])
        try:
            market = MarketModel(**data['market'])
            train_config = TrainConfig(**train)
            extra_config = ExtraConfig(**extra)
            statistic = SufficientStatistic.from_dict(data.get('statistic') or {})
        except ConfigValidationError:
            raise
        except ExtraError as e:
            raise ConfigValidationError(f"invalid run config: {e}", errors={'config': [str(e)]}) from e
        return cls(
            market=market,
            train=train_config,
            extra=extra_config,
            statistic=statistic,
            n_stream=int(data['n_stream']),
            n_oracle=int(data['n_oracle']),
            seed=int(data['seed']),
            out_dir=Path(data['out_dir']),
            market_features=bool(data.get('market_features', False)),
            clip_epsilon=float(data.get('clip_epsilon', 1e-6)),
        )

    def to_dict(self) -> Dict:
        """Fully resolved config, echoed into every output JSON"""
        return {
            'market': self.market.to_dict(),
            'train': self.train.to_dict(),
            'extra': self.extra.to_dict(),
            'statistic': self.statistic.to_dict(),
            'n_stream': self.n_stream,
            'n_oracle': self.n_oracle,
            'seed': self.seed,
            'out_dir': str(self.out_dir),
            'market_features': self.market_features,
            'clip_epsilon': self.clip_epsilon,
        }


class PipelineService:
    """
    Service running the simulate / fit / evaluate steps on files
    """

    @classmethod
    def validate_config(cls, document: Dict, seed: Optional[int] = None, out_dir: Optional[str] = None) -> RunConfig:
        serializer = RunConfigSerializer(data=document)
        if not serializer.is_valid():
            messages = _flatten_errors(serializer.errors)
            logger.error(f"Run config failed validation: {messages}")
            raise ConfigValidationError(f"invalid run config: {'; '.join(messages)}", errors=serializer.errors)
        return RunConfig.from_validated(serializer.validated_data, seed=seed, out_dir=out_dir)

    @classmethod
    def load_config(cls, path, seed: Optional[int] = None, out_dir: Optional[str] = None) -> RunConfig:
        """Read and validate a run config JSON document"""
        return cls.validate_config(formats.read_json(path), seed=seed, out_dir=out_dir)

    @classmethod
    def _features(cls, config: RunConfig, X: np.ndarray) -> np.ndarray:
        if config.market_features:
            return AuctionSimulator.market_stat_features(config.market, X)
        return X

    @classmethod
    def simulate(cls, config: RunConfig) -> Dict[str, Path]:
        """Write source.csv, target.csv, labeled_target.csv, stream.csv and truth.json"""
        out = config.out_dir
        stream = AuctionSimulator.simulate_auctions(config.market, config.n_stream, config.seed)
        source, target = AuctionSimulator.split_domains(stream)
        labeled = AuctionSimulator.labeled_target(stream)
        source = LabeledDataset(cls._features(config, source.features), source.labels)
        target = UnlabeledDataset(cls._features(config, target.features))
        labeled = LabeledDataset(cls._features(config, labeled.features), labeled.labels)

        # the oracle stream must not share draws with the main stream
        estimate = AuctionSimulator.win_conditional_rate(config.market, config.n_oracle, config.seed + 1)
        market_stats = AuctionSimulator.market_stat_features(config.market, stream)[:, -2:]
        truth = {
            'n_stream': len(stream),
            'n_source': len(source),
            'stream_win_rate': float(stream.won.mean()),
            'stream_utility_rate': float(stream.utilities.mean()),
            'win_conditional': estimate.to_dict(),
            'market_stat_means': {
                'market_mean': float(market_stats[:, 0].mean()),
                'market_sd': float(market_stats[:, 1].mean()),
            },
        }
        if config.market.feature_support is not None:
            truth['exact_win_probability'] = AuctionSimulator.win_probability(config.market)

        paths = {
            'source': formats.write_labeled(out / 'source.csv', source),
            'target': formats.write_unlabeled(out / 'target.csv', target),
            'labeled_target': formats.write_labeled(out / 'labeled_target.csv', labeled),
            'stream': formats.write_stream(out / 'stream.csv', stream),
            'truth': formats.write_json(out / 'truth.json', truth, config.to_dict()),
        }
        logger.info(f"Simulated {len(stream)} auctions into {out}: {len(source)} won")
        return paths

    @classmethod
    def fit(cls, config: RunConfig, source_path, target_path, classifier_path=None) -> Dict[str, Path]:
        """
        Fit the tilt model and write params.json, weights.csv and trace.csv.
        Trains and writes classifier.json first when no classifier is given.
        On divergence the partial trace is still written.
        """
        out = config.out_dir
        source = formats.read_labeled(source_path)
        target = formats.read_unlabeled(target_path)
        if source.dim != target.dim:
            raise SchemaError(
                f"target has {target.dim} feature columns but the source has {source.dim}", path=str(target_path),
            )

        paths = {}
        if classifier_path:
            clf = formats.read_classifier(classifier_path)
        else:
            clf = ClassifierService.train_classifier(source, config.train, clip_epsilon=config.clip_epsilon)
            paths['classifier'] = formats.write_classifier(out / 'classifier.json', clf, config.to_dict())

        try:
            result = ExtraService.fit_extra(source, target, clf, config.statistic, config.extra)
        except DivergenceError as e:
            trace = e.trace if isinstance(e.trace, FitTrace) else FitTrace()
            formats.write_trace(out / 'trace.csv', trace)
            logger.error(f"Fit diverged; partial trace written to {out / 'trace.csv'}")
            raise

        weights = ExtraService.weight_table(result, config.statistic, source)
        paths['params'] = formats.write_json(out / 'params.json', result.to_dict(), config.to_dict())
        paths['weights'] = formats.write_weights(out / 'weights.csv', weights)
        paths['trace'] = formats.write_trace(out / 'trace.csv', result.trace)
        logger.info(f"Fit written to {out}: converged={result.converged}, n_steps={result.trace.n_steps}")
        return paths

    @classmethod
    def evaluate(cls, config: RunConfig, source_path, weights_path, classifier_path,
                 labeled_target_path=None, params_path=None, loss: str = 'zero_one',
                 fine_tune: bool = False) -> Dict[str, Path]:
        """Write report.json and hist.csv"""
        out = config.out_dir
        source = formats.read_labeled(source_path)
        weights = formats.read_weights(weights_path)
        formats.check_aligned(weights_path, len(source), weights.shape[0], 'weights')
        clf = formats.read_classifier(classifier_path)
        if clf.dim != source.dim:
            raise SchemaError(
                f"classifier expects {clf.dim} features but the source has {source.dim}", path=str(classifier_path),
            )

        labeled = formats.read_labeled(labeled_target_path) if labeled_target_path else None
        if labeled is not None and labeled.dim != source.dim:
            raise SchemaError(
                f"labeled target has {labeled.dim} feature columns but the source has {source.dim}",
                path=str(labeled_target_path),
            )

        def risk_of(model):
            return EvaluationService.risk_report(
                model.predict_proba_matrix(source.features)[:, 1], source.labels, weights, loss,
                target_predictions=None if labeled is None else model.predict_proba_matrix(labeled.features)[:, 1],
                target_labels=None if labeled is None else labeled.labels,
            )

        report = risk_of(clf)
        payload = {
            'risk': report.to_dict(),
            'n_source': len(source),
            'effective_sample_size': EvaluationService.effective_sample_size(weights),
            'class_weights': {
                str(u): summary.to_dict()
                for u, summary in EvaluationService.class_weight_summary(weights, source.labels).items()
            },
        }
        if params_path:
            params = formats.read_params(params_path)
            payload['params'] = params.to_dict()
        if fine_tune:
            tuned = EvaluationService.fine_tune(source, weights, config.train)
            payload['fine_tuned'] = {'classifier': tuned.to_dict(), 'risk': risk_of(tuned).to_dict()}

        paths = {
            'report': formats.write_json(out / 'report.json', payload, config.to_dict()),
            'hist': formats.write_histogram(out / 'hist.csv', EvaluationService.weight_histogram(weights)),
        }
        logger.info(
            f"Evaluation written to {out}: reweighted risk {report.reweighted_risk:.6f}, "
            f"unweighted {report.unweighted_source_risk:.6f}"
        )
        return paths
