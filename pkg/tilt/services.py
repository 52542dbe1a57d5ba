import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np

from extra_backend.conf import get_extra_setting
from extra_backend.exceptions import DomainError, InputShapeError, NumericRangeError, SupportViolationError
from .types import (
    DiscretePopulation, ExactWeights, LabeledDataset, SufficientStatistic,
    TiltParams, UnlabeledDataset, as_feature_matrix, as_feature_vector,
)

logger = logging.getLogger(__name__)


class TiltService:
    """
    Service for evaluating the exponential tilt weight
    w(x, u) = exp(theta_u . T(x) + alpha_u)
    """

    @classmethod
    def eval_sufficient_statistic(cls, spec: SufficientStatistic, x) -> np.ndarray:
        """Evaluate T(x) for one feature vector"""
        x = as_feature_vector(x)
        return spec.evaluate_matrix(x.reshape(1, -1))[0]

    @classmethod
    def check_exponent(cls, exponent: float, row: Optional[int] = None) -> None:
        limit = get_extra_setting('EXPONENT_LIMIT')
        if not np.isfinite(exponent) or abs(exponent) > limit:
            where = '' if row is None else f" at row {row}"
            raise NumericRangeError(
                f"tilt exponent {exponent!r}{where} is outside [-{limit}, {limit}]",
                exponent=float(exponent), row=row,
            )

    @classmethod
    def tilt_weight(cls, params: TiltParams, t, u: int) -> float:
        """Weight of one (T(x), u) pair"""
        t = as_feature_vector(t, params.dim)
        if u not in (0, 1):
            raise DomainError(f"class label must be 0 or 1, got {u!r}")
        exponent = float(params.theta(u) @ t + params.intercept(u))
        cls.check_exponent(exponent)
        return float(np.exp(exponent))

    @classmethod
    def log_weights(cls, params: TiltParams, T: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """theta_u . T_j + alpha_u for every row j"""
        T = as_feature_matrix(T, params.dim)
        labels = np.asarray(labels).reshape(-1)
        if labels.shape[0] != T.shape[0]:
            raise InputShapeError(f"{T.shape[0]} statistic rows but {labels.shape[0]} labels")
        thetas = np.where(labels[:, None] == 1, params.theta1[None, :], params.theta0[None, :])
        intercepts = np.where(labels == 1, params.alpha1, params.alpha0)
        return np.einsum('ij,ij->i', T, thetas) + intercepts

    @classmethod
    def row_weights(cls, params: TiltParams, T: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Per-row weights with the overflow policy of tilt_weight"""
        exponents = cls.log_weights(params, T, labels)
        limit = get_extra_setting('EXPONENT_LIMIT')
        bad = np.flatnonzero(~np.isfinite(exponents) | (np.abs(exponents) > limit))
        if bad.size:
            cls.check_exponent(float(exponents[bad[0]]), row=int(bad[0]))
        return np.exp(exponents)


class PopulationService:
    """
    Service for exact computations on discrete populations
    """

    @classmethod
    def target_marginal(cls, pop: DiscretePopulation, params: TiltParams,
                        spec: SufficientStatistic, x) -> float:
        """Tilted source marginal sum_u p(x,u) exp(theta_u . T(x) + alpha_u)"""
        index = pop.index_of(x)
        t = TiltService.eval_sufficient_statistic(spec, pop.alphabet[index])
        total = 0.0
        for u in (0, 1):
            mass = pop.source_pmf[index, u]
            if mass > 0:
                total += mass * TiltService.tilt_weight(params, t, u)
        return total

    @classmethod
    def tilted_marginal_table(cls, pop: DiscretePopulation, params: TiltParams,
                              spec: SufficientStatistic) -> np.ndarray:
        """target_marginal evaluated on every alphabet point"""
        return np.array([cls.target_marginal(pop, params, spec, x) for x in pop.alphabet])

    @classmethod
    def exact_weights(cls, pop: DiscretePopulation) -> ExactWeights:
        """Exact density ratios q(x,u)/p(x,u)"""
        p, q = pop.source_pmf, pop.target_pmf
        violations = np.argwhere((q > 0) & (p == 0))
        if violations.size:
            index, u = (int(v) for v in violations[0])
            x = pop.alphabet[index].tolist()
            raise SupportViolationError(
                f"target mass {q[index, u]:.17g} at x={x}, u={u} where the source has none",
                x=x, u=u,
            )
        values = np.full(p.shape, np.nan)
        positive = p > 0
        values[positive] = q[positive] / p[positive]
        values.setflags(write=False)
        return ExactWeights(alphabet=pop.alphabet, values=values)

    @classmethod
    def sample_from_pmf(cls, pop: DiscretePopulation, which: str, n: int,
                        seed: int) -> Union[LabeledDataset, UnlabeledDataset]:
        """Draw n i.i.d. rows from the source or target table"""
        if which not in ('source', 'target'):
            raise DomainError(f"which must be 'source' or 'target', got {which!r}")
        if int(n) < 1:
            raise InputShapeError(f"sample size must be at least 1, got {n}")
        table = pop.source_pmf if which == 'source' else pop.target_pmf
        flat = table.reshape(-1)
        rng = np.random.default_rng(seed)
        cells = rng.choice(flat.shape[0], size=int(n), p=flat / flat.sum())
        features = pop.alphabet[cells // 2]
        if which == 'target':
            return UnlabeledDataset(features)
        return LabeledDataset(features, cells % 2)

    @classmethod
    def population_batches(cls, pop: DiscretePopulation) -> Dict[str, np.ndarray]:
        """
        Population form of the source and target samples: every cell with
        positive mass becomes one row carrying its probability.
        """
        source_cells = np.argwhere(pop.source_pmf > 0)
        target_marginal = pop.target_marginal()
        target_rows = np.flatnonzero(target_marginal > 0)
        return {
            'source_features': pop.alphabet[source_cells[:, 0]],
            'source_labels': source_cells[:, 1],
            'source_mass': pop.source_pmf[source_cells[:, 0], source_cells[:, 1]],
            'target_features': pop.alphabet[target_rows],
            'target_mass': target_marginal[target_rows],
        }

    @classmethod
    def exact_tilt_params(cls, pop: DiscretePopulation, spec: SufficientStatistic,
                          tolerance: float = 1e-9) -> TiltParams:
        """
        Recover (theta_u, alpha_u) from the log exact weights by least squares
        over the cells where class u has source mass. Raises DomainError when
        a class lacks the affine rank to pin its parameters or when the log
        weights are not affine in T.
        """
        weights = cls.exact_weights(pop)
        T = spec.evaluate_matrix(pop.alphabet)
        p = T.shape[1]
        blocks: Dict[int, Tuple[np.ndarray, float]] = {}
        for u in (0, 1):
            rows = np.flatnonzero(pop.source_pmf[:, u] > 0)
            values = weights.values[rows, u]
            if np.any(values <= 0):
                raise DomainError(f"class {u} has zero target mass on its source support; log weights undefined")
            design = np.hstack([T[rows], np.ones((rows.size, 1))])
            if np.linalg.matrix_rank(design) < p + 1:
                raise DomainError(f"class {u} support does not pin theta and alpha (affine rank too low)")
            solution, *_ = np.linalg.lstsq(design, np.log(values), rcond=None)
            residual = np.max(np.abs(design @ solution - np.log(values)))
            if residual > tolerance:
                raise DomainError(f"class {u} log weights are not affine in T (residual {residual:.3g})")
            blocks[u] = (solution[:p], float(solution[p]))
        return TiltParams(blocks[0][0], blocks[0][1], blocks[1][0], blocks[1][1], normalized=True)
