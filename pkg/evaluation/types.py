from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional


LOSS_NAMES = ('zero_one', 'log_loss')


@dataclass(frozen=True)
class RiskReport:
    unweighted_source_risk: float
    reweighted_risk: float
    loss_name: str
    true_target_risk: Optional[float] = None

    def to_dict(self) -> Dict:
        data = {
            'unweighted_source_risk': self.unweighted_source_risk,
            'reweighted_risk': self.reweighted_risk,
            'loss_name': self.loss_name,
        }
        if self.true_target_risk is not None:
            data['true_target_risk'] = self.true_target_risk
        return data


@dataclass(frozen=True)
class AnchorReport:
    """
    anchors[u] lists the alphabet points where only class u has source mass.
    statistic_rank is the smallest affine rank of T over the anchor sets.
    """

    anchors: Dict[int, List[list]]
    anchor_ranks: Dict[int, int]
    statistic_dim: int
    statistic_rank: int
    identifiable: bool

    def to_dict(self) -> Dict:
        return {
            'anchors': {str(u): points for u, points in self.anchors.items()},
            'anchor_ranks': {str(u): rank for u, rank in self.anchor_ranks.items()},
            'statistic_dim': self.statistic_dim,
            'statistic_rank': self.statistic_rank,
            'identifiable': self.identifiable,
        }


class KLDiagnostics(NamedTuple):
    kl_fitted: float
    kl_unweighted: float


@dataclass(frozen=True)
class WeightSummary:
    count: int
    mean: float
    minimum: float
    maximum: float
    effective_sample_size: float

    def to_dict(self) -> Dict:
        return {
            'count': self.count,
            'mean': self.mean,
            'min': self.minimum,
            'max': self.maximum,
            'effective_sample_size': self.effective_sample_size,
        }
