from dataclasses import dataclass, field
from typing import Dict, List

from extra_backend.exceptions import DomainError
from tilt.types import TiltParams


@dataclass(frozen=True)
class ExtraConfig:
    """Hyperparameters of the fitting loop"""

    learning_rate: float = 0.05
    batch_size: int = 256
    lam: float = 1.0
    max_steps: int = 20000
    tol: float = 1e-6
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        for name in ('learning_rate', 'lam', 'tol'):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ('batch_size', 'max_steps', 'patience'):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be a positive count, got {getattr(self, name)}")

    def to_dict(self) -> Dict:
        return {
            'learning_rate': float(self.learning_rate),
            'batch_size': int(self.batch_size),
            'lambda': float(self.lam),
            'max_steps': int(self.max_steps),
            'tol': float(self.tol),
            'patience': int(self.patience),
            'seed': int(self.seed),
        }


@dataclass
class FitTrace:
    """Full-data objective records taken every check interval"""

    steps: List[int] = field(default_factory=list)
    objective: List[float] = field(default_factory=list)
    loss: List[float] = field(default_factory=list)
    normalizer: List[float] = field(default_factory=list)
    converged: bool = False
    n_steps: int = 0

    def record(self, step: int, objective: float, loss: float, normalizer: float) -> None:
        self.steps.append(int(step))
        self.objective.append(float(objective))
        self.loss.append(float(loss))
        self.normalizer.append(float(normalizer))

    def rows(self) -> List[Dict]:
        return [
            {'step': s, 'objective': o, 'loss': l, 'normalizer': n}
            for s, o, l, n in zip(self.steps, self.objective, self.loss, self.normalizer)
        ]

    def summary(self) -> Dict:
        return {
            'converged': self.converged,
            'n_steps': self.n_steps,
            'n_checks': len(self.steps),
            'initial_objective': self.objective[0] if self.objective else None,
            'final_objective': self.objective[-1] if self.objective else None,
        }


@dataclass(frozen=True, eq=False)
class FitResult:
    params: TiltParams
    trace: FitTrace
    final_normalizer: float
    config: ExtraConfig

    def __post_init__(self):
        if not self.params.normalized:
            raise DomainError("fit results must carry normalized parameters")

    @property
    def converged(self) -> bool:
        return self.trace.converged

    def to_dict(self) -> Dict:
        data = self.params.to_dict()
        data.update({
            'converged': self.trace.converged,
            'n_steps': self.trace.n_steps,
            'final_normalizer': self.final_normalizer,
            'trace_summary': self.trace.summary(),
            'extra_config': self.config.to_dict(),
        })
        return data
