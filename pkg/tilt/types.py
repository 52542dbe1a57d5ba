"""
Value types of the exponential tilt model.

All types are immutable after construction: numpy buffers are copied and
marked read-only, so instances can be shared across workers.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from extra_backend.exceptions import DomainError, InputShapeError

PMF_TOLERANCE = 1e-12


def frozen_array(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def as_feature_vector(values, dim: Optional[int] = None) -> np.ndarray:
    """Validate one feature vector: 1-d, finite, optionally of length `dim`"""
    x = np.asarray(values, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise InputShapeError(f"feature vector must be 1-d, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise InputShapeError(f"feature vector has length {x.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise InputShapeError("feature vector has non-finite entries")
    return x


def as_feature_matrix(values, dim: Optional[int] = None) -> np.ndarray:
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InputShapeError(f"feature matrix must be 2-d, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise InputShapeError(f"feature matrix has {X.shape[1]} columns, expected {dim}")
    return X


@dataclass(frozen=True, eq=False)
class SufficientStatistic:
    """
    Declared pure map T: R^d -> R^p.

    kind is one of 'identity', 'subset' (selected coordinates) or 'affine'
    (A @ x + c).
    """

    KINDS = ('identity', 'subset', 'affine')

    kind: str = 'identity'
    indices: Optional[tuple] = None
    matrix: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InputShapeError(f"unknown sufficient statistic kind: {self.kind}")
        if self.kind == 'subset':
            if not self.indices:
                raise InputShapeError("subset statistic needs at least one index")
            indices = tuple(int(i) for i in self.indices)
            if min(indices) < 0:
                raise InputShapeError("subset indices must be nonnegative")
            object.__setattr__(self, 'indices', indices)
        if self.kind == 'affine':
            if self.matrix is None:
                raise InputShapeError("affine statistic needs a matrix")
            A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            c = np.zeros(A.shape[0]) if self.offset is None else np.asarray(self.offset, dtype=float).reshape(-1)
            if c.shape[0] != A.shape[0]:
                raise InputShapeError(f"affine offset has length {c.shape[0]}, expected {A.shape[0]}")
            if not (np.all(np.isfinite(A)) and np.all(np.isfinite(c))):
                raise InputShapeError("affine statistic has non-finite coefficients")
            object.__setattr__(self, 'matrix', frozen_array(A))
            object.__setattr__(self, 'offset', frozen_array(c))

    @classmethod
    def identity(cls) -> 'SufficientStatistic':
        return cls(kind='identity')

    @classmethod
    def subset(cls, indices: Sequence[int]) -> 'SufficientStatistic':
        return cls(kind='subset', indices=tuple(indices))

    @classmethod
    def affine(cls, matrix, offset=None) -> 'SufficientStatistic':
        return cls(kind='affine', matrix=matrix, offset=offset)

    def input_dim(self) -> Optional[int]:
        """Required feature dimension, or None when any d >= the minimum works"""
        if self.kind == 'affine':
            return int(self.matrix.shape[1])
        return None

    def output_dim(self, d: int) -> int:
        if self.kind == 'identity':
            return d
        if self.kind == 'subset':
            return len(self.indices)
        return int(self.matrix.shape[0])

    def check_dim(self, d: int) -> None:
        if self.kind == 'subset' and max(self.indices) >= d:
            raise InputShapeError(f"subset index {max(self.indices)} out of range for dimension {d}")
        if self.kind == 'affine' and self.matrix.shape[1] != d:
            raise InputShapeError(f"affine statistic expects dimension {self.matrix.shape[1]}, got {d}")

    def evaluate_matrix(self, X) -> np.ndarray:
        """T applied row-wise to an (n, d) matrix; returns (n, p)"""
        X = as_feature_matrix(X)
        self.check_dim(X.shape[1])
        if self.kind == 'identity':
            return X.copy()
        if self.kind == 'subset':
            return X[:, list(self.indices)]
        return X @ self.matrix.T + self.offset

    def to_dict(self) -> Dict:
        data = {'kind': self.kind}
        if self.kind == 'subset':
            data['indices'] = list(self.indices)
        if self.kind == 'affine':
            data['matrix'] = self.matrix.tolist()
            data['offset'] = self.offset.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'SufficientStatistic':
        kind = data.get('kind', 'identity')
        if kind == 'subset':
            return cls.subset(data.get('indices') or ())
        if kind == 'affine':
            return cls.affine(data.get('matrix'), data.get('offset'))
        return cls(kind=kind)


@dataclass(frozen=True, eq=False)
class TiltParams:
    """
    Parameters (theta0, alpha0, theta1, alpha1) of the exponential tilt model.

    With normalized=False the alpha fields hold the pre-normalization
    intercepts beta of the fitting loop.
    """

    theta0: np.ndarray
    alpha0: float
    theta1: np.ndarray
    alpha1: float
    normalized: bool = True

    def __post_init__(self):
        theta0 = np.asarray(self.theta0, dtype=float).reshape(-1)
        theta1 = np.asarray(self.theta1, dtype=float).reshape(-1)
        if theta0.shape != theta1.shape:
            raise InputShapeError(f"theta blocks differ in length: {theta0.shape[0]} vs {theta1.shape[0]}")
        values = np.concatenate([theta0, theta1, [self.alpha0, self.alpha1]])
        if not np.all(np.isfinite(values)):
            raise DomainError("tilt parameters must be finite")
        object.__setattr__(self, 'theta0', frozen_array(theta0))
        object.__setattr__(self, 'theta1', frozen_array(theta1))
        object.__setattr__(self, 'alpha0', float(self.alpha0))
        object.__setattr__(self, 'alpha1', float(self.alpha1))

    @property
    def dim(self) -> int:
        return int(self.theta0.shape[0])

    @classmethod
    def zeros(cls, p: int, normalized: bool = False) -> 'TiltParams':
        return cls(np.zeros(p), 0.0, np.zeros(p), 0.0, normalized=normalized)

    def theta(self, u: int) -> np.ndarray:
        return self.theta1 if u == 1 else self.theta0

    def intercept(self, u: int) -> float:
        return self.alpha1 if u == 1 else self.alpha0

    def to_vector(self) -> np.ndarray:
        """Flat layout (theta0, theta1, alpha0, alpha1)"""
        return np.concatenate([self.theta0, self.theta1, [self.alpha0, self.alpha1]])

    @classmethod
    def from_vector(cls, vector, normalized: bool = False) -> 'TiltParams':
        vector = np.asarray(vector, dtype=float)
        p = (vector.shape[0] - 2) // 2
        return cls(vector[:p], vector[2 * p], vector[p:2 * p], vector[2 * p + 1], normalized=normalized)

    def with_intercepts(self, alpha0: float, alpha1: float, normalized: bool) -> 'TiltParams':
        return TiltParams(self.theta0, alpha0, self.theta1, alpha1, normalized=normalized)

    def to_dict(self) -> Dict:
        return {
            'theta0': self.theta0.tolist(),
            'alpha0': self.alpha0,
            'theta1': self.theta1.tolist(),
            'alpha1': self.alpha1,
            'normalized': self.normalized,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'TiltParams':
        return cls(
            data['theta0'], data['alpha0'], data['theta1'], data['alpha1'],
            normalized=bool(data.get('normalized', True)),
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Source rows with binary utility labels"""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = as_feature_matrix(self.features)
        y = np.asarray(self.labels).reshape(-1)
        if X.shape[0] < 1:
            raise InputShapeError("labeled dataset needs at least one row")
        if y.shape[0] != X.shape[0]:
            raise InputShapeError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise InputShapeError("labeled dataset has non-finite features")
        if not np.all((y == 0) | (y == 1)):
            raise InputShapeError("labels must be 0 or 1")
        object.__setattr__(self, 'features', frozen_array(X))
        object.__setattr__(self, 'labels', frozen_array(y, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def take(self, rows) -> 'LabeledDataset':
        return LabeledDataset(self.features[rows], self.labels[rows])


@dataclass(frozen=True, eq=False)
class UnlabeledDataset:
    """Target rows, features only"""

    features: np.ndarray

    def __post_init__(self):
        X = as_feature_matrix(self.features)
        if X.shape[0] < 1:
            raise InputShapeError("unlabeled dataset needs at least one row")
        if not np.all(np.isfinite(X)):
            raise InputShapeError("unlabeled dataset has non-finite features")
        object.__setattr__(self, 'features', frozen_array(X))

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True, eq=False)
class DiscretePopulation:
    """
    Exact joint pmfs p(x,u) and q(x,u) over a finite feature alphabet.

    Tables have one row per alphabet point and one column per class.
    Alphabet points compare by exact equality of their coordinates.
    """

    alphabet: np.ndarray
    source_pmf: np.ndarray
    target_pmf: np.ndarray
    _lookup: Dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        alphabet = as_feature_matrix(self.alphabet)
        source = np.asarray(self.source_pmf, dtype=float)
        target = np.asarray(self.target_pmf, dtype=float)
        k = alphabet.shape[0]
        for name, table in (('source', source), ('target', target)):
            if table.shape != (k, 2):
                raise InputShapeError(f"{name} pmf has shape {table.shape}, expected ({k}, 2)")
            if np.any(table < 0) or not np.all(np.isfinite(table)):
                raise DomainError(f"{name} pmf has negative or non-finite entries")
            if abs(table.sum() - 1.0) > PMF_TOLERANCE:
                raise DomainError(f"{name} pmf sums to {table.sum():.17g}, not 1")
        lookup = {}
        for index, point in enumerate(alphabet):
            key = tuple(point.tolist())
            if key in lookup:
                raise DomainError(f"alphabet point {key} appears twice")
            lookup[key] = index
        object.__setattr__(self, 'alphabet', frozen_array(alphabet))
        object.__setattr__(self, 'source_pmf', frozen_array(source))
        object.__setattr__(self, 'target_pmf', frozen_array(target))
        object.__setattr__(self, '_lookup', lookup)

    @property
    def size(self) -> int:
        return int(self.alphabet.shape[0])

    @property
    def dim(self) -> int:
        return int(self.alphabet.shape[1])

    def index_of(self, x) -> int:
        key = tuple(as_feature_vector(x, self.dim).tolist())
        try:
            return self._lookup[key]
        except KeyError:
            raise DomainError(f"point {key} is not in the population alphabet") from None

    def indices_of(self, X) -> np.ndarray:
        X = as_feature_matrix(X, self.dim)
        return np.array([self.index_of(row) for row in X], dtype=np.int64)

    def source_marginal(self) -> np.ndarray:
        return self.source_pmf.sum(axis=1)

    def target_marginal(self) -> np.ndarray:
        return self.target_pmf.sum(axis=1)

    def to_dict(self) -> Dict:
        return {
            'alphabet': self.alphabet.tolist(),
            'source_pmf': self.source_pmf.tolist(),
            'target_pmf': self.target_pmf.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'DiscretePopulation':
        return cls(data['alphabet'], data['source_pmf'], data['target_pmf'])


@dataclass(frozen=True, eq=False)
class ExactWeights:
    """Table of q(x,u)/p(x,u); cells with p = q = 0 are absent (nan)"""

    alphabet: np.ndarray
    values: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def get(self, index: int, u: int) -> Optional[float]:
        value = self.values[index, u]
        return None if np.isnan(value) else float(value)

    def as_rows(self) -> List[Dict]:
        rows = []
        for index, point in enumerate(self.alphabet):
            for u in (0, 1):
                rows.append({'x': point.tolist(), 'u': u, 'weight': self.get(index, u)})
        return rows
