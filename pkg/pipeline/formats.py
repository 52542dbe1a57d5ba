"""
On-disk artifact formats.

CSV schemas:
    source.csv          f0..f{d-1},u
    target.csv          f0..f{d-1}
    labeled_target.csv  f0..f{d-1},u
    stream.csv          f0..f{d-1},u,m,won
    weights.csv         row,weight
    trace.csv           step,objective,loss,normalizer
    hist.csv            bin_left,bin_right,count

Reals are written with CSV_SIGNIFICANT_DIGITS significant digits, which
round-trips doubles exactly. JSON documents carry schema_version and
code_version and are written with sorted keys.
"""

import csv
import json
import logging
import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

import extra_backend
from classifiers.types import classifier_from_dict
from extra.types import FitTrace
from extra_backend.conf import get_extra_setting
from extra_backend.exceptions import ExtraError, InputShapeError, SchemaError
from rtb.types import AuctionStream
from tilt.types import DiscretePopulation, LabeledDataset, TiltParams, UnlabeledDataset

logger = logging.getLogger(__name__)

FEATURE_COLUMN = re.compile(r'^f(\d+)$')


def format_real(value: float) -> str:
    digits = int(get_extra_setting('CSV_SIGNIFICANT_DIGITS'))
    return f"{float(value):.{digits}g}"


def feature_columns(d: int) -> List[str]:
    return [f"f{i}" for i in range(d)]


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path


def read_csv(path, required: Sequence[str] = ()) -> Tuple[List[str], List[List[str]]]:
    """Header and raw rows; every required column must be present"""
    path = Path(path)
    try:
        with open(path, newline='', encoding='utf-8') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            rows = list(reader)
    except OSError as e:
        raise SchemaError(f"cannot read file: {e.strerror}", path=str(path)) from e
    if not header:
        raise SchemaError("file is empty; expected a header row", path=str(path), line=1)
    header = [name.strip() for name in header]
    for column in required:
        if column not in header:
            raise SchemaError(f"missing column \"{column}\"", path=str(path), line=1, column=column)
    for offset, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(
                f"expected {len(header)} fields, found {len(row)}", path=str(path), line=offset + 2,
            )
    return header, rows


def _feature_header(path, header: Sequence[str]) -> List[str]:
    count = sum(1 for name in header if FEATURE_COLUMN.match(name))
    if not count:
        raise SchemaError("missing feature columns f0..f{d-1}", path=str(path), line=1, column='f0')
    columns = feature_columns(count)
    missing = next((name for name in columns if name not in header), None)
    if missing is not None:
        raise SchemaError(f"missing column \"{missing}\"", path=str(path), line=1, column=missing)
    return columns


def _parse_reals(path, header, rows, columns) -> np.ndarray:
    positions = [header.index(c) for c in columns]
    try:
        cells = np.array([[row[p] for p in positions] for row in rows], dtype=str)
        return cells.astype(float).reshape(len(rows), len(columns))
    except ValueError:
        pass
    # locate the offending cell
    values = np.empty((len(rows), len(columns)))
    for i, row in enumerate(rows):
        for j, position in enumerate(positions):
            try:
                values[i, j] = float(row[position])
            except ValueError:
                raise SchemaError(
                    f"column \"{columns[j]}\" has non-numeric value {row[position]!r}",
                    path=str(path), line=i + 2, column=columns[j],
                ) from None
    return values


def _parse_ints(path, header, rows, column, allowed=None) -> np.ndarray:
    position = header.index(column)
    values = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        try:
            values[i] = int(row[position])
        except ValueError:
            raise SchemaError(
                f"column \"{column}\" has non-integer value {row[position]!r}",
                path=str(path), line=i + 2, column=column,
            ) from None
        if allowed is not None and values[i] not in allowed:
            raise SchemaError(
                f"column \"{column}\" must be one of {sorted(allowed)}, got {values[i]}",
                path=str(path), line=i + 2, column=column,
            )
    return values


def _feature_cells(X: np.ndarray) -> List[List[str]]:
    return [[format_real(v) for v in row] for row in X]


def write_labeled(path, data: LabeledDataset) -> Path:
    rows = (cells + [str(int(u))] for cells, u in zip(_feature_cells(data.features), data.labels))
    return write_csv(path, feature_columns(data.dim) + ['u'], rows)


def write_unlabeled(path, data: UnlabeledDataset) -> Path:
    return write_csv(path, feature_columns(data.dim), _feature_cells(data.features))


def write_stream(path, stream: AuctionStream) -> Path:
    d = stream.features.shape[1]
    rows = (
        cells + [str(int(u)), format_real(m), str(int(won))]
        for cells, u, m, won in zip(_feature_cells(stream.features), stream.utilities, stream.prices, stream.won)
    )
    return write_csv(path, feature_columns(d) + ['u', 'm', 'won'], rows)


def _wrap_dataset_errors(path, build):
    try:
        return build()
    except SchemaError:
        raise
    except ExtraError as e:
        raise SchemaError(str(e), path=str(path)) from e


def read_labeled(path) -> LabeledDataset:
    """source.csv or labeled_target.csv"""
    header, rows = read_csv(path, required=('u',))
    columns = _feature_header(path, header)
    if not rows:
        raise SchemaError("no data rows", path=str(path), line=2)
    X = _parse_reals(path, header, rows, columns)
    u = _parse_ints(path, header, rows, 'u', allowed={0, 1})
    return _wrap_dataset_errors(path, lambda: LabeledDataset(X, u))


def read_unlabeled(path) -> UnlabeledDataset:
    header, rows = read_csv(path)
    columns = _feature_header(path, header)
    if not rows:
        raise SchemaError("no data rows", path=str(path), line=2)
    X = _parse_reals(path, header, rows, columns)
    return _wrap_dataset_errors(path, lambda: UnlabeledDataset(X))


def write_weights(path, weights) -> Path:
    rows = ([str(j), format_real(w)] for j, w in enumerate(np.asarray(weights, dtype=float)))
    return write_csv(path, ['row', 'weight'], rows)


def read_weights(path) -> np.ndarray:
    header, rows = read_csv(path, required=('row', 'weight'))
    index = _parse_ints(path, header, rows, 'row')
    out_of_order = np.flatnonzero(index != np.arange(len(rows)))
    if out_of_order.size:
        line = int(out_of_order[0])
        raise SchemaError(f"row index {index[line]} out of sequence", path=str(path), line=line + 2, column='row')
    return _parse_reals(path, header, rows, ['weight'])[:, 0]


def write_trace(path, trace: FitTrace) -> Path:
    rows = (
        [str(r['step']), format_real(r['objective']), format_real(r['loss']), format_real(r['normalizer'])]
        for r in trace.rows()
    )
    return write_csv(path, ['step', 'objective', 'loss', 'normalizer'], rows)


def write_histogram(path, bins: List[Dict]) -> Path:
    rows = ([format_real(b['bin_left']), format_real(b['bin_right']), str(b['count'])] for b in bins)
    return write_csv(path, ['bin_left', 'bin_right', 'count'], rows)


def write_json(path, payload: Dict, config: Optional[Dict] = None) -> Path:
    """Versioned JSON document with an optional resolved-config echo"""
    document = dict(payload)
    document['schema_version'] = int(get_extra_setting('SCHEMA_VERSION'))
    document['code_version'] = extra_backend.__version__
    if config is not None:
        document['config'] = config
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, sort_keys=True, indent=2, allow_nan=False)
        f.write('\n')
    return path


def read_json(path) -> Dict:
    path = Path(path)
    try:
        with open(path, encoding='utf-8') as f:
            document = json.load(f)
    except OSError as e:
        raise SchemaError(f"cannot read file: {e.strerror}", path=str(path)) from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", path=str(path), line=e.lineno, column=str(e.colno)) from e
    if not isinstance(document, dict):
        raise SchemaError("top-level JSON value must be an object", path=str(path), line=1)
    version = document.get('schema_version')
    if version is not None and version != get_extra_setting('SCHEMA_VERSION'):
        raise SchemaError(f"unsupported schema_version {version}", path=str(path), column='schema_version')
    return document


def _read_document(path, build):
    document = read_json(path)
    try:
        return build(document)
    except KeyError as e:
        raise SchemaError(f"missing key \"{e.args[0]}\"", path=str(path), column=e.args[0]) from e
    except (TypeError, ValueError) as e:
        raise SchemaError(str(e), path=str(path)) from e


def write_classifier(path, clf, config: Optional[Dict] = None) -> Path:
    return write_json(path, clf.to_dict(), config)


def read_classifier(path):
    return _read_document(path, classifier_from_dict)


def read_params(path) -> TiltParams:
    params = _read_document(path, TiltParams.from_dict)
    if not params.normalized:
        raise SchemaError("params must be normalized", path=str(path), column='normalized')
    return params


def write_population(path, pop: DiscretePopulation) -> Path:
    return write_json(path, pop.to_dict())


def read_population(path) -> DiscretePopulation:
    return _read_document(path, DiscretePopulation.from_dict)


def check_aligned(path, expected: int, found: int, what: str) -> None:
    if expected != found:
        raise InputShapeError(f"{path}: {found} {what} but the source has {expected} rows")
