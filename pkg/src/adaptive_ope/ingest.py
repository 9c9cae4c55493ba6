# Copyright 2022 The adaptive-ope Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
LIBSVM classification datasets: parsing, serialization and feature standardization.
"""
import io
import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

import numpy as np

from .utils import logging


logger = logging.get_logger(__name__)


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input; `line_number` is 1-based and counts blank lines."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class FeatureScaling:
    """Per-column affine map `(x - mean) / scale`; constant columns have `scale == 0` and map to zero."""

    mean: np.ndarray
    scale: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        centered = features - self.mean
        safe_scale = np.where(self.scale > 0.0, self.scale, 1.0)
        return np.where(self.scale > 0.0, centered / safe_scale, 0.0)


@dataclass(frozen=True)
class ClassificationDataset:
    """
    A multi-class dataset.

    Args:
        rows (`Tuple[Tuple[int, Dict[int, float]], ...]`): `(class index, {0-based feature position: value})` per row,
            in file order.
        n_features (`int`): dense dimension.
        n_classes (`int`): number of classes, labels are `0..n_classes - 1`.
        label_map (`Dict[int, int]`): original label -> class index, in first-seen order.
        scaling (`FeatureScaling`, *optional*): set by `standardize_features`.
    """

    rows: Tuple[Tuple[int, Dict[int, float]], ...]
    n_features: int
    n_classes: int
    label_map: Dict[int, int]
    scaling: Optional[FeatureScaling] = field(default=None, compare=False)

    def __post_init__(self):
        labels = {label for label, _ in self.rows}
        if labels and labels != set(range(self.n_classes)):
            raise ValueError(f"class indices {sorted(labels)} are not contiguous 0..{self.n_classes - 1}")
        for label, features in self.rows:
            for index in features:
                if not 0 <= index < self.n_features:
                    raise ValueError(f"feature position {index} is outside 0..{self.n_features - 1}")

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def labels(self) -> np.ndarray:
        return np.array([label for label, _ in self.rows], dtype=int)

    def dense(self) -> np.ndarray:
        """Feature matrix of shape `(n_rows, n_features)`; missing entries are zeros."""
        matrix = np.zeros((len(self.rows), self.n_features))
        for i, (_, features) in enumerate(self.rows):
            if features:
                positions = np.fromiter(features.keys(), dtype=int, count=len(features))
                matrix[i, positions] = np.fromiter(features.values(), dtype=float, count=len(features))
        return matrix

    @property
    def inverse_label_map(self) -> Dict[int, int]:
        return {index: label for label, index in self.label_map.items()}

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def _parse_label(token: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError:
        pass
    try:
        value = float(token)
    except ValueError:
        raise LibsvmParseError(line_number, f"label {token!r} is not numeric")
    if not math.isfinite(value) or value != int(value):
        raise LibsvmParseError(line_number, f"label {token!r} is not an integer")
    return int(value)


def _parse_line(line: str, line_number: int) -> Tuple[int, List[Tuple[int, float]]]:
    tokens = line.split()
    label = _parse_label(tokens[0], line_number)
    pairs = []
    previous = 0
    for token in tokens[1:]:
        index_text, sep, value_text = token.partition(":")
        if not sep or not index_text or not value_text:
            raise LibsvmParseError(line_number, f"malformed token {token!r}, expected <index>:<value>")
        try:
            index = int(index_text)
        except ValueError:
            raise LibsvmParseError(line_number, f"feature index {index_text!r} is not an integer")
        if index < 1:
            raise LibsvmParseError(line_number, f"feature index {index} must be at least 1")
        if index <= previous:
            raise LibsvmParseError(line_number, f"feature index {index} does not increase (previous {previous})")
        try:
            value = float(value_text)
        except ValueError:
            raise LibsvmParseError(line_number, f"feature value {value_text!r} is not numeric")
        if not math.isfinite(value):
            raise LibsvmParseError(line_number, f"feature value {value_text!r} is not finite")
        pairs.append((index, value))
        previous = index
    return label, pairs


def _decoded_lines(reader: Iterable[bytes]) -> Iterator[str]:
    for line_number, raw in enumerate(reader, start=1):
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError as err:
            raise LibsvmParseError(line_number, f"invalid UTF-8 at byte {err.start}")


def _numbered_lines(stream: Iterable[str]) -> Iterator[Tuple[int, str]]:
    lines = iter(stream)
    line_number = 0
    while True:
        line_number += 1
        try:
            line = next(lines)
        except StopIteration:
            return
        except UnicodeDecodeError as err:
            # text streams opened by the caller
            raise LibsvmParseError(line_number, f"invalid text encoding: {err.reason}")
        yield line_number, line


def parse_libsvm(
    stream: Union[str, os.PathLike, Iterable[str]], n_features: Optional[int] = None
) -> ClassificationDataset:
    """
    Parses a LIBSVM classification file.

    Args:
        stream (`str`, `os.PathLike` or iterable of lines):
            A path to a file, or any iterable of text lines (an open file, `io.StringIO`, a list).
        n_features (`int`, *optional*):
            Dense dimension. Inferred as the largest index seen when omitted; must cover every index when given.

    Returns:
        [`ClassificationDataset`] with 0-based feature positions and labels remapped in first-seen order.

    Raises:
        [`LibsvmParseError`] carrying the 1-based line number of the first malformed line.
    """
    if isinstance(stream, (str, os.PathLike)):
        with open(stream, "rb") as reader:
            return parse_libsvm(_decoded_lines(reader), n_features=n_features)

    rows = []
    label_map: Dict[int, int] = {}
    max_index = 0
    for line_number, line in _numbered_lines(stream):
        if not line.strip():
            continue
        label, pairs = _parse_line(line, line_number)
        if label not in label_map:
            label_map[label] = len(label_map)
        if pairs:
            max_index = max(max_index, pairs[-1][0])
        rows.append((label_map[label], {index - 1: value for index, value in pairs}))

    if n_features is None:
        n_features = max_index
    elif n_features < max_index:
        raise ValueError(f"n_features={n_features} is smaller than the largest feature index {max_index}")

    logger.info(f"Parsed {len(rows)} rows with {n_features} features and {len(label_map)} classes")
    return ClassificationDataset(
        rows=tuple(rows), n_features=int(n_features), n_classes=len(label_map), label_map=label_map
    )


def format_value(value: float) -> str:
    """Shortest decimal string that parses back to the same float."""
    return repr(float(value))


def serialize_libsvm(dataset: ClassificationDataset) -> str:
    """
    Writes a dataset back in LIBSVM format using the original labels, 1-based indices and shortest round-trip
    decimals. Stored entries are written as they are, explicit zeros included.
    """
    inverse = dataset.inverse_label_map
    buffer = io.StringIO()
    for label, features in dataset.rows:
        tokens = [str(inverse[label])]
        tokens.extend(f"{index + 1}:{format_value(value)}" for index, value in sorted(features.items()))
        buffer.write(" ".join(tokens))
        buffer.write("\n")
    return buffer.getvalue()


def save_libsvm(dataset: ClassificationDataset, path: Union[str, os.PathLike]):
    with open(path, "w", encoding="utf-8", newline="\n") as writer:
        writer.write(serialize_libsvm(dataset))
    logger.info(f"Dataset with {len(dataset)} rows saved in {path}")


def standardize_features(dataset: ClassificationDataset) -> ClassificationDataset:
    """
    Rescales every dense column to zero mean and unit (population) variance. Constant columns, and every column of a
    single-row dataset, become zeros. The fitted [`FeatureScaling`] is attached to the result for reuse.
    """
    if len(dataset) == 0:
        raise ValueError("cannot standardize an empty dataset")
    matrix = dataset.dense()
    mean = matrix.mean(axis=0)
    scale = matrix.std(axis=0)
    scale = np.where(scale > 1e-12 * np.maximum(1.0, np.abs(mean)), scale, 0.0)
    scaling = FeatureScaling(mean=mean, scale=scale)
    standardized = scaling.transform(matrix)

    rows = tuple(
        (label, {j: float(v) for j, v in enumerate(standardized[i])}) for i, (label, _) in enumerate(dataset.rows)
    )
    return ClassificationDataset(
        rows=rows,
        n_features=dataset.n_features,
        n_classes=dataset.n_classes,
        label_map=dict(dataset.label_map),
        scaling=scaling,
    )


def dataset_stats(dataset: ClassificationDataset) -> Dict[str, object]:
    """Summary printed by `ope parse --stats`."""
    nonzeros = sum(len(features) for _, features in dataset.rows)
    cells = max(1, len(dataset) * dataset.n_features)
    return {
        "rows": len(dataset),
        "features": dataset.n_features,
        "classes": dataset.n_classes,
        "class_counts": dataset.class_counts().tolist(),
        "label_map": {str(k): v for k, v in dataset.label_map.items()},
        "density": nonzeros / cells,
    }
