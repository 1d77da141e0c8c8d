"""Loading real datasets from CSV and synthesizing Gaussian ones.

Synthetic data uses numpy's PCG64 bit generator with
``Generator.standard_normal`` (numpy's ziggurat sampler), so a seed pins the
data for a given numpy release line. Draw order is features (d x m,
row-major), then the true weights, then label noise.
"""

from __future__ import annotations

import csv
import os
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from treecoca.losses import LossKind, LossSpec
from treecoca.model import Dataset


class CsvError(ValueError):
    pass


class ParseError(CsvError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class NonNumericField(CsvError):
    def __init__(self, line: int, column: int | str, value: str):
        super().__init__(f"line {line}, column {column!r}: not a number: {value!r}")
        self.line = line
        self.column = column


class EmptyFile(CsvError):
    pass


@dataclass(frozen=True)
class CsvSchema:
    """How to read a CSV table whose rows are data points.

    ``feature_columns`` may be None for "every column except the label".
    Columns are referenced by 0-based index or, with a header, by name.
    """

    label_column: int | str = -1
    feature_columns: Sequence[int | str] | None = None
    delimiter: str = ","
    has_header: bool = True
    standardize: bool = True

    def __post_init__(self) -> None:
        if len(self.delimiter.encode()) != 1:
            raise ValueError("delimiter must be a single byte")
        if self.feature_columns is not None and self.label_column in self.feature_columns:
            raise ValueError("label column cannot also be a feature column")


WINE_SCHEMA = CsvSchema(label_column="quality", delimiter=";", has_header=True, standardize=True)


def _resolve(col: int | str, header: list[str] | None, width: int) -> int:
    if isinstance(col, str):
        if header is None:
            raise CsvError(f"column {col!r} given by name but the file has no header")
        names = [h.strip() for h in header]
        if col not in names:
            raise CsvError(f"no column named {col!r}; have {names}")
        return names.index(col)
    idx = col + width if col < 0 else col
    if not 0 <= idx < width:
        raise CsvError(f"column index {col} out of range for {width} columns")
    return idx


def load_table(path: str | os.PathLike, schema: CsvSchema) -> tuple[np.ndarray, np.ndarray]:
    """Read ``(features d x m, labels m)`` without any rescaling."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(n, r) for n, r in enumerate(csv.reader(fh, delimiter=schema.delimiter), start=1) if r]
    if not rows:
        raise EmptyFile(f"{path} is empty")
    header = None
    if schema.has_header:
        header = rows[0][1]
        rows = rows[1:]
        if not rows:
            raise EmptyFile(f"{path} has a header but no data")
    width = len(header) if header is not None else len(rows[0][1])
    label = _resolve(schema.label_column, header, width)
    if schema.feature_columns is None:
        feats = [j for j in range(width) if j != label]
    else:
        feats = [_resolve(c, header, width) for c in schema.feature_columns]
    if label in feats:
        raise CsvError("label column cannot also be a feature column")
    if not feats:
        raise CsvError("no feature columns")

    values = np.empty((len(rows), width))
    for k, (line, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(line, f"expected {width} fields, found {len(row)}")
        for j, cell in enumerate(row):
            try:
                values[k, j] = float(cell)
            except ValueError:
                name = header[j].strip() if header is not None else j
                raise NonNumericField(line, name, cell) from None
    if not np.all(np.isfinite(values)):
        line = rows[int(np.flatnonzero(~np.isfinite(values).all(axis=1))[0])][0]
        raise ParseError(line, "non-finite value")
    return values[:, feats].T.copy(), values[:, label].copy()


def standardize_rows(features: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance per feature; constant features become 0."""
    mean = features.mean(axis=1, keepdims=True)
    std = features.std(axis=1, keepdims=True)
    std[std == 0.0] = 1.0
    return (features - mean) / std


def load_csv(path: str | os.PathLike, schema: CsvSchema, lam: float, loss: LossSpec) -> Dataset:
    """Load a CSV into a :class:`Dataset` (optionally standardized, always scaled into the unit ball)."""
    X, y = load_table(path, schema)
    if schema.standardize:
        X = standardize_rows(X)
    return Dataset.from_raw(X, y, lam, loss)


def write_csv(path: str | os.PathLike, features: np.ndarray, labels: np.ndarray, *, delimiter: str = ",") -> None:
    """Write one row per data point (features then label) with 17 significant digits."""
    d = features.shape[0]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(d)] + ["y"])
        for i in range(features.shape[1]):
            w.writerow([format(v, ".17g") for v in features[:, i]] + [format(labels[i], ".17g")])


@dataclass(frozen=True)
class LabelModel:
    """``linear``: y = w_true.x + noise*eps. ``signs``: y = sign(w_true.x) with sign(0) = +1.

    ``w_true`` has i.i.d. N(0, w_scale^2 / d) entries so labels are O(w_scale).
    """

    kind: str = "linear"
    w_scale: float = 1.0
    noise: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "signs"):
            raise ValueError(f"unknown label model {self.kind!r}")


def synth_gaussian(
    d: int,
    m: int,
    seed: int,
    lam: float,
    loss: LossSpec | None = None,
    label_model: LabelModel | None = None,
) -> Dataset:
    """i.i.d. standard normal features with labels from ``label_model``.

    Labels are computed from the raw features; the columns are then scaled
    into the unit ball. Defaults pick the label model that matches the loss.
    """
    if d < 1 or m < 1:
        raise ValueError("d and m must be >= 1")
    loss = LossSpec.squared() if loss is None else loss
    if label_model is None:
        label_model = LabelModel("signs" if loss.kind is LossKind.SMOOTH_HINGE else "linear")
    rng = np.random.Generator(np.random.PCG64(seed))
    X = rng.standard_normal((d, m))
    w_true = rng.standard_normal(d) * (label_model.w_scale / np.sqrt(d))
    score = X.T @ w_true
    if label_model.kind == "linear":
        y = score + label_model.noise * rng.standard_normal(m)
    else:
        y = np.where(score >= 0.0, 1.0, -1.0)
    return Dataset.from_raw(X, y, lam, loss)


def raw_gaussian(d: int, m: int, seed: int) -> np.ndarray:
    """The unscaled feature matrix :func:`synth_gaussian` draws for ``seed``."""
    return np.random.Generator(np.random.PCG64(seed)).standard_normal((d, m))
