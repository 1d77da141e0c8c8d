import os
from pathlib import Path

import numpy as np
import pytest

from treecoca.data import (
    WINE_SCHEMA,
    CsvSchema,
    EmptyFile,
    LabelModel,
    NonNumericField,
    ParseError,
    load_csv,
    load_table,
    raw_gaussian,
    synth_gaussian,
    write_csv,
)
from treecoca.losses import LossSpec


def test_toy_csv_echo(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("a,b,y\n1,2,3\n4,5,6\n-7,8.5,9\n")
    X, y = load_table(p, CsvSchema(label_column="y"))
    assert np.array_equal(X, [[1, 4, -7], [2, 5, 8.5]])
    assert np.array_equal(y, [3, 6, 9])


def test_column_selection_without_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("9;1;2\n8;3;4\n")
    X, y = load_table(p, CsvSchema(label_column=0, feature_columns=[2], delimiter=";", has_header=False))
    assert np.array_equal(X, [[2, 4]]) and np.array_equal(y, [9, 8])


def test_non_numeric_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,y\n1,2\n3,oops\n")
    with pytest.raises(NonNumericField) as exc:
        load_table(p, CsvSchema())
    assert exc.value.line == 3 and exc.value.column == "y"


def test_ragged_row_and_empty(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("a,y\n1,2\n3\n")
    with pytest.raises(ParseError) as exc:
        load_table(p, CsvSchema())
    assert exc.value.line == 3
    e = tmp_path / "empty.csv"
    e.write_text("")
    with pytest.raises(EmptyFile):
        load_table(e, CsvSchema())
    h = tmp_path / "header_only.csv"
    h.write_text("a,y\n")
    with pytest.raises(EmptyFile):
        load_table(h, CsvSchema())


def test_load_csv_standardizes_and_scales(tmp_path):
    p = tmp_path / "t.csv"
    rng = np.random.default_rng(0)
    write_csv(p, rng.normal(3.0, 5.0, (3, 50)), rng.normal(size=50))
    ds = load_csv(p, CsvSchema(), 0.1, LossSpec.squared())
    assert ds.d == 3 and ds.m == 50
    assert np.max(ds.sq_norms) <= 1 + 1e-12
    assert np.allclose(np.asarray(ds.features).mean(axis=1), 0.0, atol=1e-12)


def test_write_then_read_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(4, 7)), rng.normal(size=7)
    p = tmp_path / "rt.csv"
    write_csv(p, X, y)
    X2, y2 = load_table(p, CsvSchema())
    assert np.array_equal(X, X2) and np.array_equal(y, y2)


def test_synthetic_is_reproducible():
    a, b = synth_gaussian(100, 600, 4, 0.01), synth_gaussian(100, 600, 4, 0.01)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != synth_gaussian(100, 600, 5, 0.01).fingerprint()
    assert np.allclose(a.features * a.scale, raw_gaussian(100, 600, 4), rtol=1e-15)


def test_signs_labels_single_point():
    ds = synth_gaussian(1, 1, 0, 1.0, label_model=LabelModel("signs"))
    assert ds.labels[0] in (-1.0, 1.0)


def test_hinge_defaults_to_sign_labels():
    ds = synth_gaussian(3, 40, 2, 0.1, LossSpec.smooth_hinge(1.0))
    assert set(np.unique(ds.labels)) <= {-1.0, 1.0}


WINE = os.environ.get("TREECOCA_WINE_CSV")


@pytest.mark.skipif(not WINE or not Path(WINE).is_file(), reason="set TREECOCA_WINE_CSV to the red-wine CSV")
def test_wine_quality_shape():
    X, y = load_table(WINE, WINE_SCHEMA)
    with open(WINE, encoding="utf-8") as fh:
        rows = sum(1 for line in fh if line.strip()) - 1
        fh.seek(0)
        cols = len(fh.readline().split(";"))
    assert X.shape == (cols - 1, rows)
    assert X.shape == (11, 1599)
