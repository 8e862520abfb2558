"""Ingestion, encoding and split behavior."""

import numpy as np
import pytest

from polykit.dataset import (
    ColumnSpec,
    Dataset,
    DummyGroups,
    Schema,
    dataset_from_arrays,
    encode_design,
    load_csv,
    load_design_for_predict,
    parse_schema_sidecar,
    split,
)
from polykit.errors import DataError


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_numeric_columns_and_response(self, tmp_path):
        path = write(tmp_path, "t.csv", "u,v,y\n1,2,3\n4,5,6\n7,8,9\n")
        ds = load_csv(path, categorical_threshold=0)
        assert ds.n == 3
        assert len(ds.schema.features) == 2
        assert all(c.kind == "numeric" for c in ds.schema.features)
        assert ds.schema.response.name == "y"
        assert ds.schema.response.kind == "response_numeric"

    def test_non_numeric_forces_categorical(self, tmp_path):
        path = write(tmp_path, "t.csv", "c,y\na,1\nb,2\na,3\n")
        ds = load_csv(path)
        spec = ds.schema.column("c")
        assert spec.kind == "categorical"
        assert spec.levels == ("a", "b")

    def test_low_cardinality_numeric_is_categorical(self, tmp_path):
        path = write(tmp_path, "t.csv", "c,y\n1,10\n2,20\n1,30\n")
        ds = load_csv(path, categorical_threshold=2)
        assert ds.schema.column("c").kind == "categorical"

    def test_missing_rows_dropped_and_reported(self, tmp_path):
        rows = "\n".join(f"{i},{i + 1}" for i in range(9))
        path = write(tmp_path, "t.csv", f"u,y\n,0\n{rows}\n")
        with pytest.warns(UserWarning, match="1 row"):
            ds = load_csv(path, categorical_threshold=0)
        assert ds.n == 9
        assert ds.dropped_rows == 1

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "absent.csv")

    def test_zero_usable_rows(self, tmp_path):
        path = write(tmp_path, "t.csv", "u,y\n,1\n,2\n")
        with pytest.raises(DataError, match="no usable rows"):
            load_csv(path)

    def test_response_column_absent(self, tmp_path):
        path = write(tmp_path, "t.csv", "u,v\n1,2\n")
        with pytest.raises(DataError, match="response column"):
            load_csv(path, response="y")

    def test_sidecar_hints(self, tmp_path):
        side = write(tmp_path, "s.schema", "# kinds\nu = categorical\ny = response_numeric\n")
        path = write(tmp_path, "t.csv", "u,v,y\n1,2,3\n4,5,6\n")
        hints = parse_schema_sidecar(side)
        ds = load_csv(path, kind_hints=hints, categorical_threshold=0)
        assert ds.schema.column("u").kind == "categorical"
        assert ds.schema.column("v").kind == "numeric"

    def test_explicit_schema_reused(self, tmp_path):
        train = write(tmp_path, "a.csv", "c,y\na,1\nb,2\nc,3\n")
        ds = load_csv(train)
        other = write(tmp_path, "b.csv", "c,y\nb,5\nb,6\n")
        ds2 = load_csv(other, schema=ds.schema)
        assert ds2.schema is ds.schema


class TestSchemaValidation:
    def test_exactly_one_response(self):
        with pytest.raises(DataError):
            Schema((ColumnSpec("a", "numeric"),))
        with pytest.raises(DataError):
            Schema(
                (
                    ColumnSpec("a", "response_numeric"),
                    ColumnSpec("b", "response_class"),
                )
            )

    def test_categorical_needs_levels(self):
        with pytest.raises(DataError):
            ColumnSpec("c", "categorical")


class TestEncodeDesign:
    def test_mixed_widths(self):
        ds = Dataset(
            Schema(
                (
                    ColumnSpec("u", "numeric"),
                    ColumnSpec("c", "categorical", ("a", "b", "c")),
                    ColumnSpec("y", "response_numeric"),
                )
            ),
            {
                "u": np.array([1.0, 2.0, 3.0]),
                "c": np.array(["a", "b", "c"]),
                "y": np.array([0.0, 1.0, 2.0]),
            },
        )
        X, groups = encode_design(ds)
        assert X.shape == (3, 3)
        assert groups.numeric_indices == (0,)
        assert groups.groups == (("c", (1, 2)),)
        assert groups.column_names == ("u", "c=b", "c=c")
        # reference level "a" encodes as all zeros
        np.testing.assert_array_equal(X[0, 1:], [0.0, 0.0])

    def test_all_numeric_identity(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(10, 5))
        ds = dataset_from_arrays(X, rng.normal(size=10))
        design, groups = encode_design(ds)
        np.testing.assert_array_equal(design, X)
        assert groups.groups == ()
        # idempotence: encoding the encoded values changes nothing
        ds2 = dataset_from_arrays(design, rng.normal(size=10))
        design2, _ = encode_design(ds2)
        np.testing.assert_array_equal(design2, design)

    def test_single_level_categorical_warns(self):
        ds = Dataset(
            Schema(
                (
                    ColumnSpec("c", "categorical", ("only",)),
                    ColumnSpec("y", "response_numeric"),
                )
            ),
            {"c": np.array(["only", "only"]), "y": np.array([1.0, 2.0])},
        )
        with pytest.warns(UserWarning, match="single level"):
            X, groups = encode_design(ds)
        assert X.shape == (2, 0)
        assert groups.groups == (("c", ()),)

    def test_dummy_row_sums(self):
        rng = np.random.default_rng(1)
        values = rng.choice(["a", "b", "c", "d"], size=40)
        ds = Dataset(
            Schema(
                (
                    ColumnSpec("c", "categorical", ("a", "b", "c", "d")),
                    ColumnSpec("y", "response_numeric"),
                )
            ),
            {"c": values, "y": np.zeros(40)},
        )
        X, groups = encode_design(ds)
        sums = X[:, list(groups.groups[0][1])].sum(axis=1)
        assert np.all(sums <= 1)
        np.testing.assert_array_equal(sums == 0, values == "a")

    def test_unseen_level_maps_to_reference(self):
        train_schema = Schema(
            (
                ColumnSpec("c", "categorical", ("a", "b")),
                ColumnSpec("y", "response_numeric"),
            )
        )
        new = Dataset(
            Schema(
                (
                    ColumnSpec("c", "categorical", ("a", "b", "z")),
                    ColumnSpec("y", "response_numeric"),
                )
            ),
            {"c": np.array(["z", "b"]), "y": np.zeros(2)},
        )
        with pytest.warns(UserWarning, match="outside the schema"):
            X, _ = encode_design(new, train_schema)
        np.testing.assert_array_equal(X, [[0.0], [1.0]])


class TestSplit:
    def test_large_n_caps_test_at_10000(self):
        ds = dataset_from_arrays(np.arange(50000.0)[:, None], np.zeros(50000))
        train, test = split(ds, seed=0)
        assert (train.n, test.n) == (40000, 10000)

    def test_small_n_uses_fifth(self):
        ds = dataset_from_arrays(np.arange(1000.0)[:, None], np.zeros(1000))
        train, test = split(ds, seed=3)
        assert (train.n, test.n) == (800, 200)

    def test_deterministic_and_partition(self):
        X = np.arange(997.0)[:, None]
        ds = dataset_from_arrays(X, np.zeros(997))
        t1, s1 = split(ds, seed=11)
        t2, s2 = split(ds, seed=11)
        np.testing.assert_array_equal(t1.columns["x0"], t2.columns["x0"])
        np.testing.assert_array_equal(s1.columns["x0"], s2.columns["x0"])
        merged = np.sort(np.concatenate([t1.columns["x0"], s1.columns["x0"]]))
        np.testing.assert_array_equal(merged, X[:, 0])

    def test_needs_two_rows(self):
        ds = dataset_from_arrays(np.zeros((1, 1)), np.zeros(1))
        with pytest.raises(DataError):
            split(ds, seed=0)


class TestPredictLoader:
    def test_reads_features_without_response(self, tmp_path):
        schema = Schema(
            (
                ColumnSpec("u", "numeric"),
                ColumnSpec("c", "categorical", ("a", "b")),
                ColumnSpec("y", "response_numeric"),
            )
        )
        path = write(tmp_path, "t.csv", "u,c\n1.5,b\n2.5,a\n")
        X = load_design_for_predict(path, schema)
        np.testing.assert_array_equal(X, [[1.5, 1.0], [2.5, 0.0]])

    def test_empty_file_gives_zero_rows(self, tmp_path):
        schema = Schema((ColumnSpec("u", "numeric"), ColumnSpec("y", "response_numeric")))
        path = write(tmp_path, "t.csv", "u,y\n")
        X = load_design_for_predict(path, schema)
        assert X.shape == (0, 1)

    def test_missing_cell_is_an_error(self, tmp_path):
        schema = Schema((ColumnSpec("u", "numeric"), ColumnSpec("y", "response_numeric")))
        path = write(tmp_path, "t.csv", "u,y\n,1\n")
        with pytest.raises(DataError, match="missing value"):
            load_design_for_predict(path, schema)


class TestDummyGroups:
    def test_double_assignment_rejected(self):
        with pytest.raises(DataError):
            DummyGroups(groups=(("c", (0,)),), numeric_indices=(0,), column_names=("a",))
