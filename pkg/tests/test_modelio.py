"""Model container round trips and version gating."""

import json

import numpy as np
import pytest

from polykit import fitcore as fc
from polykit import modelio
from polykit.dataset import DummyGroups, dataset_from_arrays, encode_design
from polykit.errors import ModelFormatError
from polykit.polyterms import PolySpec, enumerate_terms


def fitted_model(method="ols", pca=False, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(120, 3))
    if method == "logistic":
        y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
        ds = dataset_from_arrays(X, y, classification=True)
    else:
        y = 1 + X @ np.array([1.0, -2.0, 0.5]) + rng.normal(0, 0.1, 120)
        ds = dataset_from_arrays(X, y)
    design, groups = encode_design(ds)
    basis = fc.pca_fit(design, 0.999) if pca else None
    width = basis.r if pca else design.shape[1]
    tg = DummyGroups.all_numeric(width) if pca else groups
    terms = enumerate_terms(width, tg, PolySpec(2))
    return (
        fc.fit_poly_model(
            design, ds.response_values(), terms, method,
            lam=0.5 if method == "ridge" else None,
            pca=basis, schema=ds.schema, groups=groups,
        ),
        design,
    )


@pytest.mark.parametrize("method", ["ols", "ridge", "logistic"])
@pytest.mark.parametrize("pca", [False, True])
def test_round_trip_preserves_predictions(tmp_path, method, pca):
    model, design = fitted_model(method, pca)
    path = tmp_path / "model.json"
    modelio.save_model(model, path)
    back = modelio.load_model(path)
    assert back.method == model.method
    np.testing.assert_array_equal(fc.predict(back, design), fc.predict(model, design))
    assert back.terms.terms == model.terms.terms
    if model.schema is not None:
        assert back.schema == model.schema


def test_version_mismatch_rejected(tmp_path):
    model, _ = fitted_model()
    obj = json.loads(modelio.model_to_json(model))
    obj["version"] = 99
    path = tmp_path / "model.json"
    path.write_text(json.dumps(obj), encoding="utf-8")
    with pytest.raises(ModelFormatError, match="version"):
        modelio.load_model(path)


def test_garbage_rejected(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("not json at all", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        modelio.load_model(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ModelFormatError):
        modelio.load_model(tmp_path / "absent.json")
