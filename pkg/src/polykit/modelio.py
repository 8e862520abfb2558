"""Versioned JSON container for fitted models.

The container carries everything prediction on raw CSV rows needs: the
training schema, dummy-group layout, term set, optional PCA basis,
standardization record and the coefficients themselves.
"""

from __future__ import annotations

import json

import numpy as np

from .dataset import ColumnSpec, DummyGroups, Schema
from .errors import ModelFormatError
from .fitcore import PCABasis, PolyModel, Standardization
from .polyterms import TermSet

FORMAT_NAME = "polykit-model"
FORMAT_VERSION = 1


def _schema_to_obj(schema: Schema | None):
    if schema is None:
        return None
    return [
        {"name": c.name, "kind": c.kind, "levels": list(c.levels)} for c in schema.columns
    ]


def _schema_from_obj(obj) -> Schema | None:
    if obj is None:
        return None
    return Schema(tuple(ColumnSpec(c["name"], c["kind"], tuple(c["levels"])) for c in obj))


def _groups_to_obj(groups: DummyGroups | None):
    if groups is None:
        return None
    return {
        "groups": [[src, list(idxs)] for src, idxs in groups.groups],
        "numeric_indices": list(groups.numeric_indices),
        "column_names": list(groups.column_names),
    }


def _groups_from_obj(obj) -> DummyGroups | None:
    if obj is None:
        return None
    return DummyGroups(
        groups=tuple((src, tuple(idxs)) for src, idxs in obj["groups"]),
        numeric_indices=tuple(obj["numeric_indices"]),
        column_names=tuple(obj["column_names"]),
    )


def model_to_json(model: PolyModel) -> str:
    obj = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "method": model.method,
        "lambda": model.lam,
        "intercept": (
            model.intercept.tolist()
            if isinstance(model.intercept, np.ndarray)
            else model.intercept
        ),
        "coef": model.coef.tolist(),
        "classes": list(model.classes) if model.classes is not None else None,
        "aliased": list(model.aliased),
        "terms": model.terms.to_text(),
        "term_groups": _groups_to_obj(model.terms.groups),
        "pca": None,
        "standardization": None,
        "schema": _schema_to_obj(model.schema),
        "groups": _groups_to_obj(model.groups),
    }
    if model.pca is not None:
        obj["pca"] = {
            "components": model.pca.components.tolist(),
            "means": model.pca.means.tolist(),
            "retained_fraction": model.pca.retained_fraction,
            "target_fraction": model.pca.target_fraction,
        }
    if model.standardization is not None:
        obj["standardization"] = {
            "means": model.standardization.means.tolist(),
            "scales": model.standardization.scales.tolist(),
        }
    return json.dumps(obj, indent=1, sort_keys=True)


def model_from_json(text: str) -> PolyModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a JSON model container: {exc}") from exc
    if obj.get("format") != FORMAT_NAME:
        raise ModelFormatError("missing or wrong container format marker")
    if obj.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"model container version {obj.get('version')!r} unsupported"
            f" (this build reads version {FORMAT_VERSION})"
        )
    groups = _groups_from_obj(obj["groups"])
    terms = TermSet.from_text(obj["terms"], groups=_groups_from_obj(obj["term_groups"]))
    pca = None
    if obj["pca"] is not None:
        pca = PCABasis(
            components=np.array(obj["pca"]["components"]),
            means=np.array(obj["pca"]["means"]),
            retained_fraction=obj["pca"]["retained_fraction"],
            target_fraction=obj["pca"]["target_fraction"],
        )
    std = None
    if obj["standardization"] is not None:
        std = Standardization(
            np.array(obj["standardization"]["means"]),
            np.array(obj["standardization"]["scales"]),
        )
    intercept = obj["intercept"]
    if isinstance(intercept, list):
        intercept = np.array(intercept)
    return PolyModel(
        terms=terms,
        intercept=intercept,
        coef=np.array(obj["coef"]),
        method=obj["method"],
        lam=obj["lambda"],
        pca=pca,
        standardization=std,
        classes=tuple(obj["classes"]) if obj["classes"] is not None else None,
        aliased=tuple(obj["aliased"]),
        schema=_schema_from_obj(obj["schema"]),
        groups=groups,
    )


def save_model(model: PolyModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model) + "\n")


def load_model(path) -> PolyModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return model_from_json(fh.read())
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
