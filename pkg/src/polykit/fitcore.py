"""Model fitting: pivoted-QR least squares, ridge, one-vs-all logistic,
PCA preprocessing, prediction, and the evaluation metrics.

All fitters add their own intercept; design matrices never carry a column
of ones. Ridge and logistic z-scale the columns internally and report
coefficients back on the original scale, so prediction is always
``expand -> dot``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy.special import expit

from . import polyterms
from .dataset import DummyGroups, Schema
from .errors import DataError
from .polyterms import TermSet


class LinearFit(NamedTuple):
    """Intercept, slope vector, and indices of aliased (dropped) columns."""

    intercept: float
    coef: np.ndarray
    aliased: tuple[int, ...]


class Standardization(NamedTuple):
    means: np.ndarray
    scales: np.ndarray


def standardize_columns(X: np.ndarray) -> tuple[np.ndarray, Standardization]:
    """Z-scale columns; zero-variance columns get scale 1 (and stay zero)."""
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    return (X - means) / scales, Standardization(means, scales)


def _check_finite(X: np.ndarray, y: np.ndarray | None = None) -> None:
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in design matrix")
    if y is not None and not np.all(np.isfinite(y)):
        raise ValueError("non-finite values in response")


def fit_ols(X: np.ndarray, y: np.ndarray) -> LinearFit:
    """Least squares via column-pivoted QR on the centered design.

    Columns that the pivoted factorization finds numerically dependent are
    aliased: they receive coefficient zero and are listed in the result.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_finite(X, y)
    n, l = X.shape
    if n < 1:
        raise ValueError("need at least one row")
    ym = y.mean()
    if l == 0:
        return LinearFit(float(ym), np.zeros(0), ())

    xm = X.mean(axis=0)
    Xc = X - xm
    yc = y - ym
    q, r, piv = scipy.linalg.qr(Xc, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        tol = diag[0] * max(n, l) * np.finfo(np.float64).eps
        rank = int(np.sum(diag > tol))

    coef = np.zeros(l)
    if rank > 0:
        rhs = q.T[:rank] @ yc
        sol = scipy.linalg.solve_triangular(r[:rank, :rank], rhs)
        coef[piv[:rank]] = sol
    aliased = tuple(sorted(int(j) for j in piv[rank:]))
    intercept = float(ym - xm @ coef)
    return LinearFit(intercept, coef, aliased)


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> LinearFit:
    """Ridge regression: penalized normal equations on z-scaled columns,
    intercept unpenalized, coefficients reported on the original scale."""
    if lam <= 0:
        raise ValueError("ridge penalty must be positive")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_finite(X, y)
    n, l = X.shape
    ym = y.mean()
    if l == 0:
        return LinearFit(float(ym), np.zeros(0), ())
    Z, std = standardize_columns(X)
    gram = Z.T @ Z
    gram[np.diag_indices(l)] += lam
    beta = scipy.linalg.solve(gram, Z.T @ (y - ym), assume_a="pos")
    coef = beta / std.scales
    intercept = float(ym - std.means @ coef)
    return LinearFit(intercept, coef, ())


@dataclass(frozen=True)
class LogisticFit:
    """One binary logistic fit per class; prediction is argmax of scores."""

    classes: tuple
    intercepts: np.ndarray  # (q,)
    coefs: np.ndarray  # (l, q), original column scale
    converged: tuple[bool, ...]

    def scores(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coefs + self.intercepts

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.argmax(self.scores(X), axis=1)
        return np.asarray(self.classes)[idx]


def _binary_logistic(
    Z: np.ndarray, y01: np.ndarray, max_iter: int, tol: float, norm_cap: float, label
) -> tuple[float, np.ndarray, bool]:
    """IRLS for one binary problem on standardized columns.

    Returns (intercept, slopes, converged). A slope norm exceeding
    ``norm_cap`` is taken as perfect separation: the whole coefficient
    vector is rescaled onto the cap (same decision boundary) and returned
    with a warning.
    """
    n, l = Z.shape
    A = np.column_stack([np.ones(n), Z])
    b = np.zeros(l + 1)
    converged = False
    for _ in range(max_iter):
        p = expit(A @ b)
        g = A.T @ (y01 - p)
        if np.max(np.abs(g)) <= tol:
            converged = True
            break
        w = np.maximum(p * (1.0 - p), 1e-10)
        h = A.T @ (A * w[:, None])
        h[np.diag_indices(l + 1)] += 1e-10
        b = b + scipy.linalg.solve(h, g, assume_a="pos")
        slope_norm = float(np.linalg.norm(b[1:]))
        if slope_norm > norm_cap:
            b *= norm_cap / slope_norm
            warnings.warn(
                f"possible perfect separation for class {label!r}: coefficient norm capped"
            )
            break
    return float(b[0]), b[1:], converged


def fit_logistic_ova(
    X: np.ndarray,
    labels: np.ndarray,
    max_iter: int = 100,
    tol: float = 1e-8,
    *,
    norm_cap: float = 1e3,
    n_jobs: int = 1,
) -> LogisticFit:
    """One-vs-all logistic regression: q independent binary IRLS fits.

    The per-class problems share nothing, so they may run on ``n_jobs``
    threads; results are identical to the serial order either way.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    _check_finite(X)
    classes = np.unique(labels)
    q = len(classes)
    if q < 2:
        raise ValueError("need at least two classes")
    Z, std = standardize_columns(X)

    def one(c) -> tuple[float, np.ndarray, bool]:
        return _binary_logistic(Z, (labels == c).astype(np.float64), max_iter, tol, norm_cap, c)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            fits = list(pool.map(one, classes))
    else:
        fits = [one(c) for c in classes]

    l = X.shape[1]
    coefs = np.zeros((l, q))
    intercepts = np.zeros(q)
    conv = []
    for j, (b0, slopes, ok) in enumerate(fits):
        coefs[:, j] = slopes / std.scales
        intercepts[j] = b0 - std.means @ coefs[:, j]
        conv.append(ok)
    return LogisticFit(tuple(classes.tolist()), intercepts, coefs, tuple(conv))


@dataclass(frozen=True)
class PCABasis:
    """Orthonormal component basis retaining >= target variance fraction."""

    components: np.ndarray  # (m, r)
    means: np.ndarray  # (m,)
    retained_fraction: float
    target_fraction: float

    @property
    def r(self) -> int:
        return self.components.shape[1]


def pca_fit(
    X: np.ndarray, var_fraction: float = 0.90, *, n_components: int | None = None
) -> PCABasis:
    """Center X and keep the fewest components whose cumulative variance
    reaches ``var_fraction`` of the total, or exactly ``n_components``
    when a fixed count is requested."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("PCA needs at least two rows")
    if not 0 < var_fraction <= 1:
        raise ValueError("var_fraction must be in (0, 1]")
    means = X.mean(axis=0)
    _, s, vt = scipy.linalg.svd(X - means, full_matrices=False)
    power = s**2
    total = power.sum()
    if total == 0.0:
        raise DataError("zero-variance matrix: PCA undefined")
    cum = np.cumsum(power) / total
    if n_components is not None:
        if n_components < 1:
            raise ValueError("n_components must be >= 1")
        r = min(n_components, len(s))
        var_fraction = float(cum[r - 1])
    else:
        r = int(np.searchsorted(cum, var_fraction - 1e-12) + 1)
        r = min(r, len(s))
    components = vt[:r].T.copy()
    # fix the sign convention so repeated fits agree exactly
    for j in range(r):
        k = int(np.argmax(np.abs(components[:, j])))
        if components[k, j] < 0:
            components[:, j] = -components[:, j]
    return PCABasis(components, means, float(cum[r - 1]), float(var_fraction))


def pca_transform(basis: PCABasis, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != basis.components.shape[0]:
        raise ValueError("matrix width does not match the PCA basis")
    return (X - basis.means) @ basis.components


def pca_inverse(basis: PCABasis, scores: np.ndarray) -> np.ndarray:
    return np.asarray(scores) @ basis.components.T + basis.means


@dataclass(frozen=True)
class PolyModel:
    """A fitted polynomial model plus everything prediction needs.

    ``coef`` has shape (l,) for regression and (l, q) for classification;
    ``intercept`` is a float or a (q,) vector to match. ``pca``, when
    present, was fitted on the raw design before expansion, so the term
    set lives over component scores. ``standardization`` records the
    z-scaling the solver applied internally (coefficients are already on
    the original scale).
    """

    terms: TermSet
    intercept: float | np.ndarray
    coef: np.ndarray
    method: str  # "ols" | "ridge" | "logistic"
    lam: float | None = None
    pca: PCABasis | None = None
    standardization: Standardization | None = None
    classes: tuple | None = None
    aliased: tuple[int, ...] = ()
    schema: Schema | None = None
    groups: DummyGroups | None = None

    def __post_init__(self):
        l = len(self.terms)
        if self.method == "logistic":
            if self.classes is None or self.coef.shape != (l, len(self.classes)):
                raise ValueError("coefficient matrix shape does not match terms/classes")
        elif self.coef.shape != (l,):
            raise ValueError("coefficient length does not match the term set")
        if self.standardization is not None and not np.all(self.standardization.scales > 0):
            raise ValueError("standardization scales must be positive")

    @property
    def input_width(self) -> int:
        """Design-matrix width this model expects at prediction time."""
        if self.pca is not None:
            return self.pca.components.shape[0]
        return self.terms.width


def fit_poly_model(
    design: np.ndarray,
    response: np.ndarray,
    terms: TermSet,
    method: str = "ols",
    *,
    lam: float | None = None,
    pca: PCABasis | None = None,
    schema: Schema | None = None,
    groups: DummyGroups | None = None,
    max_iter: int = 100,
    tol: float = 1e-8,
    n_jobs: int = 1,
    cell_budget: int = polyterms.DEFAULT_CELL_BUDGET,
) -> PolyModel:
    """Expand the (optionally PCA-reduced) design and fit by ``method``."""
    Z = pca_transform(pca, design) if pca is not None else np.asarray(design, dtype=np.float64)
    P = polyterms.expand(Z, terms, cell_budget=cell_budget)
    std: Standardization | None = None
    if method == "ols":
        fit = fit_ols(P, response)
        return PolyModel(
            terms, fit.intercept, fit.coef, "ols",
            pca=pca, aliased=fit.aliased, schema=schema, groups=groups,
        )
    if method == "ridge":
        if lam is None:
            raise ValueError("ridge requires a penalty value")
        fit = fit_ridge(P, response, lam)
        _, std = standardize_columns(P)
        return PolyModel(
            terms, fit.intercept, fit.coef, "ridge", lam=lam,
            pca=pca, standardization=std, schema=schema, groups=groups,
        )
    if method == "logistic":
        lf = fit_logistic_ova(P, response, max_iter, tol, n_jobs=n_jobs)
        _, std = standardize_columns(P)
        return PolyModel(
            terms, lf.intercepts, lf.coefs, "logistic",
            pca=pca, standardization=std, classes=lf.classes,
            schema=schema, groups=groups,
        )
    raise ValueError(f"unknown fit method {method!r}")


def predict(model: PolyModel, new_design: np.ndarray) -> np.ndarray:
    """Apply stored PCA, expansion and coefficients to a new design matrix.

    Regression models return fitted values; classification models return
    the argmax class id. Unseen categorical levels are handled upstream by
    ``encode_design`` against the training schema.
    """
    X = np.asarray(new_design, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.input_width:
        raise ValueError(
            f"design width {X.shape[1] if X.ndim == 2 else '?'} does not match"
            f" the model's expected width {model.input_width}"
        )
    Z = pca_transform(model.pca, X) if model.pca is not None else X
    P = polyterms.expand(Z, model.terms)
    scores = P @ model.coef + model.intercept
    if model.method == "logistic":
        idx = np.argmax(scores, axis=1)
        return np.asarray(model.classes)[idx]
    return scores


def mape(pred: np.ndarray, actual: np.ndarray) -> float:
    """Mean absolute prediction error, in response units (not a percentage)."""
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.size < 1:
        raise ValueError("inputs must be equal-length and nonempty")
    return float(np.mean(np.abs(pred - actual)))


def pcc(pred_classes: np.ndarray, actual_classes: np.ndarray) -> float:
    """Proportion of correct classification."""
    pred_classes = np.asarray(pred_classes)
    actual_classes = np.asarray(actual_classes)
    if pred_classes.shape != actual_classes.shape or pred_classes.size < 1:
        raise ValueError("inputs must be equal-length and nonempty")
    return float(np.mean(pred_classes == actual_classes))


def corr(pred: np.ndarray, actual: np.ndarray) -> float:
    """Pearson correlation between predicted and actual values."""
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape or pred.size < 1:
        raise ValueError("inputs must be equal-length and nonempty")
    sp = pred.std()
    sa = actual.std()
    if sp == 0.0 or sa == 0.0:
        raise ValueError("correlation undefined for zero-variance inputs")
    return float(np.mean((pred - pred.mean()) * (actual - actual.mean())) / (sp * sa))


def r_squared(pred: np.ndarray, actual: np.ndarray) -> float:
    """Coefficient of determination of predictions against actuals."""
    actual = np.asarray(actual, dtype=np.float64)
    ss_res = float(np.sum((actual - pred) ** 2))
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined for a constant response")
    return 1.0 - ss_res / ss_tot
