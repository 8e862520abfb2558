"""Variance inflation factors and the layer-by-layer collinearity probe.

VIF_j = 1 / (1 - R^2_j), where R^2_j comes from regressing column j on all
the other columns (with intercept). Exactly collinear or zero-variance
columns would be infinite, so they are capped at ``VIF_CAP`` and still
enter the summary mean; the probe's last-layer averages are dominated by
such capped values whenever the layer outputs are linearly dependent
(e.g. softmax outputs summing to one).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import mlp as mlpmod
from .fitcore import fit_ols

#: Reported in place of an infinite VIF (1 - R^2 below ``COLLINEAR_TOL``).
VIF_CAP = 1e15

COLLINEAR_TOL = 1e-12

DEFAULT_THRESHOLD = 10.0


@dataclass(frozen=True)
class VIFReport:
    """Per-column VIFs for one layer plus the two summary statistics."""

    layer_label: str
    vifs: tuple[float, ...]
    proportion_over_threshold: float
    mean_vif: float
    threshold: float = DEFAULT_THRESHOLD
    undefined: bool = False


def _vif_one(X: np.ndarray, j: int) -> float:
    y = X[:, j]
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 0.0:
        return VIF_CAP
    others = np.delete(X, j, axis=1)
    fit = fit_ols(others, y)
    resid = y - (others @ fit.coef + fit.intercept)
    one_minus_r2 = float(np.sum(resid**2)) / ss_tot
    if one_minus_r2 < COLLINEAR_TOL:
        return VIF_CAP
    return min(1.0 / one_minus_r2, VIF_CAP)


def vif(X: np.ndarray, *, n_jobs: int = 1) -> np.ndarray:
    """VIF of every column of X; needs at least two columns.

    The k single-column regressions are independent, so they may run on
    ``n_jobs`` threads with identical results.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise ValueError("VIF needs a matrix with at least two columns")
    cols = range(X.shape[1])
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            values = list(pool.map(lambda j: _vif_one(X, j), cols))
    else:
        values = [_vif_one(X, j) for j in cols]
    return np.array(values)


def vif_summary(vifs: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> tuple[float, float]:
    """(proportion strictly above threshold, arithmetic mean incl. caps)."""
    vifs = np.asarray(vifs, dtype=np.float64)
    if vifs.size == 0:
        raise ValueError("empty VIF vector")
    return float(np.mean(vifs > threshold)), float(np.mean(vifs))


def _report(label: str, values: np.ndarray, threshold: float) -> VIFReport:
    prop, mean = vif_summary(values, threshold)
    return VIFReport(label, tuple(float(v) for v in values), prop, mean, threshold)


def probe_layers(
    mlp: "mlpmod.MLP",
    X: np.ndarray,
    *,
    threshold: float = DEFAULT_THRESHOLD,
    n_jobs: int = 1,
) -> list[VIFReport]:
    """One VIFReport per network layer, dense and dropout alike.

    Layer outputs are taken in inference mode, so a dropout layer passes
    its input through and its report duplicates the preceding dense one.
    Layers narrower than two units get an ``undefined`` report.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 1:
        raise ValueError("probe needs at least one row")
    reports: list[VIFReport] = []
    labels = mlpmod.layer_labels(mlp)
    outputs = X
    for i, layer in enumerate(mlp.layers):
        outputs = mlpmod.apply_layer(layer, outputs)
        if isinstance(layer, mlpmod.DropoutLayer) and reports:
            prev = reports[-1]
            reports.append(
                VIFReport(
                    labels[i], prev.vifs, prev.proportion_over_threshold,
                    prev.mean_vif, prev.threshold, prev.undefined,
                )
            )
            continue
        if outputs.shape[1] < 2:
            reports.append(VIFReport(labels[i], (), 0.0, 0.0, threshold, undefined=True))
            continue
        values = vif(outputs, n_jobs=n_jobs)
        reports.append(_report(labels[i], values, threshold))
    return reports


def format_reports(reports: list[VIFReport]) -> str:
    """Aligned three-column text table: layer, share over threshold, mean."""
    if not reports:
        return ""
    thr = reports[0].threshold
    rows = [("layer", f"share_vif_over_{thr:g}", "mean_vif")]
    for rep in reports:
        if rep.undefined:
            rows.append((rep.layer_label, "undefined", "undefined"))
        else:
            rows.append((rep.layer_label, f"{rep.proportion_over_threshold:.6g}",
                         f"{rep.mean_vif:.7g}"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in rows]
    return "\n".join(lines) + "\n"


def reports_to_csv(reports: list[VIFReport]) -> str:
    """Summary CSV: one row per layer."""
    lines = ["layer,share_over_threshold,mean_vif,threshold,undefined"]
    for rep in reports:
        lines.append(
            f"{rep.layer_label},{rep.proportion_over_threshold!r},"
            f"{rep.mean_vif!r},{rep.threshold!r},{int(rep.undefined)}"
        )
    return "\n".join(lines) + "\n"
