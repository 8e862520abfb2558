"""Forward stepwise regression: greedy term-by-term model growth scored on
a validation holdout carved out of the training data.

Each greedy step refits the model once per remaining candidate term and
keeps the candidate that most improves the validation score (mean absolute
error for regression, proportion correct for classification). The loop
keeps adding best candidates until no candidate improves by more than the
tolerance AND at least ``min_models`` candidate fits have been evaluated.
The returned model is the shortest prefix of the growth trace scoring
within the tolerance of the best score seen, refit on the sub-training
rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fitcore, polyterms
from .dataset import Dataset, encode_design
from .errors import DataError
from .polyterms import TermSet


@dataclass(frozen=True)
class FSRConfig:
    candidates: TermSet
    validation_fraction: float = 0.2
    min_models: int = 200
    improvement_tolerance: float = 0.0
    max_iter: int = 25  # logistic refits only

    def __post_init__(self):
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.min_models < 1:
            raise ValueError("min_models must be >= 1")
        if len(self.candidates) == 0:
            raise DataError("candidate term set is empty")


@dataclass(frozen=True)
class FSRTraceRow:
    step: int
    term_label: str  # "" for the intercept-only row
    validation_score: float
    fits_evaluated: int
    selected: bool = False


@dataclass(frozen=True)
class FSRResult:
    model: fitcore.PolyModel
    trace: tuple[FSRTraceRow, ...]


def trace_to_csv(trace: tuple[FSRTraceRow, ...]) -> str:
    lines = ["step,term,validation_score,fits_evaluated,selected"]
    for row in trace:
        lines.append(
            f"{row.step},{row.term_label},{row.validation_score!r},"
            f"{row.fits_evaluated},{int(row.selected)}"
        )
    return "\n".join(lines) + "\n"


def _score_regression(cols: np.ndarray, y: np.ndarray, vcols: np.ndarray, yv: np.ndarray) -> float:
    fit = fitcore.fit_ols(cols, y)
    return fitcore.mape(vcols @ fit.coef + fit.intercept, yv)


def _score_classification(
    cols: np.ndarray, y: np.ndarray, vcols: np.ndarray, yv: np.ndarray, max_iter: int
) -> float:
    fit = fitcore.fit_logistic_ova(cols, y, max_iter=max_iter)
    return fitcore.pcc(fit.predict(vcols), yv)


def fsr(train: Dataset, config: FSRConfig, seed: int) -> FSRResult:
    """Grow a polynomial model one candidate term at a time.

    The training rows are split ``1 - validation_fraction`` /
    ``validation_fraction`` under ``seed``; growth is scored on the
    holdout and the final model is refit on the sub-training part with
    the best prefix of selected terms.
    """
    design, groups = encode_design(train)
    if design.shape[1] != config.candidates.width:
        raise DataError(
            f"candidate terms were built for width {config.candidates.width},"
            f" but the encoded design has width {design.shape[1]}"
        )
    y = train.response_values()
    classify = train.schema.is_classification
    n = design.shape[0]
    n_val = int(n * config.validation_fraction)
    if n_val < 1:
        raise DataError("validation holdout would be empty")

    rng = np.random.default_rng(seed)
    val_idx = np.sort(rng.choice(n, size=n_val, replace=False))
    mask = np.ones(n, dtype=bool)
    mask[val_idx] = False
    sub_idx = np.flatnonzero(mask)

    expanded = polyterms.expand(design, config.candidates)
    P_sub, P_val = expanded[sub_idx], expanded[val_idx]
    y_sub, y_val = y[sub_idx], y[val_idx]

    labels = config.candidates.labels()
    better = (lambda a, b: a > b) if classify else (lambda a, b: a < b)

    if classify:
        values, counts = np.unique(y_sub, return_counts=True)
        majority = values[np.argmax(counts)]
        base_score = fitcore.pcc(np.full(n_val, majority), y_val)
    else:
        base_score = fitcore.mape(np.full(n_val, y_sub.mean()), y_val)

    selected: list[int] = []
    remaining = list(range(len(config.candidates)))
    fits = 0
    trace: list[FSRTraceRow] = [FSRTraceRow(0, "", base_score, 0)]
    prev_score = base_score

    while remaining:
        best_j, best_score = None, None
        for j in remaining:
            cols = P_sub[:, selected + [j]]
            vcols = P_val[:, selected + [j]]
            if classify:
                score = _score_classification(cols, y_sub, vcols, y_val, config.max_iter)
            else:
                score = _score_regression(cols, y_sub, vcols, y_val)
            fits += 1
            if best_score is None or better(score, best_score):
                best_j, best_score = j, score
        improvement = (best_score - prev_score) if classify else (prev_score - best_score)
        if improvement <= config.improvement_tolerance and fits >= config.min_models:
            break
        selected.append(best_j)
        remaining.remove(best_j)
        trace.append(FSRTraceRow(len(selected), labels[best_j], best_score, fits))
        prev_score = best_score

    # final selection: the shortest prefix of the growth trace whose score is
    # within improvement_tolerance of the best score seen (parsimony rule;
    # tolerance 0 keeps the earliest strict optimum)
    scores = [row.validation_score for row in trace]
    best = max(scores) if classify else min(scores)
    if classify:
        meets = [s >= best - config.improvement_tolerance for s in scores]
    else:
        meets = [s <= best + config.improvement_tolerance for s in scores]
    best_step = meets.index(True)
    chosen = sorted(selected[:best_step])

    final_terms = TermSet(
        tuple(config.candidates[j] for j in chosen),
        config.candidates.width,
        config.candidates.groups,
        config.candidates.spec,
    )
    sub_design = design[sub_idx]
    method = "logistic" if classify else "ols"
    model = fitcore.fit_poly_model(
        sub_design, y_sub, final_terms, method,
        schema=train.schema, groups=groups, max_iter=config.max_iter,
    )
    marked = tuple(
        FSRTraceRow(r.step, r.term_label, r.validation_score, r.fits_evaluated,
                    selected=r.step > 0 and r.step <= best_step)
        for r in trace
    )
    return FSRResult(model, marked)
