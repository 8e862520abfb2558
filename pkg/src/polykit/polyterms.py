"""Polynomial basis enumeration and design-matrix expansion.

A term is a monomial over design-matrix columns. Indicator columns are
degenerate under powers (0/1 values are idempotent) and under products
within one indicator block (at most one indicator per source column is 1
in any row), so neither squared indicators nor within-group products are
ever generated. Monomials touching two or more distinct columns are
additionally capped at ``max_interact_degree`` total degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .dataset import DummyGroups
from .errors import MemoryBudgetError

#: Default cap on rows x columns of an expanded matrix.
DEFAULT_CELL_BUDGET = 200_000_000

#: Term-count bounds saturate at the largest signed 64-bit integer.
BOUND_SATURATION = 2**63 - 1


@dataclass(frozen=True)
class Monomial:
    """Product of design columns raised to positive integer exponents.

    ``powers`` is a tuple of (column index, exponent) pairs, sorted by
    column, with every exponent >= 1.
    """

    powers: tuple[tuple[int, int], ...]

    def __post_init__(self):
        cols = [c for c, _ in self.powers]
        if not self.powers:
            raise ValueError("a monomial involves at least one column")
        if cols != sorted(set(cols)):
            raise ValueError("monomial columns must be sorted and distinct")
        if any(e < 1 for _, e in self.powers):
            raise ValueError("monomial exponents must be >= 1")

    @classmethod
    def from_dict(cls, exponents: dict[int, int]) -> "Monomial":
        return cls(tuple(sorted(exponents.items())))

    @property
    def degree(self) -> int:
        return sum(e for _, e in self.powers)

    @property
    def columns(self) -> tuple[int, ...]:
        return tuple(c for c, _ in self.powers)

    def sort_key(self, width: int) -> tuple:
        """Graded-lexicographic key: degree first, then columns left-to-right
        with higher exponents ordered earlier (so x0^2 precedes x0*x1)."""
        dense = [0] * width
        for c, e in self.powers:
            dense[c] = e
        return (self.degree, tuple(-e for e in dense))

    def evaluate(self, design: np.ndarray) -> np.ndarray:
        col = np.ones(design.shape[0])
        for c, e in self.powers:
            col = col * design[:, c] ** e
        return col

    def label(self, names: tuple[str, ...] | None = None) -> str:
        parts = []
        for c, e in self.powers:
            name = names[c] if names else f"x{c}"
            parts.append(name if e == 1 else f"{name}^{e}")
        return "*".join(parts)

    def to_text(self) -> str:
        return " ".join(f"{c}^{e}" for c, e in self.powers)

    @classmethod
    def from_text(cls, line: str) -> "Monomial":
        powers = []
        for factor in line.split():
            col, _, exp = factor.partition("^")
            powers.append((int(col), int(exp)))
        return cls(tuple(sorted(powers)))


@dataclass(frozen=True)
class PolySpec:
    """Expansion degree plus the total-degree cap on interaction terms."""

    degree: int
    max_interact_degree: int | None = None

    def __post_init__(self):
        if self.max_interact_degree is None:
            object.__setattr__(self, "max_interact_degree", self.degree)
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if not 1 <= self.max_interact_degree <= self.degree:
            raise ValueError("need 1 <= max_interact_degree <= degree")


@dataclass(frozen=True)
class TermSet:
    """Ordered, duplicate-free monomial list plus its provenance.

    Order is graded lexicographic, which makes the term list for degree d a
    prefix of the list for degree d+1 under the same interaction cap.
    """

    terms: tuple[Monomial, ...]
    width: int
    groups: DummyGroups
    spec: PolySpec

    def __post_init__(self):
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("duplicate monomials in term set")
        dummy_group = self.groups.group_of()
        for mono in self.terms:
            touched: set[int] = set()
            for c, e in mono.powers:
                if not 0 <= c < self.width:
                    raise ValueError(f"column {c} outside design width {self.width}")
                g = dummy_group.get(c)
                if g is None:
                    continue
                if e > 1:
                    raise ValueError(f"indicator column {c} carries exponent {e}")
                if g in touched:
                    raise ValueError(f"two indicators of group {g} in one monomial")
                touched.add(g)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[Monomial]:
        return iter(self.terms)

    def __getitem__(self, i: int) -> Monomial:
        return self.terms[i]

    def labels(self, names: tuple[str, ...] | None = None) -> tuple[str, ...]:
        if names is None and self.groups.column_names:
            names = self.groups.column_names
        return tuple(m.label(names) for m in self.terms)

    def linear_indices(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.terms) if m.degree == 1)

    def to_text(self) -> str:
        """One monomial per line of space-separated ``col^exp`` factors,
        preceded by a provenance header."""
        lines = [
            f"# termset v1 width={self.width} degree={self.spec.degree}"
            f" max_interact={self.spec.max_interact_degree}"
        ]
        lines.extend(m.to_text() for m in self.terms)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, groups: DummyGroups | None = None) -> "TermSet":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# termset v1"):
            raise ValueError("not a termset container (missing '# termset v1' header)")
        meta = dict(kv.split("=") for kv in lines[0].split()[3:])
        width = int(meta["width"])
        spec = PolySpec(int(meta["degree"]), int(meta["max_interact"]))
        terms = tuple(Monomial.from_text(ln) for ln in lines[1:])
        if groups is None:
            groups = DummyGroups.all_numeric(width)
        return cls(terms, width, groups, spec)


def enumerate_terms(width: int, groups: DummyGroups, spec: PolySpec) -> TermSet:
    """Every admissible monomial of total degree 1..spec.degree.

    Admissible means: indicator exponents are at most 1, no two indicators
    from the same group co-occur, and any monomial with >= 2 distinct
    columns has total degree <= spec.max_interact_degree. The intercept is
    not a term; fitters add it themselves.
    """
    if width < 1:
        raise ValueError("design width must be >= 1")
    dummy_group = groups.group_of()
    found: list[Monomial] = []
    chosen: list[tuple[int, int]] = []

    def walk(col: int, total: int, groups_used: frozenset[int]) -> None:
        if total >= 1:
            found.append(Monomial(tuple(chosen)))
        if col == width or total == spec.degree:
            return
        for nxt in range(col, width):
            g = dummy_group.get(nxt)
            if g is not None and g in groups_used:
                continue
            max_e = 1 if g is not None else spec.degree - total
            for e in range(1, max_e + 1):
                new_total = total + e
                limit = spec.degree if not chosen else spec.max_interact_degree
                if new_total > limit:
                    break
                chosen.append((nxt, e))
                walk(nxt + 1, new_total, groups_used if g is None else groups_used | {g})
                chosen.pop()

    walk(0, 0, frozenset())
    found.sort(key=lambda m: m.sort_key(width))
    return TermSet(tuple(found), width, groups, spec)


class TermCountBound(NamedTuple):
    bound: int
    saturated: bool


def count_terms_bound(p: int, d: int) -> TermCountBound:
    """Upper bound on the all-numeric term count from the recurrence
    B(1) = p, B(k+1) = (p+1) B(k).

    Saturates at 2**63 - 1 with ``saturated=True`` instead of overflowing.
    """
    if p < 1 or d < 1:
        raise ValueError("need p >= 1 and d >= 1")
    bound = p
    for _ in range(d - 1):
        bound *= p + 1
        if bound > BOUND_SATURATION:
            return TermCountBound(BOUND_SATURATION, True)
    return TermCountBound(bound, False)


def exact_numeric_term_count(p: int, d: int) -> int:
    """All-numeric term count in closed form: C(p+d, d) - 1."""
    return math.comb(p + d, d) - 1


def expand(
    design: np.ndarray,
    terms: TermSet,
    *,
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> np.ndarray:
    """Evaluate every term on every row: column j of the result is term j.

    Raises :class:`MemoryBudgetError` when rows x terms would exceed
    ``cell_budget``; shrink via PCA or :func:`drop_random_columns` first.
    """
    design = np.asarray(design, dtype=np.float64)
    if design.ndim != 2 or design.shape[1] != terms.width:
        raise ValueError(
            f"design width {design.shape[1] if design.ndim == 2 else '?'}"
            f" does not match term-set width {terms.width}"
        )
    n = design.shape[0]
    cells = n * len(terms)
    if cells > cell_budget:
        raise MemoryBudgetError(
            f"expansion needs {cells} cells (> budget {cell_budget});"
            " reduce dimension with PCA or drop random columns"
        )
    out = np.empty((n, len(terms)))
    power_cache: dict[tuple[int, int], np.ndarray] = {}
    for j, mono in enumerate(terms):
        col = np.ones(n)
        for c, e in mono.powers:
            key = (c, e)
            if key not in power_cache:
                power_cache[key] = design[:, c] ** e
            col = col * power_cache[key]
        out[:, j] = col
    return out


def drop_random_columns(terms: TermSet, keep_fraction: float, seed: int) -> TermSet:
    """Thin a term set to ceil(keep_fraction * size) monomials.

    All degree-1 monomials are always retained (so the result still nests
    the linear model); the remaining slots are a uniform sample of the
    higher-degree terms. Original (graded) order is preserved.
    """
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must be in (0, 1]")
    total = len(terms)
    target = math.ceil(keep_fraction * total)
    linear = set(terms.linear_indices())
    higher = [i for i in range(total) if i not in linear]
    n_extra = max(0, target - len(linear))
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(higher), size=min(n_extra, len(higher)), replace=False)
    keep = linear | {higher[i] for i in picked}
    kept = tuple(terms[i] for i in sorted(keep))
    return TermSet(kept, terms.width, terms.groups, terms.spec)
