"""Energy budget allocation over probable future segments.

Maximise  sum p_s d_s e_s x_s
s.t.      sum p_s e_s x_s <= E_av,  0 <= x_s <= 1

Objective and constraint share the weight p_s e_s, so this is a continuous
knapsack whose value-per-cost ratio is the pollution level d_s. Filling
segments greedily by d_s is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class SegmentEstimate:
    segment: str
    probability: float  # p_s
    expected_energy: float  # e_s, Wh at full assistance
    pollution: float  # d_s

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"{self.segment}: probability {self.probability} outside [0, 1]")
        if not self.expected_energy > 0.0:
            raise ValueError(f"{self.segment}: expected energy must be > 0")
        if not self.pollution >= 0.0:
            raise ValueError(f"{self.segment}: pollution must be >= 0")

    @property
    def weight(self) -> float:
        """Expected energy cost of full assistance, p_s * e_s."""
        return self.probability * self.expected_energy


@dataclass(frozen=True)
class AssistPlan:
    fractions: Mapping[str, float]
    objective_value: float
    spent_expected_energy: float


def _check_inputs(estimates: Sequence[SegmentEstimate], budget: float):
    if not estimates:
        raise ValueError("at least one segment estimate is required")
    if budget < 0 or math.isnan(budget):
        raise ValueError(f"budget must be >= 0, got {budget}")
    seen = set()
    for est in estimates:
        if est.segment in seen:
            raise ValueError(f"duplicate segment {est.segment!r}")
        seen.add(est.segment)


def plan_objective(estimates: Sequence[SegmentEstimate], fractions: Mapping[str, float]) -> float:
    total = 0.0
    for est in estimates:
        if est.segment not in fractions:
            raise KeyError(f"no assistance fraction for segment {est.segment!r}")
        total += est.weight * est.pollution * fractions[est.segment]
    return total


def plan_spending(estimates: Sequence[SegmentEstimate], fractions: Mapping[str, float]) -> float:
    return sum(est.weight * fractions[est.segment] for est in estimates)


def _make_plan(estimates, fractions) -> AssistPlan:
    return AssistPlan(
        fractions=fractions,
        objective_value=plan_objective(estimates, fractions),
        spent_expected_energy=plan_spending(estimates, fractions),
    )


def solve_assist_plan(estimates: Sequence[SegmentEstimate], budget: float) -> AssistPlan:
    """Optimal assistance fractions by greedy filling in decreasing pollution.

    Zero-cost segments (p_s = 0) get x_s = 1. Pollution ties are broken by
    segment id.
    """
    _check_inputs(estimates, budget)
    fractions = {}
    remaining = float(budget)
    for est in sorted(estimates, key=lambda e: (-e.pollution, e.segment)):
        cost = est.weight
        if cost == 0.0:
            fractions[est.segment] = 1.0
        elif cost <= remaining:
            fractions[est.segment] = 1.0
            remaining -= cost
        elif remaining > 0.0:
            fractions[est.segment] = min(1.0, remaining / cost)
            remaining = 0.0
        else:
            fractions[est.segment] = 0.0
    # report in input order
    fractions = {est.segment: fractions[est.segment] for est in estimates}
    return _make_plan(estimates, fractions)


def oracle_solve(
    estimates: Sequence[SegmentEstimate], budget: float, resolution: int = 100
) -> AssistPlan:
    """Best feasible point of the grid x_s in {0, 1/res, ..., 1}.

    Exhaustive over the first n-1 coordinates. The objective has nonnegative
    coefficients, so the last coordinate is always best at the largest grid
    value the leftover budget affords; taking it directly is equivalent to
    enumerating it. Test-only; limited to 5 segments.
    """
    _check_inputs(estimates, budget)
    if len(estimates) > 5:
        raise ValueError("oracle_solve handles at most 5 segments")
    if not 1 <= resolution <= 100:
        raise ValueError("resolution must be in [1, 100]")

    grid = np.arange(resolution + 1) / resolution
    w = np.array([e.weight for e in estimates])
    v = np.array([e.weight * e.pollution for e in estimates])
    n = len(estimates)

    if n > 2:
        mesh = np.meshgrid(*([grid] * (n - 2)), indexing="ij")
        tail_cols = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        tail_cols = np.zeros((1, 0))

    best_value = -math.inf
    best_point = None
    # outer loop over the first coordinate keeps memory bounded
    for x0 in (grid if n > 1 else [None]):
        if n == 1:
            lead = np.zeros((1, 0))
        else:
            lead = np.column_stack([np.full(len(tail_cols), x0), tail_cols])
        spent = lead @ w[:-1]
        value = lead @ v[:-1]
        leftover = budget - spent
        if w[-1] == 0.0:
            x_last = np.ones_like(leftover)
        else:
            steps = np.floor(np.clip(leftover, 0.0, w[-1]) / w[-1] * resolution + 1e-9)
            x_last = np.clip(steps, 0, resolution) / resolution
        total = np.where(leftover >= -FEASIBILITY_TOL, value + v[-1] * x_last, -math.inf)
        k = int(np.argmax(total))
        if total[k] > best_value:
            best_value = float(total[k])
            best_point = np.append(lead[k], x_last[k])
    fractions = {e.segment: float(x) for e, x in zip(estimates, best_point)}
    return _make_plan(estimates, fractions)


def parse_estimates(lines) -> list:
    """Rows of ``id, p, e, d``. Comma or whitespace separated; ``#`` comments;
    an optional header row whose first field is ``id`` or ``segment``."""
    rows = []
    for lineno, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        fields = [f for f in text.replace(",", " ").split()]
        if fields[0].lower() in ("id", "segment") and not rows:
            continue
        if len(fields) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields (id, p, e, d), got {len(fields)}")
        try:
            p, e, d = (float(x) for x in fields[1:])
            rows.append(SegmentEstimate(fields[0], p, e, d))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return rows


def load_estimates(path) -> list:
    with open(Path(path), encoding="utf-8") as fh:
        return parse_estimates(fh)
