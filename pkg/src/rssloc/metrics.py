"""Evaluation suite: optimal assignment, mean localization error, count-based
false-alarm / missed-detection rates, and the OSPA distance with cutoff g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

DEFAULT_OSPA_CUTOFF = 20.0


@dataclass
class Matching:
    pairs: list[tuple[int, int]]          # (pred index, true index)
    unmatched_pred: list[int]
    unmatched_true: list[int]


@dataclass
class ScenarioEval:
    m: int
    m_hat: int
    mle: float | None
    far: float
    mdr: float
    ospa: float

    def as_dict(self) -> dict:
        return {"m": self.m, "m_hat": self.m_hat, "mle": self.mle,
                "far": self.far, "mdr": self.mdr, "ospa": self.ospa}


@dataclass
class EvalReport:
    """Aggregate over scenarios; far/mdr carry both count conventions."""

    mle: float | None
    ospa: float | None
    far: float            # micro: summed excess counts over summed predictions
    mdr: float            # micro: summed misses over summed truths
    far_macro: float
    mdr_macro: float
    total_true: int
    total_pred: int
    per_scenario: list[ScenarioEval] = field(default_factory=list)


def _cost_matrix(pred, true, cutoff: float) -> np.ndarray:
    p = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    t = np.asarray(true, dtype=np.float64).reshape(-1, 2)
    d = np.hypot(p[:, None, 0] - t[None, :, 0], p[:, None, 1] - t[None, :, 1])
    return np.minimum(d, cutoff) ** 2


def optimal_assignment(pred, true, cutoff: float = math.inf) -> Matching:
    """Minimum total min(cutoff, d)^2 matching over min(|pred|, |true|) pairs.

    Among equal-cost optima the pair list that is lexicographically smallest
    (sorted by prediction index) wins, so results are reproducible and
    independent of solver internals.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    n_pred, n_true = len(pred), len(true)
    if n_pred == 0 or n_true == 0:
        return Matching([], list(range(n_pred)), list(range(n_true)))
    cost = _cost_matrix(pred, true, cutoff)

    def best(rows, cols) -> float:
        if not rows or not cols:
            return 0.0
        sub = cost[np.ix_(rows, cols)]
        r, c = linear_sum_assignment(sub)
        return float(sub[r, c].sum())

    target = best(list(range(n_pred)), list(range(n_true)))
    eps = 1e-9 + 1e-12 * abs(target)
    slots = min(n_pred, n_true)
    pairs: list[tuple[int, int]] = []
    free_true = list(range(n_true))
    budget = target
    for i in range(n_pred):
        if len(pairs) == slots:
            break
        rest_pred = list(range(i + 1, n_pred))
        chosen = None
        for j in free_true:
            rest_true = [t for t in free_true if t != j]
            if cost[i, j] + best(rest_pred, rest_true) <= budget + eps:
                chosen = j
                break
        if chosen is not None:
            pairs.append((i, chosen))
            free_true.remove(chosen)
            budget -= cost[i, chosen]
        # otherwise pred i is unmatched in the lexicographically best optimum
        # (only possible when n_pred > n_true)
    matched_pred = {i for i, _ in pairs}
    return Matching(pairs=pairs,
                    unmatched_pred=[i for i in range(n_pred) if i not in matched_pred],
                    unmatched_true=sorted(free_true))


def mle(pred, true) -> float | None:
    """Mean Euclidean distance over optimally matched pairs; None when no pairs."""
    matching = optimal_assignment(pred, true, cutoff=math.inf)
    if not matching.pairs:
        return None
    p = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    t = np.asarray(true, dtype=np.float64).reshape(-1, 2)
    dists = [math.hypot(*(p[i] - t[j])) for i, j in matching.pairs]
    return float(np.mean(dists))


def far_mdr(m_hat: int, m: int) -> tuple[float, float]:
    """Count-based rates: excess predictions over M-hat, misses over M."""
    if m < 1:
        raise ValueError("scenarios always contain at least one source")
    if m_hat < 0:
        raise ValueError("m_hat must be >= 0")
    far = max(0, m_hat - m) / m_hat if m_hat > 0 else 0.0
    mdr = max(0, m - m_hat) / m
    return far, mdr


def far_mdr_gated(pred, true, gate: float = DEFAULT_OSPA_CUTOFF) -> tuple[float, float]:
    """Stricter distance-gated variant: a prediction only counts as a hit when
    its optimally assigned truth lies within the gate. For sensitivity
    analysis; the count-based far_mdr is the reporting default.
    """
    if gate <= 0:
        raise ValueError("gate must be positive")
    m_hat, m = len(pred), len(true)
    if m < 1:
        raise ValueError("scenarios always contain at least one source")
    matching = optimal_assignment(pred, true, cutoff=gate)
    p = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    t = np.asarray(true, dtype=np.float64).reshape(-1, 2)
    hits = sum(1 for i, j in matching.pairs
               if math.hypot(*(p[i] - t[j])) <= gate)
    far = (m_hat - hits) / m_hat if m_hat > 0 else 0.0
    mdr = (m - hits) / m
    return far, mdr


def ospa(pred, true, g: float = DEFAULT_OSPA_CUTOFF) -> float:
    """Optimal subpattern assignment distance (p = 2, cutoff g).

    With n = max and m = min of the two cardinalities: sqrt of (optimal sum
    of min(g, d)^2 over m pairs + g^2 (n - m)) / n. Empty vs empty is 0,
    empty vs non-empty is g.
    """
    if g <= 0:
        raise ValueError("g must be positive")
    np_, nt = len(pred), len(true)
    if np_ == 0 and nt == 0:
        return 0.0
    if np_ == 0 or nt == 0:
        return float(g)
    n, m = max(np_, nt), min(np_, nt)
    cost = _cost_matrix(pred, true, g)
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum()) + g * g * (n - m)
    return math.sqrt(total / n)


def evaluate_scenario(pred, true, g: float = DEFAULT_OSPA_CUTOFF) -> ScenarioEval:
    far, mdr = far_mdr(len(pred), len(true))
    return ScenarioEval(m=len(true), m_hat=len(pred), mle=mle(pred, true),
                        far=far, mdr=mdr, ospa=ospa(pred, true, g))


def aggregate(reports: list[ScenarioEval]) -> EvalReport:
    """Combine per-scenario evaluations.

    mLE and OSPA average over scenarios where they are defined; far/mdr are
    reported micro-averaged (from summed counts) and macro-averaged (mean of
    the per-scenario rates) since unbalanced scenario sizes make them differ.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    mles = [r.mle for r in reports if r.mle is not None]
    ospas = [r.ospa for r in reports]
    total_true = sum(r.m for r in reports)
    total_pred = sum(r.m_hat for r in reports)
    excess = sum(max(0, r.m_hat - r.m) for r in reports)
    missed = sum(max(0, r.m - r.m_hat) for r in reports)
    return EvalReport(
        mle=float(np.mean(mles)) if mles else None,
        ospa=float(np.mean(ospas)) if ospas else None,
        far=excess / total_pred if total_pred > 0 else 0.0,
        mdr=missed / total_true if total_true > 0 else 0.0,
        far_macro=float(np.mean([r.far for r in reports])),
        mdr_macro=float(np.mean([r.mdr for r in reports])),
        total_true=total_true,
        total_pred=total_pred,
        per_scenario=list(reports))
