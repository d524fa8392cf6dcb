"""Independent brute-force oracles used by the unit and acceptance tests.

These deliberately re-derive expected values from first principles (loops,
exact fractions, pair counting) and never call into the package's own
implementations of the quantities they check.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def tally_oracle(probs: Sequence[float], eps: float) -> tuple[int, int]:
    tb = 0
    pn = 0
    for p in probs:
        if p > eps:
            tb += 1
        if (1.0 - p) > eps:
            pn += 1
    return tb, pn


def confidence_oracle(probs: Sequence[float], eps: float) -> float:
    tb, pn = tally_oracle(probs, eps)
    if tb + pn == 0:
        return 0.0
    return abs(tb - pn) / (tb + pn)


def vote_oracle(probs: Sequence[float], eps: float) -> str:
    tb, pn = tally_oracle(probs, eps)
    if tb > pn:
        return "TB"
    if pn > tb:
        return "P"
    return "undetermined"


def quartile_oracle(sorted_values: Sequence[float], q: float) -> float:
    """Linear interpolation between order statistics, from the definition."""
    n = len(sorted_values)
    pos = (n - 1) * q
    lo = int(pos)
    frac = pos - lo
    if lo + 1 < n:
        return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo])
    return float(sorted_values[lo])


def boxplot_outlier_values_oracle(values: Sequence[float]) -> set[float]:
    """Values outside the whiskers, computed with explicit index arithmetic."""
    ordered = sorted(values)
    q1 = quartile_oracle(ordered, 0.25)
    q3 = quartile_oracle(ordered, 0.75)
    iqr = q3 - q1
    lo = q1 - 1.5 * iqr
    hi = q3 + 1.5 * iqr
    return {v for v in values if v < lo or v > hi}


def metrics_oracle(tp: int, fp: int, fn: int, tn: int) -> tuple[Fraction, Fraction, Fraction, Fraction]:
    """Accuracy, precision, recall, F-score as exact fractions (0 when the
    denominator vanishes)."""
    n = tp + fp + fn + tn
    accuracy = Fraction(tp + tn, n)
    precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    if precision + recall:
        f_score = 2 * precision * recall / (precision + recall)
    else:
        f_score = Fraction(0)
    return accuracy, precision, recall, f_score


def auc_pair_oracle(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney statistic: correctly ordered positive/negative pairs,
    ties counted one half."""
    positives = [s for s, l in zip(scores, labels) if l == 1]
    negatives = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in positives:
        for q in negatives:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(positives) * len(negatives))
