"""One-vs-rest diagnostic metrics with exact binomial confidence intervals.

Each class is scored against all others, yielding TP/FP/TN/FN counts and the
derived recall (sensitivity), precision, specificity, and F1. Interval
estimates use the exact Clopper-Pearson method throughout; it is conservative
(coverage at least nominal) and has no sample-size requirements. Overall
accuracy is defined as the unweighted mean of per-class F1 scores.

Point estimates are kept at full precision internally; rounding (3 decimals,
half-up) happens only in ``render_report``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Optional, Sequence

from scipy.stats import beta as _beta

from .errors import (
    EmptyInputError,
    EmptyRowsError,
    LengthMismatchError,
    UndefinedMetricError,
)
from .manifest import CLASS_ORDER, DiseaseClass


@dataclass(frozen=True)
class ConfusionCounts:
    cls: DiseaseClass
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricRow:
    cls: DiseaseClass
    n_images: int
    counts: ConfusionCounts
    recall: Optional[float]
    precision: Optional[float]
    specificity: Optional[float]
    f1: Optional[float]
    recall_ci: Optional[tuple[float, float]]
    precision_ci: Optional[tuple[float, float]]
    specificity_ci: Optional[tuple[float, float]]
    ci_level: float = 0.95


def confusion_counts(
    predictions: Sequence[DiseaseClass],
    labels: Sequence[DiseaseClass],
    cls: DiseaseClass,
) -> ConfusionCounts:
    """One-vs-rest confusion counts for ``cls`` over paired prediction/label lists."""
    if len(predictions) != len(labels):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(labels)} labels"
        )
    if not predictions:
        raise EmptyInputError("empty prediction/label lists")
    tp = fp = tn = fn = 0
    for pred, label in zip(predictions, labels):
        if pred is cls and label is cls:
            tp += 1
        elif pred is cls:
            fp += 1
        elif label is cls:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(cls, tp, fp, tn, fn)


def exact_binomial_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson exact interval from beta-distribution quantiles.

    The lower bound is 0 when successes = 0 and the upper bound is 1 when
    successes = trials, by definition of the exact interval.
    """
    if trials < 1 or not 0 <= successes <= trials or not 0 < level < 1:
        raise ValueError(
            f"invalid arguments: successes={successes}, trials={trials}, level={level}"
        )
    alpha = 1.0 - level
    low = 0.0 if successes == 0 else float(
        _beta.ppf(alpha / 2, successes, trials - successes + 1)
    )
    high = 1.0 if successes == trials else float(
        _beta.ppf(1 - alpha / 2, successes + 1, trials - successes)
    )
    return low, high


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den > 0 else None


def compute_metrics(counts: ConfusionCounts, ci_level: float = 0.95) -> MetricRow:
    """Point estimates plus exact CIs; undefined metrics are None, never 0."""
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    specificity = _ratio(counts.tn, counts.tn + counts.fp)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricRow(
        cls=counts.cls,
        n_images=counts.tp + counts.fn,
        counts=counts,
        recall=recall,
        precision=precision,
        specificity=specificity,
        f1=f1,
        recall_ci=None if recall is None else exact_binomial_ci(counts.tp, counts.tp + counts.fn, ci_level),
        precision_ci=None if precision is None else exact_binomial_ci(counts.tp, counts.tp + counts.fp, ci_level),
        specificity_ci=None if specificity is None else exact_binomial_ci(counts.tn, counts.tn + counts.fp, ci_level),
        ci_level=ci_level,
    )


def overall_accuracy(rows: Sequence[MetricRow]) -> float:
    """Unweighted arithmetic mean of per-class F1 scores."""
    if not rows:
        raise EmptyRowsError("no metric rows")
    f1s = []
    for row in rows:
        if row.f1 is None:
            raise UndefinedMetricError(f"f1[{row.cls.value}]")
        f1s.append(row.f1)
    return sum(f1s) / len(f1s)


def score_predictions(
    predictions: Sequence[DiseaseClass],
    labels: Sequence[DiseaseClass],
    ci_level: float = 0.95,
) -> list[MetricRow]:
    """Per-class metric rows in canonical class order."""
    return [
        compute_metrics(confusion_counts(predictions, labels, cls), ci_level)
        for cls in CLASS_ORDER
    ]


def f1_discrepancy_note(
    rows: Sequence[MetricRow],
    reference_f1: Mapping[DiseaseClass, float],
    tolerance: float = 0.0005,
) -> Optional[str]:
    """Flag disagreement between computed F1 and an externally reported column.

    Published tables sometimes carry F1 values that cannot be recovered from
    their own count columns. When any class differs beyond ``tolerance`` the
    note lists both views and both overall means so reports never silently
    mix the two. Returns None when everything agrees.
    """
    diffs = []
    for row in rows:
        ref = reference_f1.get(row.cls)
        if ref is None or row.f1 is None:
            continue
        if abs(row.f1 - ref) > tolerance:
            diffs.append((row.cls, row.f1, ref))
    if not diffs:
        return None
    lines = [
        "F1 discrepancy: the reported F1 column disagrees with F1 recomputed "
        "from the count columns (2*TP / (2*TP + FP + FN)):"
    ]
    for cls, computed, ref in diffs:
        lines.append(
            f"  - {cls.display_name}: computed {_round3(computed)} vs reported {_round3(ref)}"
        )
    computed_mean = overall_accuracy(list(rows))
    ref_mean = sum(reference_f1.values()) / len(reference_f1)
    lines.append(
        f"  Overall accuracy (mean F1): computed {_round3(computed_mean)} vs "
        f"reported-column mean {_round3(ref_mean)}."
    )
    return "\n".join(lines)


# --- report rendering -----------------------------------------------------

REPORT_FORMATS = ("markdown", "json", "csv")

_MD_HEADER = (
    "| Class | No. Images | True Positive | False Positive | True Negative | "
    "False Negative | Recall or Sensitivity (95% CI) | Precision (95% CI) | "
    "Specificity (95% CI) | F1-Score |"
)


def _round3(value: float) -> float:
    return float(Decimal(repr(value)).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def _fmt(value: Optional[float]) -> str:
    return "null" if value is None else f"{_round3(value):.3f}"


def _fmt_ci(point: Optional[float], ci: Optional[tuple[float, float]]) -> str:
    if point is None or ci is None:
        return "null"
    return f"{_fmt(point)} ({_fmt(ci[0])} - {_fmt(ci[1])})"


def _row_obj(row: MetricRow) -> dict:
    def r3(v):
        return None if v is None else _round3(v)

    return {
        "class": row.cls.value,
        "display_name": row.cls.display_name,
        "n_images": row.n_images,
        "tp": row.counts.tp,
        "fp": row.counts.fp,
        "tn": row.counts.tn,
        "fn": row.counts.fn,
        "recall": r3(row.recall),
        "recall_ci_low": None if row.recall_ci is None else r3(row.recall_ci[0]),
        "recall_ci_high": None if row.recall_ci is None else r3(row.recall_ci[1]),
        "precision": r3(row.precision),
        "precision_ci_low": None if row.precision_ci is None else r3(row.precision_ci[0]),
        "precision_ci_high": None if row.precision_ci is None else r3(row.precision_ci[1]),
        "specificity": r3(row.specificity),
        "specificity_ci_low": None if row.specificity_ci is None else r3(row.specificity_ci[0]),
        "specificity_ci_high": None if row.specificity_ci is None else r3(row.specificity_ci[1]),
        "f1": r3(row.f1),
    }


def render_report(
    rows: Sequence[MetricRow],
    overall: float,
    format: str = "markdown",
    note: Optional[str] = None,
) -> str:
    """Deterministic report in the table layout: counts, then metric (CI) columns."""
    if format not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {format!r}; expected one of {REPORT_FORMATS}")
    if format == "json":
        payload = {
            "rows": [_row_obj(r) for r in rows],
            "overall_accuracy": _round3(overall),
        }
        if note:
            payload["note"] = note
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if format == "csv":
        buf = io.StringIO()
        fields = list(_row_obj(rows[0]).keys()) if rows else ["class"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            obj = _row_obj(row)
            writer.writerow({k: ("" if v is None else v) for k, v in obj.items()})
        buf.write(f"# overall_accuracy,{_round3(overall):.3f}\n")
        return buf.getvalue()
    lines = [_MD_HEADER, "|" + "---|" * 10]
    for row in rows:
        lines.append(
            f"| {row.cls.display_name} | {row.n_images} | {row.counts.tp} | "
            f"{row.counts.fp} | {row.counts.tn} | {row.counts.fn} | "
            f"{_fmt_ci(row.recall, row.recall_ci)} | "
            f"{_fmt_ci(row.precision, row.precision_ci)} | "
            f"{_fmt_ci(row.specificity, row.specificity_ci)} | {_fmt(row.f1)} |"
        )
    lines.append("")
    lines.append(f"Overall accuracy (mean F1): {_fmt(overall)}")
    if note:
        lines.append("")
        lines.append(note)
    return "\n".join(lines) + "\n"
