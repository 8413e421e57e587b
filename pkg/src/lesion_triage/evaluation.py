"""Validation-set evaluation: run the pipeline per image, log, and score.

The per-image prediction log (CSV: image_id,label,initial_pred,refined_pred,
confidence) is the single source the scoring path consumes, so logged runs
can be re-scored offline and the two paths can be cross-checked.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence

from .classification import ClsModel
from .errors import PipelineStageError, UnlabeledRecordError
from .imaging import load_rgb
from .manifest import Dataset, DiseaseClass
from .metrics import MetricRow, overall_accuracy, score_predictions
from .pipeline import refine_and_classify
from .segmentation import SegModel

Mode = Literal["initial", "refined"]

LOG_FIELDS = ("image_id", "label", "initial_pred", "refined_pred", "confidence")


@dataclass(frozen=True)
class PredictionLogEntry:
    image_id: str
    label: DiseaseClass
    initial_pred: DiseaseClass
    refined_pred: DiseaseClass
    confidence: float


@dataclass(frozen=True)
class EvaluationReport:
    rows: list[MetricRow]
    overall: float
    log: list[PredictionLogEntry]
    mode: str


def write_prediction_log(entries: Sequence[PredictionLogEntry], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_FIELDS)
        for e in entries:
            writer.writerow([
                e.image_id, e.label.value, e.initial_pred.value,
                e.refined_pred.value, f"{e.confidence:.6f}",
            ])


def read_prediction_log(path: str | Path) -> list[PredictionLogEntry]:
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            entries.append(PredictionLogEntry(
                image_id=row["image_id"],
                label=DiseaseClass(row["label"]),
                initial_pred=DiseaseClass(row["initial_pred"]),
                refined_pred=DiseaseClass(row["refined_pred"]),
                confidence=float(row["confidence"]),
            ))
    return entries


def score_log(
    entries: Sequence[PredictionLogEntry],
    mode: Mode = "refined",
    ci_level: float = 0.95,
) -> tuple[list[MetricRow], float]:
    """Score a prediction log: per-class rows plus overall accuracy (mean F1)."""
    labels = [e.label for e in entries]
    preds = [e.refined_pred if mode == "refined" else e.initial_pred for e in entries]
    rows = score_predictions(preds, labels, ci_level)
    return rows, overall_accuracy(rows)


def evaluate(
    seg: SegModel,
    cls: ClsModel,
    validation: Dataset,
    mode: Mode = "refined",
    images_root: str | Path = ".",
    log_path: Optional[str | Path] = None,
    ci_level: float = 0.95,
) -> EvaluationReport:
    """Run the full pipeline over every validation record and score it.

    Records are processed in id order so aggregation is deterministic
    regardless of manifest ordering or any internal parallelism.
    """
    entries: list[PredictionLogEntry] = []
    for rec in sorted(validation.records, key=lambda r: r.id):
        if rec.label is None:
            raise UnlabeledRecordError(rec.id)
        image = load_rgb(Path(images_root) / rec.path)
        try:
            result = refine_and_classify(seg, cls, image)
        except PipelineStageError as exc:
            raise PipelineStageError(f"{exc.stage}[{rec.id}]", exc.cause) from exc
        chosen = result.refined if mode == "refined" else result.initial
        entries.append(PredictionLogEntry(
            image_id=rec.id,
            label=rec.label,
            initial_pred=result.initial.predicted,
            refined_pred=result.refined.predicted,
            confidence=chosen.probs[chosen.predicted],
        ))
    if log_path is not None:
        write_prediction_log(entries, log_path)
    rows, overall = score_log(entries, mode, ci_level)
    return EvaluationReport(rows=rows, overall=overall, log=entries, mode=mode)
