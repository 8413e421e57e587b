"""Background classification worker.

One worker thread owns the models (immutable after load) and drains a job
queue of submission ids: load image, run the refinement pipeline, persist the
saliency overlay, and mark the submission classified (or failed). Pending
submissions found at startup are re-enqueued, so a restart never strands a
scan.
"""

from __future__ import annotations

import logging
import queue
import threading
from pathlib import Path

from ..classification import ClsModel, load_classifier
from ..imaging import load_rgb, save_png
from ..pipeline import refine_and_classify, saliency_overlay
from ..segmentation import SegModel, load_segmenter
from .store import Store

logger = logging.getLogger(__name__)

_STOP = object()


def result_payload(result) -> dict:
    return {
        "final_class": result.final_class.value,
        "confidence": result.refined.probs[result.final_class],
        "initial_class": result.initial.predicted.value,
        "initial_confidence": result.initial.probs[result.initial.predicted],
        "probs": {cls.value: p for cls, p in result.refined.probs.items()},
        "bbox": [result.bbox.x0, result.bbox.y0, result.bbox.x1, result.bbox.y1],
        "stages": [{"name": s.name, "seconds": s.seconds} for s in result.stages],
    }


class InferenceWorker:
    def __init__(self, store: Store, model_dir: str | Path, media_dir: str | Path):
        self.store = store
        self.media_dir = Path(media_dir)
        self.media_dir.mkdir(parents=True, exist_ok=True)
        self.seg: SegModel = load_segmenter(model_dir)
        self.cls: ClsModel = load_classifier(model_dir)
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._run, name="inference-worker", daemon=True)

    def start(self) -> None:
        for submission_id in self.store.pending_submission_ids():
            self._queue.put(submission_id)
        self._thread.start()

    def stop(self) -> None:
        self._queue.put(_STOP)
        self._thread.join(timeout=30)

    def submit(self, submission_id: str) -> None:
        self._queue.put(submission_id)

    def _run(self) -> None:
        while True:
            item = self._queue.get()
            if item is _STOP:
                return
            try:
                self._process(item)
            except Exception:
                logger.exception("submission %s failed", item)
                try:
                    self.store.set_failed(item, "internal error during classification")
                except Exception:
                    pass

    def _process(self, submission_id: str) -> None:
        submission = self.store.get_submission(submission_id)
        image = load_rgb(submission.image_path)
        try:
            result = refine_and_classify(self.seg, self.cls, image)
        except Exception as exc:
            self.store.set_failed(submission_id, str(exc))
            return
        overlay = saliency_overlay(image, result.saliency)
        overlay_path = self.media_dir / f"{submission_id}.saliency.png"
        save_png(overlay, overlay_path)
        self.store.set_classified(submission_id, result_payload(result), str(overlay_path))
