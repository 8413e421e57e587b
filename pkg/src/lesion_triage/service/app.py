"""HTTP service: scan submission, results with education, review, analytics.

Endpoints (JSON unless noted):
  POST /v1/scans                      multipart image + questionnaire JSON
  GET  /v1/scans/{id}                 status; result + education when classified
  GET  /v1/scans/{id}/saliency.png    saliency overlay (PNG)
  GET  /v1/analytics/summary          ?from=&to= aggregate table
  GET  /v1/education/{class}          education entry
  POST /v1/review/{id}                expert verdict (bearer token)
  GET  /v1/review/queue               unverified augmented records (bearer token)
  GET  /v1/review/{id}/image.png      composited image (bearer token)
  GET  /v1/review/{id}/base.png       base image (bearer token)

Classification runs asynchronously: uploads return 202 immediately and
clients poll the scan resource. Uploaded bytes are stored content-addressed,
so duplicate uploads are logged as submissions but stored once.
"""

from __future__ import annotations

import hashlib
import json
import os
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from fastapi import Depends, FastAPI, File, Form, Header, Query, Response, UploadFile
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field, ValidationError, field_validator

from ..errors import (
    AlreadyReviewedError,
    NotAugmentedError,
    NotFoundError,
    UndecodableImageError,
)
from ..imaging import decode_rgb
from ..manifest import DiseaseClass, load_manifest, record_to_obj
from .analytics import InvalidRangeError, summarize
from .education import EducationLibrary
from .store import Store
from .worker import InferenceWorker

DEFAULT_MAX_UPLOAD_BYTES = 5 * 1024 * 1024


@dataclass
class ServiceConfig:
    model_dir: Path
    store_path: Path
    images_root: Path = Path(".")
    media_dir: Optional[Path] = None
    education_path: Optional[Path] = None
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES
    review_token: str = ""
    manifest_path: Optional[Path] = None
    webui_dir: Optional[Path] = None

    @classmethod
    def from_env(cls) -> "ServiceConfig":
        return cls(
            model_dir=Path(os.environ["LT_MODEL_DIR"]),
            store_path=Path(os.environ["LT_STORE_PATH"]),
            images_root=Path(os.environ.get("LT_IMAGES_ROOT", ".")),
            education_path=(
                Path(os.environ["LT_EDUCATION_PATH"])
                if "LT_EDUCATION_PATH" in os.environ else None
            ),
            max_upload_bytes=int(
                os.environ.get("LT_MAX_UPLOAD_BYTES", DEFAULT_MAX_UPLOAD_BYTES)
            ),
            review_token=os.environ.get("LT_REVIEW_TOKEN", ""),
            manifest_path=(
                Path(os.environ["LT_MANIFEST_PATH"])
                if "LT_MANIFEST_PATH" in os.environ else None
            ),
            webui_dir=(
                Path(os.environ["LT_WEBUI_DIR"])
                if "LT_WEBUI_DIR" in os.environ else None
            ),
        )

    @property
    def resolved_media_dir(self) -> Path:
        return self.media_dir or self.store_path.parent / "media"


class Questionnaire(BaseModel):
    age_band: Literal["18-30", "31-50", "over50"]
    country: str = Field(pattern=r"^[A-Z]{2}$")
    symptoms: list[
        Literal["penile_pain", "penile_discharge", "pain_burning_urination", "none_other"]
    ] = Field(min_length=1)
    last_contact: Literal["under1mo", "1to3mo", "over3mo", "never"]

    @field_validator("symptoms")
    @classmethod
    def _unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("symptoms must not repeat")
        return v


class Verdict(BaseModel):
    verdict: Literal["verified", "rejected"]
    reviewer: str = Field(min_length=1)
    note: str = ""


def _error(status: int, error: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": error, "message": message, **extra})


def create_app(config: ServiceConfig) -> FastAPI:
    store = Store(config.store_path)
    education = EducationLibrary(config.education_path)
    if config.manifest_path is not None:
        store.import_manifest(load_manifest(config.manifest_path))
    worker = InferenceWorker(store, config.model_dir, config.resolved_media_dir)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        worker.start()
        try:
            yield
        finally:
            worker.stop()
            store.close()

    app = FastAPI(title="lesion-triage", version="0.1.0", lifespan=lifespan)

    uploads_dir = config.resolved_media_dir / "uploads"
    uploads_dir.mkdir(parents=True, exist_ok=True)

    app.state.store = store
    app.state.education = education
    app.state.worker = worker
    app.state.config = config

    def require_review_token(authorization: str = Header(default="")) -> None:
        expected = f"Bearer {config.review_token}"
        if not config.review_token or authorization != expected:
            raise PermissionError("invalid or missing review token")

    @app.exception_handler(PermissionError)
    async def _perm(request, exc):
        return _error(401, "Unauthorized", str(exc))

    @app.exception_handler(NotFoundError)
    async def _missing(request, exc):
        return _error(404, "NotFound", str(exc))

    @app.exception_handler(AlreadyReviewedError)
    async def _conflict(request, exc):
        return _error(409, "AlreadyReviewed", str(exc))

    @app.exception_handler(NotAugmentedError)
    async def _not_aug(request, exc):
        return _error(400, "NotAugmented", str(exc))

    @app.exception_handler(InvalidRangeError)
    async def _bad_range(request, exc):
        return _error(400, "InvalidRange", str(exc))

    # --- scans ---------------------------------------------------------

    @app.post("/v1/scans", status_code=202)
    async def submit_scan(
        image: UploadFile = File(...),
        questionnaire: str = Form(...),
    ):
        data = await image.read()
        if len(data) > config.max_upload_bytes:
            return _error(
                413, "PayloadTooLarge",
                f"upload exceeds {config.max_upload_bytes} bytes",
            )
        try:
            decode_rgb(data)
        except UndecodableImageError as exc:
            return _error(400, "UndecodableImage", str(exc))
        try:
            parsed = Questionnaire.model_validate_json(questionnaire)
        except ValidationError as exc:
            first = exc.errors()[0]
            field_name = ".".join(str(p) for p in first["loc"]) or "questionnaire"
            return _error(
                400, "InvalidQuestionnaire", first["msg"], field=field_name,
            )

        sha = hashlib.sha256(data).hexdigest()
        image_path = uploads_dir / f"{sha}.img"
        if not image_path.exists():
            image_path.write_bytes(data)
        submission_id = uuid.uuid4().hex
        row = store.add_submission(
            submission_id, sha, str(image_path), parsed.model_dump()
        )
        worker.submit(submission_id)
        return {"id": row.id, "status": row.status, "created_at": row.created_at}

    @app.get("/v1/scans/{submission_id}")
    def get_scan(submission_id: str):
        row = store.get_submission(submission_id)
        payload = {
            "id": row.id,
            "status": row.status,
            "created_at": row.created_at,
            "updated_at": row.updated_at,
            "questionnaire": row.questionnaire,
        }
        if row.status == "classified" and row.result is not None:
            cls = DiseaseClass(row.result["final_class"])
            payload["result"] = {
                **row.result,
                "display_name": cls.display_name,
                "saliency_url": f"/v1/scans/{row.id}/saliency.png",
            }
            payload["education"] = education.entry(cls).to_obj()
        if row.status == "failed":
            payload["error"] = row.error
        return payload

    @app.get("/v1/scans/{submission_id}/saliency.png")
    def get_saliency(submission_id: str):
        row = store.get_submission(submission_id)
        if row.saliency_path is None or not Path(row.saliency_path).exists():
            raise NotFoundError(f"no saliency overlay for {submission_id!r}")
        return FileResponse(row.saliency_path, media_type="image/png")

    # --- analytics ------------------------------------------------------

    @app.get("/v1/analytics/summary")
    def analytics_summary(
        start: str = Query(alias="from"),
        end: str = Query(alias="to"),
    ):
        rows = store.submissions_between("0000", "9999")
        submissions = [
            {"created_at": r.created_at, "questionnaire": r.questionnaire} for r in rows
        ]
        return summarize(submissions, start, end)

    # --- education -------------------------------------------------------

    @app.get("/v1/education/{class_token}")
    def education_content(class_token: str):
        try:
            cls = DiseaseClass(class_token)
        except ValueError:
            raise NotFoundError(f"unknown class {class_token!r}")
        return education.entry(cls).to_obj()

    # --- review -----------------------------------------------------------

    @app.post("/v1/review/{record_id}", dependencies=[Depends(require_review_token)])
    def post_verdict(record_id: str, verdict: Verdict):
        updated = store.review_verdict(
            record_id, verdict.verdict, verdict.reviewer, verdict.note
        )
        return {
            "record": record_to_obj(updated),
            "training_eligible": updated.training_eligible,
        }

    @app.get("/v1/review/queue", dependencies=[Depends(require_review_token)])
    def review_queue(page: int = 1, per_page: int = 20):
        items, total = store.review_queue(page, per_page)
        payload = []
        for rec in items:
            entry = {
                "record_id": rec.id,
                "label": rec.label.value if rec.label else "unlabeled",
                "display_name": rec.label.display_name if rec.label else "Unlabeled",
                "base_id": rec.base_id,
                "recipe_id": rec.recipe_id,
                "image_url": f"/v1/review/{rec.id}/image.png",
                "base_image_url": f"/v1/review/{rec.id}/base.png",
            }
            img_path = config.images_root / rec.path
            recipe_path = img_path.with_name(img_path.stem + ".recipe.json")
            if recipe_path.exists():
                entry["recipe"] = json.loads(recipe_path.read_text(encoding="utf-8"))
            payload.append(entry)
        return {"items": payload, "total": total, "page": page, "per_page": per_page}

    def _serve_record_image(record_id: str, use_base: bool) -> Response:
        rec = store.get_record(record_id)
        if use_base:
            if rec.base_id is None:
                raise NotFoundError(f"record {record_id!r} has no base image")
            rec = store.get_record(rec.base_id)
        path = config.images_root / rec.path
        if not path.exists():
            raise NotFoundError(f"image file missing for {rec.id!r}")
        return FileResponse(path, media_type="image/png")

    @app.get("/v1/review/{record_id}/image.png", dependencies=[Depends(require_review_token)])
    def review_image(record_id: str):
        return _serve_record_image(record_id, use_base=False)

    @app.get("/v1/review/{record_id}/base.png", dependencies=[Depends(require_review_token)])
    def review_base_image(record_id: str):
        return _serve_record_image(record_id, use_base=True)

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok", "submissions": store.count_submissions()}

    if config.webui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.webui_dir, html=True), name="webui")

    return app
