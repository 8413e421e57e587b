"""Dataset manifest model: records, JSONL persistence, and stratified splitting.

A manifest is a UTF-8 JSON Lines file, one image record per line. Records
carry a disease label, provenance, expert-verification state, and a
train/validation split assignment. Unknown keys are preserved verbatim on
round-trip so external tooling can annotate manifests without data loss.
"""

from __future__ import annotations

import json
import math
import os
import random
import tempfile
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Optional, Sequence

from .errors import (
    DuplicateIdError,
    EmptyClassError,
    InsufficientValidationPoolError,
    MalformedLineError,
    UnknownClassError,
    UnlabeledRecordError,
    UnverifiedAugmentedRecordError,
)


class DiseaseClass(Enum):
    """The five disease classes plus the non-diseased class.

    Declaration order is the canonical class order used everywhere a fixed
    ordering matters (probability vectors, argmax tie-breaks, report rows).
    """

    GENITAL_WARTS = "warts"
    HERPES_ERUPTION = "hsv"
    PENILE_CANCER = "cancer"
    PENILE_CANDIDIASIS = "candidiasis"
    SYPHILITIC_CHANCRE = "syphilis"
    NON_DISEASED = "none"

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]

    @classmethod
    def from_token(cls, token: str) -> "DiseaseClass":
        try:
            return cls(token)
        except ValueError:
            raise UnknownClassError(token) from None


_DISPLAY_NAMES = {
    DiseaseClass.GENITAL_WARTS: "Genital Warts",
    DiseaseClass.HERPES_ERUPTION: "Herpes Eruption",
    DiseaseClass.PENILE_CANCER: "Penile Cancer",
    DiseaseClass.PENILE_CANDIDIASIS: "Penile Candidiasis",
    DiseaseClass.SYPHILITIC_CHANCRE: "Syphilis",
    DiseaseClass.NON_DISEASED: "Non-Diseased",
}

CLASS_ORDER: tuple[DiseaseClass, ...] = tuple(DiseaseClass)
DISEASE_CLASSES: tuple[DiseaseClass, ...] = tuple(
    c for c in DiseaseClass if c is not DiseaseClass.NON_DISEASED
)

UNLABELED_TOKEN = "unlabeled"


class Source(Enum):
    CLINICIAN = "clinician"
    WEB_SCRAPED = "web"
    APP_SOURCED = "app"
    AUGMENTED = "augmented"


class Verification(Enum):
    UNVERIFIED = "unverified"
    EXPERT_VERIFIED = "verified"
    REJECTED = "rejected"


class Split(Enum):
    UNASSIGNED = "unassigned"
    TRAIN = "train"
    VALIDATION = "val"


@dataclass(frozen=True)
class Provenance:
    source: Source
    origin_note: str = ""
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ImageRecord:
    """One image in the dataset manifest.

    ``label`` is None for unlabeled records. Augmented records must carry
    ``base_id`` and ``recipe_id`` and enter the dataset Unverified; they
    become training-eligible only after expert verification.
    """

    id: str
    path: str
    width_px: int
    height_px: int
    provenance: Provenance
    label: Optional[DiseaseClass] = None
    verification: Verification = Verification.UNVERIFIED
    split: Split = Split.UNASSIGNED
    base_id: Optional[str] = None
    recipe_id: Optional[str] = None
    mask_path: Optional[str] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError(f"record {self.id!r}: dimensions must be positive")
        if self.is_augmented and (self.base_id is None or self.recipe_id is None):
            raise ValueError(
                f"augmented record {self.id!r} must reference base_id and recipe_id"
            )

    @property
    def is_augmented(self) -> bool:
        return self.provenance.source is Source.AUGMENTED

    @property
    def training_eligible(self) -> bool:
        """Only expert-verified augmented records and non-rejected originals train."""
        if self.is_augmented:
            return self.verification is Verification.EXPERT_VERIFIED
        return self.verification is not Verification.REJECTED


@dataclass
class Dataset:
    records: list[ImageRecord]
    manifest_version: int = 1

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise DuplicateIdError(rec.id)
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.records)

    def by_id(self, record_id: str) -> ImageRecord:
        for rec in self.records:
            if rec.id == record_id:
                return rec
        raise KeyError(record_id)

    def labeled(self) -> list[ImageRecord]:
        return [r for r in self.records if r.label is not None]


def class_distribution(dataset: Dataset) -> dict[DiseaseClass, int]:
    """Per-class count of labeled records; every class key always present."""
    counts = {cls: 0 for cls in CLASS_ORDER}
    for rec in dataset.records:
        if rec.label is not None:
            counts[rec.label] += 1
    return counts


# --- JSONL persistence ---------------------------------------------------

_REQUIRED_KEYS = ("id", "path", "label", "provenance", "verification", "split",
                  "width_px", "height_px")
_KNOWN_KEYS = set(_REQUIRED_KEYS) | {"base_id", "recipe_id", "mask_path"}


def record_to_obj(rec: ImageRecord) -> dict:
    prov = dict(rec.provenance.extras)
    prov["source"] = rec.provenance.source.value
    if rec.provenance.origin_note:
        prov["origin_note"] = rec.provenance.origin_note
    obj = dict(rec.extras)
    obj.update(
        id=rec.id,
        path=rec.path,
        label=rec.label.value if rec.label is not None else UNLABELED_TOKEN,
        provenance=prov,
        verification=rec.verification.value,
        split=rec.split.value,
        width_px=rec.width_px,
        height_px=rec.height_px,
    )
    if rec.base_id is not None:
        obj["base_id"] = rec.base_id
    if rec.recipe_id is not None:
        obj["recipe_id"] = rec.recipe_id
    if rec.mask_path is not None:
        obj["mask_path"] = rec.mask_path
    return obj


def record_from_obj(obj: dict, line_no: int = 0) -> ImageRecord:
    for key in _REQUIRED_KEYS:
        if key not in obj:
            raise MalformedLineError(line_no, f"missing required key {key!r}")
    label_token = obj["label"]
    label = None if label_token == UNLABELED_TOKEN else DiseaseClass.from_token(label_token)
    prov_obj = obj["provenance"]
    if not isinstance(prov_obj, dict) or "source" not in prov_obj:
        raise MalformedLineError(line_no, "provenance must be an object with a 'source' key")
    try:
        source = Source(prov_obj["source"])
    except ValueError:
        raise MalformedLineError(line_no, f"unknown provenance source {prov_obj['source']!r}")
    prov_extras = {k: v for k, v in prov_obj.items() if k not in ("source", "origin_note")}
    try:
        verification = Verification(obj["verification"])
        split = Split(obj["split"])
    except ValueError as exc:
        raise MalformedLineError(line_no, str(exc))
    if not isinstance(obj["width_px"], int) or not isinstance(obj["height_px"], int):
        raise MalformedLineError(line_no, "width_px and height_px must be integers")
    extras = {k: v for k, v in obj.items() if k not in _KNOWN_KEYS}
    try:
        return ImageRecord(
            id=obj["id"],
            path=obj["path"],
            width_px=obj["width_px"],
            height_px=obj["height_px"],
            provenance=Provenance(source, prov_obj.get("origin_note", ""), prov_extras),
            label=label,
            verification=verification,
            split=split,
            base_id=obj.get("base_id"),
            recipe_id=obj.get("recipe_id"),
            mask_path=obj.get("mask_path"),
            extras=extras,
        )
    except ValueError as exc:
        raise MalformedLineError(line_no, str(exc))


def load_manifest(path: str | Path) -> Dataset:
    """Parse a JSONL manifest; ordering preserved, ids checked for uniqueness."""
    records: list[ImageRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(line_no, f"invalid JSON: {exc.msg}")
            if not isinstance(obj, dict):
                raise MalformedLineError(line_no, "line is not a JSON object")
            rec = record_from_obj(obj, line_no)
            if rec.id in seen:
                raise DuplicateIdError(rec.id)
            seen.add(rec.id)
            records.append(rec)
    return Dataset(records)


def dumps_record(rec: ImageRecord) -> str:
    return json.dumps(record_to_obj(rec), sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def save_manifest(dataset: Dataset, path: str | Path) -> None:
    """Write the canonical JSONL form atomically (temp file + rename)."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for rec in dataset.records:
                fh.write(dumps_record(rec))
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- stratified splitting -------------------------------------------------

def _validation_quotas(
    counts: dict[DiseaseClass, int], train_fraction: float
) -> dict[DiseaseClass, int]:
    """Per-class validation counts via floor-plus-largest-remainder rounding.

    Quotas are computed with exact rational arithmetic so the result is free
    of float noise: the total equals round(N * (1 - fraction)) half-up, and
    each class deviates from its exact quota by less than one record.
    """
    frac = 1 - Fraction(str(train_fraction))
    quotas = {cls: counts[cls] * frac for cls in counts}
    base = {cls: math.floor(q) for cls, q in quotas.items()}
    total_exact = sum(quotas.values())
    total = math.floor(total_exact + Fraction(1, 2))  # round half-up
    leftover = total - sum(base.values())
    remainders = sorted(
        counts,
        key=lambda cls: (quotas[cls] - base[cls], -CLASS_ORDER.index(cls)),
        reverse=True,
    )
    for cls in remainders[:leftover]:
        base[cls] += 1
    return base


def stratified_split(
    dataset: Dataset,
    train_fraction: float,
    seed: int,
    include_augmented_in_validation: bool = True,
    required_classes: Optional[Sequence[DiseaseClass]] = None,
) -> tuple[Dataset, Dataset]:
    """Deterministic per-class split into train and validation datasets.

    Every record must be labeled, and augmented records expert-verified.
    With ``include_augmented_in_validation=False`` augmented records always
    land in train and the validation quota is drawn from originals only.
    ``required_classes`` optionally enforces a class universe; a listed class
    with zero records raises ``EmptyClassError``. By default the universe is
    the set of classes present in the dataset.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    for rec in dataset.records:
        if rec.label is None:
            raise UnlabeledRecordError(rec.id)
        if rec.is_augmented and rec.verification is not Verification.EXPERT_VERIFIED:
            raise UnverifiedAugmentedRecordError(rec.id)

    counts = class_distribution(dataset)
    if required_classes is not None:
        for cls in required_classes:
            if counts[cls] == 0:
                raise EmptyClassError(cls.value)
    present = {cls: n for cls, n in counts.items() if n > 0}
    if not present:
        raise EmptyClassError("(no labeled records)")

    quotas = _validation_quotas(present, train_fraction)
    rng = random.Random(seed)
    val_ids: set[str] = set()
    by_class: dict[DiseaseClass, list[ImageRecord]] = {cls: [] for cls in present}
    for rec in dataset.records:
        by_class[rec.label].append(rec)

    # Candidate order is canonical (sorted by id) so membership depends only
    # on (dataset contents, fraction, seed, flag), not on manifest order.
    for cls in CLASS_ORDER:
        if cls not in present:
            continue
        members = sorted(by_class[cls], key=lambda r: r.id)
        if include_augmented_in_validation:
            pool = members
        else:
            pool = [r for r in members if not r.is_augmented]
            if len(pool) < quotas[cls]:
                raise InsufficientValidationPoolError(cls.value, quotas[cls], len(pool))
        ids = [r.id for r in pool]
        rng.shuffle(ids)
        val_ids.update(ids[: quotas[cls]])

    train_records = [replace(r, split=Split.TRAIN) for r in dataset.records if r.id not in val_ids]
    val_records = [replace(r, split=Split.VALIDATION) for r in dataset.records if r.id in val_ids]
    return Dataset(train_records, dataset.manifest_version), Dataset(val_records, dataset.manifest_version)


def assign_split(
    dataset: Dataset,
    train_fraction: float,
    seed: int,
    include_augmented_in_validation: bool = True,
) -> Dataset:
    """Return one dataset with every record's split field set, order preserved."""
    train, val = stratified_split(dataset, train_fraction, seed, include_augmented_in_validation)
    val_ids = {r.id for r in val.records}
    records = [
        replace(r, split=Split.VALIDATION if r.id in val_ids else Split.TRAIN)
        for r in dataset.records
    ]
    return Dataset(records, dataset.manifest_version)


def split_subset(dataset: Dataset, split: Split) -> Dataset:
    return Dataset([r for r in dataset.records if r.split is split], dataset.manifest_version)
