"""Shared test fixtures: record factories and the reference validation table."""

from __future__ import annotations

import random

from lesion_triage.manifest import (
    CLASS_ORDER,
    Dataset,
    DiseaseClass,
    ImageRecord,
    Provenance,
    Source,
    Verification,
)

# Published validation-set outcomes used as reference expectations:
# per-class one-vs-rest counts plus the reported metric columns.
REFERENCE_COUNTS = {
    DiseaseClass.GENITAL_WARTS: (43, 7, 187, 2),
    DiseaseClass.HERPES_ERUPTION: (40, 6, 190, 3),
    DiseaseClass.PENILE_CANCER: (23, 3, 207, 6),
    DiseaseClass.PENILE_CANDIDIASIS: (35, 1, 198, 5),
    DiseaseClass.SYPHILITIC_CHANCRE: (32, 3, 199, 5),
    DiseaseClass.NON_DISEASED: (44, 2, 192, 1),
}

REFERENCE_POINTS = {
    # cls: (recall, precision, specificity)
    DiseaseClass.GENITAL_WARTS: (0.956, 0.860, 0.964),
    DiseaseClass.HERPES_ERUPTION: (0.930, 0.870, 0.969),
    DiseaseClass.PENILE_CANCER: (0.793, 0.885, 0.986),
    DiseaseClass.PENILE_CANDIDIASIS: (0.875, 0.972, 0.995),
    DiseaseClass.SYPHILITIC_CHANCRE: (0.865, 0.914, 0.985),
    DiseaseClass.NON_DISEASED: (0.978, 0.957, 0.990),
}

REFERENCE_CIS = {
    # cls: (recall_ci, precision_ci, specificity_ci)
    DiseaseClass.GENITAL_WARTS: ((0.849, 0.995), (0.764, 0.956), (0.927, 0.985)),
    DiseaseClass.HERPES_ERUPTION: ((0.810, 0.985), (0.772, 0.967), (0.935, 0.989)),
    DiseaseClass.PENILE_CANCER: ((0.603, 0.920), (0.762, 0.999), (0.959, 0.997)),
    DiseaseClass.PENILE_CANDIDIASIS: ((0.732, 0.958), (0.919, 0.999), (0.972, 0.999)),
    DiseaseClass.SYPHILITIC_CHANCRE: ((0.712, 0.955), (0.822, 0.999), (0.957, 0.999)),
    DiseaseClass.NON_DISEASED: ((0.882, 0.999), (0.852, 0.995), (0.963, 0.999)),
}

REFERENCE_F1 = {
    DiseaseClass.GENITAL_WARTS: 0.909,
    DiseaseClass.HERPES_ERUPTION: 0.917,
    DiseaseClass.PENILE_CANCER: 0.932,
    DiseaseClass.PENILE_CANDIDIASIS: 0.983,
    DiseaseClass.SYPHILITIC_CHANCRE: 0.948,
    DiseaseClass.NON_DISEASED: 0.973,
}

REFERENCE_OVERALL_REPORTED = 0.944

# Validation-set composition (n=239).
REFERENCE_CLASS_SIZES = {
    DiseaseClass.GENITAL_WARTS: 45,
    DiseaseClass.HERPES_ERUPTION: 43,
    DiseaseClass.PENILE_CANCER: 29,
    DiseaseClass.PENILE_CANDIDIASIS: 40,
    DiseaseClass.SYPHILITIC_CHANCRE: 37,
    DiseaseClass.NON_DISEASED: 45,
}


def make_record(
    rec_id: str,
    label: DiseaseClass | None = DiseaseClass.NON_DISEASED,
    source: Source = Source.CLINICIAN,
    verification: Verification = Verification.UNVERIFIED,
    **kwargs,
) -> ImageRecord:
    if source is Source.AUGMENTED:
        kwargs.setdefault("base_id", "base-0")
        kwargs.setdefault("recipe_id", "recipe-0")
    return ImageRecord(
        id=rec_id,
        path=kwargs.pop("path", f"images/{rec_id}.png"),
        width_px=kwargs.pop("width_px", 64),
        height_px=kwargs.pop("height_px", 64),
        provenance=Provenance(source, kwargs.pop("origin_note", "")),
        label=label,
        verification=verification,
        **kwargs,
    )


def largest_remainder(total: int, weights: list[float]) -> list[int]:
    exact = [total * w for w in weights]
    base = [int(x) for x in exact]
    leftover = round(sum(exact)) - sum(base)
    order = sorted(range(len(weights)), key=lambda i: exact[i] - base[i], reverse=True)
    for i in order[:leftover]:
        base[i] += 1
    return base


def synthetic_manifest(
    total: int = 2627,
    seed: int = 13,
    provenance_mix: tuple[float, float, float] = (0.3, 0.3, 0.4),
) -> Dataset:
    """A labeled manifest with the given clinician/app/augmented provenance mix."""
    rng = random.Random(seed)
    n_clin, n_app, n_aug = largest_remainder(total, list(provenance_mix))
    sources = ([Source.CLINICIAN] * n_clin + [Source.APP_SOURCED] * n_app
               + [Source.AUGMENTED] * n_aug)
    rng.shuffle(sources)
    records = []
    for i, source in enumerate(sources):
        label = CLASS_ORDER[i % len(CLASS_ORDER)]
        verification = (
            Verification.EXPERT_VERIFIED if source is Source.AUGMENTED else Verification.UNVERIFIED
        )
        records.append(make_record(f"rec-{i:05d}", label, source, verification))
    return Dataset(records)


def random_labeled_dataset(rng: random.Random, n: int) -> Dataset:
    records = []
    for i in range(n):
        label = CLASS_ORDER[rng.randrange(len(CLASS_ORDER))]
        records.append(make_record(f"r{i:04d}", label))
    return Dataset(records)


# --- desk-scale model configs shared by tests and the acceptance suite -----

from lesion_triage.augment import TransformConfig
from lesion_triage.classification import Backbone, ClsModelConfig
from lesion_triage.segmentation import SegModelConfig

DESK_IMAGE_SIZE = 64

DESK_SEG_CONFIG = SegModelConfig(
    input_size=DESK_IMAGE_SIZE, depth=3, base_channels=8, epochs=25,
    learning_rate=2e-3, batch_size=8, seed=0,
)

DESK_CLS_CONFIG = ClsModelConfig(
    backbone=Backbone.SMALL_CNN, input_size=DESK_IMAGE_SIZE, epochs=60,
    optimizer_lr=0.005, optimizer_epsilon=1e-4, batch_size=12, seed=7,
    pretrained=False,
)

DESK_TRANSFORMS = TransformConfig(
    rotation_range=10, rescale_range=0.1, shift_range_x=0.05, shift_range_y=0.05,
    brightness_range=0.1, allow_flip_h=True, allow_flip_v=True, color_jitter=0.05,
)

SEG_TRAIN_SEED = 11
CLS_TRAIN_SEED = 21
VAL_SEED = 77
CLUTTER_SEED = 301


# --- published usage-distribution table (n=437) -----------------------------

# country -> (n, (age 18-30, 31-50, >50), (pain, discharge, urination, none),
#             (under1mo, 1-3mo, >3mo, never))
USAGE_COUNTRY_SPEC = {
    "US": (271, (176, 87, 8), (84, 70, 81, 149), (169, 70, 27, 5)),
    "SG": (64, (37, 23, 4), (26, 12, 8, 38), (30, 27, 4, 3)),
    "CA": (41, (26, 14, 1), (11, 10, 9, 24), (20, 14, 6, 1)),
    "GB": (40, (25, 13, 2), (11, 11, 10, 21), (21, 10, 8, 1)),
    "VN": (21, (13, 7, 1), (8, 7, 6, 10), (8, 8, 4, 1)),
}

USAGE_TOTAL = 437

# Printed percentage columns (overall plus per-country), as published.
USAGE_EXPECTED_PCT = {
    "overall": {
        "countries": {"US": 62.0, "SG": 14.6, "CA": 9.4, "GB": 9.2, "VN": 4.8},
        "age": (63.4, 33.0, 3.7),
        "symptoms": (32.0, 25.2, 26.1, 55.4),
        "contact": (56.8, 29.5, 11.2, 2.5),
    },
    "US": {"age": (64.9, 32.1, 3.0), "symptoms": (31.0, 25.8, 29.9, 55.0),
           "contact": (62.4, 25.8, 10.0, 1.8)},
    "SG": {"age": (57.8, 35.9, 6.3), "symptoms": (40.6, 18.8, 12.5, 59.4),
           "contact": (46.9, 42.2, 6.3, 4.7)},
    "CA": {"age": (63.4, 34.1, 2.4), "symptoms": (26.8, 24.4, 22.0, 58.5),
           "contact": (48.8, 34.1, 14.6, 2.4)},
    "GB": {"age": (62.5, 32.5, 5.0), "symptoms": (27.5, 27.5, 25.0, 52.5),
           "contact": (52.5, 25.0, 20.0, 2.5)},
    "VN": {"age": (61.9, 33.3, 4.8), "symptoms": (38.1, 33.3, 28.6, 47.6),
           "contact": (38.1, 38.1, 19.0, 4.8)},
}


def usage_questionnaires() -> list[dict]:
    """A synthetic questionnaire log realizing the published joint counts.

    Within each country block, age and last-contact bands are assigned
    sequentially; multi-select symptom flags are laid out as cyclic interval
    assignments so each marginal is exact and every submission keeps at
    least one symptom choice.
    """
    from lesion_triage.service.analytics import AGE_BANDS, LAST_CONTACT, SYMPTOMS

    questionnaires = []
    for country, (n, ages, symptoms, contact) in USAGE_COUNTRY_SPEC.items():
        age_list = [band for band, k in zip(AGE_BANDS, ages) for _ in range(k)]
        contact_list = [band for band, k in zip(LAST_CONTACT, contact) for _ in range(k)]
        symptom_sets = [set() for _ in range(n)]
        offset = 0
        for symptom, count in zip(SYMPTOMS, symptoms):
            for j in range(count):
                symptom_sets[(offset + j) % n].add(symptom)
            offset += count
        assert all(symptom_sets), f"uncovered submission in {country}"
        for i in range(n):
            questionnaires.append({
                "age_band": age_list[i],
                "country": country,
                "symptoms": sorted(symptom_sets[i]),
                "last_contact": contact_list[i],
            })
    return questionnaires


def usage_submissions(start="2023-07-01T00:00:00+00:00") -> list[dict]:
    """Submission rows (created_at + questionnaire) inside the July-Oct window."""
    from datetime import datetime, timedelta

    base = datetime.fromisoformat(start)
    rows = []
    for i, questionnaire in enumerate(usage_questionnaires()):
        created = (base + timedelta(minutes=5 * i)).isoformat()
        rows.append({"created_at": created, "questionnaire": questionnaire})
    return rows
