"""Visual triage pipeline for penile disease images."""

__version__ = "0.1.0"

from .manifest import (  # noqa: F401
    CLASS_ORDER,
    DISEASE_CLASSES,
    Dataset,
    DiseaseClass,
    ImageRecord,
    Provenance,
    Source,
    Split,
    Verification,
    class_distribution,
    load_manifest,
    save_manifest,
    stratified_split,
)
