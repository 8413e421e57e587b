"""Per-diagnosis education content, loaded from an editable YAML file.

The library is validated at startup: every class must have a complete entry,
so result responses can always embed one. ``MissingContentError`` fires at
load time, never at request time.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from ..errors import MissingContentError
from ..manifest import DiseaseClass

_REQUIRED_FIELDS = ("symptoms", "confirmatory_testing", "treatment", "links")


@dataclass(frozen=True)
class EducationEntry:
    cls: DiseaseClass
    symptoms_text: str
    confirmatory_testing_text: str
    treatment_text: str
    resource_links: tuple[str, ...]

    def to_obj(self) -> dict:
        return {
            "class": self.cls.value,
            "display_name": self.cls.display_name,
            "symptoms": self.symptoms_text,
            "confirmatory_testing": self.confirmatory_testing_text,
            "treatment": self.treatment_text,
            "links": list(self.resource_links),
        }


def default_content_path() -> Path:
    return Path(resources.files("lesion_triage.service") / "education.yaml")


class EducationLibrary:
    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path is not None else default_content_path()
        self._entries: dict[DiseaseClass, EducationEntry] = {}
        self.reload()

    def reload(self) -> None:
        raw = yaml.safe_load(self.path.read_text(encoding="utf-8")) or {}
        entries: dict[DiseaseClass, EducationEntry] = {}
        for cls in DiseaseClass:
            obj = raw.get(cls.value)
            if not isinstance(obj, dict) or any(f not in obj for f in _REQUIRED_FIELDS):
                raise MissingContentError(cls.value)
            entries[cls] = EducationEntry(
                cls=cls,
                symptoms_text=str(obj["symptoms"]).strip(),
                confirmatory_testing_text=str(obj["confirmatory_testing"]).strip(),
                treatment_text=str(obj["treatment"]).strip(),
                resource_links=tuple(str(u) for u in obj["links"]),
            )
        self._entries = entries

    def entry(self, cls: DiseaseClass) -> EducationEntry:
        return self._entries[cls]

    def all_entries(self) -> dict[DiseaseClass, EducationEntry]:
        return dict(self._entries)
