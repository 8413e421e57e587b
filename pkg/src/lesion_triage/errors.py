"""Exception hierarchy shared across the package.

Two broad families matter to callers: ``DataError`` (bad manifests, images,
or arguments; CLI exit code 3) and ``ModelError`` (missing/invalid model
artifacts or inference failures; CLI exit code 4).
"""

from __future__ import annotations


class LesionTriageError(Exception):
    """Base class for all package errors."""


class DataError(LesionTriageError):
    pass


class ModelError(LesionTriageError):
    pass


# --- manifest / dataset -------------------------------------------------

class MalformedLineError(DataError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"manifest line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateIdError(DataError):
    def __init__(self, record_id: str):
        super().__init__(f"duplicate record id: {record_id!r}")
        self.record_id = record_id


class UnknownClassError(DataError):
    def __init__(self, token: str):
        super().__init__(f"unknown class token: {token!r}")
        self.token = token


class EmptyClassError(DataError):
    def __init__(self, class_name: str):
        super().__init__(f"class {class_name!r} has no records")
        self.class_name = class_name


class UnlabeledRecordError(DataError):
    def __init__(self, record_id: str):
        super().__init__(f"record {record_id!r} is unlabeled")
        self.record_id = record_id


class UnverifiedAugmentedRecordError(DataError):
    def __init__(self, record_id: str):
        super().__init__(f"augmented record {record_id!r} is not expert-verified")
        self.record_id = record_id


class InsufficientValidationPoolError(DataError):
    def __init__(self, class_name: str, needed: int, available: int):
        super().__init__(
            f"class {class_name!r}: validation quota {needed} exceeds the "
            f"{available} non-augmented records available"
        )
        self.class_name = class_name


class UndecodableImageError(DataError):
    pass


# --- augmentation -------------------------------------------------------

class EmptyMaskError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class PlacementOutsideSubjectError(DataError):
    pass


class PatternLargerThanBaseError(DataError):
    pass


class InsufficientSourcesError(DataError):
    def __init__(self, class_name: str, reason: str):
        super().__init__(f"cannot augment class {class_name!r}: {reason}")
        self.class_name = class_name


# --- models / pipeline --------------------------------------------------

class EmptyTrainingSetError(ModelError):
    pass


class NonBinaryMaskError(DataError):
    pass


class ModelNotLoadedError(ModelError):
    pass


class NoConvLayerError(ModelError):
    pass


class EmptySubjectMaskError(ModelError):
    pass


class PipelineStageError(ModelError):
    """Wraps a failure inside refine_and_classify with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# --- evaluation ---------------------------------------------------------

class LengthMismatchError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class EmptyRowsError(DataError):
    pass


class UndefinedMetricError(DataError):
    def __init__(self, name: str):
        super().__init__(f"metric {name!r} is undefined (zero denominator)")
        self.name = name


# --- service ------------------------------------------------------------

class NotFoundError(LesionTriageError):
    pass


class NotAugmentedError(DataError):
    pass


class AlreadyReviewedError(DataError):
    pass


class MissingContentError(DataError):
    def __init__(self, class_name: str):
        super().__init__(f"education content missing for class {class_name!r}")
        self.class_name = class_name


class PayloadTooLargeError(DataError):
    pass


class InvalidQuestionnaireError(DataError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"questionnaire field {field!r}: {reason}")
        self.field = field
