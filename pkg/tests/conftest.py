"""Session-scoped fixtures: desk-scale models are trained once and shared."""

import pytest

from lesion_triage.classification import save_classifier, train_classifier
from lesion_triage.segmentation import save_segmenter, train_segmenter
from lesion_triage.synthetic import (
    classification_scenes,
    segmentation_pairs,
    write_scene_dataset,
)

from util import (
    CLS_TRAIN_SEED,
    CLUTTER_SEED,
    DESK_CLS_CONFIG,
    DESK_IMAGE_SIZE,
    DESK_SEG_CONFIG,
    DESK_TRANSFORMS,
    SEG_TRAIN_SEED,
    VAL_SEED,
)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """Root directory holding the 60-image training dataset (10 per class)."""
    root = tmp_path_factory.mktemp("synth")
    scenes = classification_scenes(10, DESK_IMAGE_SIZE, seed=CLS_TRAIN_SEED, clutter=0)
    write_scene_dataset(scenes, root, id_prefix="train")
    return root


@pytest.fixture(scope="session")
def train_dataset(synth_root):
    from lesion_triage.manifest import load_manifest

    return load_manifest(synth_root / "manifest.jsonl")


@pytest.fixture(scope="session")
def seg_model():
    pairs = segmentation_pairs(50, DESK_IMAGE_SIZE, seed=SEG_TRAIN_SEED)
    return train_segmenter(pairs, DESK_SEG_CONFIG)


@pytest.fixture(scope="session")
def cls_model(train_dataset, synth_root):
    return train_classifier(train_dataset, DESK_CLS_CONFIG, DESK_TRANSFORMS, synth_root)


@pytest.fixture(scope="session")
def val_scenes():
    """30 held-out clean scenes, 5 per class."""
    return classification_scenes(5, DESK_IMAGE_SIZE, seed=VAL_SEED, clutter=0)


@pytest.fixture(scope="session")
def cluttered_scenes():
    """~100 scenes with background distractor clutter."""
    return classification_scenes(17, DESK_IMAGE_SIZE, seed=CLUTTER_SEED, clutter=4)[:100]


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory, seg_model, cls_model):
    """Saved artifacts for both models, as the service and CLI consume them."""
    path = tmp_path_factory.mktemp("models")
    save_segmenter(seg_model, path)
    save_classifier(cls_model, path)
    return path
