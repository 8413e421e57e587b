"""lesion-triage command line: ingest, augment, split, train, eval, infer, serve.

Errors exit with machine-readable JSON on stderr: code 2 for usage problems,
3 for data errors, 4 for model errors. Every run that writes to an output
directory first drops a reproducibility header (seed, config hash, git
describe) there. Defaults can come from a ``lesion-triage.toml`` config file;
explicit flags always win.
"""

from __future__ import annotations

import functools
import hashlib
import json
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .errors import DataError, LesionTriageError, ModelError

DEFAULT_SEED = 1729
CONFIG_FILE = "lesion-triage.toml"

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_MODEL = 4


def _load_config_file(path: str | None) -> dict:
    candidate = Path(path) if path else Path(CONFIG_FILE)
    if not candidate.exists():
        return {}
    with open(candidate, "rb") as fh:
        return tomllib.load(fh)


def config_defaults(fn):
    """Fill options the user did not pass from the config file's [subcommand]
    table. Precedence: explicit flag > environment variable > config file >
    built-in default."""

    @functools.wraps(fn)
    @click.pass_context
    def wrapper(ctx, *args, **kwargs):
        section = (ctx.obj or {}).get(ctx.command.name, {})
        for key, value in section.items():
            param = key.replace("-", "_")
            if param not in kwargs:
                continue
            if ctx.get_parameter_source(param) is click.core.ParameterSource.DEFAULT:
                kwargs[param] = value
        return ctx.invoke(fn, *args, **kwargs)

    return wrapper


def write_run_header(out_dir: Path, command: str, seed: int, options: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        ).stdout.strip() or "unknown"
    except Exception:
        described = "unknown"
    payload = {k: str(v) for k, v in sorted(options.items())}
    header = {
        "command": command,
        "seed": seed,
        "config_hash": hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()
        ).hexdigest(),
        "git_describe": described,
        "version": __version__,
        "at": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "run_info.json").write_text(json.dumps(header, indent=2) + "\n")


def fail(error: Exception, code: int) -> "click.exceptions.Exit":
    sys.stderr.write(json.dumps(
        {"error": type(error).__name__, "message": str(error)}
    ) + "\n")
    return SystemExit(code)


def run_guarded(fn):
    try:
        fn()
    except ModelError as exc:
        raise fail(exc, EXIT_MODEL)
    except (DataError, LesionTriageError, FileNotFoundError) as exc:
        raise fail(exc, EXIT_DATA)


@click.group()
@click.version_option(__version__)
@click.option("--config", type=click.Path(), default=None,
              help=f"TOML config file (default ./{CONFIG_FILE} when present).")
@click.pass_context
def main(ctx, config):
    """End-to-end tooling for the visual triage pipeline."""
    ctx.obj = _load_config_file(config)


@main.command()
@click.option("--images-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--manifest-out", required=True, type=click.Path())
@click.option("--source", default="clinician",
              type=click.Choice(["clinician", "web", "app"]),
              help="Provenance recorded for ingested images.")
@config_defaults
def ingest(images_dir, manifest_out, source):
    """Scan a local directory into a manifest (class label from subdirectory name)."""

    def run():
        from .imaging import load_rgb
        from .manifest import (
            Dataset, DiseaseClass, ImageRecord, Provenance, Source, save_manifest,
        )

        root = Path(images_dir)
        records = []
        for path in sorted(root.rglob("*")):
            if path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            label = None
            parent = path.parent.name
            try:
                label = DiseaseClass(parent)
            except ValueError:
                pass
            image = load_rgb(path)
            rel = path.relative_to(root)
            records.append(ImageRecord(
                id=str(rel).replace("/", "_").rsplit(".", 1)[0],
                path=str(rel),
                width_px=image.shape[1],
                height_px=image.shape[0],
                provenance=Provenance(Source(source)),
                label=label,
            ))
        save_manifest(Dataset(records), manifest_out)
        click.echo(f"ingested {len(records)} images -> {manifest_out}")

    run_guarded(run)


@main.command("demo-data")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--per-class", default=10, show_default=True)
@click.option("--size", default=64, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--clutter", default=0, show_default=True)
@config_defaults
def demo_data(out_dir, per_class, size, seed, clutter):
    """Generate a synthetic desk-scale dataset (the clinical data is private)."""

    def run():
        from .synthetic import classification_scenes, write_scene_dataset

        seed_ = seed if seed is not None else DEFAULT_SEED
        scenes = classification_scenes(per_class, size, seed=seed_, clutter=clutter)
        dataset = write_scene_dataset(scenes, out_dir, with_lesion_masks=True)
        write_run_header(Path(out_dir), "demo-data", seed_,
                         dict(per_class=per_class, size=size, clutter=clutter))
        click.echo(f"wrote {len(dataset)} synthetic records under {out_dir}")

    run_guarded(run)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--images-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--target", type=int, default=None, help="Per-class record target"
              " (default: the current maximum class count).")
@click.option("--seed", type=int, default=None)
@config_defaults
def augment(manifest_path, images_root, out_dir, target, seed):
    """Balance disease classes by compositing lesion patterns onto bases."""

    def run():
        from .augment import ExtractedPatternLibrary, balance_classes
        from .imaging import load_mask_png
        from .manifest import DiseaseClass, class_distribution, load_manifest, save_manifest

        dataset = load_manifest(manifest_path)
        seed_ = seed if seed is not None else DEFAULT_SEED
        library = ExtractedPatternLibrary.from_dataset(dataset, images_root)
        bases = [r for r in dataset.records if r.label is DiseaseClass.NON_DISEASED]
        masks = {}
        for rec in bases:
            if rec.mask_path:
                masks[rec.id] = load_mask_png(Path(images_root) / rec.mask_path)
        dist = class_distribution(dataset)
        target_ = target or max(
            (n for cls, n in dist.items() if cls is not DiseaseClass.NON_DISEASED),
            default=0,
        )
        out = balance_classes(
            dataset, bases, library.patterns, target_, seed_,
            images_root=images_root, out_dir=Path(out_dir), base_masks=masks,
        )
        save_manifest(out, manifest_path)
        write_run_header(Path(out_dir), "augment", seed_,
                         dict(manifest=manifest_path, target=target_))
        click.echo(f"dataset now {len(out)} records (target {target_} per class)")

    run_guarded(run)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--fraction", type=float, default=0.91, show_default=True,
              help="Train fraction.")
@click.option("--seed", type=int, default=None)
@click.option("--exclude-augmented-from-val", is_flag=True, default=False)
@config_defaults
def split(manifest_path, fraction, seed, exclude_augmented_from_val):
    """Assign stratified train/validation split fields in place (atomic rewrite)."""

    def run():
        from .manifest import Split, assign_split, load_manifest, save_manifest

        fraction_ = float(fraction)
        seed_ = int(seed) if seed is not None else DEFAULT_SEED
        dataset = load_manifest(manifest_path)
        assigned = assign_split(
            dataset, fraction_, seed_,
            include_augmented_in_validation=not exclude_augmented_from_val,
        )
        save_manifest(assigned, manifest_path)
        n_val = sum(1 for r in assigned if r.split is Split.VALIDATION)
        click.echo(f"split {len(assigned)} records: {len(assigned) - n_val} train / {n_val} val")

    run_guarded(run)


@main.command("train-seg")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--images-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--model-dir", required=True, type=click.Path())
@click.option("--input-size", default=64, show_default=True)
@click.option("--depth", default=3, show_default=True)
@click.option("--base-channels", default=8, show_default=True)
@click.option("--epochs", default=25, show_default=True)
@click.option("--learning-rate", default=2e-3, show_default=True)
@click.option("--seed", type=int, default=None)
@config_defaults
def train_seg(manifest_path, images_root, model_dir, input_size, depth,
              base_channels, epochs, learning_rate, seed):
    """Train the background/subject segmenter from records carrying mask_path."""

    def run():
        from .errors import EmptyTrainingSetError
        from .imaging import load_mask_png, load_rgb
        from .manifest import Split, load_manifest
        from .segmentation import SegModelConfig, save_segmenter, train_segmenter

        seed_ = seed if seed is not None else DEFAULT_SEED
        dataset = load_manifest(manifest_path)
        pairs = []
        for rec in dataset.records:
            if rec.mask_path is None or rec.split is Split.VALIDATION:
                continue
            image = load_rgb(Path(images_root) / rec.path)
            mask = load_mask_png(Path(images_root) / rec.mask_path).astype("uint8")
            pairs.append((image, mask))
        if not pairs:
            raise EmptyTrainingSetError("no records with mask_path to train on")
        config = SegModelConfig(
            input_size=input_size, depth=depth, base_channels=base_channels,
            epochs=epochs, learning_rate=learning_rate, seed=seed_,
        )
        model = train_segmenter(pairs, config)
        save_segmenter(model, model_dir)
        write_run_header(Path(model_dir), "train-seg", seed_, dict(
            manifest=manifest_path, epochs=epochs, input_size=input_size))
        click.echo(
            f"trained segmenter on {len(pairs)} pairs; "
            f"final loss {model.epoch_losses[-1]:.4f} -> {model_dir}"
        )

    run_guarded(run)


@main.command("train-cls")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--images-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--model-dir", required=True, type=click.Path())
@click.option("--backbone", default="small_cnn", show_default=True,
              type=click.Choice(["inception_resnet_v2", "small_cnn"]))
@click.option("--input-size", type=int, default=None)
@click.option("--epochs", type=int, default=None, help="Default 150 (published setting).")
@click.option("--lr", type=float, default=None, help="Default 0.01 (published setting).")
@click.option("--epsilon", type=float, default=None, help="Default 0.1 (published setting).")
@click.option("--batch-size", default=16, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--pretrained-weights", type=click.Path(exists=True), default=None)
@click.option("--train-split-only/--all-records", default=True, show_default=True)
@config_defaults
def train_cls(manifest_path, images_root, model_dir, backbone, input_size, epochs,
              lr, epsilon, batch_size, seed, pretrained_weights, train_split_only):
    """Train the six-class classifier with online random augmentation."""

    def run():
        from .augment import TransformConfig
        from .classification import Backbone, ClsModelConfig, save_classifier, train_classifier
        from .manifest import Split, load_manifest, split_subset

        seed_ = seed if seed is not None else DEFAULT_SEED
        dataset = load_manifest(manifest_path)
        if train_split_only and any(r.split is Split.TRAIN for r in dataset.records):
            dataset = split_subset(dataset, Split.TRAIN)
        backbone_ = Backbone(backbone)
        defaults = ClsModelConfig()
        config = ClsModelConfig(
            backbone=backbone_,
            input_size=input_size,
            epochs=epochs if epochs is not None else defaults.epochs,
            optimizer_lr=lr if lr is not None else defaults.optimizer_lr,
            optimizer_epsilon=epsilon if epsilon is not None else defaults.optimizer_epsilon,
            batch_size=batch_size,
            seed=seed_,
            pretrained=pretrained_weights is not None,
            pretrained_weights=pretrained_weights,
        )
        transforms = TransformConfig(
            rotation_range=10, rescale_range=0.1, shift_range_x=0.05, shift_range_y=0.05,
            brightness_range=0.1, allow_flip_h=True, allow_flip_v=True, color_jitter=0.05,
        )
        model = train_classifier(dataset, config, transforms, images_root)
        save_classifier(model, model_dir)
        write_run_header(Path(model_dir), "train-cls", seed_, dict(
            manifest=manifest_path, backbone=backbone, epochs=config.epochs))
        last = model.epoch_log[-1]
        click.echo(
            f"trained {backbone} for {config.epochs} epochs; "
            f"final loss {last['loss']:.4f} acc {last['accuracy']:.3f} -> {model_dir}"
        )

    run_guarded(run)


@main.command("eval")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--images-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--model-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--mode", default="refined", show_default=True,
              type=click.Choice(["initial", "refined"]))
@click.option("--val-split-only/--all-records", default=True, show_default=True)
@click.option("--seed", type=int, default=None)
@config_defaults
def eval_cmd(manifest_path, images_root, model_dir, out_dir, mode, val_split_only, seed):
    """Evaluate on the validation split and write report files + prediction log."""

    def run():
        from .classification import load_classifier
        from .evaluation import evaluate
        from .manifest import Split, load_manifest, split_subset
        from .metrics import render_report
        from .segmentation import load_segmenter

        seed_ = seed if seed is not None else DEFAULT_SEED
        dataset = load_manifest(manifest_path)
        if val_split_only and any(r.split is Split.VALIDATION for r in dataset.records):
            dataset = split_subset(dataset, Split.VALIDATION)
        seg = load_segmenter(model_dir)
        cls = load_classifier(model_dir)
        out = Path(out_dir)
        write_run_header(out, "eval", seed_, dict(
            manifest=manifest_path, model_dir=model_dir, mode=mode))
        report = evaluate(seg, cls, dataset, mode=mode, images_root=images_root,
                          log_path=out / "predictions.csv")
        for format in ("markdown", "json", "csv"):
            suffix = {"markdown": "md", "json": "json", "csv": "csv"}[format]
            (out / f"report.{suffix}").write_text(
                render_report(report.rows, report.overall, format), encoding="utf-8"
            )
        click.echo(f"evaluated {len(report.log)} images (mode {mode}); "
                   f"overall accuracy {report.overall:.3f} -> {out}")

    run_guarded(run)


@main.command()
@click.option("--predictions", required=True, type=click.Path(exists=True),
              help="Prediction log CSV from a previous eval run.")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--mode", default="refined", show_default=True,
              type=click.Choice(["initial", "refined"]))
@config_defaults
def report(predictions, out_dir, mode):
    """Re-score a persisted prediction log and render report files."""

    def run():
        from .evaluation import read_prediction_log, score_log
        from .metrics import render_report

        entries = read_prediction_log(predictions)
        rows, overall = score_log(entries, mode=mode)
        out = Path(out_dir)
        write_run_header(out, "report", DEFAULT_SEED, dict(predictions=predictions, mode=mode))
        for format in ("markdown", "json", "csv"):
            suffix = {"markdown": "md", "json": "json", "csv": "csv"}[format]
            (out / f"report.{suffix}").write_text(
                render_report(rows, overall, format), encoding="utf-8"
            )
        click.echo(f"re-scored {len(entries)} predictions; overall {overall:.3f} -> {out}")

    run_guarded(run)


@main.command()
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--model-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--saliency-out", type=click.Path(), default=None,
              help="Write the saliency overlay PNG here.")
@click.option("--threshold", default=0.5, show_default=True)
@config_defaults
def infer(image_path, model_dir, saliency_out, threshold):
    """Run the full pipeline on one image; result JSON on stdout."""

    def run():
        from .classification import load_classifier
        from .imaging import load_rgb, save_png
        from .pipeline import refine_and_classify, saliency_overlay
        from .segmentation import load_segmenter
        from .service.worker import result_payload

        seg = load_segmenter(model_dir)
        cls = load_classifier(model_dir)
        image = load_rgb(image_path)
        result = refine_and_classify(seg, cls, image, threshold=threshold)
        if saliency_out:
            save_png(saliency_overlay(image, result.saliency), saliency_out)
        click.echo(json.dumps(result_payload(result), indent=2))

    run_guarded(run)


@main.command()
@click.option("--model-dir", type=click.Path(exists=True, file_okay=False), default=None,
              envvar="LT_MODEL_DIR")
@click.option("--store", "store_path", type=click.Path(), default=None, envvar="LT_STORE_PATH")
@click.option("--images-root", type=click.Path(), default=".", envvar="LT_IMAGES_ROOT")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), default=None,
              envvar="LT_MANIFEST_PATH", help="Manifest imported into the review store.")
@click.option("--review-token", default="", envvar="LT_REVIEW_TOKEN")
@click.option("--max-upload-bytes", type=int, default=None, envvar="LT_MAX_UPLOAD_BYTES")
@click.option("--education-path", type=click.Path(exists=True), default=None,
              envvar="LT_EDUCATION_PATH")
@click.option("--webui-dir", type=click.Path(exists=True, file_okay=False), default=None,
              envvar="LT_WEBUI_DIR", help="Serve a built web UI from this directory.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@config_defaults
def serve(model_dir, store_path, images_root, manifest_path, review_token,
          max_upload_bytes, education_path, webui_dir, host, port):
    """Run the HTTP service (submission, results, review, analytics)."""

    def run():
        import uvicorn

        from .service.app import DEFAULT_MAX_UPLOAD_BYTES, ServiceConfig, create_app

        if not model_dir or not store_path:
            raise click.UsageError("--model-dir and --store are required "
                                   "(or LT_MODEL_DIR / LT_STORE_PATH)")
        config = ServiceConfig(
            model_dir=Path(model_dir),
            store_path=Path(store_path),
            images_root=Path(images_root),
            education_path=Path(education_path) if education_path else None,
            max_upload_bytes=max_upload_bytes or DEFAULT_MAX_UPLOAD_BYTES,
            review_token=review_token,
            manifest_path=Path(manifest_path) if manifest_path else None,
            webui_dir=Path(webui_dir) if webui_dir else None,
        )
        uvicorn.run(create_app(config), host=host, port=port, log_level="info")

    run_guarded(run)


if __name__ == "__main__":
    main()
