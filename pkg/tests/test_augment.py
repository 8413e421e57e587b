import random

import numpy as np
import pytest

from lesion_triage.augment import (
    LesionPattern,
    OverlayRecipe,
    TransformConfig,
    TransformParams,
    apply_transform_params,
    balance_classes,
    complexion_shift_for,
    compose_overlay,
    composite_pattern,
    extract_pattern,
    random_recipe,
    random_transform,
    sample_transform_params,
)
from lesion_triage.errors import (
    DimensionMismatchError,
    EmptyMaskError,
    InsufficientSourcesError,
    PatternLargerThanBaseError,
    PlacementOutsideSubjectError,
)
from lesion_triage.imaging import save_png
from lesion_triage.manifest import (
    Dataset,
    DiseaseClass,
    Source,
    Verification,
    class_distribution,
)

from util import make_record

WARTS = DiseaseClass.GENITAL_WARTS


def constant_image(h, w, color):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:] = color
    return img


def make_pattern(h=10, w=10, color=(255, 0, 0), cls=WARTS):
    rgba = np.zeros((h, w, 4), dtype=np.uint8)
    rgba[:, :, :3] = color
    rgba[:, :, 3] = 255
    return LesionPattern(rgba, cls, "src-0", tuple(float(c) for c in color))


class TestExtractPattern:
    def test_full_mask_identity(self):
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, (20, 30, 3), dtype=np.uint8)
        mask = np.ones((20, 30), dtype=bool)
        pattern = extract_pattern(image, mask, WARTS)
        assert pattern.pixels.shape == (20, 30, 4)
        assert np.array_equal(pattern.pixels[:, :, :3], image)
        assert (pattern.pixels[:, :, 3] == 255).all()

    def test_red_square_crop_and_mean(self):
        image = constant_image(100, 100, (0, 0, 0))
        image[40:50, 60:70] = (255, 0, 0)
        mask = np.zeros((100, 100), dtype=bool)
        mask[40:50, 60:70] = True
        pattern = extract_pattern(image, mask, WARTS)
        assert pattern.pixels.shape == (10, 10, 4)
        assert pattern.mean_color == (255.0, 0.0, 0.0)

    def test_random_blob_mean_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(5)
        image = rng.integers(0, 256, (40, 40, 3), dtype=np.uint8)
        mask = rng.random((40, 40)) < 0.3
        mask[20, 20] = True
        pattern = extract_pattern(image, mask, WARTS)
        sums = np.zeros(3)
        count = 0
        for y in range(40):
            for x in range(40):
                if mask[y, x]:
                    sums += image[y, x]
                    count += 1
        assert pattern.mean_color == pytest.approx(tuple(sums / count))

    def test_empty_mask(self):
        with pytest.raises(EmptyMaskError):
            extract_pattern(constant_image(10, 10, (1, 2, 3)), np.zeros((10, 10), bool), WARTS)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            extract_pattern(constant_image(10, 10, (1, 2, 3)), np.zeros((5, 5), bool), WARTS)

    def test_non_diseased_pattern_rejected(self):
        with pytest.raises(ValueError):
            make_pattern(cls=DiseaseClass.NON_DISEASED)

    def test_sparse_alpha_rejected(self):
        rgba = np.zeros((100, 100, 4), dtype=np.uint8)
        rgba[0, 0, 3] = 255  # far below the 1% floor
        with pytest.raises(ValueError):
            LesionPattern(rgba, WARTS, "x", (0.0, 0.0, 0.0))


class TestCompositePattern:
    def test_identity_recipe_byte_equal(self):
        base = constant_image(50, 50, (100, 100, 100))
        mask = np.ones((50, 50), dtype=bool)
        pattern = make_pattern(10, 10, (200, 30, 40))
        recipe = OverlayRecipe(placement_center=(0.5, 0.5))
        out = composite_pattern(base, mask, pattern, recipe, feather_px=0)
        diff = np.any(out != base, axis=2)
        ys, xs = np.nonzero(diff)
        region = out[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]
        assert np.array_equal(region, pattern.pixels[:, :, :3])

    def test_pixels_outside_footprint_unchanged(self):
        base = np.random.default_rng(1).integers(0, 256, (50, 50, 3), dtype=np.uint8)
        mask = np.ones((50, 50), dtype=bool)
        pattern = make_pattern(10, 10)
        recipe = OverlayRecipe(placement_center=(0.5, 0.5))
        out = composite_pattern(base, mask, pattern, recipe)
        diff = np.any(out != base, axis=2)
        assert diff.sum() <= pattern.pixels.shape[0] * pattern.pixels.shape[1]
        ys, xs = np.nonzero(diff)
        assert ys.max() - ys.min() < pattern.pixels.shape[0]
        assert xs.max() - xs.min() < pattern.pixels.shape[1]

    def test_complexion_shift_arithmetic_oracle(self):
        base = constant_image(50, 50, (0, 0, 0))
        mask = np.ones((50, 50), dtype=bool)
        pattern = make_pattern(10, 10, (240, 100, 7))
        recipe = OverlayRecipe(placement_center=(0.5, 0.5), complexion_shift=(20, 10, 5))
        out = composite_pattern(base, mask, pattern, recipe, feather_px=0)
        diff = np.any(out != base, axis=2)
        region = out[diff].astype(float)
        expected = np.clip(np.array([240, 100, 7]) + np.array([20, 10, 5]), 0, 255)
        assert region.mean(axis=0) == pytest.approx(tuple(expected))

    def test_complexion_shift_clamps(self):
        base = constant_image(50, 50, (0, 0, 0))
        mask = np.ones((50, 50), dtype=bool)
        pattern = make_pattern(10, 10, (250, 250, 250))
        recipe = OverlayRecipe(placement_center=(0.5, 0.5), complexion_shift=(20, 20, 20))
        out = composite_pattern(base, mask, pattern, recipe, feather_px=0)
        diff = np.any(out != base, axis=2)
        assert diff.sum() == 100
        assert (out[diff] == 255).all()

    def test_placement_outside_subject(self):
        base = constant_image(50, 50, (0, 0, 0))
        mask = np.zeros((50, 50), dtype=bool)
        mask[:10, :10] = True
        pattern = make_pattern(6, 6)
        with pytest.raises(PlacementOutsideSubjectError):
            composite_pattern(base, mask, pattern, OverlayRecipe(placement_center=(0.9, 0.9)))

    def test_pattern_larger_than_base_after_scaling(self):
        base = constant_image(30, 30, (0, 0, 0))
        mask = np.ones((30, 30), dtype=bool)
        pattern = make_pattern(20, 20)
        with pytest.raises(PatternLargerThanBaseError):
            composite_pattern(base, mask, pattern, OverlayRecipe((0.5, 0.5), scale=2.0))

    def test_footprint_locality_randomized(self):
        # Randomized recipes: pixels whose value changed must form a subset of
        # the transformed footprint; verified indirectly by diffing.
        rng = random.Random(42)
        base_rng = np.random.default_rng(42)
        for _ in range(60):
            base = base_rng.integers(0, 256, (48, 48, 3), dtype=np.uint8)
            mask = np.ones((48, 48), dtype=bool)
            pattern = make_pattern(rng.randint(5, 12), rng.randint(5, 12),
                                   tuple(rng.randrange(256) for _ in range(3)))
            recipe = random_recipe(rng, (48, 48), mask, pattern)
            out = composite_pattern(base, mask, pattern, recipe)
            diff = np.any(out != base, axis=2)
            # Recompute the footprint independently: alpha > 0 after transform.
            from lesion_triage.augment import _transform_pattern
            transformed = _transform_pattern(pattern.pixels, recipe)
            assert diff.sum() <= (transformed[:, :, 3] > 0).sum()

    def test_seed_determinism(self):
        rng_a, rng_b = random.Random(9), random.Random(9)
        mask = np.ones((48, 48), dtype=bool)
        pattern = make_pattern(8, 8)
        recipe_a = random_recipe(rng_a, (48, 48), mask, pattern)
        recipe_b = random_recipe(rng_b, (48, 48), mask, pattern)
        assert recipe_a == recipe_b
        base = constant_image(48, 48, (60, 70, 80))
        assert np.array_equal(
            composite_pattern(base, mask, pattern, recipe_a),
            composite_pattern(base, mask, pattern, recipe_b),
        )


class TestComposeOverlay:
    def test_output_record_contract(self, tmp_path):
        base_img = constant_image(40, 40, (120, 110, 100))
        save_png(base_img, tmp_path / "base.png")
        base = make_record("base-1", DiseaseClass.NON_DISEASED, path="base.png",
                           width_px=40, height_px=40)
        pattern = make_pattern(8, 8, (200, 50, 60), DiseaseClass.SYPHILITIC_CHANCRE)
        recipe = OverlayRecipe(placement_center=(0.5, 0.5), recipe_id="r-77")
        mask = np.ones((40, 40), dtype=bool)
        rec = compose_overlay(base, mask, pattern, recipe, tmp_path, tmp_path / "aug")
        assert rec.label is DiseaseClass.SYPHILITIC_CHANCRE
        assert rec.provenance.source is Source.AUGMENTED
        assert rec.verification is Verification.UNVERIFIED
        assert rec.base_id == "base-1"
        assert rec.recipe_id == "r-77"
        assert (tmp_path / "aug" / f"{rec.id}.png").exists()
        assert (tmp_path / "aug" / f"{rec.id}.recipe.json").exists()

    def test_non_diseased_base_required(self, tmp_path):
        base = make_record("b", DiseaseClass.GENITAL_WARTS)
        with pytest.raises(ValueError):
            compose_overlay(base, np.ones((4, 4), bool), make_pattern(),
                            OverlayRecipe((0.5, 0.5)), tmp_path, tmp_path)


class TestComplexionShift:
    def test_moves_halfway_toward_subject_mean(self):
        base = constant_image(20, 20, (200, 160, 140))
        mask = np.ones((20, 20), dtype=bool)
        pattern = make_pattern(5, 5, (100, 60, 40))
        shift = complexion_shift_for(pattern, base, mask, weight=0.5)
        assert shift == (50, 50, 50)


class TestRandomTransform:
    def test_identity_config(self):
        rng = np.random.default_rng(3)
        image = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        out = random_transform(image, TransformConfig(), seed=5)
        assert np.array_equal(out, image)

    def test_identity_config_with_resize(self):
        rng = np.random.default_rng(3)
        image = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        out = random_transform(image, TransformConfig(), seed=5, output_size=(16, 16))
        from lesion_triage.imaging import resize_rgb
        assert np.array_equal(out, resize_rgb(image, (16, 16)))

    def test_brightness_scalar_multiply_oracle(self):
        rng = np.random.default_rng(8)
        image = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
        params = TransformParams(brightness=1.2)
        out = apply_transform_params(image, params)
        expected = np.clip(image.astype(np.float64) * 1.2, 0, 255).astype(np.uint8)
        assert np.array_equal(out, expected)

    def test_repeat_same_seed_identical_bytes(self):
        rng = np.random.default_rng(1)
        image = rng.integers(0, 256, (32, 32, 3), dtype=np.uint8)
        config = TransformConfig(rotation_range=25, rescale_range=0.2, shift_range_x=0.1,
                                 shift_range_y=0.1, brightness_range=0.3,
                                 allow_flip_h=True, allow_flip_v=True,
                                 size_jitter=0.15, color_jitter=0.1)
        a = random_transform(image, config, seed=99)
        b = random_transform(image, config, seed=99)
        assert np.array_equal(a, b)
        c = random_transform(image, config, seed=100)
        assert not np.array_equal(a, c)

    def test_sampled_params_within_ranges(self):
        config = TransformConfig(rotation_range=20, rescale_range=0.25, shift_range_x=0.1,
                                 shift_range_y=0.05, brightness_range=0.4,
                                 allow_flip_h=True, allow_flip_v=False,
                                 size_jitter=0.2, color_jitter=0.15)
        for seed in range(10_000):
            p = sample_transform_params(config, random.Random(seed))
            assert -20 <= p.rotation <= 20
            assert 0.75 <= p.zoom <= 1.25
            assert -0.1 <= p.shift_x <= 0.1
            assert -0.05 <= p.shift_y <= 0.05
            assert 0.6 <= p.brightness <= 1.4
            assert p.flip_v is False
            assert 0.8 <= p.size_factor <= 1.2
            assert all(0.85 <= f <= 1.15 for f in p.color_factors)

    def test_negative_range_rejected(self):
        with pytest.raises(ValueError):
            TransformConfig(rotation_range=-1)

    def test_output_dimensions_forced(self):
        image = np.zeros((40, 30, 3), dtype=np.uint8)
        config = TransformConfig(rescale_range=0.3, size_jitter=0.3)
        out = random_transform(image, config, seed=4, output_size=(28, 28))
        assert out.shape == (28, 28, 3)


class TestBalanceClasses:
    def _bases(self, tmp_path, n=3):
        records = []
        for i in range(n):
            img = constant_image(32, 32, (150 + i, 140, 130))
            save_png(img, tmp_path / f"base-{i}.png")
            records.append(make_record(f"base-{i}", DiseaseClass.NON_DISEASED,
                                       path=f"base-{i}.png", width_px=32, height_px=32))
        return records

    def test_deficit_arithmetic(self, tmp_path):
        records = [make_record(f"a{i}", WARTS) for i in range(500)]
        records += [make_record(f"b{i}", DiseaseClass.HERPES_ERUPTION) for i in range(100)]
        bases = self._bases(tmp_path)
        ds = Dataset(records + bases)
        patterns = [make_pattern(6, 6, (10, 200, 10), DiseaseClass.HERPES_ERUPTION),
                    make_pattern(6, 6, (210, 190, 60), WARTS)]
        out = balance_classes(ds, bases, patterns, target=500, seed=1,
                              images_root=tmp_path, out_dir=tmp_path / "aug")
        new = [r for r in out.records if r.id not in {x.id for x in ds.records}]
        assert len(new) == 400
        assert all(r.label is DiseaseClass.HERPES_ERUPTION for r in new)
        assert all(r.verification is Verification.UNVERIFIED for r in new)
        assert class_distribution(out)[DiseaseClass.HERPES_ERUPTION] == 500

    def test_already_balanced_noop(self, tmp_path):
        records = []
        for cls in (WARTS, DiseaseClass.HERPES_ERUPTION):
            for i in range(10):
                records.append(make_record(f"{cls.value}{i}", cls))
        ds = Dataset(records)
        out = balance_classes(ds, self._bases(tmp_path), [make_pattern()], target=10,
                              seed=0, images_root=tmp_path, out_dir=tmp_path / "aug")
        assert [r.id for r in out.records] == [r.id for r in ds.records]

    def test_randomized_deficits_reach_target(self, tmp_path):
        rng = random.Random(17)
        records = []
        for cls in DiseaseClass:
            if cls is DiseaseClass.NON_DISEASED:
                continue
            for i in range(rng.randint(2, 9)):
                records.append(make_record(f"{cls.value}-{i}", cls))
        bases = self._bases(tmp_path)
        ds = Dataset(records + bases)
        patterns = [
            make_pattern(6, 6, (200, 30, 30), cls)
            for cls in DiseaseClass if cls is not DiseaseClass.NON_DISEASED
        ]
        out = balance_classes(ds, bases, patterns, target=9, seed=3,
                              images_root=tmp_path, out_dir=tmp_path / "aug")
        dist = class_distribution(out)
        for cls in DiseaseClass:
            if cls is not DiseaseClass.NON_DISEASED:
                assert dist[cls] == 9
        # originals untouched
        for rec in ds.records:
            assert out.by_id(rec.id) == rec

    def test_insufficient_sources(self, tmp_path):
        ds = Dataset([make_record("w0", WARTS),
                      make_record("s0", DiseaseClass.SYPHILITIC_CHANCRE)])
        bases = self._bases(tmp_path)
        patterns = [make_pattern(6, 6, (1, 2, 3), WARTS)]  # nothing for syphilis
        with pytest.raises(InsufficientSourcesError):
            balance_classes(ds, bases, patterns, target=5, seed=0,
                            images_root=tmp_path, out_dir=tmp_path / "aug")

    def test_target_below_current_rejected(self, tmp_path):
        ds = Dataset([make_record(f"w{i}", WARTS) for i in range(10)])
        with pytest.raises(ValueError):
            balance_classes(ds, self._bases(tmp_path), [make_pattern()], target=5,
                            seed=0, images_root=tmp_path, out_dir=tmp_path / "aug")
