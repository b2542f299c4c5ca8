"""
Tests for the Synth App

Run tests with: python manage.py test apps.synth
"""

import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from apps.core.exceptions import ConfigurationError, UsageError
from apps.entropy.annotations import read_annotations
from apps.patches.extraction import WHITE_LEVEL, extract_labeled_patches, label_patch
from apps.patches.images import load_image, load_label_png
from apps.patches.labels import Author, PatchLabel
from apps.patches.manifest import load_manifest
from apps.synth.corpus import emit_corpus
from apps.synth.render import generate_hybrid, generate_pure
from apps.synth.styles import StyleParams

SIZE = 192
PATCH = 64


def small(style):
    return style.for_size(SIZE)


class StyleTests(SimpleTestCase):
    """Tests for StyleParams."""

    def test_styles_differ(self):
        human, robot = StyleParams.human(), StyleParams.robot()
        self.assertGreaterEqual(human.curvature_std ** 2, 4 * robot.curvature_std ** 2)
        self.assertGreaterEqual(human.width_std ** 2, 4 * robot.width_std ** 2)

    def test_scaled(self):
        scaled = StyleParams.human().scaled(0.5)
        self.assertEqual(scaled.step_length, 3.0)
        self.assertEqual(scaled.stroke_count, StyleParams.human().stroke_count)
        with self.assertRaises(ConfigurationError):
            StyleParams.human().scaled(0)


class GeneratePureTests(SimpleTestCase):
    """Tests for generate_pure."""

    def test_deterministic(self):
        first = generate_pure(small(StyleParams.human()), SIZE, 3, patch_size=PATCH)
        second = generate_pure(small(StyleParams.human()), SIZE, 3, patch_size=PATCH)
        np.testing.assert_array_equal(first.image.pixels, second.image.pixels)
        np.testing.assert_array_equal(first.mask, second.mask)

    def test_no_strokes(self):
        style = replace(small(StyleParams.robot()), stroke_count=(0, 0))
        painting = generate_pure(style, SIZE, 1, patch_size=PATCH)
        np.testing.assert_array_equal(painting.image.pixels, 1.0)
        self.assertFalse(painting.mask.any())

    def test_mask_matches_whiteness(self):
        for style in (StyleParams.human(), StyleParams.robot()):
            painting = generate_pure(small(style), SIZE, 5, patch_size=PATCH)
            painted = painting.mask != PatchLabel.BLANK
            np.testing.assert_array_equal(painted, painting.image.pixels < WHITE_LEVEL)
            self.assertEqual(set(np.unique(painting.mask)) - {0}, {int(PatchLabel.for_author(style.author))})

    def test_blank_band(self):
        """One third of the canvas along one side stays white, so blank patches exist."""
        painting = generate_pure(small(StyleParams.human()), SIZE, 7, patch_size=PATCH)
        patches = extract_labeled_patches(painting.image, PATCH, PATCH // 2)
        self.assertIn(PatchLabel.BLANK, [p.label for p in patches])

    def test_patch_labels_follow_mask(self):
        painting = generate_pure(small(StyleParams.robot()), SIZE, 8, patch_size=PATCH)
        for y in range(0, SIZE - PATCH + 1, PATCH // 2):
            for x in range(0, SIZE - PATCH + 1, PATCH // 2):
                label = label_patch(painting.image.pixels[y:y + PATCH, x:x + PATCH], Author.ROBOT)
                if label is PatchLabel.BLANK:
                    continue
                window = painting.mask[y:y + PATCH, x:x + PATCH]
                counts = np.bincount(window[window > 0], minlength=3)
                self.assertEqual(int(counts.argmax()), int(label))

    def test_intensity_does_not_separate_styles(self):
        """No single intensity threshold tells painted pixels of the two styles apart at > 70%."""
        human = generate_pure(StyleParams.human().for_size(450), 450, 9, patch_size=150)
        robot = generate_pure(StyleParams.robot().for_size(450), 450, 9, patch_size=150)
        h = human.image.pixels[human.mask > 0]
        r = robot.image.pixels[robot.mask > 0]
        best = 0.0
        for threshold in np.linspace(0, 1, 101):
            accuracy = 0.5 * (np.mean(h < threshold) + np.mean(r >= threshold))
            best = max(best, accuracy, 1 - accuracy)
        self.assertLessEqual(best, 0.7)

    def test_too_small(self):
        with self.assertRaises(ConfigurationError):
            generate_pure(StyleParams.human(), 200)

    @tag('slow')
    def test_default_coverage(self):
        painting = generate_pure(StyleParams.human(), 900, 0)
        self.assertGreaterEqual(painting.painted_fraction, 0.2)
        self.assertLessEqual(painting.painted_fraction, 0.7)


class GenerateHybridTests(SimpleTestCase):
    """Tests for generate_hybrid."""

    def setUp(self):
        self.human = small(StyleParams.human())
        self.robot = small(StyleParams.robot())

    def test_both_authors_and_overlap(self):
        painting = generate_hybrid(self.human, self.robot, SIZE, 11, patch_size=PATCH)
        labels = set(np.unique(painting.mask).tolist())
        self.assertTrue({1, 2} <= labels)
        self.assertGreater(painting.overlap_fraction, 0.0)
        self.assertIs(painting.image.author, Author.HYBRID)

    def test_deterministic(self):
        first = generate_hybrid(self.human, self.robot, SIZE, 12, patch_size=PATCH)
        second = generate_hybrid(self.human, self.robot, SIZE, 12, patch_size=PATCH)
        np.testing.assert_array_equal(first.mask, second.mask)
        np.testing.assert_array_equal(first.history, second.history)

    def test_degenerate_mix(self):
        for mix in (0.0, 1.0):
            with self.assertRaises(UsageError):
                generate_hybrid(self.human, self.robot, SIZE, 1, mix=mix, patch_size=PATCH)


class EmitCorpusTests(SimpleTestCase):
    """Tests for emit_corpus."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_counts_and_annotations(self):
        result = emit_corpus(6, 6, 3, size=SIZE, base_seed=2, out_dir=self.dir, patch_size=PATCH)
        entries = load_manifest(result.manifest_path)
        self.assertEqual(len(entries), 15)
        self.assertEqual(sum(entry.author is Author.HYBRID for entry in entries), 3)
        self.assertEqual(entries[0].painting_id, 'human_painting_1')

        regions = read_annotations(result.annotations_path)
        self.assertTrue(regions)
        for region in regions:
            image = load_image(self.dir / 'images' / f'{region.painting_id}.png')
            mask = load_label_png(self.dir / 'masks' / f'{region.painting_id}.png')
            region.check_bounds(image.width, image.height)
            inside = mask[region.y0:region.y1, region.x0:region.x1]
            self.assertTrue((inside == 1).any() and (inside == 2).any())

    def test_images_match_generation(self):
        result = emit_corpus(1, 0, 0, size=SIZE, base_seed=4, out_dir=self.dir, patch_size=PATCH)
        again = emit_corpus(1, 0, 0, size=SIZE, base_seed=4, out_dir=self.dir / 'again', patch_size=PATCH)
        self.assertEqual(
            (self.dir / 'images' / 'human_painting_1.png').read_bytes(),
            (self.dir / 'again' / 'images' / 'human_painting_1.png').read_bytes(),
        )
        image = load_image(result.entries[0].path)
        mask = load_label_png(self.dir / 'masks' / 'human_painting_1.png')
        np.testing.assert_array_equal(mask > 0, image.pixels < WHITE_LEVEL)
        self.assertIsNone(again.annotations_path)

    def test_empty(self):
        result = emit_corpus(0, 0, 0, size=SIZE, out_dir=self.dir, patch_size=PATCH)
        self.assertEqual(load_manifest(result.manifest_path), [])
        self.assertFalse((self.dir / 'images').exists())

    def test_negative_count(self):
        with self.assertRaises(UsageError):
            emit_corpus(-1, 0, 0, size=SIZE, out_dir=self.dir, patch_size=PATCH)
