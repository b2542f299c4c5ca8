"""
Tests for the Patches App

Run tests with: python manage.py test apps.patches
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from PIL import Image

from apps.core.exceptions import ConfigurationError, FormatError, ImageReadError, UsageError
from apps.core.seeding import patch_rng
from apps.patches.augment import AugmentationConfig, augment
from apps.patches.cache import ID_BYTES, read_patch_cache, write_patch_cache
from apps.patches.extraction import PatchRecord, extract_patches, label_patch
from apps.patches.images import GrayImage, load_image, save_gray_png
from apps.patches.labels import Author, PatchLabel


class LoadImageTests(SimpleTestCase):
    """Tests for load_image."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_white_png(self):
        path = self.dir / 'white.png'
        Image.fromarray(np.full((4, 5), 255, dtype=np.uint8)).save(path)
        image = load_image(path)
        self.assertEqual((image.width, image.height), (5, 4))
        np.testing.assert_array_equal(image.pixels, 1.0)
        self.assertEqual(image.painting_id, 'white')

    def test_black_pgm(self):
        path = self.dir / 'black.pgm'
        Image.fromarray(np.zeros((3, 3), dtype=np.uint8)).save(path)
        np.testing.assert_array_equal(load_image(path).pixels, 0.0)

    def test_red_pixel_luminance(self):
        """RGB (255, 0, 0) maps to 0.299."""
        path = self.dir / 'red.ppm'
        rgb = np.zeros((1, 1, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        Image.fromarray(rgb).save(path)
        self.assertAlmostEqual(load_image(path).pixels[0, 0], 0.299, places=12)

    def test_missing_file(self):
        with self.assertRaises(ImageReadError) as ctx:
            load_image(self.dir / 'nope.png')
        self.assertIn('nope.png', str(ctx.exception))

    def test_corrupt_file(self):
        path = self.dir / 'broken.png'
        path.write_bytes(b'\x89PNG\r\n\x1a\n not really')
        with self.assertRaises(ImageReadError):
            load_image(path)

    def test_float_mode_unsupported(self):
        path = self.dir / 'float.tiff'
        Image.fromarray(np.zeros((2, 2), dtype=np.float32)).save(path)
        with self.assertRaises(FormatError):
            load_image(path)

    def test_save_gray_png_round_trip_levels(self):
        path = save_gray_png(self.dir / 'out.png', np.array([[0.0, 1.0]]))
        np.testing.assert_array_equal(load_image(path).pixels, [[0.0, 1.0]])


class ExtractPatchesTests(SimpleTestCase):
    """Tests for extract_patches."""

    def test_600_square_gives_nine(self):
        image = GrayImage(np.ones((600, 600)))
        patches = extract_patches(image, 300, 150)
        self.assertEqual(len(patches), 9)
        self.assertEqual({(p.x, p.y) for p in patches}, {(x, y) for x in (0, 150, 300) for y in (0, 150, 300)})

    def test_count_matches_enumeration(self):
        """Count formula agrees with brute-force enumeration of offsets."""
        for width, height, size, stride in [(37, 20, 8, 3), (50, 50, 10, 10), (9, 30, 9, 1)]:
            brute = [
                (x, y) for y in range(height) for x in range(width)
                if x % stride == 0 and y % stride == 0 and x + size <= width and y + size <= height
            ]
            patches = extract_patches(GrayImage(np.ones((height, width))), size, stride)
            self.assertEqual(len(patches), ((width - size) // stride + 1) * ((height - size) // stride + 1))
            self.assertEqual(sorted((p.x, p.y) for p in patches), sorted(brute))

    def test_single_tile(self):
        patches = extract_patches(GrayImage(np.ones((300, 300))))
        self.assertEqual([(p.x, p.y) for p in patches], [(0, 0)])

    def test_too_narrow(self):
        self.assertEqual(extract_patches(GrayImage(np.ones((300, 299)))), [])

    def test_overlap_structure(self):
        """Neighboring patches share size - stride columns."""
        pixels = np.random.default_rng(0).random((8, 12))
        patches = extract_patches(GrayImage(pixels), 8, 2)
        np.testing.assert_array_equal(patches[0].pixels[:, 2:], patches[1].pixels[:, :6])

    def test_invalid_stride(self):
        with self.assertRaises(ConfigurationError):
            extract_patches(GrayImage(np.ones((10, 10))), 4, 5)


class LabelPatchTests(SimpleTestCase):
    """Tests for label_patch."""

    def test_all_white_robot_is_blank(self):
        self.assertEqual(label_patch(np.ones((10, 10)), Author.ROBOT), PatchLabel.BLANK)

    def test_exactly_95_percent_is_blank(self):
        pixels = np.ones((20, 20))
        pixels.reshape(-1)[:20] = 0.5
        self.assertEqual(label_patch(pixels, Author.HUMAN), PatchLabel.BLANK)

    def test_949_per_mille_is_author(self):
        pixels = np.ones((100, 10))
        pixels.reshape(-1)[:51] = 0.2
        self.assertEqual(label_patch(PatchRecord('p', 0, 0, 10, pixels=pixels), 'human'), PatchLabel.HUMAN)

    def test_whiteness_cutoff(self):
        """0.98 counts as white, 0.979 does not."""
        self.assertEqual(label_patch(np.full((4, 4), 0.98), Author.HUMAN), PatchLabel.BLANK)
        self.assertEqual(label_patch(np.full((4, 4), 0.979), Author.HUMAN), PatchLabel.HUMAN)

    def test_hybrid_rejected(self):
        with self.assertRaises(UsageError):
            label_patch(np.ones((4, 4)), Author.HYBRID)


class AugmentTests(SimpleTestCase):
    """Tests for augment."""

    def marker(self, n=31):
        pixels = np.ones((n, n))
        pixels[2:5, 3:9] = 0.0
        pixels[20, 25] = 0.3
        return pixels

    def test_zero_probability_is_identity(self):
        config = AugmentationConfig(apply_prob=0.0)
        pixels = self.marker()
        np.testing.assert_array_equal(augment(pixels, config, np.random.default_rng(1)), pixels)

    def test_horizontal_flip_mirrors(self):
        config = AugmentationConfig(flip_v=False, rotation_deg=0, rrc_scale=(1.0, 1.0), blur_kernel=1, crop_pad=0, apply_prob=1.0)
        pixels = self.marker()
        flipped = augment(pixels, config, np.random.default_rng(0))
        np.testing.assert_array_equal(flipped, pixels[:, ::-1])
        np.testing.assert_array_equal(augment(flipped, config, np.random.default_rng(0)), pixels)

    def test_rotation_moves_dot(self):
        """+15 degrees turns a dot 10 px right of center counter-clockwise."""
        from apps.patches.augment import rotate
        pixels = np.ones((31, 31))
        pixels[15, 25] = 0.0
        rotated = rotate(pixels, 15.0)
        row, col = np.unravel_index(np.argmin(rotated), rotated.shape)
        expected_col = 15 + 10 * np.cos(np.deg2rad(15))
        expected_row = 15 - 10 * np.sin(np.deg2rad(15))
        self.assertLessEqual(abs(row - expected_row), 1.0)
        self.assertLessEqual(abs(col - expected_col), 1.0)

    def test_rotation_fills_white(self):
        from apps.patches.augment import rotate
        rotated = rotate(np.zeros((21, 21)), 15.0)
        self.assertEqual(rotated[0, 0], 1.0)

    def test_shape_and_range_preserved(self):
        config = AugmentationConfig(apply_prob=1.0)
        rng = np.random.default_rng(3)
        for _ in range(10):
            out = augment(rng.random((24, 24)), config, rng)
            self.assertEqual(out.shape, (24, 24))
            self.assertGreaterEqual(out.min(), 0.0)
            self.assertLessEqual(out.max(), 1.0)

    def test_deterministic_per_patch_stream(self):
        config = AugmentationConfig()
        pixels = self.marker()
        first = augment(pixels, config, patch_rng(7, 'human_painting_1', 0, 150))
        second = augment(pixels, config, patch_rng(7, 'human_painting_1', 0, 150))
        np.testing.assert_array_equal(first, second)

    def test_config_validation(self):
        with self.assertRaises(ConfigurationError):
            AugmentationConfig(blur_kernel=4)
        with self.assertRaises(ConfigurationError):
            AugmentationConfig(rrc_scale=(0.0, 1.0))


class ManifestTests(SimpleTestCase):
    """Tests for manifest and patch cache files."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_relative_paths_resolve_against_manifest(self):
        from apps.patches.manifest import load_manifest
        manifest = self.dir / 'manifest.jsonl'
        manifest.write_text(
            json.dumps({'path': 'images/a.png', 'painting_id': 'a', 'author': 'human'}) + '\n\n'
            + json.dumps({'path': 'images/b.png', 'painting_id': 'b', 'author': 'hybrid'}) + '\n'
        )
        entries = load_manifest(manifest)
        self.assertEqual([e.painting_id for e in entries], ['a', 'b'])
        self.assertEqual(entries[0].path, self.dir / 'images' / 'a.png')
        self.assertIs(entries[1].author, Author.HYBRID)
        self.assertFalse(entries[1].is_pure)

    def test_invalid_author(self):
        from apps.patches.manifest import load_manifest
        manifest = self.dir / 'manifest.jsonl'
        manifest.write_text(json.dumps({'path': 'a.png', 'painting_id': 'a', 'author': 'alien'}) + '\n')
        with self.assertRaises(FormatError) as ctx:
            load_manifest(manifest)
        self.assertIn(':1:', str(ctx.exception))

    def test_write_then_load(self):
        from apps.patches.manifest import ManifestEntry, load_manifest, write_manifest
        entries = [ManifestEntry(self.dir / 'img' / 'x.png', 'x', Author.ROBOT)]
        path = write_manifest(self.dir / 'manifest.jsonl', entries)
        self.assertIn('"path":"img/x.png"', path.read_text())
        self.assertEqual(load_manifest(path)[0].path.resolve(), entries[0].path.resolve())

    def test_patch_cache(self):
        rng = np.random.default_rng(0)
        patches = [
            PatchRecord('human_painting_1', 0, 150, 4, PatchLabel.HUMAN, rng.random((4, 4)).astype(np.float32)),
            PatchRecord('hybrid_painting_1', 150, 0, 4, None, rng.random((4, 4)).astype(np.float32)),
        ]
        path = write_patch_cache(self.dir / 'patches.bmpc', patches)
        self.assertEqual(path.read_bytes()[:4], b'BMPC')
        loaded = read_patch_cache(path)
        self.assertEqual([(p.painting_id, p.x, p.y, p.label) for p in loaded],
                         [('human_painting_1', 0, 150, PatchLabel.HUMAN), ('hybrid_painting_1', 150, 0, None)])
        np.testing.assert_array_equal(loaded[1].pixels, patches[1].pixels)

    def test_patch_cache_bad_magic(self):
        path = self.dir / 'bad.bmpc'
        path.write_bytes(b'XXXX' + b'\x00' * 20)
        with self.assertRaises(FormatError):
            read_patch_cache(path)

    def test_patch_cache_long_id_leaves_no_file(self):
        """An over-long painting id anywhere in the batch fails before anything is written."""
        pixels = np.zeros((4, 4), dtype=np.float32)
        patches = [
            PatchRecord('human_painting_1', 0, 0, 4, PatchLabel.HUMAN, pixels),
            PatchRecord('x' * (ID_BYTES + 1), 4, 0, 4, PatchLabel.HUMAN, pixels),
        ]
        path = self.dir / 'long.bmpc'
        with self.assertRaisesRegex(FormatError, 'exceeds'):
            write_patch_cache(path, patches)
        self.assertFalse(path.exists())
