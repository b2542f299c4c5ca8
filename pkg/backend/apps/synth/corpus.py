"""
Synthetic corpus emission: images, masks, a manifest and hybrid annotations.

Layout under out_dir:

    images/<painting_id>.png     8-bit grayscale canvas
    masks/<painting_id>.png      per-pixel labels {0 blank, 1 human, 2 robot}
    manifest.jsonl               one line per painting
    annotations.jsonl            auto-annotated regions of hybrid paintings
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from scipy import ndimage

from apps.core.exceptions import UsageError
from apps.core.seeding import derive_seed
from apps.entropy.annotations import AnnotationRegion, write_annotations
from apps.patches.extraction import DEFAULT_PATCH_SIZE
from apps.patches.images import save_gray_png, save_label_png
from apps.patches.labels import Author, PatchLabel
from apps.patches.manifest import ManifestEntry, write_manifest
from apps.synth.render import generate_hybrid, generate_pure
from apps.synth.styles import StyleParams

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.jsonl'
ANNOTATIONS_NAME = 'annotations.jsonl'
MIN_SHARE = 0.1


@dataclass
class CorpusResult:
    manifest_path: Path
    annotations_path: Path = None
    entries: list = field(default_factory=list)
    regions: list = field(default_factory=list)


def painting_ids(n_human, n_robot, n_hybrid):
    """(painting_id, author) pairs in manifest order."""
    for count in (n_human, n_robot, n_hybrid):
        if count < 0:
            raise UsageError(f'painting counts must be >= 0, got {(n_human, n_robot, n_hybrid)}')
    plan = []
    for author, count in ((Author.HUMAN, n_human), (Author.ROBOT, n_robot), (Author.HYBRID, n_hybrid)):
        plan.extend((f'{author.value}_painting_{k}', author) for k in range(1, count + 1))
    return plan


def auto_annotations(painting, window=DEFAULT_PATCH_SIZE, min_share=MIN_SHARE):
    """
    Bounding rectangles of areas where both authors painted within one window.

    A pixel qualifies when each author's mask covers at least min_share of
    the window centered on it; each connected qualifying area gives one
    rectangle, kept only when it holds pixels of both authors.
    """
    mask = painting.mask
    human = ndimage.uniform_filter((mask == PatchLabel.HUMAN).astype(np.float64), size=window, mode='constant')
    robot = ndimage.uniform_filter((mask == PatchLabel.ROBOT).astype(np.float64), size=window, mode='constant')
    labeled, _ = ndimage.label((human >= min_share) & (robot >= min_share))

    regions = []
    for found in ndimage.find_objects(labeled):
        if found is None:
            continue
        rows, cols = found
        inside = mask[rows, cols]
        if not ((inside == PatchLabel.HUMAN).any() and (inside == PatchLabel.ROBOT).any()):
            continue
        regions.append(AnnotationRegion(painting.image.painting_id, cols.start, rows.start, cols.stop, rows.stop))
    return regions


def _generate(painting_id, author, size, base_seed, patch_size, mix):
    seed = derive_seed(base_seed, painting_id)
    human = StyleParams.human().for_size(size)
    robot = StyleParams.robot().for_size(size)
    if author is Author.HYBRID:
        return generate_hybrid(human, robot, size, seed, mix, painting_id, patch_size)
    style = human if author is Author.HUMAN else robot
    return generate_pure(style, size, seed, painting_id, patch_size)


def emit_corpus(n_human, n_robot, n_hybrid, size=900, base_seed=0, out_dir='.', patch_size=DEFAULT_PATCH_SIZE,
                mix=0.5, n_jobs=1):
    """
    Generate and write a synthetic corpus.

    Paintings generate in parallel (each from its own seed derived from
    base_seed and its id); all files are written from this process.

    Returns:
        CorpusResult

    Raises:
        OSError: out_dir cannot be created or written
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan = painting_ids(n_human, n_robot, n_hybrid)

    paintings = Parallel(n_jobs=n_jobs)(
        delayed(_generate)(painting_id, author, size, base_seed, patch_size, mix) for painting_id, author in plan
    )

    result = CorpusResult(manifest_path=out_dir / MANIFEST_NAME)
    for (painting_id, author), painting in zip(plan, paintings):
        image_path = save_gray_png(out_dir / 'images' / f'{painting_id}.png', painting.image.pixels)
        save_label_png(out_dir / 'masks' / f'{painting_id}.png', painting.mask)
        result.entries.append(ManifestEntry(image_path, painting_id, author))
        if author is Author.HYBRID:
            regions = auto_annotations(painting, window=patch_size)
            if not regions:
                logger.warning('%s: no area with both authors found; no annotation written', painting_id)
            result.regions.extend(regions)
        logger.info(
            '%s: painted fraction %.3f, overlap fraction %.3f', painting_id, painting.painted_fraction,
            painting.overlap_fraction,
        )

    write_manifest(result.manifest_path, result.entries)
    if n_hybrid:
        result.annotations_path = write_annotations(out_dir / ANNOTATIONS_NAME, result.regions)
    logger.info('Wrote synthetic corpus of %d paintings to %s', len(plan), out_dir)
    return result
