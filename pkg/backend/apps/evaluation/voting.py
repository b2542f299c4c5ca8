"""Painting-level verdicts from patch predictions."""

from collections import Counter
from enum import Enum

import numpy as np

from apps.core.exceptions import UsageError
from apps.patches.labels import Author, PatchLabel


class Verdict(str, Enum):
    HUMAN = 'Human'
    ROBOT = 'Robot'
    INDETERMINATE = 'Indeterminate'

    @classmethod
    def for_author(cls, author):
        author = Author.parse(author)
        if author is Author.HUMAN:
            return cls.HUMAN
        if author is Author.ROBOT:
            return cls.ROBOT
        return cls.INDETERMINATE


def majority_vote(patch_preds, posteriors=None):
    """
    Most frequent non-blank patch prediction.

    Blank predictions are dropped. A Human/Robot tie goes to the class with
    the larger summed posterior over the non-blank patches; without
    posteriors (or on an exact posterior tie) the verdict is Indeterminate,
    as it is when every patch is Blank.

    Args:
        patch_preds: Class indices or PatchLabels
        posteriors: Optional [N, 3] array aligned with patch_preds
    """
    preds = [PatchLabel(int(p)) for p in patch_preds]
    if not preds:
        raise UsageError('majority_vote needs at least one patch prediction')
    counts = Counter(p for p in preds if p is not PatchLabel.BLANK)
    human, robot = counts[PatchLabel.HUMAN], counts[PatchLabel.ROBOT]
    if human == robot == 0:
        return Verdict.INDETERMINATE
    if human > robot:
        return Verdict.HUMAN
    if robot > human:
        return Verdict.ROBOT

    if posteriors is None:
        return Verdict.INDETERMINATE
    posteriors = np.asarray(posteriors, dtype=np.float64)
    if posteriors.shape != (len(preds), len(PatchLabel)):
        raise UsageError(f'posteriors must have shape ({len(preds)}, {len(PatchLabel)})')
    non_blank = np.array([p is not PatchLabel.BLANK for p in preds])
    human_mass = posteriors[non_blank, PatchLabel.HUMAN].sum()
    robot_mass = posteriors[non_blank, PatchLabel.ROBOT].sum()
    if human_mass > robot_mass:
        return Verdict.HUMAN
    if robot_mass > human_mass:
        return Verdict.ROBOT
    return Verdict.INDETERMINATE


def painting_accuracy(verdicts, authors):
    """(correct, total, accuracy) of verdicts against true painting authors."""
    pairs = list(zip(verdicts, authors))
    if not pairs:
        return 0, 0, 0.0
    correct = sum(1 for verdict, author in pairs if Verdict(verdict) is Verdict.for_author(author))
    return correct, len(pairs), correct / len(pairs)
