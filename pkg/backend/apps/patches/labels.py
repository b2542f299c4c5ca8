"""Painting authors and patch class labels."""

from enum import Enum, IntEnum

from apps.core.exceptions import UsageError


class Author(str, Enum):
    HUMAN = 'human'
    ROBOT = 'robot'
    HYBRID = 'hybrid'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise UsageError(f'Unknown author {value!r}; expected human, robot or hybrid') from None


class PatchLabel(IntEnum):
    """Class index used by the network; order is Blank < Human < Robot."""
    BLANK = 0
    HUMAN = 1
    ROBOT = 2

    @property
    def display(self):
        return self.name.capitalize()

    @classmethod
    def for_author(cls, author):
        author = Author.parse(author)
        if author is Author.HYBRID:
            raise UsageError('Hybrid paintings have no patch-level author label')
        return cls.HUMAN if author is Author.HUMAN else cls.ROBOT


CLASS_NAMES = [label.display for label in PatchLabel]
NUM_CLASSES = len(PatchLabel)
