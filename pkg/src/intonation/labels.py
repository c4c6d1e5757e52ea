"""Class labels and subject taxonomy shared across the pipeline."""

from __future__ import annotations

from enum import IntEnum


class Label(IntEnum):
    """Binary intonation class. Integer values double as class indices."""

    RHYTHMIC = 0
    UNRHYTHMIC = 1

    @classmethod
    def from_name(cls, name: str) -> "Label":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown label {name!r}") from None

    @property
    def display(self) -> str:
        return self.name.lower()


CLASS_NAMES = tuple(label.display for label in Label)

# Subjects a lesson recording may be tagged with. Manifest validation
# rejects anything outside this set.
DISCIPLINES = (
    "Chinese",
    "Maths",
    "English",
    "Physics",
    "Chemistry",
    "Biology",
    "Politics",
    "History",
    "Geography",
)
