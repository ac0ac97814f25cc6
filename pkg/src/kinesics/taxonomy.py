"""The five-category kinesic taxonomy and the fixed 12-activity mapping.

The activity-to-category assignment ships as a CSV next to this module
(data/kinesic_taxonomy.csv) so downstream tools can read the same table
without hardcoding it twice.
"""

import csv
from enum import IntEnum
from importlib import resources


class KinesicCategory(IntEnum):
    EMBLEM = 0
    ILLUSTRATOR = 1
    REGULATOR = 2
    ADAPTOR = 3
    AFFECT_DISPLAY = 4


NUM_ACTIVITIES = 12
NUM_CATEGORIES = 5


def _load_table():
    ref = resources.files("kinesics").joinpath("data/kinesic_taxonomy.csv")
    with ref.open() as f:
        rows = list(csv.DictReader(f))
    names = {}
    mapping = {}
    for row in rows:
        aid = int(row["activity_id"])
        names[aid] = row["activity_name"]
        mapping[aid] = KinesicCategory(int(row["category_id"]))
    assert sorted(mapping) == list(range(NUM_ACTIVITIES))
    return names, mapping


ACTIVITY_NAMES, _ACTIVITY_TO_CATEGORY = _load_table()


def kinesic_of(label: int) -> KinesicCategory:
    """Kinesic category of a DUET activity label."""
    if label not in _ACTIVITY_TO_CATEGORY:
        raise ValueError(f"activity label {label} out of range 0-{NUM_ACTIVITIES - 1}")
    return _ACTIVITY_TO_CATEGORY[label]


def activity_name(label: int) -> str:
    if label not in ACTIVITY_NAMES:
        raise ValueError(f"activity label {label} out of range 0-{NUM_ACTIVITIES - 1}")
    return ACTIVITY_NAMES[label]


def relabel_bundle(bundle):
    """Pair each record's sample name with its kinesic category."""
    return [(rec.frame_dir, kinesic_of(rec.label)) for rec in bundle.records]


def categories_present(labels) -> list:
    """Sorted distinct categories covered by a set of activity labels."""
    return sorted({kinesic_of(a) for a in labels})
