import collections

import pytest

from kinesics import synthetic
from kinesics.taxonomy import (
    ACTIVITY_NAMES,
    KinesicCategory,
    activity_name,
    categories_present,
    kinesic_of,
    relabel_bundle,
)

EXPECTED = {
    0: KinesicCategory.EMBLEM,
    1: KinesicCategory.EMBLEM,
    2: KinesicCategory.EMBLEM,
    3: KinesicCategory.ILLUSTRATOR,
    4: KinesicCategory.ILLUSTRATOR,
    5: KinesicCategory.REGULATOR,
    6: KinesicCategory.REGULATOR,
    7: KinesicCategory.REGULATOR,
    8: KinesicCategory.ADAPTOR,
    9: KinesicCategory.AFFECT_DISPLAY,
    10: KinesicCategory.AFFECT_DISPLAY,
    11: KinesicCategory.AFFECT_DISPLAY,
}


@pytest.mark.parametrize("label,category", sorted(EXPECTED.items()))
def test_mapping_exact(label, category):
    assert kinesic_of(label) is category


def test_mapping_total_and_surjective():
    cats = {kinesic_of(a) for a in range(12)}
    assert cats == set(KinesicCategory)


def test_category_sizes():
    counts = collections.Counter(kinesic_of(a) for a in range(12))
    assert counts[KinesicCategory.EMBLEM] == 3
    assert counts[KinesicCategory.ILLUSTRATOR] == 2
    assert counts[KinesicCategory.REGULATOR] == 3
    assert counts[KinesicCategory.ADAPTOR] == 1
    assert counts[KinesicCategory.AFFECT_DISPLAY] == 3


@pytest.mark.parametrize("bad", [-1, 12, 99])
def test_out_of_range_label(bad):
    with pytest.raises(ValueError):
        kinesic_of(bad)


def test_stable_integer_codes():
    assert [int(c) for c in KinesicCategory] == [0, 1, 2, 3, 4]


def test_activity_names_cover_all():
    assert sorted(ACTIVITY_NAMES) == list(range(12))
    assert activity_name(8) == "twirling or scratching hair"
    assert activity_name(11) == "hugging"


def test_relabel_bundle(small_bundle):
    pairs = relabel_bundle(small_bundle)
    assert len(pairs) == len(small_bundle.records)
    by_name = small_bundle.record_map()
    for name, cat in pairs:
        assert cat is kinesic_of(by_name[name].label)


def test_relabel_empty_bundle():
    from kinesics.dataset import DatasetBundle

    assert relabel_bundle(DatasetBundle()) == []


def test_relabel_all_twelve_histogram():
    spec = synthetic.SyntheticSpec(samples_per_activity=2, num_frames=4)
    bundle = synthetic.generate(spec)
    counts = collections.Counter(cat for _, cat in relabel_bundle(bundle))
    assert [counts[c] // 2 for c in KinesicCategory] == [3, 2, 3, 1, 3]


def test_categories_present():
    assert categories_present([2, 4, 8, 11]) == [
        KinesicCategory.EMBLEM,
        KinesicCategory.ILLUSTRATOR,
        KinesicCategory.ADAPTOR,
        KinesicCategory.AFFECT_DISPLAY,
    ]
