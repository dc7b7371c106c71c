"""Connected-component labeling and hole counting against a BFS oracle."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emfe.errors import EmptyInputError
from emfe.morphology import (
    FEATURE_NAMES,
    FeatureVector,
    background_count,
    count_holes,
    extract_features,
    feature_statistics,
    foreground_count,
    label_components,
)

from helpers import flood_components, flood_count_holes, random_mask


def mask_from_rows(rows: list[str]) -> np.ndarray:
    return np.array([[ch == "#" for ch in row] for row in rows], dtype=bool)


@st.composite
def small_masks(draw):
    h = draw(st.integers(1, 16))
    w = draw(st.integers(1, 16))
    bits = draw(st.lists(st.booleans(), min_size=h * w, max_size=h * w))
    return np.array(bits, dtype=bool).reshape(h, w)


# ---------------------------------------------------------------------------
# labeling vs the BFS oracle


@settings(max_examples=120)
@given(small_masks(), st.sampled_from([4, 8]))
def test_labels_match_bfs_oracle(mask, connectivity):
    got = label_components(mask, connectivity=connectivity)
    want = flood_components(mask, connectivity)
    assert np.array_equal(got, want)


@settings(max_examples=120)
@given(small_masks(), st.sampled_from([4, 8]))
def test_background_labels_match_bfs_oracle(mask, connectivity):
    got = label_components(mask, target="background", connectivity=connectivity)
    want = flood_components(~mask, connectivity)
    assert np.array_equal(got, want)


def test_labels_bulk_random_masks():
    rng = np.random.default_rng(7)
    for _ in range(300):
        shape = (int(rng.integers(1, 17)), int(rng.integers(1, 17)))
        mask = random_mask(rng, shape, float(rng.uniform(0.2, 0.8)))
        for conn in (4, 8):
            assert np.array_equal(
                label_components(mask, connectivity=conn), flood_components(mask, conn)
            )


def test_label_order_is_raster_first_encounter():
    mask = mask_from_rows(
        [
            ".#..#",
            ".#...",
            ".....",
            "#...#",
        ]
    )
    labels = label_components(mask, connectivity=4)
    # First pixels in raster order: (0,1) then (0,4) then (3,0) then (3,4).
    assert labels[0, 1] == 1 and labels[1, 1] == 1
    assert labels[0, 4] == 2
    assert labels[3, 0] == 3
    assert labels[3, 4] == 4


def test_diagonal_touch_merges_only_under_8():
    mask = mask_from_rows(
        [
            "#.",
            ".#",
        ]
    )
    assert label_components(mask, connectivity=8).max() == 1
    assert label_components(mask, connectivity=4).max() == 2


def test_label_components_validates_arguments():
    mask = np.zeros((2, 2), dtype=bool)
    with pytest.raises(ValueError):
        label_components(mask, target="edges")
    with pytest.raises(ValueError):
        label_components(mask, connectivity=6)


def test_empty_and_full_masks():
    empty = np.zeros((5, 5), dtype=bool)
    full = np.ones((5, 5), dtype=bool)
    assert label_components(empty).max() == 0
    assert label_components(full).max() == 1
    assert count_holes(empty) == 0
    assert count_holes(full) == 0  # no background at all
    assert foreground_count(full) == 25 and background_count(full) == 0


def test_single_row_and_column_masks():
    row = np.array([[True, False, True, True, False]])
    assert label_components(row, connectivity=4).max() == 2
    assert count_holes(row) == 0  # every background pixel touches the border
    col = row.T
    assert label_components(col, connectivity=8).max() == 2
    assert count_holes(col) == 0


# ---------------------------------------------------------------------------
# hole counting


@settings(max_examples=120)
@given(small_masks(), st.sampled_from([4, 8]))
def test_holes_match_bfs_oracle(mask, connectivity):
    assert count_holes(mask, connectivity=connectivity) == flood_count_holes(mask, connectivity)


def test_ring_has_one_hole():
    ring = mask_from_rows(
        [
            ".....",
            ".###.",
            ".#.#.",
            ".###.",
            ".....",
        ]
    )
    assert count_holes(ring, connectivity=4) == 1
    assert count_holes(ring, connectivity=8) == 1


def test_diagonal_gap_leaks_under_8_connected_background():
    # The interior connects to the outside through the broken corner when the
    # background is 8-connected, but stays enclosed when it is 4-connected.
    cracked = mask_from_rows(
        [
            "##.#",
            "#.##",
            "####",
        ]
    )
    assert count_holes(cracked, connectivity=4) == 1
    assert count_holes(cracked, connectivity=8) == 0


def test_two_chambers_count_separately():
    mask = mask_from_rows(
        [
            "#######",
            "#.###.#",
            "#######",
        ]
    )
    assert count_holes(mask) == 2


def test_counts_complement_each_other():
    rng = np.random.default_rng(11)
    for _ in range(100):
        mask = random_mask(rng, (16, 16), 0.5)
        assert foreground_count(mask) + background_count(mask) == mask.size


# ---------------------------------------------------------------------------
# feature extraction


def test_extract_features_known_mask():
    ring = mask_from_rows(
        [
            "###",
            "#.#",
            "###",
        ]
    )
    vec = extract_features(ring)
    assert vec == FeatureVector(foreground=8, background=1, holes=1)
    assert vec.as_tuple() == (8, 1, 1)


def test_extract_features_respects_connectivity():
    cracked = mask_from_rows(
        [
            "##.#",
            "#.##",
            "####",
        ]
    )
    assert extract_features(cracked, connectivity=4).holes == 1
    assert extract_features(cracked, connectivity=8).holes == 0


def test_feature_statistics_values():
    vecs = [FeatureVector(2, 14, 0), FeatureVector(4, 12, 1), FeatureVector(6, 10, 2)]
    stats = feature_statistics(vecs)
    assert set(stats) == set(FEATURE_NAMES)
    assert stats["foreground"]["mean"] == pytest.approx(4.0)
    assert stats["foreground"]["std"] == pytest.approx(np.sqrt(8 / 3))  # population
    assert stats["holes"]["min"] == 0.0 and stats["holes"]["max"] == 2.0


def test_feature_statistics_rejects_empty():
    with pytest.raises(EmptyInputError):
        feature_statistics([])
