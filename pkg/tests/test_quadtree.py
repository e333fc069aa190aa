import random

import pytest
from hypothesis import given, settings, strategies as st

from absgrid.quadtree import (from_leaves, identity_mapping, initial_mapping, mapping_cost,
                              mapping_from_json, parse_mapping, split)


def pocket_mapping():
    """Three coarse 4x4 quadrants; bottom-right in 2x2s, two of them in singletons."""
    g = initial_mapping(8)
    g = split(g, g.find_leaf((5, 8), (5, 8)))
    g = split(g, g.find_leaf((7, 8), (7, 8)))
    return split(g, g.find_leaf((5, 6), (7, 8)))


def sides(g):
    return sorted(l.side for l in g.leaves)


def test_initial_quad():
    g = initial_mapping(8)
    assert sides(g) == [4, 4, 4, 4]


def test_initial_two_is_identity():
    assert initial_mapping(2).is_identity()


def test_initial_sudoku():
    g = initial_mapping(9, 3)
    assert sides(g) == [3] * 9
    blocks = {frozenset(l.cells()) for l in g.leaves}
    expected = {frozenset((x, y) for x in range(bx, bx + 3) for y in range(by, by + 3))
                for bx in (1, 4, 7) for by in (1, 4, 7)}
    assert blocks == expected


@pytest.mark.parametrize("n,b", [(6, 2), (8, 3), (1, 2)])
def test_initial_rejects_bad_sides(n, b):
    with pytest.raises(ValueError):
        initial_mapping(n, b)


def test_split_counts():
    g = initial_mapping(8)
    g2 = split(g, g.leaves[0])
    assert sides(g2) == [2, 2, 2, 2, 4, 4, 4]
    assert sides(g) == [4, 4, 4, 4]


def test_split_to_exhaustion():
    g = identity_mapping(8)
    assert len(g.leaves) == 64 and g.is_identity()


def test_split_singleton_rejected():
    g = identity_mapping(4)
    with pytest.raises(ValueError, match="singleton"):
        split(g, g.leaves[0])


def test_fig_shape_in_three_splits():
    g = pocket_mapping()
    assert sides(g) == [1] * 8 + [2, 2] + [4, 4, 4]


def test_cost_identity_4():
    assert mapping_cost(identity_mapping(4)) == 1.0


def test_cost_coarsest_4():
    assert mapping_cost(initial_mapping(4)) == 0.0


def test_cost_fig_1c():
    assert mapping_cost(pocket_mapping()) == pytest.approx(0.1125, abs=1e-12)


def test_cost_identity_8():
    assert mapping_cost(identity_mapping(8)) == pytest.approx(0.8, abs=1e-12)


def test_cost_per_level_count():
    assert mapping_cost(identity_mapping(8), "per-level-count") == pytest.approx(128 / 144)
    assert mapping_cost(initial_mapping(8), "per-level-count") == 0.0


def test_cost_sudoku_uses_level_counts():
    assert mapping_cost(identity_mapping(9, 3)) == 1.0
    assert mapping_cost(initial_mapping(9, 3)) == 0.0


def test_cost_unknown_denominator():
    with pytest.raises(ValueError):
        mapping_cost(initial_mapping(4), "other")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**9), st.sampled_from([4, 8, 16]))
def test_cost_grows_with_every_split(seed, n):
    rng = random.Random(seed)
    g = initial_mapping(n)
    cost = mapping_cost(g)
    assert cost == 0.0
    while not g.is_identity():
        g = split(g, rng.choice([l for l in g.leaves if l.side > 1]))
        new = mapping_cost(g)
        assert cost < new <= 1.0
        cost = new


def test_corner_split_mapping():
    g = initial_mapping(4)
    dm = split(g, g.leaves[0]).to_domain_mapping()
    expected = {
        ("x1_2", "y3_4"): {(x, y) for x in (1, 2) for y in (3, 4)},
        ("x3_4", "y1_2"): {(x, y) for x in (3, 4) for y in (1, 2)},
        ("x3_4", "y3_4"): {(x, y) for x in (3, 4) for y in (3, 4)},
    }
    expected.update({(x, y): {(x, y)} for x in (1, 2) for y in (1, 2)})
    assert {a: set(c) for a, c in dm.clusters.items()} == expected


def test_identity_tree_gives_identity_mapping():
    assert identity_mapping(4).to_domain_mapping().is_identity()


def test_initial_8_has_four_objects():
    dm = initial_mapping(8).to_domain_mapping()
    assert len(dm.objects()) == 4
    assert all(len(dm.inverse(o)) == 16 for o in dm.objects())


def test_sudoku_names():
    dm = initial_mapping(9, 3).to_domain_mapping(("row", "column"))
    assert ("r1_3", "c4_6") in dm.clusters


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_split_refines_partition(seed):
    rng = random.Random(seed)
    g = initial_mapping(8)
    for _ in range(rng.randint(1, 8)):
        old = g.to_domain_mapping()
        g = split(g, rng.choice([l for l in g.leaves if l.side > 1]))
        new = g.to_domain_mapping()
        for cluster in new.clusters.values():
            holders = [c for c in old.clusters.values() if cluster <= c]
            assert len(holders) == 1
        if g.is_identity():
            break


def test_text_round_trip():
    g = pocket_mapping()
    assert parse_mapping(g.to_text()) == g


def test_json_round_trip():
    g = pocket_mapping()
    assert mapping_from_json(g.to_json()) == g


def test_from_leaves_rejects_non_tree():
    with pytest.raises(ValueError):
        from_leaves(4, 2, [((1, 3), (1, 3))])


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_mapping("quadtree n=4 b=2\nnonsense")
