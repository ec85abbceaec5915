import numpy as np
import pytest
from oracles import brute_force_merge, flood_components

from reefseg.labelmap import INVALID, NOISE, LabelMap
from reefseg.refine import (
    LegendEntry,
    assign_legend,
    compact,
    connected_components,
    legend_from_json,
    legend_to_json,
    merge_small_components,
    preset_legend,
    remap_labels,
)


def lmap(grid):
    arr = np.asarray(grid, dtype=np.int32)
    return LabelMap(arr.shape[1], arr.shape[0], arr)


class TestConnectedComponents:
    def test_hand_traceable(self):
        cm = connected_components(lmap([[0, 0], [0, 1]]), 4)
        sizes = sorted(c.size for c in cm.components)
        assert sizes == [1, 3]
        assert cm.components[0].label == 0

    def test_checkerboard_conn4(self):
        grid = [[(r + c) % 2 for c in range(4)] for r in range(4)]
        cm = connected_components(lmap(grid), 4)
        assert len(cm.components) == 16

    def test_checkerboard_conn8(self):
        grid = [[(r + c) % 2 for c in range(4)] for r in range(4)]
        cm = connected_components(lmap(grid), 8)
        assert len(cm.components) == 2

    def test_ids_ordered_by_first_pixel(self):
        cm = connected_components(lmap([[5, 7], [7, 5]]), 4)
        assert [c.label for c in cm.components] == [5, 7, 7, 5]

    def test_sentinels_excluded(self):
        cm = connected_components(lmap([[0, INVALID], [NOISE, 0]]), 4)
        assert cm.component_ids[0, 1] == -1
        assert cm.component_ids[1, 0] == -1

    def test_matches_flood_fill_on_random_grids(self):
        rng = np.random.default_rng(3)
        for trial in range(30):
            h, w = rng.integers(1, 12, size=2)
            grid = rng.integers(-2, 4, size=(h, w)).astype(np.int32)
            conn = int(rng.choice([4, 8]))
            cm = connected_components(LabelMap(int(w), int(h), grid), conn)
            want_comp, want_groups = flood_components(grid, conn)
            assert np.array_equal(cm.component_ids, want_comp), trial
            assert [c.size for c in cm.components] == [len(g) for g in want_groups]

    def test_bbox(self):
        cm = connected_components(lmap([[1, 1, 0], [0, 1, 0]]), 4)
        ones = next(c for c in cm.components if c.label == 1)
        assert ones.bbox == (0, 0, 1, 1)


class TestMergeSmall:
    def test_single_surrounded_pixel(self):
        grid = np.zeros((5, 5), dtype=np.int32)
        grid[2, 2] = 1
        out = merge_small_components(LabelMap(5, 5, grid), 2)
        assert (out.labels == 0).all()

    def test_min_size_one_is_identity(self):
        grid = np.array([[0, 1], [2, 3]], dtype=np.int32)
        out = merge_small_components(LabelMap(2, 2, grid), 1)
        assert np.array_equal(out.labels, grid)

    def test_two_adjacent_singletons(self):
        grid = np.zeros((4, 4), dtype=np.int32)
        grid[1, 1] = 1
        grid[1, 2] = 2
        out = merge_small_components(LabelMap(4, 4, grid), 2)
        want = brute_force_merge(grid, 2, 8)
        assert np.array_equal(out.labels, want)
        assert (out.labels == 0).all()

    def test_sentinel_enclosed_island_preserved(self):
        grid = np.full((3, 3), INVALID, dtype=np.int32)
        grid[1, 1] = 5
        out = merge_small_components(LabelMap(3, 3, grid), 4)
        assert out.labels[1, 1] == 5

    def test_random_grids_match_fixpoint_oracle(self):
        rng = np.random.default_rng(77)
        for trial in range(60):
            h, w = rng.integers(2, 17, size=2)
            grid = rng.integers(-2, 3, size=(h, w)).astype(np.int32)
            conn = int(rng.choice([4, 8]))
            min_size = int(rng.integers(1, 7))
            out = merge_small_components(LabelMap(int(w), int(h), grid), min_size, conn)
            want = brute_force_merge(grid, min_size, conn)
            assert np.array_equal(out.labels, want), (trial, grid, min_size, conn)

    def test_post_sizes_meet_threshold(self):
        rng = np.random.default_rng(5)
        for trial in range(20):
            grid = rng.integers(0, 3, size=(10, 10)).astype(np.int32)
            min_size = 4
            out = merge_small_components(LabelMap(10, 10, grid), min_size, 8)
            cm = connected_components(out, 8)
            for info in cm.components:
                assert info.size >= min_size  # no sentinels here, so no islands


class TestRemap:
    def test_simple_substitution(self):
        out = remap_labels(lmap([[3, 1], [3, 0]]), [(3, 1)])
        assert out.labels.tolist() == [[1, 1], [1, 0]]

    def test_empty_mapping_identity(self):
        lm = lmap([[0, 1]])
        out = remap_labels(lm, [])
        assert np.array_equal(out.labels, lm.labels)

    def test_ocean_merge_collapse(self):
        lm = lmap([[4, 5], [6, 0]])
        out = remap_labels(lm, [(4, 0), (5, 0), (6, 0)])
        assert (out.labels == 0).all()

    def test_absent_source_rejected(self):
        with pytest.raises(ValueError, match="not present"):
            remap_labels(lmap([[0, 1]]), [(7, 0)])

    def test_self_map_rejected(self):
        with pytest.raises(ValueError, match="itself"):
            remap_labels(lmap([[0, 1]]), [(1, 1)])

    def test_cycle_rejected(self):
        with pytest.raises(ValueError, match="cycle"):
            remap_labels(lmap([[0, 1]]), [(0, 1), (1, 0)])

    def test_chain_is_simultaneous(self):
        out = remap_labels(lmap([[3, 1, 0]]), [(3, 1), (1, 2)])
        assert out.labels.tolist() == [[1, 2, 0]]

    def test_pixel_count_conserved(self):
        rng = np.random.default_rng(2)
        grid = rng.integers(0, 5, size=(8, 8)).astype(np.int32)
        lm = LabelMap(8, 8, grid)
        out = remap_labels(lm, [(3, 0), (4, 0)])
        preimage = np.isin(grid, [0, 3, 4]).sum()
        assert (out.labels == 0).sum() == preimage


class TestCompact:
    def test_renumber_in_scan_order(self):
        out, table = compact(lmap([[7, 4], [0, 4]]))
        assert table == {7: 0, 4: 1, 0: 2}
        assert out.labels.tolist() == [[0, 1], [2, 1]]

    def test_already_dense_identity(self):
        out, table = compact(lmap([[0, 1], [1, 0]]))
        assert table == {0: 0, 1: 1}
        assert out.labels.tolist() == [[0, 1], [1, 0]]

    def test_all_sentinel(self):
        out, table = compact(lmap([[INVALID, NOISE]]))
        assert table == {}
        assert out.labels.tolist() == [[INVALID, NOISE]]

    def test_partition_preserved(self):
        rng = np.random.default_rng(1)
        grid = rng.integers(-2, 9, size=(6, 6)).astype(np.int32)
        lm = LabelMap(6, 6, grid)
        out, _ = compact(lm)
        a, b = grid.reshape(-1), out.labels.reshape(-1)
        for i in range(36):
            for j in range(36):
                if a[i] >= 0 and a[j] >= 0:
                    assert (a[i] == a[j]) == (b[i] == b[j])


class TestLegend:
    def test_benthic_preset(self):
        lm = lmap([[0, 1, 2]])
        hm = assign_legend(lm, preset_legend("benthic", [0, 1, 2]))
        assert [e.name for e in hm.legend] == ["ocean", "sand", "rock/rubble"]

    def test_geomorphic_preset(self):
        lm = lmap([[0, 1], [2, 3]])
        hm = assign_legend(lm, preset_legend("geomorphic", [0, 1, 2, 3]))
        assert len(hm.legend) == 4
        assert hm.legend[-1].name == "ocean"

    def test_uncovered_label_rejected(self):
        lm = lmap([[0, 1, 2]])
        with pytest.raises(ValueError, match=r"\[2\]"):
            assign_legend(lm, preset_legend("benthic", [0, 1, 2])[:2])

    def test_duplicate_label_rejected(self):
        lm = lmap([[0]])
        entries = [LegendEntry(0, "a", (1, 1, 1)), LegendEntry(0, "b", (2, 2, 2))]
        with pytest.raises(ValueError, match="repeats"):
            assign_legend(lm, entries)

    def test_preset_size_mismatch(self):
        with pytest.raises(ValueError, match="3 classes"):
            preset_legend("benthic", [0, 1])

    def test_json_round_trip(self):
        entries = preset_legend("geomorphic", [0, 1, 2, 3])
        text = legend_to_json(entries)
        back = legend_from_json(text)
        assert back == entries
        assert '"color": "#1040A0"' in text
