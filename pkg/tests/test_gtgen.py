import math

import numpy as np
import pytest

from conftest import make_scene
from rankflow.errors import MissingFixationMap
from rankflow.gtgen import (
    GtConfig,
    discrepancy_offsets,
    rank_binarized_map,
    rank_fixation_map,
    rank_fixation_points,
    rasrgt_rank,
    rasrgt_score,
)


class TestFixationPoints:
    def test_no_fixations_is_order_zero(self):
        scene = make_scene([(0, 0, 10, 10)])
        assert rank_fixation_points(scene).labels == {0: 0}

    def test_size_penalty(self):
        # Q0: 10 fixations in a 5x5 box -> 10/5 = 2.0
        # Q1: 12 fixations in a 10x10 box -> 12/10 = 1.2
        fixations = [(i % 5, i // 5) for i in range(10)] + [
            (50 + i % 10, 50 + i // 10) for i in range(12)
        ]
        scene = make_scene([(0, 0, 5, 5), (50, 50, 60, 60)], fixations)
        assert rank_fixation_points(scene).labels == {0: 1, 1: 2}

    def test_tie_broken_by_id(self):
        fixations = [(2, 2), (52, 52)]
        scene = make_scene([(0, 0, 10, 10), (50, 50, 60, 60)], fixations)
        assert rank_fixation_points(scene).labels == {0: 1, 1: 2}

    def test_scaling_halves_scores_keeps_order(self):
        fixations = [(2, 2), (3, 3), (52, 52)]
        scene = make_scene([(0, 0, 10, 10), (50, 50, 60, 60)], fixations)
        doubled = make_scene(
            [(0, 0, 20, 20), (100, 100, 120, 120)],
            [(4, 4), (6, 6), (104, 104)],
            width=200,
            height=200,
        )
        assert rank_fixation_points(scene).labels == rank_fixation_points(doubled).labels


class TestFixationMap:
    def test_uniform_tie(self, uniform_map_scene):
        assert rank_fixation_map(uniform_map_scene, "max").labels == {0: 1, 1: 2}

    def test_max_mode_orders_by_peak(self):
        grid = np.zeros((100, 100), dtype=np.uint8)
        grid[15, 15] = 200
        grid[60, 60] = 120
        scene = make_scene([(10, 10, 30, 30), (50, 50, 90, 90)], map_values=grid)
        assert rank_fixation_map(scene, "max").labels == {0: 1, 1: 2}

    def test_missing_map(self):
        scene = make_scene([(0, 0, 10, 10)])
        with pytest.raises(MissingFixationMap):
            rank_fixation_map(scene, "max")


class TestBinarizedMap:
    def test_all_black(self):
        scene = make_scene([(0, 0, 10, 10), (50, 50, 60, 60)], map_values=np.zeros((100, 100)))
        assert rank_binarized_map(scene, 128).labels == {0: 0, 1: 0}

    def test_white_ratio_times_size_ratio(self):
        # Q0: ratio 0.5, sqrt-size ratio 0.2 -> 0.10
        # Q1: ratio 0.3, sqrt-size ratio 0.5 -> 0.15 -> Q1 first
        grid = np.zeros((100, 100), dtype=np.uint8)
        grid[0:10, 0:20] = 255  # half of Q0 (0,0,20,20)
        grid[50:65, 40:90] = 255  # 750 of Q1's 2500 px (40,40,90,90)
        scene = make_scene([(0, 0, 20, 20), (40, 40, 90, 90)], map_values=grid)
        assert rank_binarized_map(scene, 128).labels == {0: 2, 1: 1}

    def test_threshold_above_all_values(self):
        scene = make_scene([(0, 0, 10, 10)], map_values=np.full((100, 100), 200))
        assert rank_binarized_map(scene, 254).labels == {0: 0}


class TestRaSrgtScore:
    def test_zero_fixations(self):
        scene = make_scene([(40, 40, 60, 60)], [(5, 5)])
        assert rasrgt_score(scene, scene.proposals[0], GtConfig()) == 0.0

    def test_hand_value(self):
        # 100x100 image, 50 fixations total; 30 inside a 20x20 box
        # S = 0.6 + 0.2 * e^(0.5 * 0.2)
        inside = [(40 + i % 10, 40 + i // 10) for i in range(30)]
        outside = [(i, 0) for i in range(20)]
        scene = make_scene([(40, 40, 60, 60)], inside + outside)
        expected = 0.6 + 0.2 * math.exp(0.5 * 0.2)
        score = rasrgt_score(scene, scene.proposals[0], GtConfig())
        assert score == pytest.approx(expected)
        assert score == pytest.approx(0.8210, abs=1e-4)

    def test_relative_order_of_two_boxes(self):
        inside1 = [(40 + i % 10, 40 + i // 10) for i in range(30)]
        inside2 = [(i % 15, 80 + i // 15) for i in range(15)]
        outside = [(90 + i % 5, i // 5) for i in range(5)]
        scene = make_scene(
            [(40, 40, 60, 60), (0, 50, 25, 100)],
            inside1 + inside2 + outside,
        )
        cfg = GtConfig()
        s1 = rasrgt_score(scene, scene.proposals[0], cfg)
        s2 = rasrgt_score(scene, scene.proposals[1], cfg)
        assert s1 == pytest.approx(0.6 + 0.2 * math.exp(0.5 * 0.2))
        assert s1 > s2

    def test_monotone_in_fixations_and_size(self):
        fixations = [(45 + i % 5, 45 + i // 5) for i in range(20)]
        scene_small = make_scene([(40, 40, 60, 60)], fixations)
        scene_big = make_scene([(35, 35, 65, 65)], fixations)
        cfg = GtConfig()
        assert rasrgt_score(scene_big, scene_big.proposals[0], cfg) > rasrgt_score(
            scene_small, scene_small.proposals[0], cfg
        )


class TestRaSrgtRank:
    def test_two_proposals(self):
        inside1 = [(40 + i % 10, 40 + i // 10) for i in range(30)]
        inside2 = [(i % 15, 80 + i // 15) for i in range(15)]
        scene = make_scene([(40, 40, 60, 60), (0, 50, 25, 100)], inside1 + inside2)
        assert rasrgt_rank(scene).labels == {0: 1, 1: 2}

    def test_all_fixation_free(self):
        scene = make_scene([(0, 0, 10, 10), (20, 20, 30, 30)])
        assert rasrgt_rank(scene).labels == {0: 0, 1: 0}

    def test_single_salient(self):
        scene = make_scene([(0, 0, 10, 10)], [(5, 5)])
        assert rasrgt_rank(scene).labels == {0: 1}

    def test_argsort_invariance(self):
        # doubling gamma rescales nothing ordinal when sizes are equal
        fixations = [(2, 2)] * 0 + [(2, 2), (3, 3), (52, 52)]
        scene = make_scene([(0, 0, 10, 10), (50, 50, 60, 60)], fixations)
        a = rasrgt_rank(scene, GtConfig(gamma=0.2))
        b = rasrgt_rank(scene, GtConfig(gamma=0.4))
        assert a.labels == b.labels


class TestDiscrepancyOffsets:
    def _scene(self):
        inside1 = [(40 + i % 10, 40 + i // 10) for i in range(30)]
        inside2 = [(i % 15, 80 + i // 15) for i in range(15)]
        return make_scene([(40, 40, 60, 60), (0, 50, 25, 100)], inside1 + inside2)

    def test_identical_rankings_zero_offset(self):
        scene = self._scene()
        out = discrepancy_offsets([scene], GtConfig(), [0.2, 0.2000001])
        assert out == [(0.2000001, 0)]

    def test_brute_force_equivalence(self):
        from dataclasses import replace

        scenes = [self._scene()]
        thresholds = [round(0.1 * i, 10) for i in range(1, 11)]
        out = discrepancy_offsets(scenes, GtConfig(), thresholds)
        for (t, offset), t_prev in zip(out, thresholds):
            expected = 0
            for scene in scenes:
                prev = rasrgt_rank(scene, replace(GtConfig(), gamma=t_prev))
                cur = rasrgt_rank(scene, replace(GtConfig(), gamma=t))
                expected += sum(
                    abs(cur.labels[pid] - prev.labels[pid]) for pid in cur.labels
                )
            assert offset == expected

    def test_hand_swap_counts_two(self):
        # ranks (1,2,3) vs (2,1,3) -> |1-2| + |2-1| + 0 = 2, built from real scenes
        scenes_a = make_scene(
            [(0, 0, 10, 10), (20, 0, 30, 10), (40, 0, 50, 10)],
            [(5, 5), (5, 6), (25, 5), (45, 5)],
        )
        # verify the arithmetic of the offset formula directly
        prev = {0: 1, 1: 2, 2: 3}
        cur = {0: 2, 1: 1, 2: 3}
        assert sum(abs(cur[p] - prev[p]) for p in cur) == 2
