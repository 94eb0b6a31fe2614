"""Candidate selection, flat-kernel mean-shift, pocket ranking."""

import numpy as np
import pytest

from gdegan import geom, pocket
from gdegan.errors import DomainError, EmptyInput
from gdegan.model import Prediction
from gdegan.protein import graph_from_arrays


def prediction_with(probs):
    n = len(probs)
    return Prediction(probs=np.asarray(probs, dtype=float), directions=np.zeros((n, 3)))


def simple_graph(n):
    positions = np.stack([np.arange(n, dtype=float) * 3.0, np.zeros(n), np.zeros(n)], axis=1)
    return graph_from_arrays(positions, np.zeros((n, 2), dtype=np.float32), 10.0, 8)


class TestSelectCandidates:
    def test_none_above_threshold(self):
        g = simple_graph(3)
        pts, probs, idx = pocket.select_candidates(prediction_with([0.1, 0.2, 0.3]), g, 0.5)
        assert pts.shape == (0, 3) and idx.size == 0

    def test_strictly_greater(self):
        g = simple_graph(2)
        pts, probs, idx = pocket.select_candidates(prediction_with([0.4, 0.6]), g, 0.5)
        assert idx.tolist() == [1]

    def test_boundary_excluded(self):
        g = simple_graph(2)
        _, _, idx = pocket.select_candidates(prediction_with([0.5, 0.7]), g, 0.5)
        assert idx.tolist() == [1]

    def test_invalid_tau(self):
        g = simple_graph(2)
        with pytest.raises(DomainError):
            pocket.select_candidates(prediction_with([0.5, 0.7]), g, 0.0)


def planted_blobs(rng, centers, n_per=10, spread=1.0):
    pts = []
    for c in centers:
        pts.append(np.asarray(c) + rng.normal(scale=spread, size=(n_per, 3)))
    return np.concatenate(pts, axis=0)


class TestMeanShift:
    def test_identical_points(self):
        pts = np.tile([[1.0, 2.0, 3.0]], (5, 1))
        result = pocket.mean_shift(pts, 8.0)
        assert result.centers.shape == (1, 3)
        np.testing.assert_allclose(result.centers[0], [1.0, 2.0, 3.0])
        assert set(result.assignments.tolist()) == {0}

    def test_single_point(self):
        result = pocket.mean_shift(np.array([[4.0, 5.0, 6.0]]), 2.0)
        np.testing.assert_allclose(result.centers, [[4.0, 5.0, 6.0]])

    def test_two_planted_blobs(self):
        rng = np.random.default_rng(60)
        blob_centers = [(0.0, 0.0, 0.0), (40.0, 0.0, 0.0)]
        pts = planted_blobs(rng, blob_centers, n_per=10, spread=1.0)
        result = pocket.mean_shift(pts, 8.0)
        assert result.centers.shape[0] == 2
        means = [pts[:10].mean(axis=0), pts[10:].mean(axis=0)]
        got = sorted(result.centers.tolist())
        expect = sorted(m.tolist() for m in means)
        for a, b in zip(got, expect):
            assert np.linalg.norm(np.array(a) - np.array(b)) < 0.5
        # each blob maps to one center
        assert len(set(result.assignments[:10])) == 1
        assert len(set(result.assignments[10:])) == 1

    def test_members_within_bandwidth_of_center(self):
        rng = np.random.default_rng(61)
        pts = planted_blobs(rng, [(0, 0, 0), (30, 0, 0), (0, 30, 0)], n_per=8, spread=1.5)
        bw = 8.0
        result = pocket.mean_shift(pts, bw)
        for i, c in enumerate(result.assignments):
            assert np.linalg.norm(pts[i] - result.centers[c]) <= bw

    def test_isometry_equivariance(self):
        rng = np.random.default_rng(62)
        pts = planted_blobs(rng, [(0, 0, 0), (35, 5, -10)], n_per=10, spread=1.2)
        rot = geom.Rotation.random(rng).matrix
        shift = rng.normal(scale=50.0, size=3)
        r0 = pocket.mean_shift(pts, 8.0)
        r1 = pocket.mean_shift(pts @ rot.T + shift, 8.0)
        np.testing.assert_array_equal(r0.assignments, r1.assignments)
        np.testing.assert_allclose(r1.centers, r0.centers @ rot.T + shift, atol=1e-6)

    def test_deterministic(self):
        rng = np.random.default_rng(63)
        pts = planted_blobs(rng, [(0, 0, 0), (20, 20, 0)], n_per=12, spread=2.0)
        r0 = pocket.mean_shift(pts, 8.0)
        r1 = pocket.mean_shift(pts.copy(), 8.0)
        np.testing.assert_array_equal(r0.centers, r1.centers)
        np.testing.assert_array_equal(r0.assignments, r1.assignments)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            pocket.mean_shift(np.zeros((0, 3)), 8.0)

    def test_bad_bandwidth(self):
        with pytest.raises(DomainError):
            pocket.mean_shift(np.zeros((2, 3)), 0.0)


class TestRankPockets:
    def test_single_cluster(self):
        result = pocket.MeanShiftResult(
            centers=np.array([[0.0, 0.0, 0.0]]), assignments=np.zeros(3, dtype=np.int64)
        )
        ranked = pocket.rank_pockets(result, np.array([0.9, 0.8, 0.7]))
        assert ranked.n_pockets == 1
        assert ranked.scores[0] == pytest.approx(0.8)

    def test_count_times_mean_ranking(self):
        # 5 members at mean 0.9 (score 4.5) vs 10 members at 0.6 (score 6.0)
        centers = np.array([[0.0, 0.0, 0.0], [50.0, 0.0, 0.0]])
        assignments = np.array([0] * 5 + [1] * 10)
        probs = np.array([0.9] * 5 + [0.6] * 10)
        ranked = pocket.rank_pockets(
            pocket.MeanShiftResult(centers=centers, assignments=assignments), probs
        )
        np.testing.assert_allclose(ranked.centers[0], [50.0, 0.0, 0.0])
        assert ranked.scores.tolist() == pytest.approx([0.6, 0.9])
        assert [len(m) for m in ranked.members] == [10, 5]

    def test_tie_breaks(self):
        # equal score-mass and equal counts: the lower center index wins
        centers = np.array([[0.0, 0.0, 0.0], [9.0, 0.0, 0.0]])
        assignments = np.array([0, 0, 1, 1])
        probs = np.array([0.5, 0.5, 0.5, 0.5])
        ranked = pocket.rank_pockets(
            pocket.MeanShiftResult(centers=centers, assignments=assignments), probs
        )
        np.testing.assert_allclose(ranked.centers[0], [0.0, 0.0, 0.0])

    def test_members_map_to_residue_indices(self):
        centers = np.array([[0.0, 0.0, 0.0]])
        assignments = np.array([0, 0])
        ranked = pocket.rank_pockets(
            pocket.MeanShiftResult(centers=centers, assignments=assignments),
            np.array([0.9, 0.8]),
            residue_indices=np.array([4, 7]),
        )
        assert ranked.members[0].tolist() == [4, 7]


class TestExtractPockets:
    def test_end_to_end_empty(self):
        g = simple_graph(4)
        out = pocket.extract_pockets(prediction_with([0.1] * 4), g, 0.5, 8.0)
        assert out.n_pockets == 0

    def test_end_to_end_cluster(self):
        g = simple_graph(4)
        out = pocket.extract_pockets(prediction_with([0.9, 0.8, 0.1, 0.1]), g, 0.5, 8.0)
        assert out.n_pockets == 1
        assert sorted(out.members[0].tolist()) == [0, 1]
