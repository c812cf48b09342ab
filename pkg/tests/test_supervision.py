import numpy as np
import pytest
from scipy import stats

import flownav as fn
from flownav.errors import ConfigurationError
from flownav.supervision import sample_targets, stratified_sample


class TestStratifiedSample:
    def test_single_cell_plain_uniform(self):
        batch = stratified_sample(1, 5, 0)
        assert batch.points.shape == (5, 2)
        assert batch.per_bin == 5
        assert ((batch.points >= 0) & (batch.points <= 1)).all()

    def test_default_budget_exactly_ten_per_cell(self):
        batch = stratified_sample(10, 1000, 3)
        assert batch.per_bin == 10
        assert len(batch.points) == 1000
        counts = np.zeros((10, 10), dtype=int)
        for u, v in batch.points:
            counts[min(int(v * 10), 9), min(int(u * 10), 9)] += 1
        assert (counts == 10).all()

    def test_deterministic_per_seed(self):
        a = stratified_sample(4, 100, 7).points
        b = stratified_sample(4, 100, 7).points
        np.testing.assert_array_equal(a, b)

    def test_truncation_keeps_cell_major_prefix(self):
        # n_s = 10 with g = 4: per_bin = 1, first 10 cells in row-major order
        batch = stratified_sample(4, 10, 0)
        assert batch.per_bin == 1
        cells = [(min(int(v * 4), 3), min(int(u * 4), 3)) for u, v in batch.points]
        assert cells == [(r, c) for r in range(4) for c in range(4)][:10]

    def test_large_draw_counts_and_uniformity(self):
        # 1e5 draws with g=4: equal pre-truncation counts per cell and a
        # Kolmogorov-Smirnov uniformity pass within cells at alpha = 0.01
        batch = stratified_sample(4, 100_000, 11)
        assert batch.per_bin == 6250
        pts = batch.points
        assert len(pts) == 100_000
        cells = (np.minimum((pts[:, 1] * 4).astype(int), 3),
                 np.minimum((pts[:, 0] * 4).astype(int), 3))
        counts = np.zeros((4, 4), dtype=int)
        np.add.at(counts, cells, 1)
        assert (counts == 6250).all()
        # within-cell coordinates, rescaled to [0,1], tested per axis
        cell = pts[(cells[0] == 2) & (cells[1] == 1)]
        for axis, lo in ((0, 0.25), (1, 0.5)):
            rescaled = (cell[:, axis] - lo) * 4
            assert stats.kstest(rescaled, "uniform").pvalue > 0.01

    def test_invalid_args(self):
        with pytest.raises(ConfigurationError):
            stratified_sample(0, 10, 0)
        with pytest.raises(ConfigurationError):
            stratified_sample(3, 0, 0)


class TestDirectionLoss:
    def test_identical_vectors_zero(self):
        # norms ~14 keep the epsilon-guard bias under the 1e-9 tolerance
        rng = np.random.default_rng(0)
        v = rng.normal(size=(64, 2)) * 10.0 + 5.0
        assert fn.direction_loss(v, v) == pytest.approx(0.0, abs=1e-9)

    def test_antiparallel_is_two(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=(64, 2)) * 10.0 + 5.0
        assert fn.direction_loss(-v, v) == pytest.approx(2.0, abs=1e-9)

    def test_matches_angle_oracle(self):
        # independent formula: 1 - cos(theta_pred - theta_target); vectors
        # scaled up so the epsilon guard stays below the 1e-9 tolerance
        rng = np.random.default_rng(2)
        pred = rng.normal(size=(200, 2)) * 10.0
        target = rng.normal(size=(200, 2)) * 10.0
        want = np.mean(1.0 - np.cos(np.arctan2(pred[:, 1], pred[:, 0])
                                    - np.arctan2(target[:, 1], target[:, 0])))
        assert fn.direction_loss(pred, target) == pytest.approx(want, abs=1e-9)

    def test_range_and_scale_invariance(self):
        rng = np.random.default_rng(3)
        pred = rng.normal(size=(100, 2)) * 3
        target = rng.normal(size=(100, 2)) * 3
        loss = fn.direction_loss(pred, target)
        assert 0.0 <= loss <= 2.0
        assert fn.direction_loss(5.0 * pred, target) == pytest.approx(loss, abs=1e-6)


class TestMagnitudeLoss:
    def test_equal_norms_zero(self):
        rng = np.random.default_rng(4)
        target = rng.normal(size=(50, 2))
        angle = rng.uniform(0, 2 * np.pi, size=50)
        rot = np.stack([
            np.cos(angle) * np.linalg.norm(target, axis=1),
            np.sin(angle) * np.linalg.norm(target, axis=1)], axis=1)
        assert fn.magnitude_loss(rot, target) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset(self):
        pred = np.tile([2.0, 0.0], (10, 1))
        target = np.tile([0.0, 1.0], (10, 1))
        assert fn.magnitude_loss(pred, target) == pytest.approx(1.0)

    def test_matches_direct_recomputation(self):
        rng = np.random.default_rng(5)
        pred = rng.normal(size=(300, 2))
        target = rng.normal(size=(300, 2))
        want = np.mean([(np.hypot(*p) - np.hypot(*t)) ** 2 for p, t in zip(pred, target)])
        assert fn.magnitude_loss(pred, target) == pytest.approx(want, abs=1e-12)

    def test_invariant_under_joint_rotation(self):
        rng = np.random.default_rng(6)
        pred = rng.normal(size=(80, 2))
        target = rng.normal(size=(80, 2))
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        assert fn.magnitude_loss(pred @ rot.T, target) == pytest.approx(
            fn.magnitude_loss(pred, target), abs=1e-12)


class TestTotalLoss:
    def test_composition(self):
        rng = np.random.default_rng(7)
        pred = rng.normal(size=(100, 2))
        target = rng.normal(size=(100, 2))
        want = fn.direction_loss(pred, target) + 0.5 * fn.magnitude_loss(pred, target)
        assert fn.total_loss(pred, target) == pytest.approx(want, abs=1e-12)

    def test_zero_at_identity(self):
        rng = np.random.default_rng(8)
        v = rng.normal(size=(100, 2)) * 10.0 + 5.0
        assert fn.total_loss(v, v) == pytest.approx(0.0, abs=1e-9)

    def test_negative_lambda_rejected(self):
        v = np.ones((4, 2))
        with pytest.raises(ConfigurationError):
            fn.total_loss(v, v, lam=-0.1)


class TestTargets:
    def test_targets_are_bilinear_samples(self, golden_annotation):
        batch = stratified_sample(10, 1000, 42)
        targets = sample_targets(golden_annotation.field, batch)
        direct = fn.bilinear_sample(golden_annotation.field, batch.points)
        np.testing.assert_array_equal(targets, direct)
