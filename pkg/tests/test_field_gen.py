import numpy as np
import pytest
from scipy import ndimage

import flownav as fn
from flownav import field_gen as fg
from flownav.errors import (
    ConfigurationError,
    TargetNotFoundError,
    UnreachableSceneError,
    UnreachableStartError,
)
from flownav.geodesic import cost_map, geodesic
from flownav.grid_core import ObjectInstance, field_to_bytes

from conftest import open_room


def block_scene(h=20, w=20, bbox=(9, 9, 11, 11), label=2, extra_walls=None):
    """Open room with one rectangular targetable instance."""
    labels = np.zeros((h, w), dtype=int)
    x0, y0, x1, y1 = bbox
    labels[y0:y1, x0:x1] = label
    if extra_walls is not None:
        labels[extra_walls] = 1
    inst = ObjectInstance(label=label, bbox=bbox, center=((x0 + x1) // 2, (y0 + y1) // 2))
    smap = fn.SemanticMap(labels=labels, instances=[inst])
    mapping = fn.LabelMapping(frozenset({0}), frozenset({1, label}), frozenset({label}))
    return smap, mapping


class TestComputeGoal:
    def test_isolated_2x2_band1_is_12_ring_pixels(self):
        smap, mapping = block_scene()
        cfg = fg.AnnotationConfig(goal_band=1)
        goals = fn.compute_goal(smap, mapping, fg.GoalSpec(target_label=2), cfg)
        assert len(goals) == 12
        # ring = Chebyshev distance exactly 1 from the 2x2 block
        for px, py in goals:
            assert 8 <= px <= 11 and 8 <= py <= 11
            assert not (9 <= px <= 10 and 9 <= py <= 10)

    def test_side_left_keeps_half_plane(self):
        smap, mapping = block_scene()
        cfg = fg.AnnotationConfig(goal_band=1)
        goals = fn.compute_goal(smap, mapping, fg.GoalSpec(target_label=2, side="left"), cfg)
        assert len(goals) > 0
        assert (goals[:, 0] < 10.0).all()  # bbox center x = 10.0

    def test_wall_flush_target_matches_adjacency_scan(self):
        # Target flush against walls on three sides: band only on the open side.
        labels = np.zeros((12, 12), dtype=int)
        labels[0:4, :] = 1          # top wall block
        labels[4:8, 0:2] = 1        # left wall
        labels[4:8, 4:12] = 1       # right wall: open side is y in [8..), x in [2..4)
        labels[4:8, 2:4] = 2        # target wedged in the pocket
        inst = ObjectInstance(label=2, bbox=(2, 4, 4, 8), center=(3, 6))
        smap = fn.SemanticMap(labels=labels, instances=[inst])
        mapping = fn.LabelMapping(frozenset({0}), frozenset({1, 2}), frozenset({2}))
        cfg = fg.AnnotationConfig(goal_band=1)
        goals = fn.compute_goal(smap, mapping, fg.GoalSpec(target_label=2), cfg)
        # brute-force oracle: free pixels within Chebyshev distance 1 of the
        # target pixels
        free = labels == 0
        want = set()
        for py in range(12):
            for px in range(12):
                if not free[py, px]:
                    continue
                for qy in range(12):
                    for qx in range(12):
                        if labels[qy, qx] == 2 and max(abs(px - qx), abs(py - qy)) <= 1:
                            want.add((px, py))
        assert {(int(x), int(y)) for x, y in goals} == want
        assert all(py >= 8 for _, py in want)  # open side only

    def test_fully_enclosed_target_falls_back_to_nearest_free(self):
        labels = np.zeros((12, 12), dtype=int)
        labels[4:9, 4:9] = 1        # sealed ring of wall
        labels[5:8, 5:8] = 2        # target inside
        inst = ObjectInstance(label=2, bbox=(5, 5, 8, 8), center=(6, 6))
        smap = fn.SemanticMap(labels=labels, instances=[inst])
        mapping = fn.LabelMapping(frozenset({0}), frozenset({1, 2}), frozenset({2}))
        goals = fn.compute_goal(smap, mapping, fg.GoalSpec(target_label=2),
                                fg.AnnotationConfig(goal_band=1))
        assert goals.shape == (1, 2)
        px, py = goals[0]
        assert labels[py, px] == 0

    def test_instance_index_out_of_range(self):
        smap, mapping = block_scene()
        with pytest.raises(TargetNotFoundError):
            fn.compute_goal(smap, mapping, fg.GoalSpec(target_label=2, instance_index=5))

    def test_untargetable_label_rejected(self):
        smap, mapping = block_scene()
        with pytest.raises(TargetNotFoundError):
            fn.compute_goal(smap, mapping, fg.GoalSpec(target_label=1))


class TestPotential:
    def build(self, lam=1.0):
        smap, mapping = block_scene()
        free = fn.extract_free(smap, mapping)
        cfg = fg.AnnotationConfig(goal_band=1, lambda_safe=lam, rho_safe=4.0)
        goals = fn.compute_goal(smap, mapping, fg.GoalSpec(target_label=2), cfg)
        d_free = fn.dto(free)
        res = geodesic(free, cost_map(d_free, cfg.rho_safe, cfg.lambda_safe), goals,
                       allow_corner_cutting=False)
        d_obs = fn.dtf(~free)
        return free, res, d_obs, cfg

    def test_zero_at_goal(self):
        free, res, d_obs, cfg = self.build()
        phi = fn.potential(res.d_weighted, d_obs, free, cfg)
        goal_like = free & (res.d_weighted == 0)
        assert goal_like.any()
        assert (phi[goal_like] == 0).all()

    def test_obstacle_adjacent_formula(self):
        free, res, d_obs, cfg = self.build()
        phi = fn.potential(res.d_weighted, d_obs, free, cfg)
        b_obs = res.d_weighted[free & np.isfinite(res.d_weighted)].max()
        face = (~free) & (d_obs == 1.0)
        assert face.any()
        np.testing.assert_allclose(phi[face], cfg.w_obs * 1.0 + b_obs)

    def test_obstacle_dominates_reachable_free(self):
        free, res, d_obs, cfg = self.build()
        phi = fn.potential(res.d_weighted, d_obs, free, cfg)
        reach = free & np.isfinite(res.d_weighted)
        # exhaustive comparison over the raster
        assert phi[~free].min() >= phi[reach].max()

    def test_unreachable_scene_raises(self):
        free = np.zeros((4, 4), dtype=bool)  # no free pixel at all
        d = np.full((4, 4), np.inf)
        with pytest.raises(UnreachableSceneError):
            fn.potential(d, np.ones((4, 4)), free)


class TestFlowField:
    def test_goal_pixels_zero_magnitude(self, golden_annotation, golden_scene):
        ann = golden_annotation
        for px, py in ann.goal_pixels:
            assert np.hypot(*ann.field[py, px]) < 1e-9

    def test_obstacle_pixels_unit_norm(self, golden_annotation, golden_scene):
        smap, mapping, _ = golden_scene
        free = fn.extract_free(smap, mapping)
        norms = np.hypot(golden_annotation.field[..., 0], golden_annotation.field[..., 1])
        obs_norms = norms[~free]
        # unit-speed escape; the epsilon guard keeps norms marginally below 1
        assert (np.abs(obs_norms - 1.0) < 1e-6).mean() > 0.999

    def test_corridor_signs_match_finite_difference_oracle(self):
        # 1D corridor: goal on the right, flow must point rightward (+x) and
        # agree with -sign of a central-difference gradient away from ends.
        labels = np.ones((9, 40), dtype=int)
        labels[3:6, 1:39] = 0
        labels[3:6, 36:38] = 2
        inst = ObjectInstance(label=2, bbox=(36, 3, 38, 6), center=(37, 4))
        smap = fn.SemanticMap(labels=labels, instances=[inst])
        mapping = fn.LabelMapping(frozenset({0}), frozenset({1, 2}), frozenset({2}))
        free = fn.extract_free(smap, mapping)
        cfg = fg.AnnotationConfig(goal_band=1, rho_safe=2.0)
        goals = fn.compute_goal(smap, mapping, fg.GoalSpec(target_label=2), cfg)
        d_free = fn.dto(free)
        res = geodesic(free, cost_map(d_free, cfg.rho_safe, cfg.lambda_safe), goals,
                       allow_corner_cutting=False)
        phi = fn.potential(res.d_weighted, fn.dtf(~free), free, cfg)
        field = fn.flow_field(phi, free, res.d_pixel, cfg)

        smoothed = ndimage.gaussian_filter(phi, sigma=cfg.gaussian_sigma,
                                           mode="reflect", truncate=3.0)
        for x in range(6, 30):
            vx = field[4, x, 0]
            fd = (smoothed[4, x + 1] - smoothed[4, x - 1]) / 2.0
            assert vx > 0
            assert np.sign(vx) == -np.sign(fd)

    def test_magnitude_law(self, golden_annotation, golden_scene):
        smap, mapping, instruction = golden_scene
        ann = golden_annotation
        free = fn.extract_free(smap, mapping)
        cfg = fg.AnnotationConfig()
        goals = fn.compute_goal(smap, mapping, instruction.spec, cfg)
        d_free = fn.dto(free)
        res = geodesic(free, cost_map(d_free, cfg.rho_safe, cfg.lambda_safe), goals,
                       allow_corner_cutting=False)
        reach = free & np.isfinite(res.d_pixel) & (res.d_pixel > 0)
        h, w = free.shape
        lhs = (ann.field[..., 0] * w) ** 2 + (ann.field[..., 1] * h) ** 2
        rel = np.abs(lhs[reach] - res.d_pixel[reach] ** 2) / res.d_pixel[reach] ** 2
        assert rel.max() < 1e-6

    def test_boundary_outwardness(self, golden_annotation, golden_scene):
        smap, mapping, _ = golden_scene
        free = fn.extract_free(smap, mapping)
        iy, ix = ndimage.distance_transform_edt(~free, return_distances=False,
                                                return_indices=True)
        adj = (~free) & ndimage.binary_dilation(free)
        ys, xs = np.nonzero(adj)
        to_free = np.stack([ix[ys, xs] - xs, iy[ys, xs] - ys], axis=1).astype(float)
        vecs = golden_annotation.field[ys, xs]
        dots = (vecs * to_free).sum(axis=1)
        assert (dots > 0).mean() >= 0.99


class TestSampleStart:
    def test_singleton_candidate_set(self):
        free = open_room(9, 9)
        d_pix = np.full((9, 9), np.inf)
        d_pix[4, 4] = 30.0  # only one reachable pixel
        cfg = fg.AnnotationConfig(start_min_goal_dist=20, start_min_obs_dist=0)
        for seed in (0, 1, 99):
            assert fn.sample_start(free, d_pix, cfg, seed) == (4, 4)

    def test_deterministic_per_seed(self, golden_scene):
        smap, mapping, instruction = golden_scene
        ann1 = fn.annotate(smap, mapping, instruction.spec, rng_seed=9)
        ann2 = fn.annotate(smap, mapping, instruction.spec, rng_seed=9)
        assert ann1.start == ann2.start

    def test_uniform_within_binomial_bounds(self):
        # symmetric scene: free row with a goal in the middle; candidates are
        # the qualifying pixels. 10k draws; each candidate count within 4
        # sigma of the binomial expectation.
        free = open_room(5, 33)
        d_pix = np.full((5, 33), np.inf)
        cand = [(x, y) for x in range(4, 29) for y in (1, 2, 3)]
        for x, y in cand:
            d_pix[y, x] = 25.0
        cfg = fg.AnnotationConfig(start_min_goal_dist=20, start_min_obs_dist=0)
        counts = {}
        n = 10_000
        for seed in range(n):
            s = fn.sample_start(free, d_pix, cfg, seed)
            counts[s] = counts.get(s, 0) + 1
        k = len(cand)
        p = 1.0 / k
        sigma = np.sqrt(n * p * (1 - p))
        for c in cand:
            assert abs(counts.get(c, 0) - n * p) <= 4 * sigma

    def test_relaxation_order(self):
        free = open_room(7, 7)
        d_pix = np.full((7, 7), np.inf)
        d_pix[3, 3] = 5.0  # reachable but closer than start_min_goal_dist
        cfg = fg.AnnotationConfig(start_min_goal_dist=20, start_min_obs_dist=1)
        # goal-distance constraint must be dropped, obstacle constraint kept
        assert fn.sample_start(free, d_pix, cfg, 0) == (3, 3)

    def test_no_reachable_pixel_raises(self):
        free = open_room(5, 5)
        d_pix = np.full((5, 5), np.inf)
        with pytest.raises(UnreachableStartError):
            fn.sample_start(free, d_pix, fg.AnnotationConfig(), 0)


class TestResample:
    def test_segment_midpoint(self):
        out = fn.resample_arclength(np.array([[0.0, 0.0], [2.0, 0.0]]), 3)
        np.testing.assert_allclose(out, [[0, 0], [1, 0], [2, 0]], atol=1e-12)

    def test_identity_on_uniform_polyline(self):
        pts = np.stack([np.linspace(0, 5, 11), np.linspace(0, 2, 11)], axis=1)
        out = fn.resample_arclength(pts, 11)
        np.testing.assert_allclose(out, pts, atol=1e-12)

    def test_zero_length_input(self):
        out = fn.resample_arclength(np.array([[0.3, 0.4]]), 5)
        assert out.shape == (5, 2)
        np.testing.assert_array_equal(out, np.tile([0.3, 0.4], (5, 1)))

    def test_endpoints_and_uniform_arclength_positions(self):
        # independent oracle: walk the polyline segment by segment and emit
        # a point every total/(k-1) of accumulated length
        def walk(pts, k):
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            total = seg.sum()
            out = [pts[0]]
            for i in range(1, k - 1):
                target = total * i / (k - 1)
                acc = 0.0
                for j, L in enumerate(seg):
                    if acc + L >= target:
                        t = (target - acc) / L
                        out.append(pts[j] + t * (pts[j + 1] - pts[j]))
                        break
                    acc += L
            out.append(pts[-1])
            return np.array(out)

        rng = np.random.default_rng(0)
        pts = np.cumsum(rng.normal(size=(17, 2)), axis=0)
        out = fn.resample_arclength(pts, 50)
        np.testing.assert_allclose(out[0], pts[0], atol=1e-12)
        np.testing.assert_allclose(out[-1], pts[-1], atol=1e-12)
        np.testing.assert_allclose(out, walk(pts, 50), atol=1e-9)

    def test_against_oversampled_reference(self):
        # independent reference: resample a 10x-oversampled densification
        rng = np.random.default_rng(1)
        pts = np.cumsum(rng.normal(size=(9, 2)), axis=0)
        dense = []
        for a, b in zip(pts, pts[1:]):
            for t in np.linspace(0, 1, 10, endpoint=False):
                dense.append(a + t * (b - a))
        dense.append(pts[-1])
        dense = np.array(dense)
        out = fn.resample_arclength(pts, 40)
        ref = fn.resample_arclength(dense, 40)
        np.testing.assert_allclose(out, ref, atol=1e-9)
        # resampled length never exceeds the original
        orig = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
        res_len = np.linalg.norm(np.diff(out, axis=0), axis=1).sum()
        assert res_len <= orig + 1e-12


class TestAnnotate:
    def test_open_room_trajectory_hugs_chord(self):
        # Room with only the target as obstacle and uniform cost: the
        # reference path is an optimal octile path. A start-independent
        # predecessor tree bounds the chord deviation by the direction
        # quantization (about 10% of chord length at worst angles), so this
        # checks the stair-stepping bound on a near-axis chord and the
        # quantization bound on an oblique one.
        smap, mapping = block_scene(h=48, w=48, bbox=(40, 22, 43, 26))
        cfg = fg.AnnotationConfig(lambda_safe=0.0, goal_band=1, start_min_obs_dist=0,
                                  start_min_goal_dist=0)
        ann = fn.annotate(smap, mapping, fg.GoalSpec(target_label=2), cfg,
                          start=(4, 24))  # nearly axis-aligned chord
        pts = ann.trajectory * 48
        a, b = pts[0], pts[-1]
        d = b - a
        dev = np.abs((pts[:, 0] - a[0]) * d[1] - (pts[:, 1] - a[1]) * d[0]) / np.hypot(*d)
        assert dev.max() <= 1.5

        ann = fn.annotate(smap, mapping, fg.GoalSpec(target_label=2), cfg, start=(8, 43))
        pts = ann.trajectory * 48
        a, b = pts[0], pts[-1]
        d = b - a
        chord = np.hypot(*d)
        dev = np.abs((pts[:, 0] - a[0]) * d[1] - (pts[:, 1] - a[1]) * d[0]) / chord
        assert dev.max() <= 1.5 + 0.1 * chord

    def test_sealed_goal_with_outside_start_is_unreachable(self):
        # Goal chamber sealed by a wall; fixed start outside the chamber.
        labels = np.zeros((16, 16), dtype=int)
        labels[4:12, 7] = 1        # vertical wall
        labels[:, 0] = labels[:, -1] = 1
        labels[0, :] = labels[-1, :] = 1
        labels[4, 7:16] = 1
        labels[11, 7:16] = 1       # chamber walls (right side sealed box)
        labels[6:8, 10:12] = 2     # target inside the chamber
        inst = ObjectInstance(label=2, bbox=(10, 6, 12, 8), center=(11, 7))
        smap = fn.SemanticMap(labels=labels, instances=[inst])
        mapping = fn.LabelMapping(frozenset({0}), frozenset({1, 2}), frozenset({2}))
        with pytest.raises(UnreachableStartError):
            fn.annotate(smap, mapping, fg.GoalSpec(target_label=2),
                        fg.AnnotationConfig(goal_band=1), start=(2, 2))

    def test_golden_field_bytes_identical_across_runs(self, golden_scene):
        smap, mapping, instruction = golden_scene
        a = fn.annotate(smap, mapping, instruction.spec, rng_seed=42)
        b = fn.annotate(smap, mapping, instruction.spec, rng_seed=42)
        assert field_to_bytes(a.field) == field_to_bytes(b.field)
        np.testing.assert_array_equal(a.trajectory, b.trajectory)
        assert a.start == b.start

    def test_invariants_on_golden(self, golden_annotation, golden_scene):
        smap, mapping, _ = golden_scene
        ann = golden_annotation
        assert np.isfinite(ann.field).all()
        assert (ann.trajectory >= 0).all() and (ann.trajectory <= 1).all()
        # starts within one pixel of the start, ends on a goal pixel
        first = ann.trajectory[0] * [smap.width, smap.height]
        assert np.linalg.norm(first - np.array(ann.start)) <= 1.0
        last = ann.trajectory[-1] * [smap.width, smap.height]
        goal_set = {(int(x), int(y)) for x, y in ann.goal_pixels}
        assert (round(last[0]), round(last[1])) in goal_set

    def test_stage_errors_are_labeled(self):
        smap, mapping = block_scene()
        with pytest.raises(TargetNotFoundError, match=r"\[stage goal\]"):
            fn.annotate(smap, mapping, fg.GoalSpec(target_label=2, instance_index=3))

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            fg.AnnotationConfig(rho_safe=-1)
        with pytest.raises(ConfigurationError):
            fg.AnnotationConfig(traj_waypoints=1)
        with pytest.raises(ConfigurationError):
            fg.AnnotationConfig(w_g=2.0, w_obs=1.0)
        with pytest.raises(ConfigurationError):
            fg.GoalSpec(target_label=2, side="behind")
