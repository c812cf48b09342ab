"""Training-math oracles: stratified query sampling and field-matching losses.

These are learner-independent: predictions can come from any source, and
targets are obtained by bilinearly sampling an annotated field at the query
points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grid_core import FlowField, bilinear_sample

EPSILON = 1e-8


@dataclass
class SampleBatch:
    """Stratified query points over the unit square.

    ``points`` is (N, 2); ``grid`` is the stratification resolution g and
    ``per_bin`` the pre-truncation count drawn in each of the g*g cells.
    """

    points: np.ndarray
    grid: int
    per_bin: int


def stratified_sample(g: int, n_s: int, rng_seed) -> SampleBatch:
    """Draw ceil(n_s / g^2) jittered uniform points per cell of a g x g
    partition of [0, 1]^2, concatenate in row-major cell order, and keep the
    first n_s. Deterministic per seed."""
    if g < 1 or n_s < 1:
        raise ConfigurationError("g and n_s must be at least 1")
    per_bin = -(-n_s // (g * g))  # ceil
    rng = np.random.default_rng(rng_seed)
    jitter = rng.random((g * g, per_bin, 2))
    rows, cols = np.divmod(np.arange(g * g), g)
    origins = np.stack([cols, rows], axis=1).astype(np.float64)  # (u, v) cell corners
    pts = (origins[:, None, :] + jitter) / g
    pts = pts.reshape(-1, 2)[:n_s]
    return SampleBatch(points=pts, grid=g, per_bin=per_bin)


def sample_targets(field: FlowField, batch: SampleBatch) -> np.ndarray:
    """Target vectors: the annotated field bilinearly sampled at the batch
    points."""
    return bilinear_sample(field, batch.points)


def direction_loss(pred: np.ndarray, target: np.ndarray, epsilon: float = EPSILON) -> float:
    """Mean of 1 - cos(pred, target) with an epsilon-guarded denominator.

    0 for perfectly aligned nonzero vectors, 2 for anti-aligned; always in
    [0, 2].
    """
    pred, target = _paired(pred, target)
    dots = np.einsum("ij,ij->i", pred, target)
    norms = np.linalg.norm(pred, axis=1) * np.linalg.norm(target, axis=1)
    return float(np.mean(1.0 - dots / (norms + epsilon)))


def magnitude_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared difference of vector norms."""
    pred, target = _paired(pred, target)
    diff = np.linalg.norm(pred, axis=1) - np.linalg.norm(target, axis=1)
    return float(np.mean(diff ** 2))


def total_loss(pred: np.ndarray, target: np.ndarray, lam: float = 0.5) -> float:
    """direction_loss + lam * magnitude_loss."""
    if lam < 0:
        raise ConfigurationError("loss weight lam must be nonnegative")
    return direction_loss(pred, target) + lam * magnitude_loss(pred, target)


def _paired(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise ValueError("pred and target must both be (N, 2) arrays")
    return pred, target
