"""Pocket extraction: candidate thresholding, flat-kernel mean-shift, and
pocket ranking.

The mean-shift uses a uniform ball kernel, so every operation commutes with
rigid motions of the input points; centers of a transformed point set equal
the transformed centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyInput
from .model import Prediction
from .protein import ProteinGraph

CONVERGENCE_TOL = 1e-3  # Angstrom
MAX_ITERATIONS = 300


def select_candidates(pred: Prediction, g: ProteinGraph, tau: float):
    """CA coordinates of residues with probability strictly above ``tau``.

    Returns (points, probabilities, residue indices); all three are empty
    when nothing clears the threshold (a failure-case protein).
    """
    if not 0 < tau <= 1:
        raise DomainError(f"tau must be in (0, 1], got {tau}")
    idx = np.flatnonzero(pred.probs > tau)
    return g.positions[idx], pred.probs[idx], idx


@dataclass
class MeanShiftResult:
    centers: np.ndarray      # (C, 3)
    assignments: np.ndarray  # (m,) center index per input point


def mean_shift(points: np.ndarray, bandwidth: float) -> MeanShiftResult:
    """Flat-kernel mode seeking started from every point.

    Each point's mode is iterated as the mean of all points within
    ``bandwidth`` until the shift drops below 1e-3 A (or 300 iterations).
    Converged modes closer than ``bandwidth / 2`` merge; the kept mode is
    the one with more supporters (points inside its final window), ties
    resolving to the lower point index.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] == 0:
        raise EmptyInput("mean_shift needs at least one point")
    if bandwidth <= 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    m = points.shape[0]
    modes = points.copy()
    active = np.ones(m, dtype=bool)
    for _ in range(MAX_ITERATIONS):
        if not active.any():
            break
        diff = modes[active, None, :] - points[None, :, :]
        inside = np.sum(diff * diff, axis=2) <= bandwidth * bandwidth
        new_modes = inside @ points / inside.sum(axis=1)[:, None]
        shift = np.linalg.norm(new_modes - modes[active], axis=1)
        modes[active] = new_modes
        still = np.zeros(m, dtype=bool)
        still[np.flatnonzero(active)[shift >= CONVERGENCE_TOL]] = True
        active = still

    d2_all = np.sum((modes[:, None, :] - points[None, :, :]) ** 2, axis=2)
    supporters = np.sum(d2_all <= bandwidth * bandwidth, axis=1)

    order = np.lexsort((np.arange(m), -supporters))
    kept: list[int] = []
    merged_into = np.full(m, -1, dtype=np.int64)
    half = bandwidth / 2.0
    for i in order:
        for c, k in enumerate(kept):
            if np.linalg.norm(modes[i] - modes[k]) < half:
                merged_into[i] = c
                break
        else:
            merged_into[i] = len(kept)
            kept.append(int(i))
    return MeanShiftResult(centers=modes[kept], assignments=merged_into)


@dataclass
class PocketPrediction:
    """Ranked pockets: parallel lists ordered best-first.

    ``scores`` holds the mean candidate probability per pocket; the ranking
    key is member count times that mean, ties broken by larger member count
    and then lower center index.
    """

    centers: np.ndarray            # (P, 3)
    members: list[np.ndarray]      # residue indices per pocket
    scores: np.ndarray             # (P,) mean probability over members

    @property
    def n_pockets(self) -> int:
        return int(self.centers.shape[0])


def rank_pockets(
    result: MeanShiftResult,
    probs: np.ndarray,
    residue_indices: np.ndarray | None = None,
) -> PocketPrediction:
    """Order the mean-shift clusters for reporting."""
    n_centers = result.centers.shape[0]
    if residue_indices is None:
        residue_indices = np.arange(result.assignments.shape[0])
    members = [np.flatnonzero(result.assignments == c) for c in range(n_centers)]
    means = np.array([float(np.mean(probs[m])) for m in members])
    counts = np.array([m.size for m in members])
    order = sorted(
        range(n_centers), key=lambda c: (-means[c] * counts[c], -counts[c], c)
    )
    return PocketPrediction(
        centers=result.centers[order],
        members=[residue_indices[members[c]] for c in order],
        scores=means[order],
    )


def extract_pockets(
    pred: Prediction, g: ProteinGraph, tau: float, bandwidth: float
) -> PocketPrediction:
    """Threshold, cluster and rank in one call; empty-input safe."""
    points, probs, idx = select_candidates(pred, g, tau)
    if points.shape[0] == 0:
        return PocketPrediction(centers=np.zeros((0, 3)), members=[], scores=np.zeros(0))
    result = mean_shift(points, bandwidth)
    return rank_pockets(result, probs, idx)
