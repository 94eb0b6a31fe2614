"""Property harness for the symmetry contracts of the full model.

Runs the forward pass on random graphs before and after rigid motions,
mirroring, and node permutations, and reports the worst deviations from the
expected transformation laws: invariant probabilities, degree-l tensors
rotating by their harmonic blocks, directions rotating like vectors, and
mirror images indistinguishable in every scalar output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import model
from .geom import Rotation, wigner_block
from .model import ModelConfig, ModelWeights
from .protein import ProteinGraph, graph_from_arrays

TOL_PROBS = 1e-5
TOL_STEERABLE = 1e-5
TOL_DIRECTIONS = 1e-4
TOL_MIRROR = 1e-5
TOL_PERMUTATION = 1e-9


def random_graph(n: int, cfg: ModelConfig, rng: np.random.Generator) -> ProteinGraph:
    """Random residue cloud sized so neighborhoods are well populated."""
    positions = rng.normal(scale=6.0, size=(n, 3))
    feats = rng.normal(size=(n, cfg.n_d)).astype(np.float32)
    labels = (rng.uniform(size=n) < 0.3).astype(np.int8)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return graph_from_arrays(
        positions, feats, cfg.r_c, cfg.max_neighbors, labels=labels, true_dirs=dirs
    )


def transformed_graph(
    g: ProteinGraph,
    cfg: ModelConfig,
    rot: np.ndarray | None = None,
    shift: np.ndarray | None = None,
    mirror: bool = False,
    perm: np.ndarray | None = None,
) -> ProteinGraph:
    """Rebuild the graph from transformed coordinates (and permuted rows)."""
    pos = g.positions
    dirs = g.true_dirs
    if mirror:
        pos = -pos
        dirs = -dirs
    if rot is not None:
        pos = pos @ rot.T
        dirs = dirs @ rot.T
    if shift is not None:
        pos = pos + shift
    feats, labels = g.node_features, g.labels
    if perm is not None:
        pos, dirs = pos[perm], dirs[perm]
        feats, labels = feats[perm], labels[perm]
    return graph_from_arrays(
        pos, feats, cfg.r_c, cfg.max_neighbors, labels=labels, true_dirs=dirs
    )


def rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    """Max absolute deviation scaled by the magnitude of the reference."""
    scale = max(float(np.max(np.abs(b))), 1e-12)
    return float(np.max(np.abs(a - b))) / scale


@dataclass
class CheckReport:
    """Worst observed deviations over all trials."""

    trials: int
    probs_dev: float = 0.0
    steerable_dev: float = 0.0
    direction_dev: float = 0.0
    mirror_scalar_dev: float = 0.0
    mirror_parity_dev: float = 0.0
    permutation_dev: float = 0.0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def summarize(self) -> str:
        lines = [
            f"trials run              : {self.trials}",
            f"probability invariance  : {self.probs_dev:.3e} (tol {TOL_PROBS:.0e})",
            f"steerable equivariance  : {self.steerable_dev:.3e} (tol {TOL_STEERABLE:.0e})",
            f"direction equivariance  : {self.direction_dev:.3e} (tol {TOL_DIRECTIONS:.0e})",
            f"mirror scalar identity  : {self.mirror_scalar_dev:.3e} (tol {TOL_MIRROR:.0e})",
            f"mirror degree-1 parity  : {self.mirror_parity_dev:.3e} (tol {TOL_MIRROR:.0e})",
            f"permutation consistency : {self.permutation_dev:.3e} (tol {TOL_PERMUTATION:.0e})",
            "result                  : " + ("PASS" if self.passed else "FAIL"),
        ]
        lines.extend(f"failed: {f}" for f in self.failures)
        return "\n".join(lines)


def run_checks(
    cfg: ModelConfig,
    seed: int,
    trials: int,
    n_nodes: int = 30,
    weights: ModelWeights | None = None,
    corrupt_wigner: bool = False,
) -> CheckReport:
    """Exercise every symmetry contract on ``trials`` random graph/motion
    pairs.  ``corrupt_wigner`` perturbs the rotation blocks used as the
    comparison oracle; a healthy model must then FAIL (negative control).
    """
    rng = np.random.default_rng(seed)
    w = weights if weights is not None else model.init_model(cfg, cfg.seed)
    report = CheckReport(trials=trials)
    for trial in range(trials):
        g = random_graph(n_nodes, cfg, rng)
        base_state, base_pred = model.forward_state(g, w, cfg)

        rot = Rotation.random(rng).matrix
        shift = rng.normal(scale=20.0, size=3)
        g_rigid = transformed_graph(g, cfg, rot=rot, shift=shift)
        state_r, pred_r = model.forward_state(g_rigid, w, cfg)

        report.probs_dev = max(report.probs_dev, rel_dev(pred_r.probs, base_pred.probs))
        for l0, x in enumerate(base_state.x):
            d = wigner_block(rot, l0 + 1).matrix
            if corrupt_wigner:
                d = d.copy()
                d[0, 0] += 0.05
            expected = np.einsum("ab,nbc->nac", d, x)
            report.steerable_dev = max(report.steerable_dev, rel_dev(state_r.x[l0], expected))
        report.direction_dev = max(
            report.direction_dev, rel_dev(pred_r.directions, base_pred.directions @ rot.T)
        )

        g_mirror = transformed_graph(g, cfg, mirror=True)
        state_m, pred_m = model.forward_state(g_mirror, w, cfg)
        report.mirror_scalar_dev = max(
            report.mirror_scalar_dev, rel_dev(pred_m.probs, base_pred.probs)
        )
        report.mirror_parity_dev = max(
            report.mirror_parity_dev, rel_dev(state_m.x[0], -base_state.x[0])
        )

        perm = rng.permutation(g.n)
        pred_p = model.forward(transformed_graph(g, cfg, perm=perm), w, cfg)
        report.permutation_dev = max(
            report.permutation_dev, rel_dev(pred_p.probs, base_pred.probs[perm])
        )

    checks = [
        ("probability invariance", report.probs_dev, TOL_PROBS),
        ("steerable equivariance", report.steerable_dev, TOL_STEERABLE),
        ("direction equivariance", report.direction_dev, TOL_DIRECTIONS),
        ("mirror scalar identity", report.mirror_scalar_dev, TOL_MIRROR),
        ("mirror degree-1 parity", report.mirror_parity_dev, TOL_MIRROR),
        ("permutation consistency", report.permutation_dev, TOL_PERMUTATION),
    ]
    report.failures = [name for name, dev, tol in checks if dev > tol]
    return report
