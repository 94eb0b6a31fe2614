"""Evaluation: center-distance metrics, multi-site success rates, failure
rate, and the variance-versus-label dependency statistics.

The statistics are computed from explicit formulas (population-normalized
Pearson, average ranks for Spearman and the rank-sum U, pooled-variance t
and effect size); the test suite cross-checks them against scipy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGroup, EmptyInput, EmptyLigand


def dcc(center: np.ndarray, ligand: np.ndarray) -> float:
    """Distance from a predicted center to the ligand heavy-atom centroid."""
    ligand = np.atleast_2d(np.asarray(ligand, dtype=np.float64))
    if ligand.shape[0] == 0:
        raise EmptyLigand("ligand has no heavy atoms")
    return float(np.linalg.norm(np.asarray(center, dtype=np.float64) - ligand.mean(axis=0)))


def dca(center: np.ndarray, ligand: np.ndarray) -> float:
    """Distance from a predicted center to the nearest ligand heavy atom."""
    ligand = np.atleast_2d(np.asarray(ligand, dtype=np.float64))
    if ligand.shape[0] == 0:
        raise EmptyLigand("ligand has no heavy atoms")
    return float(np.min(np.linalg.norm(ligand - np.asarray(center)[None, :], axis=1)))


def greedy_match(centers: np.ndarray, ligands: list[np.ndarray]) -> list[tuple[int, int]]:
    """Pair pockets with ligands by repeatedly taking the globally closest
    (pocket, unmatched ligand) pair under the center-to-centroid distance.
    Returns (ligand index, pocket index) pairs.
    """
    centers = np.atleast_2d(centers)
    if centers.shape[0] == 0 or not ligands:
        return []
    cost = np.array([[dcc(c, lig) for c in centers] for lig in ligands])
    pairs = []
    free_l = set(range(len(ligands)))
    free_p = set(range(centers.shape[0]))
    while free_l and free_p:
        best = min(
            ((cost[li, pi], li, pi) for li in sorted(free_l) for pi in sorted(free_p)),
            key=lambda t: (t[0], t[1], t[2]),
        )
        _, li, pi = best
        pairs.append((li, pi))
        free_l.discard(li)
        free_p.discard(pi)
    return pairs


@dataclass
class LigandOutcome:
    complex_id: str
    ligand_id: str
    matched_rank: int | None  # 1-based pocket rank, None when unmatched
    dcc: float | None
    dca: float | None

    def hits(self, threshold: float) -> tuple[bool, bool]:
        return (
            self.dcc is not None and self.dcc < threshold,
            self.dca is not None and self.dca < threshold,
        )


def match_complex(
    centers: np.ndarray,
    ligands: list[np.ndarray],
    complex_id: str = "",
    ligand_ids: list[str] | None = None,
) -> list[LigandOutcome]:
    """Evaluate one complex: the top-m ranked pockets (m = ligand count)
    enter the greedy matching; unmatched ligands become misses."""
    centers = np.atleast_2d(centers) if np.size(centers) else np.zeros((0, 3))
    ligand_ids = ligand_ids or [str(i) for i in range(len(ligands))]
    top = centers[: len(ligands)]
    matched = {li: pi for li, pi in greedy_match(top, ligands)}
    outcomes = []
    for li, lig in enumerate(ligands):
        pi = matched.get(li)
        outcomes.append(
            LigandOutcome(
                complex_id=complex_id,
                ligand_id=ligand_ids[li],
                matched_rank=None if pi is None else pi + 1,
                dcc=None if pi is None else dcc(top[pi], lig),
                dca=None if pi is None else dca(top[pi], lig),
            )
        )
    return outcomes


def success_rates(
    pockets_per_complex: list[np.ndarray],
    ligands_per_complex: list[list[np.ndarray]],
    threshold: float = 4.0,
) -> tuple[float, float]:
    """Fraction of ligands whose matched pocket lands strictly inside the
    threshold, pooled over complexes (the denominator is total ligands)."""
    if threshold <= 0:
        raise EmptyInput(f"threshold must be positive, got {threshold}")
    total = 0
    dcc_hits = 0
    dca_hits = 0
    for centers, ligands in zip(pockets_per_complex, ligands_per_complex):
        for out in match_complex(centers, ligands):
            total += 1
            hit_c, hit_a = out.hits(threshold)
            dcc_hits += hit_c
            dca_hits += hit_a
    if total == 0:
        raise EmptyInput("no ligands to evaluate")
    return dcc_hits / total, dca_hits / total


def failure_rate(pocket_counts) -> float:
    """Fraction of proteins that produced zero pockets."""
    counts = list(pocket_counts)
    if not counts:
        raise EmptyInput("no proteins to evaluate")
    return sum(1 for c in counts if c == 0) / len(counts)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(np.sum(xc * xc)) * float(np.sum(yc * yc)))
    if denom == 0.0:
        raise DegenerateGroup("correlation undefined for a constant input")
    return float(np.sum(xc * yc)) / denom


@dataclass
class VarianceStats:
    """Association between a per-residue scalar and binary binding labels.

    ``t_stat`` and ``cohens_d`` are None when the pooled standard deviation
    vanishes (both groups constant); the rank-based U is still reported.
    """

    pearson_r: float
    spearman_rho: float
    point_biserial: float
    t_stat: float | None
    mann_whitney_u: float
    cohens_d: float | None
    mean_pos: float
    sd_pos: float
    mean_neg: float
    sd_neg: float
    n_pos: int
    n_neg: int


def variance_label_stats(sigma2: np.ndarray, labels: np.ndarray) -> VarianceStats:
    """Full dependency panel between a scalar signal and binary labels.

    Point-biserial reuses the Pearson code path verbatim (they coincide on
    binary labels).  Requires at least two residues per group.
    """
    x = np.asarray(sigma2, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateGroup("inputs must be equal-length vectors")
    pos = x[y == 1]
    neg = x[y == 0]
    if pos.size < 2 or neg.size < 2:
        raise DegenerateGroup(
            f"need >= 2 residues per group, got {pos.size} positive / {neg.size} negative"
        )
    r = pearson(x, y)
    rho = pearson(_average_ranks(x), _average_ranks(y))
    n1, n0 = pos.size, neg.size
    s1 = float(np.var(pos, ddof=1))
    s0 = float(np.var(neg, ddof=1))
    pooled = math.sqrt(((n1 - 1) * s1 + (n0 - 1) * s0) / (n1 + n0 - 2))
    if pooled > 0.0:
        d = (float(pos.mean()) - float(neg.mean())) / pooled
        t = d / math.sqrt(1.0 / n1 + 1.0 / n0)
    else:
        d = None
        t = None
    ranks = _average_ranks(x)
    u = float(np.sum(ranks[y == 1])) - n1 * (n1 + 1) / 2.0
    return VarianceStats(
        pearson_r=r,
        spearman_rho=rho,
        point_biserial=pearson(x, y),
        t_stat=t,
        mann_whitney_u=u,
        cohens_d=d,
        mean_pos=float(pos.mean()),
        sd_pos=float(np.std(pos, ddof=1)),
        mean_neg=float(neg.mean()),
        sd_neg=float(np.std(neg, ddof=1)),
        n_pos=int(n1),
        n_neg=int(n0),
    )
