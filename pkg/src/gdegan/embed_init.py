"""Initial node/edge scalar features and zeroed steerable tensors.

The initialization pipeline consumes only distances and the (rotation
invariant) input features, so every output here is invariant under rigid
motion of the coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geom
from .errors import ConfigError, ShapeError
from .nn import LayerNorm, Linear, scatter_add, silu
from .protein import ProteinGraph


@dataclass
class InitWeights:
    """Learned tensors of the embedding block.

    ``w_a`` projects raw node features (shared by the neighborhood messages
    and the self branch of the context combiner), ``w_rbf``/``w_e`` project
    radial basis features, and ``w_h``/``w_d``/``w_u`` with the layer norm
    form the combiner.  ``w_a``, ``w_rbf`` and ``w_e`` carry no bias.
    """

    w_a: Linear
    w_rbf: Linear
    w_h: Linear
    w_d: Linear
    w_u: Linear
    ln: LayerNorm
    w_e: Linear

    @staticmethod
    def init(rng: np.random.Generator, n_d: int, h_d: int, e_d: int, k: int) -> "InitWeights":
        if e_d != h_d:
            raise ConfigError(f"edge width {e_d} must equal node width {h_d}")
        return InitWeights(
            w_a=Linear.init(rng, n_d, h_d, bias=False),
            w_rbf=Linear.init(rng, k, h_d, bias=False),
            w_h=Linear.init(rng, 2 * h_d, h_d),
            w_d=Linear.init(rng, h_d, h_d),
            w_u=Linear.init(rng, h_d, h_d),
            ln=LayerNorm.init(h_d),
            w_e=Linear.init(rng, k, e_d, bias=False),
        )


@dataclass
class LayerState:
    """Per-node and per-edge working state threaded through the GDA blocks.

    ``x[l-1]`` holds the degree-l steerable tensor of shape (n, 2l+1, h_d);
    ``r_sph[l-1]`` the matching per-edge harmonics (E, 2l+1).  Edge arrays
    are indexed identically to the graph's edge list.
    """

    h: np.ndarray               # (n, h_d)
    x: list[np.ndarray]         # degree l = 1..L_max
    t: np.ndarray               # (E, e_d)
    r_sph: list[np.ndarray]     # degree l = 1..L_max
    rbf: np.ndarray             # (E, K)
    cut: np.ndarray             # (E,)

    @property
    def l_max(self) -> int:
        return len(self.x)

    def copy(self) -> "LayerState":
        return LayerState(
            h=self.h.copy(),
            x=[xi.copy() for xi in self.x],
            t=self.t.copy(),
            r_sph=self.r_sph,
            rbf=self.rbf,
            cut=self.cut,
        )


def edge_basis(g: ProteinGraph, k: int, l_max: int):
    """Radial basis, smooth cutoff and per-edge harmonics for the graph.

    Weight-independent, so the result is memoized on the graph.
    """
    key = ("edge_basis", k, l_max)
    cached = g.derived_cache.get(key)
    if cached is None:
        rbf = geom.rbf_expand(g.edge_dist, k, g.r_c)
        cut = geom.cosine_cutoff(g.edge_dist, g.r_c)
        r_sph = [geom.harmonics_stack(g.edge_unit, l) for l in range(1, l_max + 1)]
        cached = (rbf, cut, r_sph)
        g.derived_cache[key] = cached
    return cached


def aggregate_neighborhood(
    g: ProteinGraph, w: InitWeights, rbf: np.ndarray, cut: np.ndarray
) -> np.ndarray:
    """Distance-gated sum of projected neighbor features per receiver.

    Isolated nodes receive the zero vector (empty sum).
    """
    feats = g.node_features.astype(np.float64)
    if feats.shape[1] != w.w_a.w.shape[0]:
        raise ShapeError(
            f"feature width {feats.shape[1]} != projection input {w.w_a.w.shape[0]}"
        )
    per_edge = w.w_a(feats[g.edge_src]) * w.w_rbf(rbf) * cut[:, None]
    return scatter_add(per_edge, g.edge_dst, g.n)


def init_node_features(g: ProteinGraph, m: np.ndarray, w: InitWeights) -> np.ndarray:
    """Combine the projected self features with the neighborhood message.

    Concatenation order is (self, neighborhood); the self branch reuses the
    ``w_a`` projection so the combiner input width is exactly 2*h_d.
    """
    feats = g.node_features.astype(np.float64)
    self_proj = w.w_a(feats)
    if m.shape != self_proj.shape:
        raise ShapeError(f"message shape {m.shape} != {self_proj.shape}")
    z = np.concatenate([self_proj, m], axis=1)
    return w.w_u(silu(w.w_d(w.ln(w.w_h(z)))))


def init_edge_features(h0: np.ndarray, g: ProteinGraph, w: InitWeights, rbf: np.ndarray) -> np.ndarray:
    """Symmetric edge scalars (h0_i + h0_j) gated by projected radial features."""
    if w.w_e.w.shape[1] != h0.shape[1]:
        raise ConfigError(
            f"edge width {w.w_e.w.shape[1]} must equal node width {h0.shape[1]}"
        )
    return (h0[g.edge_dst] + h0[g.edge_src]) * w.w_e(rbf)


def init_steerable(n: int, l_max: int, h_d: int) -> list[np.ndarray]:
    """Zero steerable tensors, one (n, 2l+1, h_d) block per degree l."""
    return [np.zeros((n, 2 * l + 1, h_d)) for l in range(1, l_max + 1)]


def initial_state(g: ProteinGraph, w: InitWeights, k: int, l_max: int) -> LayerState:
    """Run the full initialization pipeline for one graph."""
    rbf, cut, r_sph = edge_basis(g, k, l_max)
    m = aggregate_neighborhood(g, w, rbf, cut)
    h0 = init_node_features(g, m, w)
    t0 = init_edge_features(h0, g, w, rbf)
    x0 = init_steerable(g.n, l_max, h0.shape[1])
    return LayerState(h=h0, x=x0, t=t0, r_sph=r_sph, rbf=rbf, cut=cut)
