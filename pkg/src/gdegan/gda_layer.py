"""One network block: Gaussian dynamic attention, attention-weighted
equivariant message passing, hierarchical edge refinement, and the
equivariant feed-forward.

Attention weights derive exclusively from scalar features and neighbor
sets, so they are invariant under rigid motion; steerable tensors are
touched only through per-edge harmonics, gated neighbor tensors, degree-wise
inner products and invariant channel gates, which preserves their degree-l
transformation law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed_init import LayerState
from .errors import ConfigError, ShapeError
from .nn import MLP2, Linear, scatter_add, softplus
from .protein import ProteinGraph


@dataclass
class GDAParams:
    """Per-head attention temperatures, stored through a softplus transform
    so any raw value yields a strictly positive temperature.  The raw vector
    is the block's only learnable attention state (exactly H scalars).
    """

    raw_xi: np.ndarray  # (H,)
    eps: float = 1e-6

    @property
    def n_heads(self) -> int:
        return int(self.raw_xi.shape[0])

    @property
    def xi(self) -> np.ndarray:
        return softplus(self.raw_xi)


@dataclass
class BlockWeights:
    """Learned tensors of one block.

    ``gamma_v``/``gamma_s`` emit S*h_d channels with S = 1 + 2*L_max (one
    scalar block, then per-degree harmonic and tensor gates); ``w_q`` is
    shared across degrees while each ``w_k[l-1]`` is degree specific.
    """

    gamma_v: MLP2
    gamma_s: MLP2
    w_rs: Linear
    w_q: Linear
    w_k: list[Linear]
    gamma_w: MLP2
    gamma_t: MLP2
    w_v: Linear
    gamma_m: MLP2

    @staticmethod
    def init(rng: np.random.Generator, h_d: int, e_d: int, l_max: int) -> "BlockWeights":
        if e_d != h_d:
            raise ConfigError(f"edge width {e_d} must equal node width {h_d}")
        s = 1 + 2 * l_max
        return BlockWeights(
            gamma_v=MLP2.init(rng, h_d, h_d, s * h_d),
            gamma_s=MLP2.init(rng, h_d, h_d, s * h_d),
            w_rs=Linear.init(rng, e_d, s * h_d, bias=False),
            w_q=Linear.init(rng, e_d, e_d, bias=False),
            w_k=[Linear.init(rng, e_d, e_d, bias=False) for _ in range(l_max)],
            gamma_w=MLP2.init(rng, e_d, e_d, e_d),
            gamma_t=MLP2.init(rng, e_d, e_d, e_d),
            w_v=Linear.init(rng, h_d, h_d, bias=False),
            gamma_m=MLP2.init(rng, h_d * l_max + h_d, h_d, 2 * h_d),
        )


def neighborhood_stats(g: ProteinGraph, h: np.ndarray):
    """Per-channel mean and population variance of each node's neighbors.

    The node itself is excluded (the neighbor sets already are); isolated
    nodes get zero mean and zero variance.
    """
    counts = np.maximum(np.diff(g.row_ptr).astype(np.float64), 1.0)[:, None]
    mu = scatter_add(h[g.edge_src], g.edge_dst, g.n) / counts
    sq = scatter_add((h[g.edge_src] - mu[g.edge_dst]) ** 2, g.edge_dst, g.n)
    return mu, sq / counts


def scaled_differences(h: np.ndarray, var: np.ndarray, eps: float, g: ProteinGraph) -> np.ndarray:
    """Feature differences normalized by the receiver's neighborhood spread."""
    return (h[g.edge_src] - h[g.edge_dst]) / np.sqrt(var[g.edge_dst] + eps)


def gaussian_attention(d_scaled: np.ndarray, params: GDAParams, g: ProteinGraph) -> np.ndarray:
    """Per-edge, per-head attention from squared scaled differences.

    Head h sees its own channel slice; its logit is -|slice|^2 / (2 xi_h),
    normalized over each receiver's neighborhood.  Rows of a receiver sum
    to one per head.  Returns shape (E, H).
    """
    n_e, h_d = d_scaled.shape
    n_heads = params.n_heads
    if h_d % n_heads:
        raise ConfigError(f"head count {n_heads} must divide width {h_d}")
    q = (d_scaled.reshape(n_e, n_heads, h_d // n_heads) ** 2).sum(axis=2)
    logits = -q / (2.0 * params.xi)[None, :]
    # per-receiver max subtraction for a stable softmax
    peak = np.full((g.n, n_heads), -np.inf)
    np.maximum.at(peak, g.edge_dst, logits)
    expv = np.exp(logits - peak[g.edge_dst])
    denom = scatter_add(expv, g.edge_dst, g.n)
    return expv / denom[g.edge_dst]


def attention_messages(
    alpha: np.ndarray,
    h: np.ndarray,
    t: np.ndarray,
    g: ProteinGraph,
    w: BlockWeights,
    cut: np.ndarray,
    l_max: int,
):
    """Attention-gated value messages plus distance-gated edge modulation.

    The per-head attention multiplies its head's channel slice, replicated
    identically across all S blocks.  Returns the split components in fixed
    order: scalar block, degree gates d(1..L), tensor gates t(1..L), each of
    shape (E, h_d).
    """
    n_e, h_d = alpha.shape[0], h.shape[1]
    s = 1 + 2 * l_max
    alpha_full = np.repeat(alpha, h_d // alpha.shape[1], axis=1)  # (E, h_d)
    v = w.gamma_v(h)[g.edge_src].reshape(n_e, s, h_d)
    edge_mod = (w.w_rs(t) * w.gamma_s(h)[g.edge_src]).reshape(n_e, s, h_d)
    o = alpha_full[:, None, :] * v + edge_mod * cut[:, None, None]
    o_s = o[:, 0]
    o_d = [o[:, 1 + l] for l in range(l_max)]
    o_t = [o[:, 1 + l_max + l] for l in range(l_max)]
    return o_s, o_d, o_t


def update_features(
    o_s: np.ndarray,
    o_d: list[np.ndarray],
    o_t: list[np.ndarray],
    state: LayerState,
    g: ProteinGraph,
):
    """Residual scalar/steerable update from the message components.

    Each degree accumulates its edge harmonic scaled by the degree gate plus
    the sender's steerable tensor scaled by the tensor gate; the h_d-wide
    gates broadcast across the 2l+1 harmonic components.
    """
    h_new = state.h + scatter_add(o_s, g.edge_dst, g.n)
    x_new = []
    for l0, x in enumerate(state.x):
        per_edge = (
            o_d[l0][:, None, :] * state.r_sph[l0][:, :, None]
            + o_t[l0][:, None, :] * x[g.edge_src]
        )
        x_new.append(x + scatter_add(per_edge, g.edge_dst, g.n))
    return h_new, x_new


def hierarchical_refinement(
    x: list[np.ndarray], t: np.ndarray, g: ProteinGraph, w: BlockWeights
) -> np.ndarray:
    """Edge scalars refined by degree-summed inner products of projected
    steerable tensors (the contraction runs over the harmonic axis, so the
    result is rotation invariant).
    """
    if len(w.w_k) != len(x):
        raise ShapeError(f"{len(w.w_k)} key projections for {len(x)} degrees")
    e_d = t.shape[1]
    wij = np.zeros((t.shape[0], e_d))
    for l0, xl in enumerate(x):
        qi = w.w_q(xl)[g.edge_dst]      # (E, 2l+1, e_d)
        kj = w.w_k[l0](xl)[g.edge_src]
        wij += np.sum(qi * kj, axis=1)
    return t + w.gamma_w(wij) * w.gamma_t(t)


def eqff(h: np.ndarray, x: list[np.ndarray], w: BlockWeights):
    """Channel mixing gated by invariant norms of the projected tensors."""
    xv = [w.w_v(xl) for xl in x]
    norms = [np.sqrt(np.sum(v * v, axis=1)) for v in xv]  # (n, h_d) per degree
    gate = w.gamma_m(np.concatenate(norms + [h], axis=1))
    h_d = h.shape[1]
    m1, m2 = gate[:, :h_d], gate[:, h_d:]
    h_new = h + m1
    x_new = [xl + m2[:, None, :] * v for xl, v in zip(x, xv)]
    return h_new, x_new


@dataclass
class LayerDiagnostics:
    """Captured per-layer attention matrix rows and neighborhood variances."""

    alpha: np.ndarray   # (E, H)
    sigma2: np.ndarray  # (n, h_d)


def layer_forward(
    state: LayerState,
    g: ProteinGraph,
    params: GDAParams,
    w: BlockWeights,
    collect: bool = False,
):
    """Apply one full block; pure function of (state, graph, weights)."""
    mu, var = neighborhood_stats(g, state.h)
    d_scaled = scaled_differences(state.h, var, params.eps, g)
    alpha = gaussian_attention(d_scaled, params, g)
    o_s, o_d, o_t = attention_messages(
        alpha, state.h, state.t, g, w, state.cut, state.l_max
    )
    h_new, x_new = update_features(o_s, o_d, o_t, state, g)
    t_new = hierarchical_refinement(x_new, state.t, g, w)
    h_new, x_new = eqff(h_new, x_new, w)
    out = LayerState(
        h=h_new, x=x_new, t=t_new, r_sph=state.r_sph, rbf=state.rbf, cut=state.cut
    )
    if collect:
        return out, LayerDiagnostics(alpha=alpha, sigma2=var)
    return out
