"""Full model: stacked blocks, prediction heads, losses, checkpointing and a
finite-difference trainer for micro configurations.

All learnable tensors live in one flat float64 vector; the weight objects
hold reshaped views into it.  Values are always float32-representable so the
checkpoint format (float32 payload) round-trips bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from . import embed_init, gda_layer
from .embed_init import InitWeights
from .errors import ConfigError, CorruptCheckpoint, DivergenceError, ShapeError
from .gda_layer import BlockWeights, GDAParams, LayerDiagnostics
from .nn import MLP2, LayerNorm, Linear, inverse_softplus, quantize32, sigmoid
from .protein import ProteinGraph

CHECKPOINT_HEADER = "gdegan-checkpoint v1"

# Raw temperature whose softplus is about 2.03, the starting attention
# temperature all heads share.
RAW_XI_INIT = inverse_softplus(2.03)


@dataclass
class ModelConfig:
    n_d: int = 1280
    h_d: int = 128
    e_d: int = 128
    n_rbf: int = 32
    n_heads: int = 8
    n_layers: int = 4
    l_max: int = 2
    r_c: float = 10.0
    max_neighbors: int = 32
    eps: float = 1e-6
    tau: float = 0.5
    bandwidth: float = 8.0
    seed: int = 0

    def validate(self) -> "ModelConfig":
        if self.n_d < 1:
            raise ConfigError(f"n_d must be >= 1, got {self.n_d}")
        if self.h_d < 1 or self.h_d % self.n_heads:
            raise ConfigError(f"n_heads {self.n_heads} must divide h_d {self.h_d}")
        if self.e_d != self.h_d:
            raise ConfigError(f"e_d {self.e_d} must equal h_d {self.h_d}")
        if not 1 <= self.l_max <= 2:
            raise ConfigError(f"l_max must be 1 or 2, got {self.l_max}")
        if self.n_layers < 0:
            raise ConfigError(f"n_layers must be >= 0, got {self.n_layers}")
        if self.n_rbf < 1:
            raise ConfigError(f"n_rbf must be >= 1, got {self.n_rbf}")
        if self.r_c <= 0 or self.max_neighbors < 1:
            raise ConfigError("r_c must be positive and max_neighbors >= 1")
        if not 0 < self.tau <= 1:
            # tau = 1 is allowed: the strict threshold then selects nothing,
            # which exercises the zero-pocket path
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.bandwidth <= 0:
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth}")
        return self

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))

    @staticmethod
    def from_text(text: str) -> "ModelConfig":
        kinds = {f.name: f.type for f in fields(ModelConfig)}
        kwargs = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in kinds:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = float(value) if kinds[key] in ("float", float) else int(value)
        return ModelConfig(**kwargs)


def tensor_manifest(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical (name, shape) listing of every learnable tensor.

    The listing is total: checkpoints and the flat parameter vector follow
    exactly this order.
    """
    h_d, e_d, s = cfg.h_d, cfg.e_d, 1 + 2 * cfg.l_max
    entries: list[tuple[str, tuple[int, ...]]] = [
        ("init.w_a", (cfg.n_d, h_d)),
        ("init.w_rbf", (cfg.n_rbf, h_d)),
        ("init.w_h.w", (2 * h_d, h_d)),
        ("init.w_h.b", (h_d,)),
        ("init.ln.scale", (h_d,)),
        ("init.ln.shift", (h_d,)),
        ("init.w_d.w", (h_d, h_d)),
        ("init.w_d.b", (h_d,)),
        ("init.w_u.w", (h_d, h_d)),
        ("init.w_u.b", (h_d,)),
        ("init.w_e", (cfg.n_rbf, e_d)),
    ]

    def mlp(prefix: str, n_in: int, n_hidden: int, n_out: int):
        entries.extend(
            [
                (f"{prefix}.w1", (n_in, n_hidden)),
                (f"{prefix}.b1", (n_hidden,)),
                (f"{prefix}.w2", (n_hidden, n_out)),
                (f"{prefix}.b2", (n_out,)),
            ]
        )

    for i in range(cfg.n_layers):
        p = f"layers.{i}"
        entries.append((f"{p}.raw_xi", (cfg.n_heads,)))
        mlp(f"{p}.gamma_v", h_d, h_d, s * h_d)
        mlp(f"{p}.gamma_s", h_d, h_d, s * h_d)
        entries.append((f"{p}.w_rs", (e_d, s * h_d)))
        entries.append((f"{p}.w_q", (e_d, e_d)))
        for l in range(1, cfg.l_max + 1):
            entries.append((f"{p}.w_k.{l}", (e_d, e_d)))
        mlp(f"{p}.gamma_w", e_d, e_d, e_d)
        mlp(f"{p}.gamma_t", e_d, e_d, e_d)
        entries.append((f"{p}.w_v", (h_d, h_d)))
        mlp(f"{p}.gamma_m", h_d * cfg.l_max + h_d, h_d, 2 * h_d)
    mlp("head", h_d, h_d, 1)
    return entries


@dataclass
class LayerBlock:
    params: GDAParams
    weights: BlockWeights


@dataclass
class ModelWeights:
    cfg: ModelConfig
    init: InitWeights
    layers: list[LayerBlock]
    head: MLP2
    flat: np.ndarray  # backing store; every tensor above is a view into it

    def named_tensors(self):
        offset = 0
        for name, shape in tensor_manifest(self.cfg):
            size = int(np.prod(shape))
            yield name, self.flat[offset : offset + size].reshape(shape)
            offset += size

    @staticmethod
    def from_flat(cfg: ModelConfig, flat: np.ndarray) -> "ModelWeights":
        manifest = tensor_manifest(cfg)
        total = sum(int(np.prod(s)) for _, s in manifest)
        if flat.shape != (total,):
            raise ShapeError(f"flat vector has {flat.shape[0]}, expected {total}")
        views: dict[str, np.ndarray] = {}
        offset = 0
        for name, shape in manifest:
            size = int(np.prod(shape))
            views[name] = flat[offset : offset + size].reshape(shape)
            offset += size

        def lin(name: str) -> Linear:
            return Linear(views[f"{name}.w"], views[f"{name}.b"])

        def mat(name: str) -> Linear:
            return Linear(views[name], None)

        def mlp(name: str) -> MLP2:
            return MLP2(
                Linear(views[f"{name}.w1"], views[f"{name}.b1"]),
                Linear(views[f"{name}.w2"], views[f"{name}.b2"]),
            )

        init = InitWeights(
            w_a=mat("init.w_a"),
            w_rbf=mat("init.w_rbf"),
            w_h=lin("init.w_h"),
            w_d=lin("init.w_d"),
            w_u=lin("init.w_u"),
            ln=LayerNorm(views["init.ln.scale"], views["init.ln.shift"]),
            w_e=mat("init.w_e"),
        )
        layers = []
        for i in range(cfg.n_layers):
            p = f"layers.{i}"
            layers.append(
                LayerBlock(
                    params=GDAParams(raw_xi=views[f"{p}.raw_xi"], eps=cfg.eps),
                    weights=BlockWeights(
                        gamma_v=mlp(f"{p}.gamma_v"),
                        gamma_s=mlp(f"{p}.gamma_s"),
                        w_rs=mat(f"{p}.w_rs"),
                        w_q=mat(f"{p}.w_q"),
                        w_k=[mat(f"{p}.w_k.{l}") for l in range(1, cfg.l_max + 1)],
                        gamma_w=mlp(f"{p}.gamma_w"),
                        gamma_t=mlp(f"{p}.gamma_t"),
                        w_v=mat(f"{p}.w_v"),
                        gamma_m=mlp(f"{p}.gamma_m"),
                    ),
                )
            )
        return ModelWeights(cfg=cfg, init=init, layers=layers, head=mlp("head"), flat=flat)


def count_params(w: ModelWeights) -> int:
    """Exact number of learnable scalars."""
    return int(w.flat.shape[0])


def init_model(cfg: ModelConfig, seed: int | None = None) -> ModelWeights:
    """Deterministic initialization: uniform fan-in weights, zero biases,
    unit layer-norm scales, and all attention temperatures at softplus
    inverse of 2.03.  Identical seeds give bitwise-identical weights.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    chunks = []
    for name, shape in tensor_manifest(cfg):
        leaf = name.rsplit(".", 1)[-1]
        if leaf in ("b", "b1", "b2", "shift"):
            chunks.append(np.zeros(int(np.prod(shape))))
        elif leaf == "scale":
            chunks.append(np.ones(int(np.prod(shape))))
        elif leaf == "raw_xi":
            chunks.append(np.full(int(np.prod(shape)), quantize32(RAW_XI_INIT)))
        else:
            bound = 1.0 / math.sqrt(shape[0])
            chunks.append(quantize32(rng.uniform(-bound, bound, size=int(np.prod(shape)))))
    return ModelWeights.from_flat(cfg, np.concatenate(chunks))


@dataclass
class Prediction:
    probs: np.ndarray        # (n,) in (0, 1)
    directions: np.ndarray   # (n, 3), unit rows wherever degree-1 tensors are nonzero
    layer_diags: list[LayerDiagnostics] | None = None

    def final_sigma2(self) -> np.ndarray:
        """Channel-mean neighborhood variance from the last block."""
        if not self.layer_diags:
            raise ShapeError("forward ran without diagnostics")
        return self.layer_diags[-1].sigma2.mean(axis=1)


def forward_state(
    g: ProteinGraph, w: ModelWeights, cfg: ModelConfig, diagnostics: bool = False
):
    """Embed, run every block, and read out probabilities and directions.

    Returns the final layer state together with the prediction; the state
    carries the steerable tensors the symmetry checks inspect.
    """
    if g.node_features.shape[1] != cfg.n_d:
        raise ShapeError(
            f"graph features {g.node_features.shape[1]} != configured n_d {cfg.n_d}"
        )
    state = embed_init.initial_state(g, w.init, cfg.n_rbf, cfg.l_max)
    diags: list[LayerDiagnostics] = []
    for block in w.layers:
        if diagnostics:
            state, diag = gda_layer.layer_forward(
                state, g, block.params, block.weights, collect=True
            )
            diags.append(diag)
        else:
            state = gda_layer.layer_forward(state, g, block.params, block.weights)
    probs = sigmoid(w.head(state.h)[:, 0])
    mean_x1 = state.x[0].sum(axis=2) / cfg.h_d  # (n, 3) channel mean, degree 1
    norms = np.sqrt((mean_x1 * mean_x1).sum(axis=1, keepdims=True))
    directions = mean_x1 / (norms + cfg.eps)
    pred = Prediction(probs=probs, directions=directions, layer_diags=diags or None)
    return state, pred


def forward(g: ProteinGraph, w: ModelWeights, cfg: ModelConfig, diagnostics: bool = False) -> Prediction:
    """Prediction-only wrapper around :func:`forward_state`."""
    return forward_state(g, w, cfg, diagnostics=diagnostics)[1]


def dice_loss(y_hat: np.ndarray, y: np.ndarray, smooth: float = 1.0) -> float:
    """Overlap loss 1 - (2*sum(y_hat*y) + s) / (sum(y_hat) + sum(y) + s)."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise ShapeError(f"length mismatch {y_hat.shape} vs {y.shape}")
    inter = float(np.sum(y_hat * y))
    return 1.0 - (2.0 * inter + smooth) / (float(np.sum(y_hat)) + float(np.sum(y)) + smooth)


def directional_loss(d_hat: np.ndarray, d_true: np.ndarray, mask: np.ndarray) -> float:
    """Mean (1 - cosine) over the masked residues; empty mask gives 0."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return 0.0
    cos = np.sum(d_hat[mask] * d_true[mask], axis=1)
    return float(np.mean(1.0 - cos))


def direction_mask(g: ProteinGraph) -> np.ndarray:
    """Residues that carry directional supervision: binding label and a
    defined (nonzero) ground-truth direction."""
    defined = np.linalg.norm(g.true_dirs, axis=1) > 0
    return (g.labels == 1) & defined


def total_loss(g: ProteinGraph, pred: Prediction) -> float:
    """Unweighted sum of the overlap and directional terms."""
    return dice_loss(pred.probs, g.labels.astype(np.float64)) + directional_loss(
        pred.directions, g.true_dirs, direction_mask(g)
    )


FD_STEP = 1e-4


def toy_train(
    g: ProteinGraph,
    cfg: ModelConfig,
    steps: int,
    lr: float,
    weights: ModelWeights | None = None,
    nan_hook: bool = False,
):
    """Plain gradient descent with central finite differences over every
    parameter.  Restricted to micro configurations; returns the trained
    weights and the loss trace (initial loss first, one entry per step).
    """
    if cfg.h_d > 16 or cfg.n_layers > 2 or g.n > 20:
        raise ConfigError("toy_train requires h_d <= 16, n_layers <= 2, n <= 20")
    w = init_model(cfg) if weights is None else weights
    vec = w.flat  # mutated in place; all weight views track it

    def loss() -> float:
        value = total_loss(g, forward(g, w, cfg))
        if not np.isfinite(value):
            raise DivergenceError(f"non-finite loss {value}")
        return value

    if nan_hook:
        vec[0] = np.nan
    trace = [loss()]
    grad = np.empty_like(vec)
    for _ in range(steps):
        for i in range(vec.shape[0]):
            orig = vec[i]
            vec[i] = orig + FD_STEP
            up = loss()
            vec[i] = orig - FD_STEP
            down = loss()
            vec[i] = orig
            grad[i] = (up - down) / (2.0 * FD_STEP)
        vec -= lr * grad
        trace.append(loss())
    trained = ModelWeights.from_flat(cfg, quantize32(vec))
    return trained, trace


def save_checkpoint(w: ModelWeights, cfg: ModelConfig) -> bytes:
    """Text manifest (config echo plus ordered tensor names and shapes)
    followed by the concatenated little-endian float32 payload."""
    lines = [CHECKPOINT_HEADER, "[config]"]
    lines.extend(cfg.to_text().splitlines())
    lines.append("[tensors]")
    for name, shape in tensor_manifest(cfg):
        lines.append(name + " " + " ".join(str(d) for d in shape))
    lines.append("[blob]")
    header = ("\n".join(lines) + "\n").encode("ascii")
    return header + w.flat.astype("<f4").tobytes()


def load_checkpoint(data: bytes, expected_cfg: ModelConfig | None = None):
    """Inverse of :func:`save_checkpoint`; returns (weights, config).

    The manifest is total: any missing, unknown, or reordered tensor name is
    rejected, a payload whose length disagrees with the manifest is rejected,
    and shapes that disagree with the embedded (or expected) config raise
    ShapeError.
    """
    marker = b"[blob]\n"
    cut = data.find(marker)
    if not data.startswith(CHECKPOINT_HEADER.encode("ascii")) or cut < 0:
        raise CorruptCheckpoint("missing checkpoint header or blob marker")
    text = data[:cut].decode("ascii")
    blob = data[cut + len(marker) :]
    config_lines: list[str] = []
    tensor_lines: list[str] = []
    section = None
    for line in text.splitlines()[1:]:
        if line == "[config]":
            section = config_lines
        elif line == "[tensors]":
            section = tensor_lines
        elif section is not None:
            section.append(line)
    cfg = ModelConfig.from_text("\n".join(config_lines)).validate()
    declared = []
    for line in tensor_lines:
        parts = line.split()
        declared.append((parts[0], tuple(int(d) for d in parts[1:])))
    manifest = tensor_manifest(cfg)
    if [n for n, _ in declared] != [n for n, _ in manifest]:
        raise CorruptCheckpoint("tensor names disagree with the config manifest")
    if declared != manifest:
        raise ShapeError("tensor shapes disagree with the embedded config")
    if expected_cfg is not None and tensor_manifest(expected_cfg) != manifest:
        raise ShapeError("checkpoint shapes disagree with the expected config")
    total = sum(int(np.prod(s)) for _, s in manifest)
    if len(blob) != 4 * total:
        raise CorruptCheckpoint(f"payload {len(blob)} bytes, manifest needs {4 * total}")
    vec = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    return ModelWeights.from_flat(cfg, vec), cfg
