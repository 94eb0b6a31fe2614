"""Residue-level ligand binding-site prediction with an SE(3)-equivariant
graph network driven by Gaussian dynamic attention, plus pocket extraction
and DCC/DCA evaluation tooling.
"""

__version__ = "0.1.0"

from .model import ModelConfig, forward, init_model, load_checkpoint, save_checkpoint
from .protein import build_graph, load_embeddings, parse_structure

__all__ = [
    "ModelConfig",
    "__version__",
    "build_graph",
    "forward",
    "init_model",
    "load_checkpoint",
    "load_embeddings",
    "parse_structure",
    "save_checkpoint",
]
