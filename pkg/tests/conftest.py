"""Shared fixtures: structure-file text builders, deterministic fake
embedding files, micro graphs, and the synthetic training complex."""

import numpy as np
import pytest

from gdegan import model, protein
from gdegan.protein import EmbeddingTable, encode_embeddings, graph_from_arrays


def pdb_line(record, serial, name, resname, chain, seq, x, y, z, element=None):
    """One fixed-column coordinate record."""
    element = element or name[0]
    return (
        f"{record:<6}{serial:>5} {name:<4} {resname:>3} {chain}{seq:>4}    "
        f"{x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}{'':10}{element:>2}\n"
    )


def ca_line(serial, chain, seq, x, y, z, resname="ALA"):
    return pdb_line("ATOM", serial, "CA", resname, chain, seq, x, y, z, "C")


def fake_embeddings(keys, dim, seed=0) -> EmbeddingTable:
    """Deterministic pseudo-random rows, the stand-in for real per-residue
    language-model features in every test."""
    rng = np.random.default_rng(seed)
    values = rng.uniform(-1.0, 1.0, size=(len(keys), dim)).astype(np.float32)
    return EmbeddingTable(keys=list(keys), values=values)


def fake_embedding_bytes(keys, dim, seed=0) -> bytes:
    return encode_embeddings(fake_embeddings(keys, dim, seed))


THREE_RESIDUE_PDB = (
    ca_line(1, "A", 1, 0.0, 0.0, 0.0)
    + ca_line(2, "A", 2, 3.8, 0.0, 0.0)
    + ca_line(3, "A", 3, 7.6, 0.0, 0.0)
    + pdb_line("HETATM", 4, "C1", "LIG", "A", 90, 2.0, 2.0, 0.0, "C")
    + pdb_line("HETATM", 5, "O1", "LIG", "A", 90, 2.0, 3.2, 0.0, "O")
)


@pytest.fixture
def three_residue_structure():
    return protein.parse_structure(THREE_RESIDUE_PDB)


def micro_config(**overrides) -> model.ModelConfig:
    base = dict(
        n_d=4, h_d=8, e_d=8, n_rbf=4, n_heads=2, n_layers=1,
        l_max=1, r_c=10.0, max_neighbors=8, seed=3,
    )
    if "h_d" in overrides and "e_d" not in overrides:
        overrides["e_d"] = overrides["h_d"]
    base.update(overrides)
    return model.ModelConfig(**base).validate()


def synthetic_complex(n_d=4):
    """Ten residues on a coil with a two-atom ligand near residues 5-6.

    Feature channel 0 carries the binding label (plus noise), so the loss
    surface is cleanly optimizable; the remaining channels are noise.
    """
    n = 10
    t = np.arange(n, dtype=np.float64)
    pos = np.stack([2.3 * np.cos(t * 1.7), 2.3 * np.sin(t * 1.7), 1.5 * t], axis=1)
    lig = np.array([pos[4] + [2.5, 0.0, 0.0], pos[5] + [0.0, 2.5, 0.0]])
    d = np.linalg.norm(pos[:, None, :] - lig[None], axis=2)
    labels = (d.min(axis=1) < 4.0).astype(np.int8)
    rng = np.random.default_rng(42)
    feats = rng.uniform(-0.5, 0.5, size=(n, n_d))
    feats[:, 0] += labels * 2.0 - 1.0
    dirs = np.zeros((n, 3))
    for i in range(n):
        j = np.argmin(np.linalg.norm(lig - pos[i], axis=1))
        v = lig[j] - pos[i]
        dirs[i] = v / np.linalg.norm(v)
    g = graph_from_arrays(
        pos, feats.astype(np.float32), 10.0, 8, labels=labels, true_dirs=dirs
    )
    return g, pos, lig


def synthetic_complex_files(tmp_path, n_d=4, seed=7):
    """The synthetic complex as on-disk structure + embedding files (the
    same geometry the CLI trainer consumes)."""
    g, pos, lig = synthetic_complex(n_d=n_d)
    lines = []
    for i, p in enumerate(pos):
        lines.append(ca_line(i + 1, "A", i + 1, p[0], p[1], p[2]))
    for k, p in enumerate(lig):
        lines.append(pdb_line("HETATM", 100 + k, f"C{k}", "LIG", "A", 900, p[0], p[1], p[2], "C"))
    structure_path = tmp_path / "toy.pdb"
    structure_path.write_text("".join(lines))
    table = EmbeddingTable(
        keys=[("A", i + 1) for i in range(pos.shape[0])],
        values=g.node_features,
    )
    emb_path = tmp_path / "toy.gde1"
    emb_path.write_bytes(encode_embeddings(table))
    return structure_path, emb_path
