"""Structure parsing, residue graphs, binding labels and embedding files.

The accepted structure format is the fixed-column PDB subset (1-indexed
columns): record name 1-6, atom name 13-16, residue name 18-20, chain id 22,
residue sequence number 23-26, x 31-38, y 39-46, z 47-54, element 77-78.
Waters (residue name HOH) and hydrogens are discarded; HETATM records are
grouped into ligand molecules by (residue name, chain, sequence number).
"""

from __future__ import annotations

import io
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyEmbedding,
    EmptyStructure,
    FormatError,
    KeyMismatch,
    MissingLigand,
    ParseError,
    ShapeError,
    TruncatedFile,
)

log = logging.getLogger(__name__)

EMBEDDING_MAGIC = b"GDE1"

# Coincidence threshold below which a residue->ligand direction is undefined
# and flagged with the zero sentinel.
_DIRECTION_EPS = 1e-6


@dataclass(frozen=True)
class Atom:
    name: str
    element: str
    pos: np.ndarray  # (3,) float64, Angstrom


@dataclass
class Residue:
    chain_id: str
    seq: int
    name: str
    atoms: list[Atom] = field(default_factory=list)

    @property
    def key(self) -> tuple[str, int]:
        return (self.chain_id, self.seq)

    @property
    def ca(self) -> Atom | None:
        for a in self.atoms:
            if a.name == "CA":
                return a
        return None

    def atom_positions(self) -> np.ndarray:
        return np.array([a.pos for a in self.atoms])


@dataclass
class Chain:
    chain_id: str
    residues: list[Residue] = field(default_factory=list)


@dataclass
class Ligand:
    """One HETATM molecule: heavy-atom positions in file order."""

    name: str
    chain_id: str
    seq: int
    positions: np.ndarray  # (m, 3) float64


@dataclass
class Structure:
    chains: list[Chain]
    ligands: list[Ligand]
    dropped_residues: int = 0

    @property
    def residues(self) -> list[Residue]:
        return [r for c in self.chains for r in c.residues]

    @property
    def n_residues(self) -> int:
        return sum(len(c.residues) for c in self.chains)

    def ligand_atoms(self) -> np.ndarray:
        """All ligand heavy-atom positions concatenated in file order."""
        if not self.ligands:
            return np.zeros((0, 3))
        return np.concatenate([lig.positions for lig in self.ligands], axis=0)


def _element_of(raw_element: str, atom_name: str) -> str:
    if raw_element:
        return raw_element.upper()
    for ch in atom_name:
        if ch.isalpha():
            return ch.upper()
    return ""


def parse_structure(text: str) -> Structure:
    """Parse the fixed-column subset into residues and ligand molecules.

    Residues keep file order; only the first occurrence of a given atom name
    within a residue is retained (alternate locations collapse to the first).
    Residues without a CA atom are dropped and counted.
    """
    chains: dict[str, Chain] = {}
    residues: dict[tuple[str, int], Residue] = {}
    ligands: dict[tuple[str, str, int], list[np.ndarray]] = {}

    for lineno, line in enumerate(io.StringIO(text), start=1):
        record = line[0:6].strip()
        if record not in ("ATOM", "HETATM"):
            continue
        if len(line.rstrip("\n")) < 54:
            raise ParseError("record shorter than the coordinate block", lineno)
        atom_name = line[12:16].strip()
        res_name = line[17:20].strip()
        chain_id = line[21]
        try:
            seq = int(line[22:26])
            pos = np.array(
                [float(line[30:38]), float(line[38:46]), float(line[46:54])]
            )
        except ValueError as exc:
            raise ParseError(f"malformed numeric field ({exc})", lineno) from None
        element = _element_of(line[76:78].strip() if len(line) > 76 else "", atom_name)

        if res_name == "HOH" or element == "H":
            continue

        if record == "ATOM":
            key = (chain_id, seq)
            res = residues.get(key)
            if res is None:
                res = Residue(chain_id=chain_id, seq=seq, name=res_name)
                residues[key] = res
                if chain_id not in chains:
                    chains[chain_id] = Chain(chain_id)
                chains[chain_id].residues.append(res)
            if any(a.name == atom_name for a in res.atoms):
                continue  # keep the first alternate location only
            res.atoms.append(Atom(atom_name, element, pos))
        else:
            ligands.setdefault((res_name, chain_id, seq), []).append(pos)

    dropped = 0
    for chain in chains.values():
        kept = []
        for res in chain.residues:
            if res.ca is None:
                dropped += 1
            else:
                kept.append(res)
        chain.residues = kept
    if dropped:
        log.warning("dropped %d residue(s) lacking a CA atom", dropped)

    chain_list = [c for c in chains.values() if c.residues]
    if not chain_list:
        raise EmptyStructure("no residues with CA atoms after filtering")
    ligand_list = [
        Ligand(name, chain_id, seq, np.array(pts))
        for (name, chain_id, seq), pts in ligands.items()
    ]
    return Structure(chains=chain_list, ligands=ligand_list, dropped_residues=dropped)


def label_binding(s: Structure, d_bind: float = 4.0) -> np.ndarray:
    """Binary binding labels: 1 when any residue atom is strictly within
    ``d_bind`` of any ligand heavy atom.  Ligand-free structures give zeros.
    """
    lig = s.ligand_atoms()
    labels = np.zeros(s.n_residues, dtype=np.int8)
    if lig.shape[0] == 0:
        return labels
    for i, res in enumerate(s.residues):
        pts = res.atom_positions()
        d2 = np.sum((pts[:, None, :] - lig[None, :, :]) ** 2, axis=2)
        if np.min(d2) < d_bind * d_bind:
            labels[i] = 1
    return labels


def true_directions(s: Structure) -> np.ndarray:
    """Unit vectors from each CA to its nearest ligand heavy atom.

    Equidistant ties resolve to the ligand atom appearing first in file
    order.  A CA coinciding with a ligand atom (within 1e-6 A) yields the
    all-zero sentinel row; such residues are excluded from directional
    supervision downstream.
    """
    lig = s.ligand_atoms()
    if lig.shape[0] == 0:
        raise MissingLigand("structure has no ligand heavy atoms")
    out = np.zeros((s.n_residues, 3))
    for i, res in enumerate(s.residues):
        p = res.ca.pos
        d = np.linalg.norm(lig - p[None, :], axis=1)
        j = int(np.argmin(d))
        if d[j] <= _DIRECTION_EPS:
            continue
        out[i] = (lig[j] - p) / d[j]
    return out


@dataclass
class ProteinGraph:
    """Residue-level geometric graph with a receiver-major directed edge list.

    Edges are stored sorted by (receiver, distance, sender); ``row_ptr``
    delimits each receiver's block, so ``edge_src[row_ptr[i]:row_ptr[i+1]]``
    are node i's neighbors nearest-first.  ``edge_unit[e]`` points from the
    sender toward the receiver.  Truncation to ``max_neighbors`` can make
    the stored graph asymmetric; it is directed by construction.
    """

    n: int
    positions: np.ndarray        # (n, 3) float64
    node_features: np.ndarray    # (n, n_d) float32
    labels: np.ndarray           # (n,) int8
    true_dirs: np.ndarray        # (n, 3) float64, zero rows = undefined
    r_c: float
    residue_keys: list[tuple[str, int]]
    edge_dst: np.ndarray         # (E,) receiver index
    edge_src: np.ndarray         # (E,) sender index
    edge_dist: np.ndarray        # (E,) float64
    edge_unit: np.ndarray        # (E, 3) float64
    row_ptr: np.ndarray          # (n+1,)
    # memo for weight-independent derived data (edge bases); graphs are
    # treated as immutable after construction
    derived_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_edges(self) -> int:
        return int(self.edge_dst.shape[0])

    def neighbors(self, i: int) -> np.ndarray:
        return self.edge_src[self.row_ptr[i] : self.row_ptr[i + 1]]


def _edge_lists(positions: np.ndarray, r_c: float, max_neighbors: int):
    n = positions.shape[0]
    dst, src, dist = [], [], []
    if n > 1:
        delta = positions[:, None, :] - positions[None, :, :]
        dmat = np.sqrt(np.sum(delta * delta, axis=2))
        for i in range(n):
            js = np.flatnonzero((dmat[i] < r_c) & (np.arange(n) != i))
            if js.size == 0:
                continue
            order = np.lexsort((js, dmat[i, js]))  # distance first, index breaks ties
            js = js[order][:max_neighbors]
            dst.extend([i] * js.size)
            src.extend(js.tolist())
            dist.extend(dmat[i, js].tolist())
    edge_dst = np.asarray(dst, dtype=np.int64)
    edge_src = np.asarray(src, dtype=np.int64)
    edge_dist = np.asarray(dist, dtype=np.float64)
    if edge_dst.size:
        unit = (positions[edge_dst] - positions[edge_src]) / edge_dist[:, None]
    else:
        unit = np.zeros((0, 3))
    counts = np.bincount(edge_dst, minlength=n)
    row_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return edge_dst, edge_src, edge_dist, unit, row_ptr


def graph_from_arrays(
    positions: np.ndarray,
    node_features: np.ndarray,
    r_c: float,
    max_neighbors: int,
    labels: np.ndarray | None = None,
    true_dirs: np.ndarray | None = None,
    residue_keys: list[tuple[str, int]] | None = None,
) -> ProteinGraph:
    """Build a graph directly from coordinate/feature arrays (no parsing)."""
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    feats = np.asarray(node_features, dtype=np.float32)
    if feats.ndim != 2 or feats.shape[0] != n:
        raise ShapeError(f"node features {feats.shape} do not match {n} positions")
    if feats.shape[1] == 0:
        raise EmptyEmbedding("node features have zero columns")
    dst, src, dist, unit, row_ptr = _edge_lists(positions, r_c, max_neighbors)
    return ProteinGraph(
        n=n,
        positions=positions,
        node_features=feats,
        labels=np.zeros(n, dtype=np.int8) if labels is None else np.asarray(labels, dtype=np.int8),
        true_dirs=np.zeros((n, 3)) if true_dirs is None else np.asarray(true_dirs, dtype=np.float64),
        r_c=float(r_c),
        residue_keys=residue_keys or [("A", i + 1) for i in range(n)],
        edge_dst=dst,
        edge_src=src,
        edge_dist=dist,
        edge_unit=unit,
        row_ptr=row_ptr,
    )


def build_graph(
    s: Structure,
    table: "EmbeddingTable",
    r_c: float = 10.0,
    max_neighbors: int = 32,
    d_bind: float = 4.0,
) -> ProteinGraph:
    """Assemble the residue graph: neighbors within ``r_c`` truncated to the
    ``max_neighbors`` nearest (index breaks distance ties), labels from
    ligand proximity, and directions toward the nearest ligand atom (zero
    rows when the structure has no ligands).
    """
    if table.values.shape[1] == 0:
        raise EmptyEmbedding("embedding table has zero feature columns")
    index = {k: i for i, k in enumerate(table.keys)}
    residues = s.residues
    missing = [r.key for r in residues if r.key not in index]
    if missing:
        raise KeyMismatch(missing)
    feats = table.values[[index[r.key] for r in residues]]
    positions = np.array([r.ca.pos for r in residues])
    labels = label_binding(s, d_bind=d_bind)
    dirs = true_directions(s) if s.ligands else np.zeros((len(residues), 3))
    return graph_from_arrays(
        positions,
        feats,
        r_c,
        max_neighbors,
        labels=labels,
        true_dirs=dirs,
        residue_keys=[r.key for r in residues],
    )


@dataclass
class EmbeddingTable:
    """Per-residue float32 feature rows keyed by (chain id, sequence number)."""

    keys: list[tuple[str, int]]
    values: np.ndarray  # (n, d) float32

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def load_embeddings(data: bytes) -> EmbeddingTable:
    """Decode the GDE1 binary layout.

    Layout: magic "GDE1"; u32 n; u32 d; n records of (1-byte chain id,
    i32 sequence number); n*d float32 row-major.  All integers and floats
    little-endian.
    """
    if data[:4] != EMBEDDING_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {EMBEDDING_MAGIC!r}")
    if len(data) < 12:
        raise TruncatedFile("header shorter than 12 bytes")
    n, d = struct.unpack_from("<II", data, 4)
    if n == 0 or d == 0:
        raise EmptyEmbedding(f"header declares n={n}, d={d}")
    expected = 12 + n * 5 + n * d * 4
    if len(data) != expected:
        raise TruncatedFile(f"expected {expected} bytes, got {len(data)}")
    keys = []
    off = 12
    for _ in range(n):
        chain = chr(data[off])
        (seq,) = struct.unpack_from("<i", data, off + 1)
        keys.append((chain, seq))
        off += 5
    if len(set(keys)) != n:
        raise FormatError("duplicate residue keys in embedding table")
    values = np.frombuffer(data, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    return EmbeddingTable(keys=keys, values=values.copy())


def encode_embeddings(table: EmbeddingTable) -> bytes:
    """Inverse of :func:`load_embeddings`; round-trips byte-exactly."""
    n, d = table.values.shape
    out = bytearray()
    out += EMBEDDING_MAGIC
    out += struct.pack("<II", n, d)
    for chain, seq in table.keys:
        out += chain.encode("ascii")
        out += struct.pack("<i", seq)
    out += np.ascontiguousarray(table.values, dtype="<f4").tobytes()
    return bytes(out)
