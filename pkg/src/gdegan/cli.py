"""Command-line entry point.

Subcommands: predict, evaluate, check-equivariance, toy-train,
analyze-variance.  Exit codes are stable: 0 success, 2 input or usage
error, 3 at least one protein produced zero pockets, 4 training diverged.

Every output file starts with a manifest block (command, config path,
input paths, seed, tool version); wall time is reported on stderr only so
repeated runs stay byte-identical.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, equivcheck, metrics, model, pocket, protein
from .errors import DegenerateGroup, DivergenceError, GdeganError

log = logging.getLogger("gdegan")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_POCKETS = 3
EXIT_DIVERGED = 4


def _manifest(command: str, config: str | None, inputs: list[str], seed) -> str:
    lines = [
        f"# tool: gdegan {__version__}",
        f"# command: {command}",
        f"# config: {config or '-'}",
        f"# inputs: {' '.join(inputs)}",
        f"# seed: {seed if seed is not None else '-'}",
    ]
    return "\n".join(lines) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _load_config(args, base: model.ModelConfig | None = None) -> model.ModelConfig:
    cfg = base or model.ModelConfig()
    if getattr(args, "config", None):
        cfg = model.ModelConfig.from_text(Path(args.config).read_text())
    if getattr(args, "tau", None) is not None:
        cfg.tau = args.tau
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _embedding_path_for(structure: Path, embeddings: Path) -> Path:
    if embeddings.is_dir():
        return embeddings / (structure.stem + ".gde1")
    return embeddings


def _predict_one(task) -> tuple[str, int]:
    (structure_path, embeddings_path, checkpoint_path, out_dir,
     tau, bandwidth, dump_attention, dump_variance, config_arg, seed) = task
    structure_path = Path(structure_path)
    stem = structure_path.stem
    s = protein.parse_structure(structure_path.read_text())
    table = protein.load_embeddings(_embedding_path_for(structure_path, Path(embeddings_path)).read_bytes())
    weights, cfg = model.load_checkpoint(Path(checkpoint_path).read_bytes())
    if tau is not None:
        cfg.tau = tau
    if bandwidth is not None:
        cfg.bandwidth = bandwidth
    g = protein.build_graph(s, table, r_c=cfg.r_c, max_neighbors=cfg.max_neighbors)
    pred = model.forward(g, weights, cfg, diagnostics=dump_attention or dump_variance)
    pockets = pocket.extract_pockets(pred, g, cfg.tau, cfg.bandwidth)

    out_dir = Path(out_dir)
    inputs = [str(structure_path), str(embeddings_path), str(checkpoint_path)]
    head = _manifest("predict", config_arg, inputs, seed)

    prob_lines = [head, "chain seq prob\n"]
    for (chain, seq), p in zip(g.residue_keys, pred.probs):
        prob_lines.append(f"{chain} {seq} {p:.6f}\n")
    _write_atomic(out_dir / f"{stem}.probs.txt", "".join(prob_lines))

    pocket_lines = [head, "rank cx cy cz members score\n"]
    for rank, (center, members, score) in enumerate(
        zip(pockets.centers, pockets.members, pockets.scores), start=1
    ):
        pocket_lines.append(
            f"{rank} {center[0]:.3f} {center[1]:.3f} {center[2]:.3f} "
            f"{len(members)} {score:.4f}\n"
        )
    pocket_lines.append("assignments\n")
    for rank, members in enumerate(pockets.members, start=1):
        for ridx in members:
            chain, seq = g.residue_keys[int(ridx)]
            pocket_lines.append(f"{rank} {chain} {seq}\n")
    _write_atomic(out_dir / f"{stem}.pockets.txt", "".join(pocket_lines))

    if dump_attention:
        for layer_idx, diag in enumerate(pred.layer_diags):
            n_heads = diag.alpha.shape[1]
            for h in range(n_heads):
                dense = np.zeros((g.n, g.n))
                dense[g.edge_dst, g.edge_src] = diag.alpha[:, h]
                lines = [head, f"# protein {stem} layer {layer_idx} head {h}\n"]
                for row in dense:
                    lines.append(" ".join(f"{v:.6f}" for v in row) + "\n")
                _write_atomic(
                    out_dir / f"{stem}.attn.L{layer_idx}.H{h}.txt", "".join(lines)
                )
    if dump_variance:
        sigma2 = pred.final_sigma2()
        lines = [head, "chain seq prob sigma2\n"]
        for (chain, seq), p, v in zip(g.residue_keys, pred.probs, sigma2):
            lines.append(f"{chain} {seq} {p:.6f} {v:.6f}\n")
        _write_atomic(out_dir / f"{stem}.variance.txt", "".join(lines))

    return stem, pockets.n_pockets


def cmd_predict(args) -> int:
    structures = [Path(p) for p in args.structures]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (
            str(p), args.embeddings, args.checkpoint, str(out_dir),
            args.tau, args.bandwidth, args.dump_attention, args.dump_variance,
            args.config, args.seed,
        )
        for p in structures
    ]
    if args.jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_predict_one, tasks))
    else:
        results = [_predict_one(t) for t in tasks]
    worst = EXIT_OK
    for stem, n_pockets in results:
        print(f"{stem}: {n_pockets} pocket(s)")
        if n_pockets == 0:
            worst = EXIT_NO_POCKETS
    return worst


def _read_pocket_centers(path: Path) -> np.ndarray:
    centers = []
    for line in path.read_text().splitlines():
        if line.startswith("#") or line.startswith("rank ") or not line.strip():
            continue
        if line.startswith("assignments"):
            break
        parts = line.split()
        centers.append([float(parts[1]), float(parts[2]), float(parts[3])])
    return np.array(centers) if centers else np.zeros((0, 3))


def _evaluate_one(task) -> tuple[int, list[metrics.LigandOutcome], list[str]]:
    spath, ppath = Path(task[0]), Path(task[1])
    warnings = []
    s = protein.parse_structure(spath.read_text())
    centers = _read_pocket_centers(ppath) if ppath.exists() else np.zeros((0, 3))
    if not ppath.exists():
        warnings.append(f"no prediction for {spath.stem}, counted as zero pockets")
    if not s.ligands:
        warnings.append(f"structure {spath.stem} has no ligands; skipped in DCC/DCA")
        return centers.shape[0], [], warnings
    ligands = [lig.positions for lig in s.ligands]
    ligand_ids = [f"{lig.name}_{lig.chain_id}{lig.seq}" for lig in s.ligands]
    return (
        centers.shape[0],
        metrics.match_complex(centers, ligands, complex_id=spath.stem, ligand_ids=ligand_ids),
        warnings,
    )


def cmd_evaluate(args) -> int:
    pred_dir = Path(args.predictions)
    struct_dir = Path(args.structures)
    structure_files = sorted(
        p for p in struct_dir.iterdir() if p.suffix in (".pdb", ".ent")
    )
    if not structure_files:
        print("no structure files found", file=sys.stderr)
        return EXIT_INPUT
    known_stems = {p.stem for p in structure_files}
    stray = sorted(
        p.name for p in pred_dir.glob("*.pockets.txt") if p.name[: -len(".pockets.txt")] not in known_stems
    )
    for name in stray:
        log.warning("prediction without a structure, skipped: %s", name)

    tasks = [
        (str(spath), str(pred_dir / f"{spath.stem}.pockets.txt"))
        for spath in structure_files
    ]
    if args.jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_evaluate_one, tasks))  # input order kept
    else:
        results = [_evaluate_one(t) for t in tasks]
    outcomes: list[metrics.LigandOutcome] = []
    pocket_counts = []
    for count, outs, warnings in results:
        pocket_counts.append(count)
        outcomes.extend(outs)
        for msg in warnings:
            log.warning("%s", msg)

    n_lig = len(outcomes)
    dcc_rate = sum(o.hits(args.threshold)[0] for o in outcomes) / n_lig if n_lig else 0.0
    dca_rate = sum(o.hits(args.threshold)[1] for o in outcomes) / n_lig if n_lig else 0.0
    fail = metrics.failure_rate(pocket_counts)
    print(f"dcc_rate {dcc_rate:.4f}")
    print(f"dca_rate {dca_rate:.4f}")
    print(f"failure_rate {fail:.4f}")
    if args.out:
        lines = [
            _manifest("evaluate", None, [args.predictions, args.structures], None),
            "complex ligand rank dcc dca dcc_hit dca_hit\n",
        ]
        for o in outcomes:
            hit_c, hit_a = o.hits(args.threshold)
            lines.append(
                f"{o.complex_id} {o.ligand_id} "
                f"{o.matched_rank if o.matched_rank else '-'} "
                f"{f'{o.dcc:.4f}' if o.dcc is not None else '-'} "
                f"{f'{o.dca:.4f}' if o.dca is not None else '-'} "
                f"{int(hit_c)} {int(hit_a)}\n"
            )
        lines.append(f"aggregate dcc_rate {dcc_rate:.4f}\n")
        lines.append(f"aggregate dca_rate {dca_rate:.4f}\n")
        lines.append(f"aggregate failure_rate {fail:.4f}\n")
        _write_atomic(Path(args.out), "".join(lines))
    return EXIT_OK


def cmd_check_equivariance(args) -> int:
    if args.trials < 1:
        print("--trials must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    base = model.ModelConfig(n_d=16) if not args.config else None
    cfg = _load_config(args, base=base)
    report = equivcheck.run_checks(
        cfg, args.seed if args.seed is not None else 0, args.trials,
        n_nodes=args.nodes, corrupt_wigner=args.corrupt_wigner,
    )
    print(report.summarize())
    return EXIT_OK if report.passed else 1


def cmd_toy_train(args) -> int:
    structure_path = Path(args.structure)
    s = protein.parse_structure(structure_path.read_text())
    table = protein.load_embeddings(
        _embedding_path_for(structure_path, Path(args.embeddings)).read_bytes()
    )
    base = model.ModelConfig(
        n_d=table.dim, h_d=8, e_d=8, n_rbf=4, n_heads=2, n_layers=1,
        l_max=1, max_neighbors=8,
    )
    cfg = _load_config(args, base=base)
    g = protein.build_graph(s, table, r_c=cfg.r_c, max_neighbors=cfg.max_neighbors)
    try:
        weights, trace = model.toy_train(
            g, cfg, steps=args.steps, lr=args.lr, nan_hook=args.inject_nan
        )
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    head = _manifest("toy-train", args.config, [str(structure_path), args.embeddings], cfg.seed)
    _write_atomic(Path(args.out_trace), head + "".join(f"{v:.8f}\n" for v in trace))
    Path(args.out_checkpoint).write_bytes(model.save_checkpoint(weights, cfg))
    print(f"loss {trace[0]:.6f} -> {trace[-1]:.6f} over {len(trace) - 1} step(s)")
    return EXIT_OK


def cmd_analyze_variance(args) -> int:
    dump_path = Path(args.dump)
    rows = []
    for line in dump_path.read_text().splitlines():
        if line.startswith("#") or line.startswith("chain ") or not line.strip():
            continue
        parts = line.split()
        rows.append((parts[0], int(parts[1]), float(parts[3])))
    if not rows:
        print("variance dump is empty", file=sys.stderr)
        return EXIT_INPUT
    sigma2 = np.array([r[2] for r in rows])
    if args.labels:
        label_values = [
            int(v) for v in Path(args.labels).read_text().split() if v.strip()
        ]
        if len(label_values) != len(rows):
            print(
                f"{len(label_values)} labels for {len(rows)} residues", file=sys.stderr
            )
            return EXIT_INPUT
        labels = np.array(label_values, dtype=np.int8)
    else:
        s = protein.parse_structure(Path(args.structure).read_text())
        labels = protein.label_binding(s, d_bind=args.d_bind)
        if labels.shape[0] != len(rows):
            print(
                f"structure has {labels.shape[0]} residues, dump has {len(rows)}",
                file=sys.stderr,
            )
            return EXIT_INPUT
    try:
        stats = metrics.variance_label_stats(sigma2, labels)
    except DegenerateGroup as exc:
        print(f"degenerate input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    undef = "undefined"
    print(f"pearson_r {stats.pearson_r:.4f}")
    print(f"spearman_rho {stats.spearman_rho:.4f}")
    print(f"point_biserial {stats.point_biserial:.4f}")
    print(f"t_stat {f'{stats.t_stat:.4f}' if stats.t_stat is not None else undef}")
    print(f"mann_whitney_u {stats.mann_whitney_u:.1f}")
    print(f"cohens_d {f'{stats.cohens_d:.4f}' if stats.cohens_d is not None else undef}")
    print(f"binding {stats.mean_pos:.4f}+-{stats.sd_pos:.4f} (n={stats.n_pos})")
    print(f"non_binding {stats.mean_neg:.4f}+-{stats.sd_neg:.4f} (n={stats.n_neg})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdegan",
        description="Residue-level binding-site prediction with Gaussian dynamic attention.",
    )
    parser.add_argument("--version", action="version", version=f"gdegan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="predict pockets for one or more structures")
    p.add_argument("structures", nargs="+", help="structure file(s), fixed-column PDB subset")
    p.add_argument("--embeddings", required=True, help="GDE1 file, or directory of <stem>.gde1")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None)
    p.add_argument("--tau", type=float, default=None, help="candidate threshold override")
    p.add_argument("--bandwidth", type=float, default=None, help="mean-shift bandwidth override (A)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dump-attention", action="store_true")
    p.add_argument("--dump-variance", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against structures")
    p.add_argument("predictions", help="directory of *.pockets.txt")
    p.add_argument("structures", help="directory of structure files")
    p.add_argument("--threshold", type=float, default=4.0)
    p.add_argument("--out", default=None, help="per-ligand report file")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("check-equivariance", help="run the symmetry property suite")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--nodes", type=int, default=30)
    p.add_argument("--corrupt-wigner", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check_equivariance)

    p = sub.add_parser("toy-train", help="finite-difference descent on a micro fixture")
    p.add_argument("structure")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-trace", required=True)
    p.add_argument("--inject-nan", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_toy_train)

    p = sub.add_parser("analyze-variance", help="variance-vs-label statistics from a dump")
    p.add_argument("dump", help="*.variance.txt written by predict --dump-variance")
    p.add_argument("--labels", default=None, help="text file of 0/1 labels in residue order")
    p.add_argument("--structure", default=None, help="label from this ligand-bearing structure")
    p.add_argument("--d-bind", type=float, default=4.0)
    p.set_defaults(func=cmd_analyze_variance)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "analyze-variance" and bool(args.labels) == bool(args.structure):
        parser.error("provide exactly one of --labels / --structure")
    started = time.monotonic()
    try:
        code = args.func(args)
    except GdeganError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"wall time: {time.monotonic() - started:.2f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
