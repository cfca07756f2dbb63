"""Command-line entry point: ``hierdti <command> ...``.

Every command writes JSON (or TSV for ``predict``, DOT for ``graph --dot``)
to stdout or ``--out``. Usage errors exit with status 2, data and model
errors with status 1; either way a one-line JSON error goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import data as data_io
from .fragment import fragment, partition_to_dict
from .hiergraph import build_atom_global_graph, build_atom_graph, build_hiergraph, graph_to_dict, graph_to_dot
from .metrics import SingleClassOnly
from .model import ABLATIONS
from .smiles import SmilesError, molecule_to_dict, parse_smiles
from .trainer import TrainConfig, evaluate, load_config, load_model, save_model, train

log = logging.getLogger("hierdti")

THRESHOLD_NOTE = (
    "B_P is the sum of one softmax per drug level, so each entry lies in (0, k) and the "
    "vector sums to k, where k is the number of attended levels (3 for the full model). "
    "B_a and B_m are column means of the ReLU attention matrices and are unnormalised."
)


def load_schema(name: str) -> dict:
    """JSON schema shipped with the package, e.g. ``load_schema("explain")``."""
    text = resources.files("hierdti").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _emit_json(obj, out: Optional[str]) -> None:
    _emit(json.dumps(obj, indent=1) + "\n", out)


# -- fragment / graph ---------------------------------------------------------------


def _fragment_one(smiles: str) -> dict:
    mol = parse_smiles(smiles)
    return {"smiles": smiles, "n_atoms": mol.n_atoms, **partition_to_dict(mol, fragment(mol))}


def cmd_fragment(args) -> int:
    if args.smiles is not None:
        _emit_json(_fragment_one(args.smiles), args.out)
        return 0
    results, failed = [], 0
    for line in Path(args.input).read_text(encoding="utf-8").splitlines():
        smi = line.split()[0] if line.strip() else ""
        if not smi:
            continue
        try:
            results.append(_fragment_one(smi))
        except SmilesError as exc:
            failed += 1
            results.append({"smiles": smi, "error": str(exc)})
    _emit_json(results, args.out)
    if failed:
        log.warning("%d SMILES could not be parsed", failed)
    return 0


_GRAPH_BUILDERS = {
    "hier": lambda mol: build_hiergraph(mol, fragment(mol)),
    "atom_global": build_atom_global_graph,
    "atom": build_atom_graph,
}


def cmd_graph(args) -> int:
    mol = parse_smiles(args.smiles)
    g = _GRAPH_BUILDERS[args.variant](mol)
    if args.dot:
        _emit(graph_to_dot(g, mol), args.out)
        return 0
    body = {"smiles": args.smiles, "variant": args.variant, "n_nodes": g.n_nodes,
            "n_edges": g.n_edges, **graph_to_dict(g)}
    if args.dump_molecule:
        body["molecule"] = molecule_to_dict(mol)
    _emit_json(body, args.out)
    return 0


# -- train / eval / predict / explain --------------------------------------------------


def _train_config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.ablation is not None:
        updates["ablation"] = args.ablation
    if args.strict_eq2:
        updates["strict_eq2"] = True
    if args.max_epochs is not None:
        updates["max_epochs"] = args.max_epochs
        updates["patience"] = min(cfg.patience, args.max_epochs)
    if args.d is not None:
        updates["d"] = args.d
    return replace(cfg, **updates)


def _safe_eval(model, records) -> Optional[dict]:
    if not records:
        return None
    try:
        return evaluate(model, records).to_dict()
    except SingleClassOnly:
        return None


def _fit(train_recs, val_recs, test_recs, all_train, cfg, out: Path, history: Path) -> dict:
    with open(history, "w", encoding="utf-8") as events:
        result = train(train_recs, val_recs, cfg, events=events)
    metrics = {
        "train_file": _safe_eval(result.model, all_train),
        "val": _safe_eval(result.model, val_recs),
        "test": _safe_eval(result.model, test_recs),
    }
    save_model(out, result.model, cfg, result.optimizer, metrics)
    return {"checkpoint": str(out), "history": str(history), "best_epoch": result.best_epoch,
            "best_val_auc": result.best_val_auc, "dropped": result.dropped,
            "n_parameters": result.model.n_parameters(), "metrics": metrics}


def cmd_train(args) -> int:
    cfg = _train_config(args)
    records = data_io.load_corpus(args.train)
    val_file = data_io.load_corpus(args.val) if args.val else None
    test_file = data_io.load_corpus(args.test) if args.test else None
    split_text = args.split or ("fixed" if val_file is not None else ("carve20" if test_file else "ratio"))
    spec = data_io.SplitSpec.parse(split_text, cfg.seed)
    if spec.mode == "fixed_files" and val_file is None:
        raise UsageError("--split fixed needs --val")
    out = Path(args.out)
    manifest = Path(args.manifest) if args.manifest else out.with_suffix(".split.json")
    history = Path(args.history) if args.history else out.with_suffix(".history.jsonl")
    parts = data_io.split(records, spec, test=test_file, val=val_file)
    data_io.write_manifest(manifest, parts, spec)

    def pick(idx, pool):
        return [pool[i] for i in idx]

    if spec.mode == "kfold":
        folds = []
        for k, fold in enumerate(parts):
            folds.append(_fit(pick(fold.train, records), pick(fold.val, records),
                              pick(fold.test, records), records, cfg,
                              out.with_name(f"{out.stem}.fold{k}{out.suffix}"),
                              history.with_name(f"{history.stem}.fold{k}{history.suffix}")))
        aucs = [f["metrics"]["test"]["auc"] for f in folds if f["metrics"]["test"]]
        summary = {"mode": spec.mode, "folds": folds, "split_manifest": str(manifest),
                   "mean_test_auc": float(np.mean(aucs)) if aucs else None}
    else:
        if spec.mode == "ratio_8_1_1":
            tr, va, te = (pick(parts.train, records), pick(parts.val, records),
                          pick(parts.test, records))
        elif spec.mode == "train_carve_20":
            tr, va, te = pick(parts.train, records), pick(parts.val, records), test_file or []
        else:
            tr, va, te = records, val_file, test_file or []
        summary = {"mode": spec.mode, "split_manifest": str(manifest),
                   **_fit(tr, va, te, records, cfg, out, history)}
    _emit_json(summary, args.summary)
    return 0


def cmd_eval(args) -> int:
    model, _, _ = load_model(args.checkpoint)
    records = data_io.load_corpus(args.data)
    res = evaluate(model, records, args.threshold)
    _emit_json({**res.to_dict(), "n": len(records)}, args.out)
    return 0


def _read_pairs(path: str) -> list[tuple[str, str]]:
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t") if "\t" in line else line.split()
        if len(fields) not in (2, 3):
            raise data_io.ParseError(lineno, f"expected 2 or 3 fields, found {len(fields)}")
        if lineno == 1 and fields[0].strip().lower() == "smiles":
            continue
        pairs.append((fields[0].strip(), fields[1].strip()))
    if not pairs:
        raise data_io.EmptyCorpus(f"{path} contains no pairs")
    return pairs


def cmd_predict(args) -> int:
    model, _, _ = load_model(args.checkpoint)
    rows, samples, slots = [], [], []
    for smiles, seq in _read_pairs(args.input):
        rows.append([smiles, seq, "NA"])
        try:
            samples.append(model.featurize(smiles, seq))
            slots.append(len(rows) - 1)
        except ValueError as exc:  # unparseable SMILES or too-short sequence
            log.warning("cannot score %s: %s", smiles, exc)
    if samples:
        for slot, p in zip(slots, model.predict_proba(samples)):
            rows[slot][2] = repr(float(p))
    text = "smiles\tsequence\tprobability\n" + "".join("\t".join(r) + "\n" for r in rows)
    _emit(text, args.out)
    return 0


def cmd_explain(args) -> int:
    model, _, _ = load_model(args.checkpoint)
    sample = model.featurize(args.smiles, args.sequence)
    prob, report = model.explain(sample)
    body = {
        "smiles": args.smiles,
        "probability": prob,
        **report.to_dict(),
        "motifs": [list(m) for m in sample.partition.motifs],
        "levels": list(model.levels),
        "threshold_note": THRESHOLD_NOTE,
    }
    if args.raw:
        body["attn"] = {k: v.tolist() for k, v in report.attn.items()}
    _emit_json(body, args.out)
    return 0


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hierdti", description="Hierarchical drug/target interaction toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fragment", help="split molecules into motifs")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--smiles")
    src.add_argument("--input", help="file with one SMILES per line")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fragment)

    g = sub.add_parser("graph", help="build the hierarchical graph of one molecule")
    g.add_argument("--smiles", required=True)
    g.add_argument("--variant", choices=sorted(_GRAPH_BUILDERS), default="hier")
    g.add_argument("--dump-molecule", action="store_true", help="include parsed atoms and bonds")
    g.add_argument("--dot", action="store_true", help="write Graphviz DOT instead of JSON")
    g.add_argument("--out")
    g.set_defaults(func=cmd_graph)

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    t.add_argument("--train", required=True)
    t.add_argument("--val")
    t.add_argument("--test")
    t.add_argument("--split", help="ratio | kfold:K | carve20 | fixed")
    t.add_argument("--config", help="key = value file of training settings")
    t.add_argument("--seed", type=int)
    t.add_argument("--ablation", choices=ABLATIONS)
    t.add_argument("--strict-eq2", action="store_true",
                   help="GIN self term scaled by in-degree instead of added once")
    t.add_argument("--max-epochs", type=int)
    t.add_argument("--d", type=int, help="embedding size")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--history", help="JSON-lines epoch log (default: next to the checkpoint)")
    t.add_argument("--manifest", help="split manifest (default: next to the checkpoint)")
    t.add_argument("--summary", help="write the run summary here instead of stdout")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a labelled corpus with a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--threshold", type=float, default=0.5)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="score drug/protein pairs")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--input", required=True, help="TSV of smiles, sequence[, label]")
    pr.add_argument("--out")
    pr.set_defaults(func=cmd_predict)

    x = sub.add_parser("explain", help="attention weights for one pair")
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--smiles", required=True)
    x.add_argument("--sequence", required=True)
    x.add_argument("--raw", action="store_true", help="include the attention matrices")
    x.add_argument("--out")
    x.set_defaults(func=cmd_explain)
    return p


def _fail(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", exc, 2)
    except (ValueError, OSError, KeyError) as exc:
        return _fail("data", exc, 1)


if __name__ == "__main__":
    sys.exit(main())
