"""Train one configuration under several seeds and aggregate the test metrics.

    python scripts/multi_seed.py --train data.tsv --seeds 10 --out runs/

Each seed re-draws both the 8:1:1 split and the weight initialisation.
Seeds whose validation or test split holds a single label are skipped.
The per-seed metrics and their mean and standard deviation are written to
``<out>/multi_seed.json``.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from hierdti.data import SplitSpec, load_corpus, split
from hierdti.metrics import SingleClassOnly
from hierdti.trainer import TrainConfig, evaluate, load_config, save_model, train


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--train", required=True, help="labelled corpus TSV")
    p.add_argument("--config", help="key = value training settings")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    args = p.parse_args()

    base = load_config(args.config) if args.config else TrainConfig()
    records = load_corpus(args.train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    for seed in range(args.seeds):
        cfg = TrainConfig(**{**base.__dict__, "seed": seed})
        parts = split(records, SplitSpec(seed=seed))
        pick = lambda idx: [records[i] for i in idx]  # noqa: E731
        try:
            res = train(pick(parts.train), pick(parts.val), cfg)
            metrics = evaluate(res.model, pick(parts.test)).to_dict()
        except SingleClassOnly as exc:
            print(json.dumps({"seed": seed, "skipped": str(exc)}), flush=True)
            continue
        save_model(out / f"seed{seed}.hgdt", res.model, cfg, res.optimizer, {"test": metrics})
        runs.append({"seed": seed, "best_epoch": res.best_epoch, **metrics})
        print(json.dumps(runs[-1]), flush=True)
    if not runs:
        raise SystemExit("every seed was skipped")
    keys = ("auc", "aupr", "precision", "recall")
    summary = {
        "runs": runs,
        "mean": {k: float(np.mean([r[k] for r in runs])) for k in keys},
        "std": {k: float(np.std([r[k] for r in runs], ddof=1)) if len(runs) > 1 else 0.0 for k in keys},
    }
    (out / "multi_seed.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    print(json.dumps({"mean": summary["mean"], "std": summary["std"]}))


if __name__ == "__main__":
    main()
