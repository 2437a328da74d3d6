"""Command-line entry point.

Subcommands: extract, eval-rules, stats, train, eval, ablate, hpo, synth.
Every run writes a manifest.json into the output directory before any
artifact; CSV artifacts reference it via a leading "# manifest:" comment
line and JSONL artifacts via a first {"_manifest": ...} record.

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
from pathlib import Path

from . import corpus as C
from . import evaluation as E
from . import features as F
from . import model as M
from . import rules as R
from . import synthetic
from .errors import ConfigError, DataError, NumericError
from .postag import POS_TAGS

MANIFEST_NAME = "manifest.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get("QUESTKIT_OUT_DIR") or "questkit-out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _git_revision() -> str | None:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"], capture_output=True, text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() if out.returncode == 0 else None


def _write_manifest(out_dir: Path, subcommand: str, args,
                    outputs: list[str],
                    resolved_config: dict | None = None) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": getattr(args, "config", None),
        "resolved_config": resolved_config,
        "inputs": {
            k: getattr(args, k, None)
            for k in ("corpus", "embeddings", "lexicon", "checkpoint")
            if getattr(args, k, None)
        },
        "outputs": outputs,
        "seed": getattr(args, "seed", None),
        "git_revision": _git_revision(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [f"# manifest: {MANIFEST_NAME}", ",".join(header)]
    for row in rows:
        lines.append(",".join(
            _fmt(v) if isinstance(v, float) else str(v) for v in row
        ))
    path.write_text("\n".join(lines) + "\n")


def _write_jsonl(path: Path, records: list[dict]) -> None:
    lines = [json.dumps({"_manifest": MANIFEST_NAME})]
    lines += [json.dumps(rec) for rec in records]
    path.write_text("\n".join(lines) + "\n")


def _load_config(args) -> M.QuestCNNConfig:
    values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    return M.config_from_dict(values)


def _load_corpus(args) -> C.Dataset:
    if not args.corpus:
        raise ConfigError("--corpus is required")
    return C.load_jsonl(args.corpus)


def _load_embeddings(args, dim: int):
    if not getattr(args, "embeddings", None):
        return None
    return F.load_word2vec(args.embeddings, dim)


def _load_lexicon(args, strategy: str):
    if not getattr(args, "lexicon", None):
        return None
    return F.load_lexicon(args.lexicon, strategy=strategy)


def _parse_rules(names_arg: str) -> list[R.RuleId]:
    if not names_arg or names_arg == "all":
        return list(R.RuleId)
    out = []
    for name in names_arg.split(","):
        name = name.strip().lower()
        try:
            out.append(R.RuleId(name))
        except ValueError:
            valid = ",".join(r.value for r in R.RuleId)
            raise ConfigError(f"unknown rule {name!r}; valid: {valid}")
    return out


def _rule_report_rows(report: R.RuleReport) -> list[list]:
    rows = []
    for rule, score in report.per_rule.items():
        rows.append([rule.value, score.precision, score.recall, score.f1])
    return rows


# ---------------------------------------------------------------------------
# subcommands

def cmd_extract(args) -> int:
    ds = _load_corpus(args)
    rules = _parse_rules(args.rules)
    out_dir = _out_dir(args)
    labeled = all(s.label is not None for s in ds.sentences)
    outputs = ["candidates.jsonl"] + (["rule_report.csv"] if labeled else [])
    _write_manifest(out_dir, "extract", args, outputs)

    records = [
        {"id": sid, "rules": hits}
        for sid, hits in R.candidate_provenance(ds, rules)
    ]
    _write_jsonl(out_dir / "candidates.jsonl", records)
    if labeled:
        report = R.evaluate_rules(ds, rules)
        _write_csv(out_dir / "rule_report.csv",
                   ["method", "precision", "recall", "f1"],
                   _rule_report_rows(report))
    else:
        print("corpus is unlabeled: candidates written, rule report skipped",
              file=sys.stderr)
    print(f"{len(records)} candidates -> {out_dir / 'candidates.jsonl'}")
    return 0


def cmd_eval_rules(args) -> int:
    ds = _load_corpus(args)
    rules = _parse_rules(args.rules)
    out_dir = _out_dir(args)
    _write_manifest(out_dir, "eval-rules", args, ["rule_report.csv"])
    report = R.evaluate_rules(ds, rules)
    _write_csv(out_dir / "rule_report.csv",
               ["method", "precision", "recall", "f1"],
               _rule_report_rows(report))
    print(f"rule report -> {out_dir / 'rule_report.csv'}")
    return 0


def cmd_stats(args) -> int:
    ds = _load_corpus(args)
    out_dir = _out_dir(args)
    _write_manifest(out_dir, "stats", args, ["corpus_stats.csv"])
    table = C.corpus_stats(ds)
    header = ["class", "count", "ending_in_qm", "with_5w1h", "avg_words",
              "avg_length", "avg_capitalized", "avg_coverage"]
    rows = [
        [name, row["count"], row["ending_in_qm"], row["with_5w1h"],
         row["avg_words"], row["avg_length"], row["avg_capitalized"],
         row["avg_coverage"]]
        for name, row in table.items()
    ]
    _write_csv(out_dir / "corpus_stats.csv", header, rows)
    print(f"corpus stats -> {out_dir / 'corpus_stats.csv'}")
    return 0


def cmd_train(args) -> int:
    ds = _load_corpus(args)
    cfg = _load_config(args)
    word_table = _load_embeddings(args, cfg.embedding_dim)
    lexicon = _load_lexicon(args, cfg.semantic_strategy)
    if lexicon is None and "semantic" in cfg.channels_enabled:
        cfg = M.config_from_dict({
            **M._config_to_dict(cfg),
            "channels_enabled": [
                c for c in cfg.channels_enabled if c != "semantic"
            ],
        })
        print("no lexicon supplied: semantic channel disabled",
              file=sys.stderr)
    out_dir = _out_dir(args)
    _write_manifest(out_dir, "train", args,
                    ["checkpoint.json", "history.csv", "split.json"],
                    resolved_config=M._config_to_dict(cfg))
    split = C.split_dataset(ds, cfg.seed)
    (out_dir / "split.json").write_text(json.dumps({
        "train": list(split.train),
        "validation": list(split.validation),
        "test": list(split.test),
        "seed": split.seed,
    }))
    trained = M.train(cfg, ds, split, word_table=word_table, lexicon=lexicon)
    M.save_checkpoint(trained, out_dir / "checkpoint.json")
    _write_csv(out_dir / "history.csv",
               ["epoch", "train_loss", "val_f1"],
               [[h["epoch"], h["train_loss"], h["val_f1"]]
                for h in trained.history])
    best = max(h["val_f1"] for h in trained.history)
    print(f"trained {cfg.epochs} epochs, best val F1 {best:.4f} -> "
          f"{out_dir / 'checkpoint.json'}")
    return 0


def cmd_eval(args) -> int:
    if not args.checkpoint:
        raise ConfigError("--checkpoint is required")
    model = M.load_checkpoint(args.checkpoint)
    ds = _load_corpus(args)
    out_dir = _out_dir(args)
    _write_manifest(out_dir, "eval", args,
                    ["metrics.csv", "predictions.jsonl"])
    results = M.predict_batch(model, ds.sentences)
    _write_jsonl(out_dir / "predictions.jsonl", results)
    gold, pred = [], []
    for s, rec in zip(ds.sentences, results):
        if s.label is not None and "label" in rec:
            gold.append(s.label)
            pred.append(rec["label"])
    if gold:
        report = E.compute_metrics(gold, pred)
        rows = [
            [c, sc.precision, sc.recall, sc.f1, sc.support]
            for c, sc in report.per_class.items()
        ]
        rows.append(["micro", report.micro_f1, report.micro_f1,
                     report.micro_f1, report.n])
        _write_csv(out_dir / "metrics.csv",
                   ["class", "precision", "recall", "f1", "support"], rows)
        print(f"micro F1 {report.micro_f1:.4f} over {report.n} sentences")
    else:
        print("no labeled sentences: predictions written, metrics skipped",
              file=sys.stderr)
    return 0


def cmd_ablate(args) -> int:
    ds = _load_corpus(args)
    cfg = _load_config(args)
    word_table = _load_embeddings(args, cfg.embedding_dim)
    lexicon = _load_lexicon(args, cfg.semantic_strategy)
    if lexicon is None:
        if "semantic" in cfg.channels_enabled:
            cfg = M.config_from_dict({
                **M._config_to_dict(cfg),
                "channels_enabled": [
                    c for c in cfg.channels_enabled if c != "semantic"
                ],
            })
        print("no lexicon supplied: semantic variants skipped",
              file=sys.stderr)
    one_hot_ok = cfg.embedding_dim >= len(POS_TAGS)
    if not one_hot_ok:
        print(f"embedding_dim {cfg.embedding_dim} < {len(POS_TAGS)} tags: "
              "one-hot POS variant skipped", file=sys.stderr)
    out_dir = _out_dir(args)
    _write_manifest(out_dir, "ablate", args, ["ablation.csv"],
                    resolved_config=M._config_to_dict(cfg))
    matrix = E.standard_ablation_matrix(
        cfg, with_embeddings=word_table is not None,
        with_semantic=lexicon is not None,
        with_pos_onehot=one_hot_ok,
    )
    rows = E.run_ablation(ds, C.split_dataset(ds, cfg.seed), matrix,
                          word_table=word_table, lexicon=lexicon)
    _write_csv(out_dir / "ablation.csv",
               ["variant", "test_f1", "val_f1"],
               [[r.name, r.test_f1, r.val_f1] for r in rows])
    print(f"{len(rows)} variants -> {out_dir / 'ablation.csv'}")
    return 0


def cmd_hpo(args) -> int:
    ds = _load_corpus(args)
    cfg = _load_config(args)
    word_table = _load_embeddings(args, cfg.embedding_dim)
    lexicon = _load_lexicon(args, cfg.semantic_strategy)
    if lexicon is None and "semantic" in cfg.channels_enabled:
        cfg = M.config_from_dict({
            **M._config_to_dict(cfg),
            "channels_enabled": [
                c for c in cfg.channels_enabled if c != "semantic"
            ],
        })
    out_dir = _out_dir(args)
    _write_manifest(out_dir, "hpo", args, ["trials.csv", "evp.csv"],
                    resolved_config=M._config_to_dict(cfg))
    seed = args.seed if args.seed is not None else cfg.seed
    trials = E.hpo_search(ds, C.split_dataset(ds, seed), trials=args.trials,
                          seed=seed, base_config=cfg, word_table=word_table,
                          lexicon=lexicon)
    header = ["trial", "batch_size", "dropout", "embedding_dropout", "lr",
              "filter_sizes", "feature_maps", "hidden_size", "val_f1"]
    rows = [
        [t.index, t.config.batch_size, t.config.dropout,
         t.config.embedding_dropout, t.config.lr,
         "|".join(str(h) for h in t.config.filter_sizes),
         t.config.feature_maps, t.config.hidden_size, t.val_f1]
        for t in trials
    ]
    _write_csv(out_dir / "trials.csv", header, rows)
    by_index = sorted(trials, key=lambda t: t.index)
    curve = E.expected_validation_performance(by_index, seed=seed)
    _write_csv(out_dir / "evp.csv", ["j", "mean", "sd"],
               [[j, m, s] for j, m, s in curve])
    print(f"{len(trials)} trials -> {out_dir / 'trials.csv'}; best val F1 "
          f"{trials[0].val_f1:.4f}")
    return 0


def cmd_synth(args) -> int:
    out_dir = _out_dir(args)
    _write_manifest(out_dir, "synth", args, [args.out])
    if args.kind == "separable":
        ds = synthetic.make_separable(n=args.n, seed=args.seed or 0)
    elif args.kind == "order-pos":
        ds, _ = synthetic.make_order_pos_corpus(n=args.n, seed=args.seed or 0)
    elif args.kind == "calibrated":
        ds = synthetic.make_calibrated(n=args.n, seed=args.seed or 0)
    else:
        raise ConfigError(f"unknown synthetic kind {args.kind!r}")
    C.write_jsonl(ds, args.out)
    text = Path(args.out).read_text()
    Path(args.out).write_text(
        json.dumps({"_manifest": MANIFEST_NAME}) + "\n" + text
    )
    print(f"{len(ds)} sentences -> {args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="questkit",
                     description="question extraction and classification")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, corpus=True):
        if corpus:
            p.add_argument("--corpus", help="JSONL corpus path")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--embeddings", help="word2vec text file")
        p.add_argument("--lexicon", help="semantic lexicon TSV")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None,
                       help="output directory (default $QUESTKIT_OUT_DIR)")

    p = sub.add_parser("extract", help="rule-based candidate extraction")
    common(p)
    p.add_argument("--rules", default="all",
                   help="comma-separated rule names or 'all'")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval-rules", help="score rules against gold labels")
    common(p)
    p.add_argument("--rules", default="all")
    p.set_defaults(func=cmd_eval_rules)

    p = sub.add_parser("stats", help="per-class corpus statistics")
    common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train the classifier")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    common(p)
    p.add_argument("--checkpoint", help="checkpoint.json from train")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the ablation matrix")
    common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("hpo", help="random hyperparameter search")
    common(p)
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(func=cmd_hpo)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    common(p, corpus=False)
    p.add_argument("--kind", default="separable",
                   choices=["separable", "order-pos", "calibrated"])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
