"""Command line: extract, tune, train, calibrate, evaluate and predict."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Sequence

import numpy as np

from gounsafe.calibration import (
    DEFAULT_EPSILON, calibrate, calibration_scores, conformal_threshold, predict_set, probabilities,
)
from gounsafe.cfg.graph import cfg_records
from gounsafe.checkpoint import Checkpoint, load_checkpoint, params_hash, save_checkpoint
from gounsafe.dataset import WHAT_LABELS, WHY_LABELS, read_jsonl
from gounsafe.errors import GoUnsafeError
from gounsafe.evaluation import (
    LEDGER_FIELDS, ProtocolOptions, default_config, encode_usages, format_ablation, run_ablation,
    run_protocol,
)
from gounsafe.features import build_vocabulary, encode_graph, feature_subsets, subset_by_name
from gounsafe.models import VARIANTS, GraphBatch, ModelConfig, classify_batch
from gounsafe.project import LabeledUsage, extract_project, go_files, link_records
from gounsafe.training import (
    ResultsLedger, SearchSpace, accuracy_objective, aggregate_folds, hyperband, stratified_split,
    train,
)

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2
log = logging.getLogger("gounsafe")


def _corpus(args) -> list[LabeledUsage]:
    records = read_jsonl(args.dataset)
    projects = args.projects or os.path.dirname(os.path.abspath(args.dataset))
    return link_records(records, projects, args.include_vendored)


def _split(corpus: Sequence[LabeledUsage], seed: int):
    labels = [f"{u.what}|{u.why}" for u in corpus]
    return stratified_split(np.arange(len(corpus)), labels, 0.1, seed)


def _emit(lines: list[str], out: str | None) -> None:
    text = "".join(line + "\n" for line in lines)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- extract ---------------------------------------------------------------------------

def cmd_extract(args) -> int:
    if not os.path.isdir(args.project):
        raise FileNotFoundError(f"cannot read project directory {args.project!r}")
    inv = extract_project(args.project, args.include_vendored)
    for path, msg in inv.errors:
        log.warning("%s: %s", path, msg)
    if inv.files_parsed == 0 and go_files(args.project, args.include_vendored):
        log.error("no Go file could be parsed")
        return EXIT_VALIDATION
    rows = [{"file": u.file, "line": u.line, "context": u.context_kind, "members": u.members,
             "vertex": u.usage_vertex, "error": u.error} for u in inv.usages]
    if args.format == "jsonl":
        lines = [json.dumps(r, sort_keys=True) for r in rows]
    else:
        lines = [f"{'file':<40} {'line':>5}  {'context':<17} members"]
        lines += [f"{r['file']:<40} {r['line']:>5}  {r['context']:<17} {','.join(r['members'])}"
                  + (f"  [{r['error']}]" if r["error"] else "") for r in rows]
        lines.append(f"{len(rows)} usages in {inv.files_parsed} files")
    _emit(lines, args.out)
    if args.graphs:
        os.makedirs(args.graphs, exist_ok=True)
        for u in inv.usages:
            if u.cfg is None:
                continue
            name = f"{u.file.replace('/', '__')}__{u.line}.jsonl"
            recs = cfg_records(u.cfg) + [{"record": "usage", "vertex": u.usage_vertex, "line": u.line}]
            with open(os.path.join(args.graphs, name), "w", encoding="utf-8") as fh:
                fh.writelines(json.dumps(r, sort_keys=True) + "\n" for r in recs)
    return EXIT_OK


# -- tune / train / calibrate ------------------------------------------------------------

def _load_config(path: str | None) -> ModelConfig | None:
    if not path:
        return None
    with open(path, encoding="utf-8") as fh:
        return ModelConfig.from_json(json.load(fh))


def cmd_tune(args) -> int:
    corpus = _corpus(args)
    tr, va = _split(corpus, args.seed)
    vocab = build_vocabulary([corpus[i].usage.cfg for i in list(tr) + list(va)])
    subset = subset_by_name(args.feature_subset)
    train_set = encode_usages([corpus[i] for i in tr], vocab, subset)
    val_set = encode_usages([corpus[i] for i in va], vocab, subset)
    space = SearchSpace(args.variant, vocab.n, len(WHAT_LABELS), len(WHY_LABELS))
    result = hyperband(space, accuracy_objective(train_set, val_set, args.seed),
                       args.max_budget, args.eta, args.seed)
    text = json.dumps(result.best_config.to_json(), sort_keys=True, indent=2)
    _emit([text], args.out)
    log.info("best validation joint accuracy %.4f over %d trials", result.best_score,
             len(result.trials))
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = _corpus(args)
    tr, va = _split(corpus, args.seed)
    vocab = build_vocabulary([corpus[i].usage.cfg for i in list(tr) + list(va)])
    subset = subset_by_name(args.feature_subset)
    train_set = encode_usages([corpus[i] for i in tr], vocab, subset)
    val_set = encode_usages([corpus[i] for i in va], vocab, subset)
    cfg = _load_config(args.config) or default_config(args.variant, vocab.n)
    cfg = replace(cfg, variant=args.variant, n_features=vocab.n)
    run = train(cfg, train_set, val_set, seed=args.seed, max_epochs=args.epochs,
                patience=args.patience)
    ckpt = Checkpoint(cfg, run.params, vocab, subset.name,
                      validation_ids=[corpus[i].id for i in va], seed=args.seed)
    save_checkpoint(args.out, ckpt)
    print(f"trained {cfg.variant} for {run.epochs_run} epochs; best validation loss "
          f"{run.val_loss:.4f} at epoch {run.best_epoch}; wrote {args.out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ckpt.check_manifest()
    corpus = {u.id: u for u in _corpus(args)}
    missing = [i for i in ckpt.validation_ids if i not in corpus]
    if missing or not ckpt.validation_ids:
        raise GoUnsafeError(f"validation instances missing from the dataset: {missing[:3]}")
    val = encode_usages([corpus[i] for i in ckpt.validation_ids], ckpt.vocab,
                        subset_by_name(ckpt.feature_subset))
    lw, ly = classify_batch(GraphBatch.from_instances(val), ckpt.params, ckpt.config)
    gw = [i.gold_what for i in val]
    gy = [i.gold_why for i in val]
    art = calibrate(lw.data, ly.data, gw, gy, args.epsilon)
    ckpt.calibration = art
    ckpt.params.temperature = (art.T_what, art.T_why)
    ckpt.calibration_scores = (calibration_scores(lw.data, gw, art.T_what).tolist(),
                               calibration_scores(ly.data, gy, art.T_why).tolist())
    save_checkpoint(args.out or args.checkpoint, ckpt)
    print(f"T_what={art.T_what:.4f} T_why={art.T_why:.4f} threshold_what={art.threshold_what:.4f} "
          f"threshold_why={art.threshold_why:.4f} epsilon={art.epsilon} m={art.calibration_size}")
    return EXIT_OK


# -- evaluate --------------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    corpus = _corpus(args)
    opts = ProtocolOptions(folds=args.folds, repeats=args.repeats, seed=args.seed,
                           epsilon=args.epsilon, max_epochs=args.epochs, patience=args.patience,
                           tune=args.tune, tune_per_fold=not args.tune_once,
                           hyperband_R=args.max_budget, hyperband_eta=args.eta,
                           config=_load_config(args.config))
    ledger = ResultsLedger(args.ledger, LEDGER_FIELDS) if args.ledger else None
    if args.ablation:
        variants = [args.variant] if args.variant_only else list(VARIANTS)
        rows = run_ablation(corpus, variants, feature_subsets(), opts, ledger)
        if args.format == "jsonl":
            _emit([json.dumps({"variant": r.variant, "subset": r.subset,
                               "metrics": {k: list(v) for k, v in r.metrics.items()}},
                              sort_keys=True) for r in rows], args.out)
        else:
            _emit([format_ablation(rows)], args.out)
        return EXIT_OK
    outcomes = run_protocol(corpus, args.variant, subset_by_name(args.feature_subset), opts, ledger)
    summary = aggregate_folds([o.summary for o in outcomes])
    if args.format == "jsonl":
        _emit([json.dumps({k: list(v) for k, v in summary.items()}, sort_keys=True)], args.out)
    else:
        _emit([f"{k:<22} {m:.4f} ± {s:.4f}" for k, (m, s) in summary.items()], args.out)
    return EXIT_OK


# -- predict ---------------------------------------------------------------------------

def _labelled(labels: Sequence[str], ps) -> list[dict]:
    return [{"label": labels[c], "probability": round(p, 6)} for c, p in zip(ps.labels, ps.probabilities)]


def cmd_predict(args) -> int:
    if not os.path.isdir(args.project):
        raise FileNotFoundError(f"cannot read project directory {args.project!r}")
    ckpt = load_checkpoint(args.checkpoint)
    ckpt.check_manifest()
    art = ckpt.calibration
    if art is None:
        raise GoUnsafeError("checkpoint is not calibrated; run the calibrate command first")
    th_what, th_why, eps = art.threshold_what, art.threshold_why, art.epsilon
    if args.epsilon is not None and args.epsilon != art.epsilon:
        if not ckpt.calibration_scores:
            raise GoUnsafeError("checkpoint lacks calibration scores to re-threshold")
        eps = args.epsilon
        th_what = conformal_threshold(ckpt.calibration_scores[0], eps)
        th_why = conformal_threshold(ckpt.calibration_scores[1], eps)
    inv = extract_project(args.project, args.include_vendored)
    for path, msg in inv.errors:
        log.warning("%s: %s (skipped)", path, msg)
    subset = subset_by_name(ckpt.feature_subset)
    hashes = {"config": ckpt.config.hash, "params": params_hash(ckpt.params),
              "vocabulary": ckpt.vocab.hash}
    entries = []
    for u in inv.usages:
        entry = {"file": u.file, "line": u.line, "context": u.context_kind, "members": u.members,
                 "epsilon": eps, "hashes": hashes}
        if u.cfg is None:
            entry["error"] = u.error
            entries.append(entry)
            continue
        inst = encode_graph(u.cfg, ckpt.vocab, subset, u.usage_vertex)
        lw, ly = classify_batch(GraphBatch.from_instances([inst]), ckpt.params, ckpt.config)
        pw = probabilities(lw.data[0], art.T_what)
        py = probabilities(ly.data[0], art.T_why)
        sw, sy = predict_set(pw, th_what), predict_set(py, th_why)
        entry.update(what=_labelled(WHAT_LABELS, sw), why=_labelled(WHY_LABELS, sy),
                     top1={"what": WHAT_LABELS[int(np.argmax(pw))], "why": WHY_LABELS[int(np.argmax(py))]})
        entries.append(entry)
    entries.sort(key=lambda e: (e["file"], e["line"]))
    if args.format == "jsonl":
        lines = [json.dumps(e, sort_keys=True) for e in entries]
    else:
        lines = [f"{'location':<36} {'WHAT set':<40} WHY set"]
        for e in entries:
            loc = f"{e['file']}:{e['line']}"
            if "error" in e:
                lines.append(f"{loc:<36} error: {e['error']}")
                continue
            w = ", ".join(f"{x['label']} {x['probability']:.2f}" for x in e["what"])
            y = ", ".join(f"{x['label']} {x['probability']:.2f}" for x in e["why"])
            lines.append(f"{loc:<36} {w:<40} {y}")
        lines.append(f"{len(entries)} usages; epsilon={eps}; model {hashes['config']}/{hashes['params']}")
    _emit(lines, args.out)
    return EXIT_OK


# -- argument parsing -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gounsafe",
                                description="Classify Go unsafe usages by what they do and why.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dataset: bool = True, model: bool = True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--include-vendored", action="store_true",
                        help="also scan vendor/ directories")
        sp.add_argument("--format", choices=("text", "jsonl"), default="text")
        sp.add_argument("--out", help="output file (default: stdout)")
        if dataset:
            sp.add_argument("--dataset", required=True, help="JSONL labelled-usage records")
            sp.add_argument("--projects", help="directory holding the projects (default: dataset dir)")
        if model:
            sp.add_argument("--variant", choices=VARIANTS, default="gin")
            sp.add_argument("--feature-subset", default="ALL",
                            help="ALL, NONE, ONLY_VARS, ONLY_TYPES, ONLY_FUNCS or ONLY_PKGS")
            sp.add_argument("--config", help="model config JSON (e.g. from tune)")
            sp.add_argument("--epochs", type=int, default=1000)
            sp.add_argument("--patience", type=int, default=100)

    sp = sub.add_parser("extract", help="inventory the unsafe usages of a project")
    sp.add_argument("project")
    sp.add_argument("--graphs", help="directory for per-usage graph dumps")
    common(sp, dataset=False, model=False)
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("tune", help="Hyperband search over the model space")
    common(sp)
    sp.add_argument("--max-budget", type=int, default=200, help="maximum epochs per trial")
    sp.add_argument("--eta", type=int, default=3)
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("train", help="train a model and write a checkpoint")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("calibrate", help="fit temperatures and conformal thresholds")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    common(sp, model=False)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("evaluate", help="stratified cross-validation or the ablation grid")
    common(sp)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--ledger", help="append per-run metrics to this CSV")
    sp.add_argument("--tune", action="store_true", help="run Hyperband inside each fold")
    sp.add_argument("--tune-once", action="store_true", help="tune on the first fold only")
    sp.add_argument("--max-budget", type=int, default=200)
    sp.add_argument("--eta", type=int, default=3)
    sp.add_argument("--ablation", action="store_true", help="every variant and feature subset")
    sp.add_argument("--variant-only", action="store_true",
                    help="restrict the ablation to --variant")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("predict", help="report conformal label sets for a project")
    sp.add_argument("project")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--epsilon", type=float, default=None,
                    help="override the calibrated significance level")
    common(sp, dataset=False, model=False)
    sp.set_defaults(func=cmd_predict)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except OSError as e:
        log.error("%s", e)
        return EXIT_IO
    except (GoUnsafeError, ValueError, KeyError) as e:
        log.error("%s", e)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
