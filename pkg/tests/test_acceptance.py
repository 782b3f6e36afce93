"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line with its evidence."""
import glob
import json
import os
import time

import numpy as np
import pytest

from cfg_golden import graph_of
from conftest import DATA_DIR, TOY_DATASET, TOY_PROJECT
from gradcases import primitive_cases, smooth_model_points
from graphs import cycle, instance, path, star, two_triangles
from gounsafe import autodiff as ad
from gounsafe.calibration import (
    calibration_scores, conformal_threshold, fit_temperature, nll, predict_sets, probabilities,
)
from gounsafe.cfg import dump_cfg
from gounsafe.cli import EXIT_OK, main
from gounsafe.dataset import read_jsonl
from gounsafe.errors import DataLeak
from gounsafe.evaluation import (
    ProtocolOptions, default_config, encode_usages, prepare_fold, run_ablation, run_protocol,
)
from gounsafe.features import ALL, NONE, build_vocabulary, load_manifest
from gounsafe.models import GraphBatch, ModelConfig, graph_embeddings, init_params
from gounsafe.project import extract_project, link_records
from gounsafe.synthetic import oracle_head, separable_corpus, stratification_labels
from gounsafe.training import (
    bracket_schedule, check_plan, joint_top1, make_folds, predict_logits, stratification_chi2,
    train,
)

from test_training import HYPERBAND_TABLE

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "testdata", "cfg")
RESULTS: dict[int, tuple[bool, str]] = {}


def report(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_01_cfg_goldens():
    t = time.perf_counter()
    sources = sorted(glob.glob(os.path.join(GOLDEN_DIR, "*.go")))
    mismatched = []
    for src in sources:
        with open(src[:-3] + ".golden.jsonl", encoding="utf-8") as fh:
            if dump_cfg(graph_of(src)) != fh.read():
                mismatched.append(os.path.basename(src))
    dt = time.perf_counter() - t
    report(1, len(sources) == 12 and not mismatched and dt < 5,
           f"{len(sources) - len(mismatched)}/{len(sources)} goldens match in {dt:.2f}s (limit 5s)")


def test_criterion_02_feature_dimension():
    inv = extract_project(TOY_PROJECT)
    vocab = build_vocabulary([u.cfg for u in inv.usages], 127, load_manifest())
    report(2, vocab.n == 594 and vocab.n_finite == 82,
           f"n={vocab.n} with {vocab.n_finite} finite labels and k=127 (expected 594)")


def test_criterion_03_gradient_checks():
    t = time.perf_counter()
    worst = {}
    for name, build in primitive_cases().items():
        worst[name] = max(ad.gradient_check(*build(np.random.default_rng(s))) for s in range(10))
    for variant in ("mlp", "deepsets", "gin", "wl2"):
        points = smooth_model_points(variant, 10)
        worst[variant] = max(ad.gradient_check(f, params) for _, f, params in points)
    dt = time.perf_counter() - t
    top = max(worst, key=worst.get)
    report(3, worst[top] < 1e-4 and dt < 60,
           f"{len(worst)} cases x 10 seeds, max rel. error {worst[top]:.1e} ({top}) "
           f"in {dt:.1f}s (limits 1e-4, 60s)")


def _gap(variant, a, b, seed):
    cfg = ModelConfig(variant, n_features=8, conv_width=16, mlp_width=16)
    e = graph_embeddings(GraphBatch.from_instances([a, b]), init_params(cfg, seed), cfg)
    return float(np.abs(e[0] - e[1]).max())


def test_criterion_04_expressiveness():
    t = time.perf_counter()
    c6, tt = instance(6, cycle(6), 8), instance(6, two_triangles(), 8)
    ds = max(_gap("deepsets", c6, tt, s) for s in range(10))
    gin = max(_gap("gin", c6, tt, s) for s in range(10))
    wl2 = sum(_gap("wl2", c6, tt, s) > 1e-6 for s in range(10))
    star_path = _gap("gin", instance(4, star(), 8), instance(4, path(), 8), 0)
    dt = time.perf_counter() - t
    report(4, ds < 1e-9 and gin < 1e-9 and wl2 >= 8 and star_path > 1e-6 and dt < 30,
           f"C6 vs 2xC3: deepsets {ds:.1e}, gin {gin:.1e}, wl2 separates {wl2}/10; "
           f"K1,3 vs P4 gin gap {star_path:.2e}; {dt:.1f}s (limit 30s)")


def test_criterion_05_conformal_validity():
    t = time.perf_counter()
    coverage = {"what": [], "why": []}
    adaptive = 0
    for trial in range(20):
        rng = np.random.default_rng(trial)
        ok = True
        for head in ("what", "why"):
            cal, test = oracle_head(500, rng), oracle_head(1000, rng)
            thr = conformal_threshold(calibration_scores(cal.logits, cal.labels, 1.0), 0.1)
            sets = predict_sets(test.logits, 1.0, thr)
            coverage[head].append(np.mean([g in s for s, g in zip(sets, test.labels)]))
            sizes = np.array([len(s) for s in sets])
            ok &= sizes[test.low_entropy].mean() < sizes[~test.low_entropy].mean()
        adaptive += ok
    dt = time.perf_counter() - t
    cov = {h: float(np.mean(v)) for h, v in coverage.items()}
    report(5, all(0.88 <= c <= 1.0 for c in cov.values()) and adaptive >= 18 and dt < 60,
           f"mean coverage what {cov['what']:.3f} why {cov['why']:.3f}; adaptive in {adaptive}/20 "
           f"trials; {dt:.1f}s")


def test_criterion_06_temperature_scaling():
    worse, flipped = 0, 0
    for trial in range(50):
        rng = np.random.default_rng(trial)
        sample = oracle_head(300, rng, 11)
        logits = sample.logits * rng.uniform(0.2, 5.0)
        T = fit_temperature(logits, sample.labels)
        worse += nll(logits, sample.labels, T) > nll(logits, sample.labels, 1.0)
        flipped += not np.array_equal(probabilities(logits, T).argmax(1), logits.argmax(1))
    report(6, worse == 0 and flipped == 0,
           f"50 trials: NLL worse after fitting in {worse}, argmax changed in {flipped}")


def test_criterion_07_overfit(separable50, encoded50):
    vocab, data = encoded50
    gw = np.array([i.gold_what for i in data])
    gy = np.array([i.gold_why for i in data])
    t = time.perf_counter()
    acc = {}
    for variant in ("mlp", "deepsets", "gin", "wl2"):
        cfg = default_config(variant, vocab.n)
        run = train(cfg, data, None, seed=0, max_epochs=1000, patience=100)
        acc[variant] = joint_top1(*predict_logits(data, run.params, cfg), gw, gy)
    dt = time.perf_counter() - t
    report(7, min(acc.values()) >= 0.95 and dt < 600,
           ", ".join(f"{k} {v:.2f}" for k, v in acc.items()) + f" joint top-1 on 50; {dt:.0f}s")


def test_criterion_08_protocol_integrity():
    corpus = separable_corpus(30, seed=2)
    opts = ProtocolOptions(folds=3, repeats=1, max_epochs=2, patience=None, tune=True,
                           hyperband_R=3, hyperband_eta=3)
    run_protocol(corpus, "mlp", opts=opts)
    labels = [f"{u.what}|{u.why}" for u in corpus]
    tr, va, te = make_folds(labels, 3, 0).split(0, labels)
    try:
        prepare_fold(corpus, tr, list(va) + [te[0]], te)
        caught = False
    except DataLeak:
        caught = True
    strat = stratification_labels(400, seed=0)
    plan = make_folds(strat, 10, 0)
    check_plan(plan, 400)
    stat, critical = stratification_chi2(strat, plan)
    schedule_ok = bracket_schedule(200, 3) == HYPERBAND_TABLE
    report(8, caught and stat < critical and schedule_ok,
           f"leak-free protocol run, planted leak caught={caught}; chi2 {stat:.2f} < {critical:.2f}; "
           f"Hyperband(200,3) table match={schedule_ok}")


def test_criterion_09_cli_end_to_end(tmp_path):
    t = time.perf_counter()
    reports = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        ckpt, out = str(d / "model.json"), str(d / "report.jsonl")
        codes = [
            main(["extract", TOY_PROJECT, "--format", "jsonl", "--out", str(d / "inv.jsonl")]),
            main(["train", "--dataset", TOY_DATASET, "--variant", "mlp", "--out", ckpt]),
            main(["calibrate", "--dataset", TOY_DATASET, "--checkpoint", ckpt]),
            main(["predict", TOY_PROJECT, "--checkpoint", ckpt, "--format", "jsonl", "--out", out]),
        ]
        assert codes == [EXIT_OK] * 4, codes
        reports.append(open(out, encoding="utf-8").read())
    dt = time.perf_counter() - t
    inventory = [json.loads(x) for x in open(tmp_path / "a" / "inv.jsonl")]
    entries = [json.loads(x) for x in reports[0].splitlines()]
    same_sites = [(e["file"], e["line"]) for e in entries] == [(i["file"], i["line"]) for i in inventory]
    labelled = len(read_jsonl(TOY_DATASET))
    report(9, reports[0] == reports[1] and same_sites and labelled == 30 and dt < 300,
           f"{labelled} labelled, {len(inventory)} inventoried, {len(entries)} reported; "
           f"identical reports={reports[0] == reports[1]}; {dt:.1f}s (limit 300s)")


def test_criterion_10_ablation():
    toy = link_records(read_jsonl(TOY_DATASET), DATA_DIR)
    grid = run_ablation(toy, opts=ProtocolOptions(folds=3, repeats=1, max_epochs=30, patience=None))
    cells = {(r.variant, r.subset) for r in grid}
    sep = separable_corpus(60, seed=0)
    rows = run_ablation(sep, variants=["mlp"], subsets=[ALL, NONE],
                        opts=ProtocolOptions(folds=3, repeats=1, max_epochs=150, patience=None))
    acc = {r.subset: r.mean("top1_joint") for r in rows}
    report(10, len(grid) == 25 and len(cells) == 25 and acc["ALL"] > acc["NONE"],
           f"toy grid {len(grid)} cells; separable joint top-1 ALL {acc['ALL']:.3f} "
           f"> NONE {acc['NONE']:.3f}")
