"""Metrics, confusion matrices, the fold protocol runner and the feature ablation grid."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from gounsafe.calibration import (
    CalibrationArtifact, PredictionSet, calibrate, conformal_threshold, giq_score, predict_set,
    predict_sets,
)
from gounsafe.dataset import WHAT_LABELS, WHY_LABELS
from gounsafe.errors import LengthMismatch
from gounsafe.features import (
    ALL, NONE, EncodedInstance, FeatureSubset, LabelVocabulary, build_vocabulary, encode_graph,
    feature_subsets,
)
from gounsafe.models import VARIANTS, ModelConfig
from gounsafe.project import LabeledUsage
from gounsafe.training import (
    FoldPlan, ResultsLedger, SearchSpace, accuracy_objective, aggregate, aggregate_folds,
    hyperband, leak_check, make_folds, predict_logits, repeat_seed, train,
)


def _check_lengths(*seqs) -> int:
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise LengthMismatch(f"sequence lengths differ: {sorted(lengths)}")
    return lengths.pop()


def topk_hits(scores: np.ndarray, gold: Sequence[int], k: int) -> np.ndarray:
    """Whether each gold class ranks within the top ``k`` (ties broken by class index)."""
    s = np.asarray(scores, dtype=np.float64)
    g = np.asarray(gold, dtype=np.int64)
    _check_lengths(s, g)
    if len(g) == 0:
        return np.zeros(0, dtype=bool)
    gs = s[np.arange(len(g)), g][:, None]
    cols = np.arange(s.shape[1])[None, :]
    rank = (s > gs).sum(1) + ((s == gs) & (cols < g[:, None])).sum(1)
    return rank < k


def topk_accuracy(scores: np.ndarray, gold: Sequence[int], k: int = 1) -> float:
    hits = topk_hits(scores, gold, k)
    return float(hits.mean()) if len(hits) else 0.0


def topk_joint_accuracy(scores_what: np.ndarray, scores_why: np.ndarray, gold_what: Sequence[int],
                        gold_why: Sequence[int], k: int = 1) -> float:
    """Fraction where both gold labels are among their head's top ``k``."""
    n = _check_lengths(scores_what, scores_why, gold_what, gold_why)
    if n == 0:
        return 0.0
    hits = topk_hits(scores_what, gold_what, k) & topk_hits(scores_why, gold_why, k)
    return float(hits.mean())


@dataclass
class ConformalMetrics:
    coverage_what: float
    coverage_why: float
    coverage_joint: float
    mean_size_what: float
    mean_size_why: float


def conformal_metrics(sets_what: Sequence[PredictionSet], sets_why: Sequence[PredictionSet],
                      gold_what: Sequence[int], gold_why: Sequence[int]) -> ConformalMetrics:
    n = _check_lengths(sets_what, sets_why, gold_what, gold_why)
    if n == 0:
        return ConformalMetrics(0.0, 0.0, 0.0, 0.0, 0.0)
    cw = np.array([g in s for s, g in zip(sets_what, gold_what)])
    cy = np.array([g in s for s, g in zip(sets_why, gold_why)])
    return ConformalMetrics(float(cw.mean()), float(cy.mean()), float((cw & cy).mean()),
                            float(np.mean([len(s) for s in sets_what])),
                            float(np.mean([len(s) for s in sets_why])))


def confusion_matrix(pred: Sequence[int], gold: Sequence[int], n_classes: int) -> np.ndarray:
    """Row t holds the fractions of true-t instances predicted as each class."""
    _check_lengths(pred, gold)
    m = np.zeros((n_classes, n_classes))
    for p, g in zip(pred, gold):
        m[g, p] += 1
    rows = m.sum(1, keepdims=True)
    return np.divide(m, rows, out=np.zeros_like(m), where=rows > 0)


def format_confusion(matrix: np.ndarray, labels: Sequence[str]) -> str:
    width = max(len(lab) for lab in labels)
    head = " " * width + " " + " ".join(f"{i:>5d}" for i in range(len(labels)))
    lines = [head]
    for i, lab in enumerate(labels):
        lines.append(f"{lab:>{width}} " + " ".join(f"{v:5.2f}" for v in matrix[i]))
    return "\n".join(lines)


@dataclass
class MetricsRecord:
    top1_what: float
    top1_why: float
    top1_joint: float
    top3_joint: float
    conformal_acc_what: float
    conformal_acc_why: float
    conformal_acc_joint: float
    mean_set_size_what: float
    mean_set_size_why: float
    fold: int = -1
    repeat: int = -1
    seed: int = 0

    def metrics(self) -> dict[str, float]:
        return {k: v for k, v in asdict(self).items() if k not in ("fold", "repeat", "seed")}


def metrics_from_scores(scores_what: np.ndarray, scores_why: np.ndarray,
                        sets_what: Sequence[PredictionSet], sets_why: Sequence[PredictionSet],
                        gold_what: Sequence[int], gold_why: Sequence[int]) -> MetricsRecord:
    cm = conformal_metrics(sets_what, sets_why, gold_what, gold_why)
    return MetricsRecord(
        topk_accuracy(scores_what, gold_what, 1), topk_accuracy(scores_why, gold_why, 1),
        topk_joint_accuracy(scores_what, scores_why, gold_what, gold_why, 1),
        topk_joint_accuracy(scores_what, scores_why, gold_what, gold_why, 3),
        cm.coverage_what, cm.coverage_why, cm.coverage_joint, cm.mean_size_what, cm.mean_size_why)


# -- fold pipeline ----------------------------------------------------------------------

@dataclass
class FoldData:
    vocab: LabelVocabulary
    train: list[EncodedInstance]
    val: list[EncodedInstance]
    test: list[EncodedInstance]


def encode_usages(usages: Sequence[LabeledUsage], vocab: LabelVocabulary,
                  subset: FeatureSubset = ALL) -> list[EncodedInstance]:
    out = []
    for u in usages:
        inst = encode_graph(u.usage.cfg, vocab, subset, u.usage.usage_vertex)
        inst.gold_what, inst.gold_why, inst.instance_id = u.what, u.why, u.id
        out.append(inst)
    return out


def prepare_fold(corpus: Sequence[LabeledUsage], train_idx, val_idx, test_idx,
                 subset: FeatureSubset = ALL, k: int = 127) -> FoldData:
    """Vocabulary from the training and validation graphs only, then encode every split."""
    fit = [corpus[i] for i in list(train_idx) + list(val_idx)]
    leak_check([corpus[i].id for i in test_idx], vocabulary=[u.id for u in fit])
    vocab = build_vocabulary([u.usage.cfg for u in fit], k)
    return FoldData(vocab,
                    encode_usages([corpus[i] for i in train_idx], vocab, subset),
                    encode_usages([corpus[i] for i in val_idx], vocab, subset),
                    encode_usages([corpus[i] for i in test_idx], vocab, subset))


def default_config(variant: str, n_features: int) -> ModelConfig:
    """A small untuned configuration used when Hyperband is switched off."""
    return ModelConfig(variant=variant, n_features=n_features, n_what=len(WHAT_LABELS),
                       n_why=len(WHY_LABELS), conv_depth=2, mlp_depth=1, conv_width=32,
                       mlp_width=32, conv_activation="relu", mlp_activation="relu", pooling="sum")


@dataclass
class ProtocolOptions:
    folds: int = 10
    repeats: int = 3
    seed: int = 0
    epsilon: float = 0.1
    max_epochs: int = 1000
    patience: int | None = 100
    tune: bool = False
    tune_per_fold: bool = True
    hyperband_R: int = 200
    hyperband_eta: int = 3
    k: int = 127
    config: ModelConfig | None = None


@dataclass
class FoldOutcome:
    fold: int
    config: ModelConfig
    records: list[MetricsRecord] = field(default_factory=list)
    summary: dict[str, tuple[float, float]] = field(default_factory=dict)


def _ids(instances: Sequence[EncodedInstance]) -> list[str]:
    return [i.instance_id for i in instances]


def evaluate_fold(data: FoldData, cfg: ModelConfig, seed: int, opts: ProtocolOptions
                  ) -> tuple[MetricsRecord, CalibrationArtifact]:
    """Train once, calibrate on validation, score the test fold."""
    leak_check(_ids(data.test), training=_ids(data.train), calibration=_ids(data.val))
    run = train(cfg, data.train, data.val, seed=seed, max_epochs=opts.max_epochs,
                patience=opts.patience)
    vw, vy = predict_logits(data.val, run.params, cfg)
    art = calibrate(vw, vy, [i.gold_what for i in data.val], [i.gold_why for i in data.val],
                    opts.epsilon)
    tw, ty = predict_logits(data.test, run.params, cfg)
    rec = metrics_from_scores(tw, ty, predict_sets(tw, art.T_what, art.threshold_what),
                              predict_sets(ty, art.T_why, art.threshold_why),
                              [i.gold_what for i in data.test], [i.gold_why for i in data.test])
    rec.seed = seed
    return rec, art


def run_protocol(corpus: Sequence[LabeledUsage], variant: str, subset: FeatureSubset = ALL,
                 opts: ProtocolOptions | None = None, ledger: ResultsLedger | None = None,
                 plan: FoldPlan | None = None) -> list[FoldOutcome]:
    """Stratified outer folds, optional tuning, repeated training and calibrated evaluation."""
    opts = opts or ProtocolOptions()
    labels = [f"{u.what}|{u.why}" for u in corpus]
    plan = plan or make_folds(labels, opts.folds, opts.seed)
    outcomes = []
    global_cfg: ModelConfig | None = None
    for f in range(plan.k):
        tr, va, te = plan.split(f, labels)
        data = prepare_fold(corpus, tr, va, te, subset, opts.k)
        cfg = opts.config or default_config(variant, data.vocab.n)
        cfg = replace(cfg, variant=variant, n_features=data.vocab.n)
        if opts.tune and (opts.tune_per_fold or global_cfg is None):
            leak_check(_ids(data.test), tuning=_ids(data.train) + _ids(data.val))
            space = SearchSpace(variant, data.vocab.n, cfg.n_what, cfg.n_why)
            result = hyperband(space, accuracy_objective(data.train, data.val, opts.seed),
                               opts.hyperband_R, opts.hyperband_eta, opts.seed + f)
            global_cfg = result.best_config
        if opts.tune and global_cfg is not None:
            cfg = global_cfg
        outcome = FoldOutcome(f, cfg)
        fold_seed = opts.seed * 1000 + f
        for r in range(opts.repeats):
            seed = repeat_seed(fold_seed, r)
            rec, _ = evaluate_fold(data, cfg, seed, opts)
            rec.fold, rec.repeat = f, r
            outcome.records.append(rec)
            if ledger is not None:
                ledger.append({"variant": variant, "subset": subset.name, "fold": f, "repeat": r,
                               "seed": seed, "config": cfg.hash, **rec.metrics()})
        outcome.summary = {k: aggregate(getattr(rec, k) for rec in outcome.records)
                           for k in outcome.records[0].metrics()}
        outcomes.append(outcome)
    return outcomes


LEDGER_FIELDS = [
    "variant", "subset", "fold", "repeat", "seed", "config", "top1_what", "top1_why",
    "top1_joint", "top3_joint", "conformal_acc_what", "conformal_acc_why",
    "conformal_acc_joint", "mean_set_size_what", "mean_set_size_why",
]


# -- majority baseline -----------------------------------------------------------------

def majority_metrics(train_what: Sequence[int], train_why: Sequence[int],
                     cal_what: Sequence[int], cal_why: Sequence[int],
                     test_what: Sequence[int], test_why: Sequence[int],
                     epsilon: float = 0.1) -> MetricsRecord:
    """Predict the training distribution for every input.

    Top-k uses its modes; conformal sets use the distribution itself, calibrated like a model.
    """
    def dist(labels, n):
        c = np.bincount(np.asarray(labels, dtype=np.int64), minlength=n).astype(float)
        return c / c.sum()

    pw, py = dist(train_what, len(WHAT_LABELS)), dist(train_why, len(WHY_LABELS))
    n = len(test_what)
    sw, sy = np.tile(pw, (n, 1)), np.tile(py, (n, 1))
    tw = conformal_threshold([giq_score(pw, g) for g in cal_what], epsilon)
    ty = conformal_threshold([giq_score(py, g) for g in cal_why], epsilon)
    return metrics_from_scores(sw, sy, [predict_set(pw, tw)] * n, [predict_set(py, ty)] * n,
                               test_what, test_why)


def run_baseline(corpus: Sequence[LabeledUsage], plan: FoldPlan, epsilon: float = 0.1
                 ) -> list[MetricsRecord]:
    labels = [f"{u.what}|{u.why}" for u in corpus]
    out = []
    for f in range(plan.k):
        tr, va, te = plan.split(f, labels)
        def pick(idx, attr):
            return [getattr(corpus[i], attr) for i in idx]
        rec = majority_metrics(pick(tr, "what"), pick(tr, "why"), pick(va, "what"),
                               pick(va, "why"), pick(te, "what"), pick(te, "why"), epsilon)
        rec.fold = f
        out.append(rec)
    return out


# -- ablation grid ---------------------------------------------------------------------

@dataclass
class AblationRow:
    variant: str
    subset: str
    metrics: dict[str, tuple[float, float]]

    def mean(self, metric: str) -> float:
        return self.metrics[metric][0]


def run_ablation(corpus: Sequence[LabeledUsage], variants: Sequence[str] = VARIANTS,
                 subsets: Sequence[FeatureSubset] | None = None,
                 opts: ProtocolOptions | None = None,
                 ledger: ResultsLedger | None = None) -> list[AblationRow]:
    """Every variant under every feature subset, plus a majority-classifier row."""
    opts = opts or ProtocolOptions()
    subsets = list(subsets) if subsets is not None else feature_subsets()
    labels = [f"{u.what}|{u.why}" for u in corpus]
    plan = make_folds(labels, opts.folds, opts.seed)
    rows = []
    for v in variants:
        for s in subsets:
            outcomes = run_protocol(corpus, v, s, opts, ledger, plan)
            rows.append(AblationRow(v, s.name, aggregate_folds([o.summary for o in outcomes])))
    base = run_baseline(corpus, plan, opts.epsilon)
    rows.append(AblationRow("majority", "-", {k: aggregate(getattr(r, k) for r in base)
                                             for k in base[0].metrics()}))
    return rows


def format_ablation(rows: Sequence[AblationRow], metric: str = "top1_joint") -> str:
    lines = [f"{'variant':<10} {'subset':<11} {metric:>12}"]
    for r in rows:
        m, s = r.metrics[metric]
        lines.append(f"{r.variant:<10} {r.subset:<11} {m:8.3f}±{s:.3f}")
    return "\n".join(lines)

