"""Joint loss, the training loop, Hyperband tuning and the stratified fold protocol."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy import stats

from gounsafe.autodiff import ops
from gounsafe.autodiff.core import Tape, Tensor, backward
from gounsafe.autodiff.optim import OptimizerState, adam_step
from gounsafe.errors import DataLeak, Diverged, TooFewInstances
from gounsafe.features import EncodedInstance
from gounsafe.models import (
    ACTIVATIONS, POOLINGS, WIDTHS, GraphBatch, ModelConfig, ModelParams, classify_batch,
    init_params,
)

MAX_EPOCHS = 1000
PATIENCE = 100
LEARNING_RATE = 0.001
HYPERBAND_R = 200
HYPERBAND_ETA = 3
NUM_FOLDS = 10
REPEATS = 3


def joint_loss(logits_what, logits_why, gold_what, gold_why) -> Tensor:
    """Sum of the two heads' cross-entropies, each averaged over instances."""
    return ops.add(ops.cross_entropy(logits_what, gold_what),
                   ops.cross_entropy(logits_why, gold_why))


def joint_top1(logits_what: np.ndarray, logits_why: np.ndarray,
               gold_what: np.ndarray, gold_why: np.ndarray) -> float:
    hit = (np.argmax(logits_what, 1) == gold_what) & (np.argmax(logits_why, 1) == gold_why)
    return float(hit.mean()) if len(hit) else 0.0


# -- training loop -----------------------------------------------------------------------

class EarlyStopping:
    """Stops once the monitored loss has not decreased for ``patience`` epochs."""

    def __init__(self, patience: int | None = PATIENCE):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = 0
        self.epoch = 0

    def update(self, loss: float) -> bool:
        """Record one epoch; True means stop now."""
        self.epoch += 1
        if loss < self.best:
            self.best, self.best_epoch = loss, self.epoch
            return False
        return self.patience is not None and self.epoch - self.best_epoch >= self.patience

    @property
    def improved(self) -> bool:
        return self.best_epoch == self.epoch


@dataclass
class TrainRunResult:
    params: ModelParams
    epochs_run: int
    best_epoch: int
    val_loss: float
    seed: int
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)


def _evaluate_loss(batch: GraphBatch, params: ModelParams, cfg: ModelConfig) -> float:
    lw, ly = classify_batch(batch, params, cfg, training=False)
    return float(joint_loss(lw, ly, batch.what, batch.why).data)


def train(cfg: ModelConfig, train_set: Sequence[EncodedInstance],
          val_set: Sequence[EncodedInstance] | None, seed: int = 0, max_epochs: int = MAX_EPOCHS,
          patience: int | None = PATIENCE, lr: float = LEARNING_RATE,
          batch_size: int | None = None) -> TrainRunResult:
    """Adam on the joint loss with early stopping; returns the best-validation parameters.

    Without a validation split the training loss itself is monitored.
    """
    if not train_set or (val_set is not None and not val_set):
        raise ValueError("training and validation splits must be nonempty")
    if val_set is not None:
        ids_train = {i.instance_id for i in train_set if i.instance_id}
        if ids_train & {i.instance_id for i in val_set if i.instance_id}:
            raise DataLeak("training and validation splits overlap")
    params = init_params(cfg, seed)
    tensors = params.tensors()
    opt = OptimizerState.for_params(tensors, lr)
    rng = np.random.default_rng(seed + 1)
    full = GraphBatch.from_instances(train_set)
    val = GraphBatch.from_instances(val_set) if val_set is not None else full
    stopper = EarlyStopping(patience)
    best = params.copy()
    result = TrainRunResult(best, 0, 0, math.inf, seed)
    for epoch in range(1, max_epochs + 1):
        if batch_size is None or batch_size >= len(train_set):
            batches = [full]
        else:
            order = rng.permutation(len(train_set))
            batches = [GraphBatch.from_instances([train_set[j] for j in order[s:s + batch_size]])
                       for s in range(0, len(order), batch_size)]
        total = 0.0
        for batch in batches:
            with Tape() as tape:
                lw, ly = classify_batch(batch, params, cfg, training=True, rng=rng)
                loss = joint_loss(lw, ly, batch.what, batch.why)
            value = float(loss.data)
            if not np.isfinite(value):
                raise Diverged(epoch)
            adam_step(opt, tensors, backward(loss, tensors, tape))
            total += value * batch.num_graphs
        result.train_losses.append(total / len(train_set))
        vloss = _evaluate_loss(val, params, cfg)
        if not np.isfinite(vloss):
            raise Diverged(epoch)
        result.val_losses.append(vloss)
        stop = stopper.update(vloss)
        if stopper.improved:
            best = params.copy()
        result.epochs_run = epoch
        if stop:
            break
    result.params = best
    result.best_epoch = stopper.best_epoch
    result.val_loss = stopper.best
    return result


def predict_logits(instances: Sequence[EncodedInstance], params: ModelParams,
                   cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    lw, ly = classify_batch(GraphBatch.from_instances(instances), params, cfg, training=False)
    return lw.data, ly.data


# -- Hyperband -------------------------------------------------------------------------

def bracket_schedule(R: int = HYPERBAND_R, eta: int = HYPERBAND_ETA) -> list[list[tuple[int, int]]]:
    """Rungs (configs, epochs) of every bracket, most exploratory first."""
    if R < 1 or eta < 2:
        raise ValueError("need R >= 1 and eta >= 2")
    s_max = 0
    while eta ** (s_max + 1) <= R:
        s_max += 1
    brackets = []
    for s in range(s_max, -1, -1):
        n = math.ceil(Fraction(s_max + 1, s + 1) * eta ** s)
        rungs = []
        for i in range(s + 1):
            n_i = math.floor(Fraction(n, eta ** i))
            r_i = math.ceil(Fraction(R, eta ** (s - i)))
            rungs.append((n_i, r_i))
        brackets.append(rungs)
    return brackets


@dataclass
class SearchSpace:
    """The explored hyperparameter grid; widths and activations tuned per layer type."""
    variant: str
    n_features: int
    n_what: int
    n_why: int
    conv_depths: tuple[int, ...] = (2, 3, 4, 5, 6)
    mlp_depths: tuple[int, ...] = (1, 2, 3)
    widths: tuple[int, ...] = WIDTHS
    activations: tuple[str, ...] = ACTIVATIONS
    poolings: tuple[str, ...] = POOLINGS
    batch_norm: tuple[bool, ...] = (True, False)
    dropout: tuple[float, ...] = (0.0, 0.5)

    def sample(self, rng: np.random.Generator) -> ModelConfig:
        def pick(xs):
            return xs[int(rng.integers(len(xs)))]
        return ModelConfig(
            variant=self.variant, n_features=self.n_features, n_what=self.n_what, n_why=self.n_why,
            conv_depth=pick(self.conv_depths), mlp_depth=pick(self.mlp_depths),
            conv_width=pick(self.widths), mlp_width=pick(self.widths),
            conv_activation=pick(self.activations), mlp_activation=pick(self.activations),
            pooling=pick(self.poolings), batch_norm=pick(self.batch_norm),
            dropout=pick(self.dropout),
        )


@dataclass
class HyperbandTrial:
    bracket: int
    rung: int
    config: ModelConfig
    epochs: int
    score: float


@dataclass
class HyperbandResult:
    best_config: ModelConfig
    best_score: float
    trials: list[HyperbandTrial]


def hyperband(space: SearchSpace | Sequence[ModelConfig],
              evaluate: Callable[[ModelConfig, int], float], R: int = HYPERBAND_R,
              eta: int = HYPERBAND_ETA, seed: int = 0) -> HyperbandResult:
    """Successive halving over every bracket; ``evaluate(config, epochs)`` is maximized."""
    rng = np.random.default_rng(seed)
    if isinstance(space, SearchSpace):
        sample = space.sample
    else:
        pool = list(space)
        if not pool:
            raise ValueError("empty search space")
        def sample(r):
            return pool[int(r.integers(len(pool)))]
    trials: list[HyperbandTrial] = []
    best: tuple[float, ModelConfig] | None = None
    for b, rungs in enumerate(bracket_schedule(R, eta)):
        configs = _unique([sample(rng) for _ in range(rungs[0][0])])
        for i, (_, epochs) in enumerate(rungs):
            scored = []
            for c in configs:
                score = float(evaluate(c, epochs))
                trials.append(HyperbandTrial(b, i, c, epochs, score))
                scored.append((score, c))
                if best is None or score > best[0]:
                    best = (score, c)
            # stable sort keeps sampling order among equal scores
            scored.sort(key=lambda sc: -sc[0])
            keep = max(1, len(configs) // eta) if i + 1 < len(rungs) else 0
            configs = [c for _, c in scored[:keep]]
            if not configs:
                break
    assert best is not None
    return HyperbandResult(best[1], best[0], trials)


def _unique(configs: list[ModelConfig]) -> list[ModelConfig]:
    seen, out = set(), []
    for c in configs:
        if c.hash not in seen:
            seen.add(c.hash)
            out.append(c)
    return out


def accuracy_objective(train_set: Sequence[EncodedInstance], val_set: Sequence[EncodedInstance],
                       seed: int = 0) -> Callable[[ModelConfig, int], float]:
    """Joint top-1 validation accuracy after training for a given epoch budget."""
    gw = np.array([i.gold_what for i in val_set])
    gy = np.array([i.gold_why for i in val_set])

    def evaluate(cfg: ModelConfig, epochs: int) -> float:
        try:
            run = train(cfg, train_set, val_set, seed=seed, max_epochs=epochs, patience=PATIENCE)
        except Diverged:
            return 0.0
        lw, ly = predict_logits(val_set, run.params, cfg)
        return joint_top1(lw, ly, gw, gy)

    return evaluate


# -- folds -----------------------------------------------------------------------------

@dataclass
class FoldPlan:
    folds: list[np.ndarray]  # instance indices per fold
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def split(self, test_fold: int, labels: Sequence[Hashable], val_fraction: float = 0.1
              ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Train, validation and test indices for one outer iteration."""
        test = self.folds[test_fold]
        rest = np.concatenate([f for i, f in enumerate(self.folds) if i != test_fold])
        tr, va = stratified_split(rest, labels, val_fraction, self.seed + test_fold)
        return tr, va, test


def _strata(labels: Sequence[Hashable], idx: Iterable[int]) -> dict[Hashable, list[int]]:
    groups: dict[Hashable, list[int]] = {}
    for i in idx:
        groups.setdefault(labels[i], []).append(int(i))
    return groups


def make_folds(labels: Sequence[Hashable], k: int = NUM_FOLDS, seed: int = 0) -> FoldPlan:
    """Stratified folds over joint labels; members are dealt round-robin across folds."""
    n = len(labels)
    if n < k:
        raise TooFewInstances(f"{n} instances cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    groups = _strata(labels, range(n))
    buckets: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    # largest classes first; the cursor carries over so fold sizes differ by at most one
    for key in sorted(groups, key=lambda g: (-len(groups[g]), str(g))):
        members = groups[key]
        for j in rng.permutation(len(members)):
            buckets[cursor % k].append(members[j])
            cursor += 1
    return FoldPlan([np.array(sorted(b), dtype=np.int64) for b in buckets], seed)


def stratified_split(idx: np.ndarray, labels: Sequence[Hashable], val_fraction: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class holdout of ``val_fraction`` (at least one validation instance overall)."""
    rng = np.random.default_rng(seed)
    groups = _strata(labels, idx)
    train_idx, val_idx = [], []
    carry = 0.0
    for key in sorted(groups, key=str):
        members = [groups[key][j] for j in rng.permutation(len(groups[key]))]
        want = len(members) * val_fraction + carry
        take = min(int(math.floor(want)), len(members) - 1) if len(members) > 1 else 0
        carry = want - take
        val_idx.extend(members[:take])
        train_idx.extend(members[take:])
    if not val_idx and len(train_idx) > 1:
        val_idx.append(train_idx.pop())
    return np.array(sorted(train_idx), dtype=np.int64), np.array(sorted(val_idx), dtype=np.int64)


def stratification_chi2(labels: Sequence[Hashable], plan: FoldPlan, alpha: float = 0.05
                        ) -> tuple[float, float]:
    """Chi-square of per-fold label histograms against the global one, and its critical value."""
    classes = sorted(set(labels), key=str)
    col = {c: j for j, c in enumerate(classes)}
    obs = np.zeros((plan.k, len(classes)))
    for f, idx in enumerate(plan.folds):
        for i in idx:
            obs[f, col[labels[i]]] += 1
    p = obs.sum(0) / obs.sum()
    expected = obs.sum(1, keepdims=True) * p
    stat = float(((obs - expected) ** 2 / np.where(expected > 0, expected, 1.0)).sum())
    dof = max((plan.k - 1) * (len(classes) - 1), 1)
    return stat, float(stats.chi2.ppf(1.0 - alpha, dof))


def check_plan(plan: FoldPlan, n: int) -> None:
    """Folds must be pairwise disjoint and cover every instance."""
    seen = np.concatenate(plan.folds)
    if len(seen) != n or len(np.unique(seen)) != n:
        raise DataLeak("folds overlap or miss instances")


def leak_check(test_ids: Iterable[str], **used: Iterable[str]) -> None:
    """Raise if any test-fold id appears among the ids feeding another stage."""
    test = set(test_ids)
    for stage, ids in used.items():
        hit = test & set(ids)
        if hit:
            raise DataLeak(f"{len(hit)} test instances reached {stage}, e.g. {sorted(hit)[0]}")


# -- repeats and aggregation -------------------------------------------------------------

def repeat_seed(fold_seed: int, repeat: int) -> int:
    return fold_seed ^ repeat


def aggregate(values: Iterable[float]) -> tuple[float, float]:
    """Mean and population standard deviation."""
    v = np.sort(np.asarray(list(values), dtype=np.float64))
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std())


def repeat_and_aggregate(run: Callable[[int], dict[str, float]], times: int = REPEATS,
                         fold_seed: int = 0) -> dict[str, tuple[float, float]]:
    """Run ``times`` seeds and summarize each metric by mean and std."""
    results = [run(repeat_seed(fold_seed, r)) for r in range(times)]
    keys = sorted(set().union(*results)) if results else []
    return {k: aggregate(r[k] for r in results if k in r) for k in keys}


def aggregate_folds(per_fold: Sequence[dict[str, tuple[float, float]]]
                    ) -> dict[str, tuple[float, float]]:
    """Expected value and spread of the per-fold means."""
    keys = sorted(set().union(*per_fold)) if per_fold else []
    return {k: aggregate(f[k][0] for f in per_fold if k in f) for k in keys}


class ResultsLedger:
    """Append-only CSV of per (fold, repeat, config) metrics."""

    def __init__(self, path: str, fields: Sequence[str]):
        self.path = path
        self.fields = list(fields)

    def append(self, row: dict) -> None:
        unknown = set(row) - set(self.fields)
        if unknown:
            raise ValueError(f"ledger has no column for {sorted(unknown)}")
        fresh = not os.path.exists(self.path) or os.path.getsize(self.path) == 0
        with open(self.path, "a", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=self.fields, extrasaction="raise")
            if fresh:
                w.writeheader()
            w.writerow({k: _fmt(row.get(k, "")) for k in self.fields})

    def read(self) -> list[dict[str, str]]:
        if not os.path.exists(self.path):
            return []
        with open(self.path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)
