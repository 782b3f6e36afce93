import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gounsafe.autodiff import Tensor
from gounsafe.errors import DataLeak, Diverged, TooFewInstances
from gounsafe.models import ModelConfig
from gounsafe.synthetic import stratification_labels
from gounsafe.training import (
    EarlyStopping, ResultsLedger, SearchSpace, aggregate, aggregate_folds, bracket_schedule,
    check_plan, hyperband, joint_loss, joint_top1, leak_check, make_folds, predict_logits,
    repeat_and_aggregate, repeat_seed, stratification_chi2, stratified_split, train,
)

HYPERBAND_TABLE = [
    [(81, 3), (27, 8), (9, 23), (3, 67), (1, 200)],
    [(34, 8), (11, 23), (3, 67), (1, 200)],
    [(15, 23), (5, 67), (1, 200)],
    [(8, 67), (2, 200)],
    [(5, 200)],
]


def _cfg(variant, vocab, **kw):
    kw.setdefault("conv_width", 32)
    kw.setdefault("mlp_width", 32)
    return ModelConfig(variant, n_features=vocab.n, **kw)


def test_uniform_logits_loss():
    loss = joint_loss(np.zeros((4, 7)), np.zeros((4, 11)), [0, 1, 2, 3], [4, 5, 6, 7])
    assert math.isclose(float(loss.data), math.log(7) + math.log(11), rel_tol=1e-12)
    assert abs(float(loss.data) - 4.344) < 1e-3


def test_confident_correct_logits_loss_near_zero():
    lw, ly = np.eye(3) * 50, np.eye(3) * 50
    assert float(joint_loss(lw, ly, [0, 1, 2], [0, 1, 2]).data) < 1e-15


@given(st.integers(0, 1000))
def test_loss_invariant_to_consistent_relabeling(seed):
    rng = np.random.default_rng(seed)
    lw, ly = rng.normal(size=(5, 4)), rng.normal(size=(5, 6))
    gw, gy = rng.integers(0, 4, 5), rng.integers(0, 6, 5)
    pw, py = rng.permutation(4), rng.permutation(6)
    a = float(joint_loss(lw, ly, gw, gy).data)
    b = float(joint_loss(lw[:, pw], ly[:, py], np.argsort(pw)[gw], np.argsort(py)[gy]).data)
    assert math.isclose(a, b, rel_tol=1e-12)


def test_joint_top1():
    lw = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert joint_top1(lw, lw, np.array([0, 1]), np.array([0, 0])) == 0.5


def test_patience_stops_after_hundred_epochs_without_improvement():
    stop = EarlyStopping(100)
    epochs = 0
    for epoch in range(1, 1001):
        epochs = epoch
        if stop.update(1.0 + epoch):
            break
    assert epochs == 101 and stop.best_epoch == 1


def test_train_stops_early_when_validation_loss_rises(encoded50):
    vocab, data = encoded50
    cfg = _cfg("mlp", vocab)
    run = train(cfg, data[:40], data[40:], seed=0, max_epochs=1000, patience=5)
    assert run.epochs_run == run.best_epoch + 5 or run.epochs_run == 1000
    assert run.val_loss == min(run.val_losses)


def test_training_is_deterministic(encoded50):
    vocab, data = encoded50
    cfg = _cfg("gin", vocab, dropout=0.5)
    a = train(cfg, data[:20], data[20:25], seed=3, max_epochs=15)
    b = train(cfg, data[:20], data[20:25], seed=3, max_epochs=15)
    assert a.train_losses == b.train_losses and a.val_losses == b.val_losses
    assert all(np.array_equal(x.data, y.data) for x, y in zip(a.params.tensors(), b.params.tensors()))


@pytest.mark.parametrize("variant, pooling", [
    ("mlp", "sum"), ("deepsets", "sum"), ("gin", "sum"),
    ("deepsets", "mean"), ("gin", "mean"), ("wl2", "mean"),
])
@pytest.mark.parametrize("seed", [0, 1])
def test_full_batch_loss_is_monotone_on_five_instances(encoded50, variant, pooling, seed):
    vocab, data = encoded50
    cfg = _cfg(variant, vocab, pooling=pooling)
    run = train(cfg, data[5 * seed:5 * seed + 5], None, seed=seed, max_epochs=60, patience=None)
    losses = np.array(run.train_losses)
    assert len(losses) >= 50
    assert np.all(np.diff(losses) <= 1e-12)


def test_overlapping_splits_are_rejected(encoded50):
    vocab, data = encoded50
    with pytest.raises(DataLeak):
        train(_cfg("mlp", vocab), data[:10], data[5:15], max_epochs=1)


def test_divergence_reports_epoch(encoded50):
    vocab, data = encoded50
    with pytest.raises(Diverged) as err:
        train(_cfg("mlp", vocab), data[:10], data[10:12], lr=float("nan"), max_epochs=3)
    assert "2" in str(err.value) or "1" in str(err.value)


def test_best_params_are_returned(encoded50):
    vocab, data = encoded50
    cfg = _cfg("mlp", vocab)
    run = train(cfg, data[:30], data[30:40], seed=1, max_epochs=30)
    lw, ly = predict_logits(data[30:40], run.params, cfg)
    gw = [i.gold_what for i in data[30:40]]
    gy = [i.gold_why for i in data[30:40]]
    assert math.isclose(float(joint_loss(lw, ly, gw, gy).data), run.val_loss, rel_tol=1e-9)


def _bracket_oracle(R, eta):
    s_max = int(math.floor(math.log(R) / math.log(eta) + 1e-12))
    out = []
    for s in range(s_max, -1, -1):
        n = -(-(s_max + 1) * eta ** s // (s + 1))
        out.append([(n // eta ** i, -(-R // eta ** (s - i))) for i in range(s + 1)])
    return out


def test_hyperband_table():
    assert bracket_schedule(200, 3) == HYPERBAND_TABLE


@given(st.integers(1, 2000), st.integers(2, 5))
def test_bracket_schedule_matches_integer_oracle(R, eta):
    assert bracket_schedule(R, eta) == _bracket_oracle(R, eta)


def test_hyperband_single_config():
    cfg = ModelConfig("mlp", n_features=10)
    budgets = []

    def evaluate(c, epochs):
        budgets.append(epochs)
        return 0.5

    result = hyperband([cfg], evaluate)
    assert result.best_config == cfg and max(budgets) <= 200


def test_hyperband_dominant_config_wins():
    good = ModelConfig("gin", n_features=10, conv_width=64)
    bad = ModelConfig("gin", n_features=10, conv_width=32)
    result = hyperband([bad, good], lambda c, e: (0.9 if c is good else 0.1) * e / 200)
    assert result.best_config == good


def test_hyperband_rung_sizes_follow_schedule():
    space = SearchSpace("gin", 10, 11, 11)
    result = hyperband(space, lambda c, e: float(c.conv_width + e))
    first = [t for t in result.trials if t.bracket == 0]
    per_rung = [sum(1 for t in first if t.rung == r) for r in range(5)]
    assert per_rung[1:] == [27, 9, 3, 1] and per_rung[0] <= 81


def test_folds_for_two_balanced_classes():
    labels = ["a"] * 10 + ["b"] * 10
    plan = make_folds(labels, 10, seed=0)
    for fold in plan.folds:
        assert sorted(labels[i] for i in fold) == ["a", "b"]


def test_rare_class_lands_in_distinct_folds():
    labels = ["big"] * 27 + ["rare"] * 3
    plan = make_folds(labels, 10, seed=4)
    where = [f for f, fold in enumerate(plan.folds) for i in fold if labels[i] == "rare"]
    assert len(set(where)) == 3


def test_too_few_instances():
    with pytest.raises(TooFewInstances):
        make_folds(["a"] * 9, 10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from("abcdefg"), min_size=10, max_size=120), st.integers(0, 100))
def test_folds_partition_and_balance(labels, seed):
    plan = make_folds(labels, 10, seed)
    check_plan(plan, len(labels))
    sizes = [len(f) for f in plan.folds]
    assert max(sizes) - min(sizes) <= 1
    for c in set(labels):
        per_fold = [sum(labels[i] == c for i in f) for f in plan.folds]
        assert max(per_fold) - min(per_fold) <= 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from("abcd"), min_size=20, max_size=100), st.integers(0, 100))
def test_split_roles_are_disjoint(labels, seed):
    plan = make_folds(labels, 10, seed)
    tr, va, te = plan.split(seed % 10, labels)
    assert not (set(tr) & set(va)) and not (set(tr) & set(te)) and not (set(va) & set(te))
    assert len(tr) + len(va) + len(te) == len(labels)
    assert abs(len(va) - 0.1 * (len(tr) + len(va))) <= 4


def test_stratified_split_carries_rounding():
    labels = ["a"] * 15 + ["b"] * 15
    tr, va = stratified_split(np.arange(30), labels, 0.1, 0)
    assert len(va) == 3 and len(tr) == 27


def test_chi_square_on_skewed_labels():
    labels = stratification_labels(400, seed=0)
    stat, critical = stratification_chi2(labels, make_folds(labels, 10, 0))
    assert stat < critical


def test_check_plan_detects_overlap():
    plan = make_folds(["a"] * 20, 10)
    plan.folds[0] = np.append(plan.folds[0], plan.folds[1][0])
    with pytest.raises(DataLeak):
        check_plan(plan, 20)


def test_leak_check_names_the_stage():
    leak_check(["x"], vocabulary=["y"], training=["z"])
    with pytest.raises(DataLeak, match="calibration"):
        leak_check(["x", "q"], vocabulary=["y"], calibration=["q"])


def test_aggregate_population_std():
    m, s = aggregate([0.8, 0.9, 1.0])
    assert math.isclose(m, 0.9) and abs(s - 0.0816) < 1e-4


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.randoms())
def test_aggregate_is_order_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert aggregate(values) == aggregate(shuffled)


def test_repeat_and_aggregate():
    seeds = []

    def run(seed):
        seeds.append(seed)
        return {"acc": [0.8, 0.9, 1.0][len(seeds) - 1], "const": 0.5}

    out = repeat_and_aggregate(run, 3, fold_seed=12)
    assert seeds == [repeat_seed(12, r) for r in range(3)] == [12, 13, 14]
    assert math.isclose(out["acc"][0], 0.9) and out["const"] == (0.5, 0.0)
    folds = aggregate_folds([{"acc": (0.5, 0.1)}, {"acc": (0.7, 0.0)}])
    assert math.isclose(folds["acc"][0], 0.6) and math.isclose(folds["acc"][1], 0.1)


def test_results_ledger_appends(tmp_path):
    path = str(tmp_path / "ledger.csv")
    led = ResultsLedger(path, ["fold", "acc"])
    led.append({"fold": 0, "acc": 0.5})
    led.append({"fold": 1, "acc": 1 / 3})
    rows = ResultsLedger(path, ["fold", "acc"]).read()
    assert [r["fold"] for r in rows] == ["0", "1"]
    assert float(rows[1]["acc"]) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        led.append({"fold": 2, "bogus": 1})


def test_tensor_loss_accepts_tensors():
    loss = joint_loss(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))), [0], [1])
    assert math.isclose(float(loss.data), 2 * math.log(2))
