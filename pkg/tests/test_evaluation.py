import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gounsafe.calibration import PredictionSet
from gounsafe.errors import DataLeak, LengthMismatch
from gounsafe.evaluation import (
    LEDGER_FIELDS, ProtocolOptions, confusion_matrix, conformal_metrics, format_ablation,
    format_confusion, majority_metrics, metrics_from_scores, prepare_fold, run_ablation,
    run_protocol, topk_accuracy, topk_hits, topk_joint_accuracy,
)
from gounsafe.features import NONE
from gounsafe.synthetic import separable_corpus
from gounsafe.training import ResultsLedger, make_folds


def _onehot(idx, n):
    return np.eye(n)[idx]


def test_perfect_predictions():
    g = [0, 2, 1]
    assert topk_joint_accuracy(_onehot(g, 3), _onehot(g, 3), g, g, 1) == 1.0


def test_what_right_why_wrong_is_joint_miss():
    g = [0, 1, 2]
    assert topk_joint_accuracy(_onehot(g, 3), _onehot([1, 2, 0], 3), g, g, 1) == 0.0


def test_joint_hits_two_of_three():
    gw, gy = [0, 1, 2], [1, 1, 0]
    pw = _onehot([0, 1, 2], 3)
    py = _onehot([1, 0, 0], 3)
    assert topk_joint_accuracy(pw, py, gw, gy, 1) == pytest.approx(2 / 3)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        topk_joint_accuracy(np.zeros((2, 3)), np.zeros((3, 3)), [0, 0], [0, 0, 0])
    with pytest.raises(LengthMismatch):
        confusion_matrix([0], [0, 1], 2)


def test_topk_ties_break_by_index():
    s = np.array([[0.5, 0.5, 0.0]])
    assert topk_hits(s, [0], 1).tolist() == [True]
    assert topk_hits(s, [1], 1).tolist() == [False]
    assert topk_hits(s, [1], 2).tolist() == [True]


def test_conformal_metrics_hand_values():
    full = [PredictionSet([0, 1, 2], [0.4, 0.3, 0.3])] * 2
    m = conformal_metrics(full, full, [0, 2], [1, 0])
    assert (m.coverage_what, m.coverage_joint, m.mean_size_what) == (1.0, 1.0, 3.0)
    single = [PredictionSet([g], [1.0]) for g in (0, 1)]
    m = conformal_metrics(single, single, [0, 1], [0, 1])
    assert (m.coverage_joint, m.mean_size_why) == (1.0, 1.0)
    sized = [PredictionSet(list(range(k)), [1.0 / k] * k) for k in (1, 2, 2, 3)]
    assert conformal_metrics(sized, sized, [0] * 4, [0] * 4).mean_size_what == 2.0


def test_confusion_matrix_hand_values():
    m = confusion_matrix([0, 1, 1], [0, 0, 1], 2)
    assert m.tolist() == [[0.5, 0.5], [0.0, 1.0]]
    assert np.array_equal(confusion_matrix([0, 1, 2], [0, 1, 2], 3), np.eye(3))
    const = confusion_matrix([2, 2, 2, 2], [0, 1, 2, 0], 4)
    assert const[:3].tolist() == [[0, 0, 1, 0]] * 3 and const[3].sum() == 0
    assert "0.50" in format_confusion(m, ["a", "b"])


def _records(seed, n=12, c=4):
    rng = np.random.default_rng(seed)
    sw, sy = rng.random((n, c)), rng.random((n, c))
    gw, gy = rng.integers(0, c, n), rng.integers(0, c, n)

    def sets(s):
        out = []
        for row in s:
            k = int(rng.integers(1, c + 1))
            order = list(np.argsort(-row, kind="stable")[:k])
            out.append(PredictionSet([int(i) for i in order], [float(row[i]) for i in order]))
        return out

    return sw, sy, sets(sw), sets(sy), gw, gy


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_metric_invariants(seed):
    sw, sy, setw, sety, gw, gy = _records(seed)
    rec = metrics_from_scores(sw, sy, setw, sety, gw, gy)
    assert rec.top1_joint <= min(rec.top1_what, rec.top1_why)
    assert rec.top3_joint >= rec.top1_joint
    # every set starts with the top-1 class, so coverage dominates top-1 accuracy
    assert rec.conformal_acc_what >= rec.top1_what and rec.conformal_acc_why >= rec.top1_why
    assert all(0 <= v <= 1 for k, v in rec.metrics().items() if not k.startswith("mean_set"))
    assert rec.mean_set_size_what >= 1
    perm = np.random.default_rng(seed + 1).permutation(len(gw))
    again = metrics_from_scores(sw[perm], sy[perm], [setw[i] for i in perm], [sety[i] for i in perm],
                                gw[perm], gy[perm])
    assert again.metrics() == pytest.approx(rec.metrics())


def test_majority_on_single_class():
    rec = majority_metrics([3] * 8, [5] * 8, [3] * 2, [5] * 2, [3] * 4, [5] * 4)
    assert rec.top1_joint == 1.0 and rec.conformal_acc_joint == 1.0
    assert rec.mean_set_size_what == 1.0


def test_majority_predicts_training_modes():
    rec = majority_metrics([0, 0, 1], [2, 2, 2], [0, 1], [2, 2], [0, 1, 0, 0], [2, 2, 2, 1])
    assert rec.top1_what == 0.75 and rec.top1_joint == 0.5


@pytest.fixture(scope="module")
def tiny_corpus():
    return separable_corpus(15, seed=1)


def test_prepare_fold_refuses_test_ids_in_vocabulary(tiny_corpus):
    with pytest.raises(DataLeak):
        prepare_fold(tiny_corpus, [0, 1, 2], [3], [2, 4])


def test_prepare_fold_vocabulary_ignores_test_fold(tiny_corpus):
    labels = [f"{u.what}|{u.why}" for u in tiny_corpus]
    tr, va, te = make_folds(labels, 3, 0).split(0, labels)
    data = prepare_fold(tiny_corpus, tr, va, te)
    alone = prepare_fold(tiny_corpus, tr, va, [])
    assert data.vocab.hash == alone.vocab.hash
    assert {i.instance_id for i in data.test} == {tiny_corpus[i].id for i in te}


def test_protocol_writes_ledger_rows(tmp_path, tiny_corpus):
    ledger = ResultsLedger(str(tmp_path / "runs.csv"), LEDGER_FIELDS)
    opts = ProtocolOptions(folds=3, repeats=2, max_epochs=3, patience=None)
    outcomes = run_protocol(tiny_corpus, "gin", opts=opts, ledger=ledger)
    rows = ledger.read()
    assert len(outcomes) == 3 and len(rows) == 6
    assert [(r["fold"], r["repeat"]) for r in rows[:2]] == [("0", "0"), ("0", "1")]
    assert rows[1]["seed"] == str(int(rows[0]["seed"]) ^ 1)
    again = run_protocol(tiny_corpus, "gin", opts=opts)
    assert [o.summary for o in again] == [o.summary for o in outcomes]


def test_ablation_grid_shape(tiny_corpus):
    opts = ProtocolOptions(folds=3, repeats=1, max_epochs=2, patience=None)
    rows = run_ablation(tiny_corpus, opts=opts)
    assert len(rows) == 4 * 6 + 1
    assert rows[-1].variant == "majority"
    assert len({(r.variant, r.subset) for r in rows}) == 25
    text = format_ablation(rows)
    assert text.count("\n") == 25 and "ONLY_TYPES" in text


def test_subset_none_removes_type_signal(tiny_corpus):
    opts = ProtocolOptions(folds=3, repeats=1, max_epochs=150, patience=None)
    rows = run_ablation(tiny_corpus, variants=["mlp"], subsets=[NONE], opts=opts)
    assert rows[0].mean("top1_joint") < 0.6
