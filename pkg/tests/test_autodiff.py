import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradcases import model_case, primitive_cases, relu_margin
from gounsafe import autodiff as ad
from gounsafe.errors import NonScalarLoss, ShapeMismatch
from gounsafe.models import POOLINGS


def test_matmul_hand_value():
    assert ad.matmul([[1.0, 2.0]], [[3.0], [4.0]]).data.tolist() == [[11.0]]


def test_softmax_of_equal_logits_is_uniform():
    assert np.allclose(ad.softmax(np.zeros((2, 5))).data, 0.2)


def test_segment_sum_merges_rows():
    out = ad.segment_sum([[1.0, 2.0], [3.0, 4.0]], [0, 0], 1)
    assert out.data.tolist() == [[4.0, 6.0]]


def test_sum_of_squares_gradient():
    x = ad.Tensor([1.0, 2.0, 3.0], requires_grad=True)
    with ad.Tape() as tape:
        loss = ad.sum_(ad.mul(x, x))
    (g,) = ad.backward(loss, [x], tape)
    assert g.tolist() == [2.0, 4.0, 6.0]


def test_cross_entropy_gradient_at_uniform_logits():
    x = ad.Tensor(np.zeros((1, 4)), requires_grad=True)
    with ad.Tape() as tape:
        loss = ad.cross_entropy(x, [2])
    (g,) = ad.backward(loss, [x], tape)
    assert np.allclose(g, np.array([[0.25, 0.25, -0.75, 0.25]]))


def test_unreached_parameter_gets_zero_gradient():
    x = ad.Tensor([1.0], requires_grad=True)
    y = ad.Tensor([[5.0, 6.0]], requires_grad=True)
    with ad.Tape() as tape:
        loss = ad.sum_(ad.mul(x, 3.0))
    gx, gy = ad.backward(loss, [x, y], tape)
    assert gx.tolist() == [3.0] and gy.tolist() == [[0.0, 0.0]]


def test_non_scalar_loss_rejected():
    x = ad.Tensor([1.0, 2.0], requires_grad=True)
    with ad.Tape() as tape:
        y = ad.mul(x, 2.0)
    with pytest.raises(NonScalarLoss):
        ad.backward(y, [x], tape)


@pytest.mark.parametrize("op, a, b", [
    (ad.matmul, np.ones((2, 3)), np.ones((2, 3))),
    (ad.add, np.ones((2, 3)), np.ones((4, 3))),
    (ad.concat, np.ones((2, 3)), np.ones((3, 3))),
])
def test_shape_mismatch(op, a, b):
    with pytest.raises(ShapeMismatch):
        op([a, b]) if op is ad.concat else op(a, b)


def test_segment_ids_must_match_rows():
    with pytest.raises(ShapeMismatch):
        ad.segment_sum(np.ones((3, 2)), [0, 1], 2)


@pytest.mark.parametrize("name", sorted(primitive_cases()))
def test_primitive_gradients(name):
    build = primitive_cases()[name]
    worst = max(ad.gradient_check(*build(np.random.default_rng(s))) for s in range(10))
    assert worst < 1e-4


@pytest.mark.parametrize("variant", ["mlp", "deepsets", "gin", "wl2"])
@pytest.mark.parametrize("overrides", [
    {},
    {"batch_norm": True},
    {"pooling": "softmax", "conv_activation": "tanh"},
    {"pooling": "mean", "conv_activation": "elu", "mlp_activation": "sigmoid"},
], ids=["plain", "bn", "softmax-pool", "mean-pool"])
def test_model_gradients(variant, overrides):
    f, params = model_case(variant, 1, **overrides)
    assert ad.gradient_check(f, params) < 1e-4


@pytest.mark.parametrize("pooling", [p for p in POOLINGS if p not in ("max", "min")])
def test_gin_gradient_for_each_smooth_pooling(pooling):
    f, params = model_case("gin", 2, pooling=pooling)
    assert ad.gradient_check(f, params) < 1e-4


def test_relu_margin_reports_smallest_input():
    with relu_margin() as seen:
        ad.ops.activation(np.array([-0.5, 0.25, 2.0]), "relu")
    assert seen == [0.25]


def test_adam_first_step():
    w = ad.Tensor([0.0], requires_grad=True)
    opt = ad.Adam([w])
    opt.step([np.array([1.0])])
    assert 0.00099 <= -w.data[0] <= 0.001
    assert opt.state.step == 1


def test_adam_zero_gradient_leaves_params():
    w = ad.Tensor([0.3, -1.2], requires_grad=True)
    opt = ad.Adam([w])
    opt.step([np.zeros(2)])
    assert w.data.tolist() == [0.3, -1.2]


def _adam_oracle(grads, lr=0.001, b1=0.9, b2=0.999, eps=1e-8):
    w, m, v, out = 0.0, 0.0, 0.0, []
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        out.append(w)
    return out


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6))
def test_adam_matches_closed_form(grads):
    w = ad.Tensor([0.0], requires_grad=True)
    opt = ad.Adam([w])
    trace = []
    for g in grads:
        opt.step([np.array([g])])
        trace.append(w.data[0])
    assert np.allclose(trace, _adam_oracle(grads), rtol=1e-12, atol=1e-15)


def test_adam_constant_gradient_steps_do_not_grow():
    w = ad.Tensor([0.0], requires_grad=True)
    opt = ad.Adam([w])
    opt.step([np.array([1.0])])
    d1 = abs(w.data[0])
    opt.step([np.array([1.0])])
    d2 = abs(w.data[0]) - d1
    assert d2 <= d1 * 1.01


def test_adam_rejects_misshaped_gradient():
    w = ad.Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ShapeMismatch):
        ad.Adam([w]).step([np.zeros(2)])


def test_dropout_inverted_scaling_and_eval_identity():
    x = np.ones((200, 50))
    y = ad.dropout(x, 0.5, np.random.default_rng(0), training=True).data
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05
    assert np.array_equal(ad.dropout(x, 0.5, None, training=False).data, x)


def test_batch_norm_running_statistics():
    state = ad.BatchNormState(2)
    x = np.array([[1.0, 10.0], [3.0, 30.0]])
    ad.batch_norm(x, np.ones(2), np.zeros(2), state, training=True)
    assert np.allclose(state.mean, 0.1 * np.array([2.0, 20.0]))
    out = ad.batch_norm(x, np.ones(2), np.zeros(2), state, training=False).data
    assert np.allclose(out, (x - state.mean) / np.sqrt(state.var + 1e-5))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 3), elements=st.floats(-3, 3)))
def test_softmax_rows_sum_to_one_and_log_softmax_agrees(x):
    p = ad.softmax(x).data
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.allclose(np.exp(ad.log_softmax(x).data), p)


def test_training_loss_is_deterministic():
    f1, _ = model_case("gin", 4)
    f2, _ = model_case("gin", 4)
    assert f1().data.tobytes() == f2().data.tobytes()
