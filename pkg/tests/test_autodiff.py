"""Tests for the tensor/autodiff substrate, the Adam optimizer, the
finite-difference gradient checker, and checkpoint serialization.

Expected values here are frozen by hand (closed forms) or produced by the
finite-difference oracle; nothing is copied from the implementation.
"""

import json
import math

import numpy as np
import pytest

from algsteps.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from algsteps.gradcheck import finite_diff_check
from algsteps.optim import Adam
from algsteps.tensor import (
    NonFiniteValue,
    NonScalarLoss,
    ShapeMismatch,
    Tape,
    Tensor,
    add,
    concat,
    conv2d,
    embedding_lookup,
    hinge,
    matmul,
    maxpool1d,
    mul,
    narrow,
    reduce_mean,
    reduce_sum,
    relu,
    set_debug,
    sigmoid,
    softmax_cross_entropy,
    squared_l2_distance,
    stack,
    sub,
    tanh,
    transpose,
)


def _grad(t):
    assert t.grad is not None, "expected a gradient"
    return t.grad


# ---------------------------------------------------------------- tensor basics


def test_tensor_basics():
    t = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert t.shape == (2, 2)
    assert t.data.dtype == np.float64
    assert not t.requires_grad
    s = Tensor(3.5)
    assert s.item() == 3.5


def test_tensor_requires_grad_flag():
    p = Tensor([1.0, 2.0], requires_grad=True)
    assert p.requires_grad
    assert p.grad is None


def test_debug_mode_rejects_nonfinite():
    big = Tensor([1e308])
    set_debug(True)
    try:
        with np.errstate(over="ignore"), pytest.raises(NonFiniteValue):
            add(big, big)
    finally:
        set_debug(False)
    # with debug off the same op just produces inf
    with np.errstate(over="ignore"):
        out = add(big, big)
    assert np.isinf(out.data[0])


# ---------------------------------------------------------------- forward ops


def test_relu_and_hinge_forward():
    x = Tensor([-2.0, 0.0, 3.0])
    assert relu(x).data.tolist() == [0.0, 0.0, 3.0]
    assert hinge(x).data.tolist() == [0.0, 0.0, 3.0]


def test_sigmoid_tanh_forward():
    x = Tensor([0.0, 2.0])
    s = sigmoid(x)
    assert s.data[0] == pytest.approx(0.5, abs=1e-15)
    assert s.data[1] == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), abs=1e-15)
    t = tanh(Tensor([0.0, 1.0]))
    assert t.data[0] == 0.0
    assert t.data[1] == pytest.approx(math.tanh(1.0), abs=1e-15)


def test_squared_l2_distance_forward():
    a = Tensor([1.0, 0.0])
    b = Tensor([0.0, 1.0])
    assert squared_l2_distance(a, b).item() == pytest.approx(2.0, abs=1e-15)
    assert squared_l2_distance(a, a).item() == 0.0


def test_softmax_cross_entropy_uniform_is_log_k():
    logits = Tensor(np.zeros(7))
    for label in range(7):
        loss = softmax_cross_entropy(logits, label)
        assert loss.item() == pytest.approx(math.log(7.0), abs=1e-12)
    batch = Tensor(np.zeros((3, 7)))
    loss = softmax_cross_entropy(batch, [0, 3, 6])
    assert loss.item() == pytest.approx(math.log(7.0), abs=1e-12)


def test_softmax_cross_entropy_confident_and_mean():
    confident = softmax_cross_entropy(Tensor([30.0, 0.0, 0.0]), 0)
    assert confident.item() < 1e-12
    # batch loss is the mean of the per-row losses
    row_a = softmax_cross_entropy(Tensor([2.0, 0.0, 1.0]), 0).item()
    row_b = softmax_cross_entropy(Tensor([0.0, 0.0, 5.0]), 1).item()
    both = softmax_cross_entropy(
        Tensor([[2.0, 0.0, 1.0], [0.0, 0.0, 5.0]]), [0, 1]
    ).item()
    assert both == pytest.approx((row_a + row_b) / 2.0, abs=1e-12)


def test_matmul_forward_frozen():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    b = Tensor([[5.0], [6.0]])
    out = matmul(a, b)
    assert out.data.tolist() == [[17.0], [39.0]]


def test_matmul_shape_mismatch_mentions_both_shapes():
    a = Tensor(np.zeros((2, 3)))
    b = Tensor(np.zeros((4, 2)))
    with pytest.raises(ShapeMismatch) as ei:
        matmul(a, b)
    msg = str(ei.value)
    assert "(2, 3)" in msg and "(4, 2)" in msg


def test_add_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_concat_forward():
    out = concat([Tensor([1.0, 2.0]), Tensor([3.0])])
    assert out.data.tolist() == [1.0, 2.0, 3.0]
    out2 = concat([Tensor(np.ones((2, 2))), Tensor(np.zeros((2, 1)))], axis=-1)
    assert out2.shape == (2, 3)


def test_conv2d_and_maxpool_frozen():
    # T=3 positions, M=2 channels, one full-width filter of width 2
    x = Tensor([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    k = Tensor([[[1.0, 1.0], [1.0, 1.0]]])
    out = conv2d(x, k)
    assert out.shape == (2, 1)
    assert out.data.tolist() == [[2.0], [3.0]]
    pooled = maxpool1d(out)
    assert pooled.data.tolist() == [3.0]


def test_conv2d_window_too_long():
    x = Tensor(np.zeros((2, 3)))
    k = Tensor(np.zeros((1, 4, 3)))
    with pytest.raises(ShapeMismatch):
        conv2d(x, k)


# ---------------------------------------------------------------- backward


def test_backward_square():
    x = Tensor(3.0, requires_grad=True)
    with Tape() as tape:
        y = mul(x, x)
    tape.backward(y)
    assert _grad(x).tolist() == pytest.approx(6.0)


def test_backward_sum_of_two_params():
    x = Tensor(2.0, requires_grad=True)
    y = Tensor(5.0, requires_grad=True)
    with Tape() as tape:
        z = add(x, y)
    tape.backward(z)
    assert float(_grad(x)) == 1.0
    assert float(_grad(y)) == 1.0


def test_fanout_gradients_accumulate():
    # z = x*x + x has dz/dx = 2x + 1 = 5 at x = 2
    x = Tensor(2.0, requires_grad=True)
    with Tape() as tape:
        z = add(mul(x, x), x)
    tape.backward(z)
    assert float(_grad(x)) == pytest.approx(5.0, abs=1e-12)


def test_off_path_parameter_gets_zero_grad():
    x = Tensor([1.0, 2.0], requires_grad=True)
    unused = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        loss = reduce_sum(mul(x, x))
    tape.backward(loss, params=[x, unused])
    assert _grad(unused).shape == (2, 2)
    assert np.all(_grad(unused) == 0.0)
    assert _grad(x).tolist() == [2.0, 4.0]


def test_non_scalar_loss_raises():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        y = mul(x, x)
    with pytest.raises(NonScalarLoss):
        tape.backward(y)


def test_bias_broadcast_backward():
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    with Tape() as tape:
        loss = reduce_sum(add(x, b))
    tape.backward(loss)
    assert _grad(b).tolist() == [2.0, 2.0, 2.0]
    assert np.all(_grad(x) == 1.0)


def test_concat_backward_splits():
    a = Tensor([1.0, 2.0], requires_grad=True)
    b = Tensor([3.0], requires_grad=True)
    w = Tensor([1.0, 10.0, 100.0])
    with Tape() as tape:
        loss = reduce_sum(mul(concat([a, b]), w))
    tape.backward(loss)
    assert _grad(a).tolist() == [1.0, 10.0]
    assert _grad(b).tolist() == [100.0]


def test_stack_backward_routes():
    a = Tensor([1.0, 2.0], requires_grad=True)
    b = Tensor([3.0, 4.0], requires_grad=True)
    w = Tensor([[1.0, 2.0], [3.0, 4.0]])
    with Tape() as tape:
        loss = reduce_sum(mul(stack([a, b]), w))
    tape.backward(loss)
    assert _grad(a).tolist() == [1.0, 2.0]
    assert _grad(b).tolist() == [3.0, 4.0]


def test_embedding_lookup_forward_and_duplicate_grads():
    table = Tensor([[1.0, 0.0], [0.0, 2.0], [3.0, 1.0]], requires_grad=True)
    with Tape() as tape:
        picked = embedding_lookup(table, [1, 1, 0])
        loss = reduce_sum(picked)
    assert picked.data.tolist() == [[0.0, 2.0], [0.0, 2.0], [1.0, 0.0]]
    tape.backward(loss)
    assert _grad(table).tolist() == [[1.0, 1.0], [2.0, 2.0], [0.0, 0.0]]


def test_conv_maxpool_backward_routing():
    x = Tensor([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], requires_grad=True)
    k = Tensor([[[1.0, 1.0], [1.0, 1.0]]])
    with Tape() as tape:
        loss = reduce_sum(maxpool1d(conv2d(x, k)))
    tape.backward(loss)
    # pooled max sits at the second window (rows 1..2)
    assert _grad(x).tolist() == [[0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]


def test_maxpool_tie_takes_first_index():
    x = Tensor([[2.0], [2.0]], requires_grad=True)
    with Tape() as tape:
        loss = reduce_sum(maxpool1d(x))
    tape.backward(loss)
    assert _grad(x).tolist() == [[1.0], [0.0]]


def test_reduce_mean_backward():
    x = Tensor([1.0, 2.0, 3.0, 4.0], requires_grad=True)
    with Tape() as tape:
        loss = reduce_mean(x)
    tape.backward(loss)
    assert _grad(x).tolist() == [0.25, 0.25, 0.25, 0.25]


def test_reduce_sum_axis():
    x = Tensor([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], requires_grad=True)
    assert reduce_sum(x, axis=1).data.tolist() == [6.0, 15.0]
    assert reduce_sum(x, axis=0).data.tolist() == [5.0, 7.0, 9.0]
    w = Tensor([1.0, 10.0])
    with Tape() as tape:
        loss = reduce_sum(mul(reduce_sum(x, axis=1), w))
    tape.backward(loss)
    assert _grad(x).tolist() == [[1.0, 1.0, 1.0], [10.0, 10.0, 10.0]]


def test_narrow_forward_and_backward():
    x = Tensor([[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]], requires_grad=True)
    assert narrow(x, 1, 1, 2).data.tolist() == [[2.0, 3.0], [6.0, 7.0]]
    assert narrow(x, 0, 1, 1).data.tolist() == [[5.0, 6.0, 7.0, 8.0]]
    with Tape() as tape:
        loss = reduce_sum(narrow(x, 1, 2, 2))
    tape.backward(loss)
    assert _grad(x).tolist() == [[0.0, 0.0, 1.0, 1.0], [0.0, 0.0, 1.0, 1.0]]


def test_transpose_forward_backward():
    x = Tensor([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]], requires_grad=True)
    assert transpose(x).data.tolist() == [[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]]
    w = Tensor([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    with Tape() as tape:
        loss = reduce_sum(mul(transpose(x), w))
    tape.backward(loss)
    assert _grad(x).tolist() == [[1.0, 0.0, 2.0], [0.0, 1.0, 2.0]]


def test_narrow_out_of_range():
    x = Tensor(np.zeros((2, 3)))
    with pytest.raises(ShapeMismatch):
        narrow(x, 1, 2, 2)


def test_scalar_operands_are_accepted():
    x = Tensor([2.0, 4.0], requires_grad=True)
    with Tape() as tape:
        loss = reduce_sum(add(mul(x, 0.5), 1.0))
    assert loss.item() == pytest.approx(5.0)
    tape.backward(loss)
    assert _grad(x).tolist() == [0.5, 0.5]


def test_sigmoid_tanh_backward_frozen():
    x = Tensor(0.0, requires_grad=True)
    with Tape() as tape:
        y = sigmoid(x)
    tape.backward(y)
    assert float(_grad(x)) == pytest.approx(0.25, abs=1e-12)
    x2 = Tensor(0.0, requires_grad=True)
    with Tape() as tape:
        y2 = tanh(x2)
    tape.backward(y2)
    assert float(_grad(x2)) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------- gradcheck


def test_finite_diff_linear_is_exact():
    for h in (1e-5, 1e-3):
        x = Tensor([1.0, -2.0, 0.5], requires_grad=True)
        w = Tensor([3.0, 3.0, 3.0])

        def f():
            return reduce_sum(mul(x, w))

        rep = finite_diff_check(f, [x], h=h, tol=1e-4)
        assert rep.passed
        assert rep.max_rel_error < 1e-9


def test_finite_diff_relu_at_zero_is_skipped():
    x = Tensor([0.0, 1.0], requires_grad=True)

    def f():
        return reduce_sum(relu(x))

    rep = finite_diff_check(f, [x], h=1e-5, tol=1e-4)
    assert rep.passed
    assert rep.skipped == [(0, 0)]


def test_finite_diff_two_layer_network_passes():
    rng = np.random.default_rng(7)
    x = Tensor(rng.normal(size=(2, 3)))
    w1 = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b1 = Tensor(rng.normal(size=4), requires_grad=True)
    w2 = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    b2 = Tensor(rng.normal(size=2), requires_grad=True)

    def f():
        h = relu(add(matmul(x, w1), b1))
        return softmax_cross_entropy(add(matmul(h, w2), b2), [0, 1])

    rep = finite_diff_check(f, [w1, b1, w2, b2], h=1e-5, tol=1e-4)
    assert rep.passed
    assert rep.skipped == []


def test_finite_diff_catches_hidden_dependency():
    # f numerically depends on x through a term the tape never sees,
    # so the analytic gradient must disagree with the numeric one.
    x = Tensor([1.0, 2.0], requires_grad=True)

    def f():
        visible = reduce_sum(x)
        return add(visible, float(x.data[0]) * 2.0)

    rep = finite_diff_check(f, [x], h=1e-5, tol=1e-4)
    assert not rep.passed
    assert rep.failures


def _gradcheck_cases():
    """One builder per differentiable op; builder(rng) -> (params, f)."""

    def c_matmul(rng):
        a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 2)))
        return [a, b], lambda: reduce_sum(mul(matmul(a, b), w))

    def c_add(rng):
        x = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=3), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 3)))
        return [x, b], lambda: reduce_sum(mul(add(x, b), w))

    def c_sub(rng):
        x = Tensor(rng.normal(size=4), requires_grad=True)
        y = Tensor(rng.normal(size=4), requires_grad=True)
        w = Tensor(rng.normal(size=4))
        return [x, y], lambda: reduce_sum(mul(sub(x, y), w))

    def c_mul(rng):
        x = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
        y = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
        return [x, y], lambda: reduce_sum(mul(x, y))

    def c_concat(rng):
        a = Tensor(rng.normal(size=2), requires_grad=True)
        b = Tensor(rng.normal(size=3), requires_grad=True)
        w = Tensor(rng.normal(size=5))
        return [a, b], lambda: reduce_sum(mul(concat([a, b]), w))

    def c_stack(rng):
        a = Tensor(rng.normal(size=3), requires_grad=True)
        b = Tensor(rng.normal(size=3), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 3)))
        return [a, b], lambda: reduce_sum(mul(stack([a, b]), w))

    def c_relu(rng):
        # keep points away from the kink at 0
        raw = rng.uniform(0.2, 1.0, size=5) * rng.choice([-1.0, 1.0], size=5)
        x = Tensor(raw, requires_grad=True)
        w = Tensor(rng.normal(size=5))
        return [x], lambda: reduce_sum(mul(relu(x), w))

    def c_hinge(rng):
        raw = rng.uniform(0.2, 1.0, size=5) * rng.choice([-1.0, 1.0], size=5)
        x = Tensor(raw, requires_grad=True)
        w = Tensor(rng.normal(size=5))
        return [x], lambda: reduce_sum(mul(hinge(x), w))

    def c_tanh(rng):
        x = Tensor(rng.normal(size=4), requires_grad=True)
        w = Tensor(rng.normal(size=4))
        return [x], lambda: reduce_sum(mul(tanh(x), w))

    def c_sigmoid(rng):
        x = Tensor(rng.normal(size=4), requires_grad=True)
        w = Tensor(rng.normal(size=4))
        return [x], lambda: reduce_sum(mul(sigmoid(x), w))

    def c_embedding(rng):
        table = Tensor(rng.normal(size=(5, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(4, 3)))
        idx = [0, 2, 2, 4]
        return [table], lambda: reduce_sum(mul(embedding_lookup(table, idx), w))

    def c_conv2d(rng):
        x = Tensor(rng.normal(size=(5, 2)), requires_grad=True)
        k = Tensor(rng.normal(size=(2, 3, 2)), requires_grad=True)
        b = Tensor(rng.normal(size=2), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2)))
        return [x, k, b], lambda: reduce_sum(mul(conv2d(x, k, b), w))

    def c_maxpool(rng):
        # distinct values so the argmax is stable under the probe step
        raw = rng.normal(size=(5, 2)) + np.arange(10).reshape(5, 2) * 0.05
        x = Tensor(raw, requires_grad=True)
        w = Tensor(rng.normal(size=2))
        return [x], lambda: reduce_sum(mul(maxpool1d(x), w))

    def c_sql2(rng):
        a = Tensor(rng.normal(size=4), requires_grad=True)
        b = Tensor(rng.normal(size=4), requires_grad=True)
        return [a, b], lambda: squared_l2_distance(a, b)

    def c_ce(rng):
        logits = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        return [logits], lambda: softmax_cross_entropy(logits, [0, 3, 2])

    def c_reduce_sum_axis(rng):
        x = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=2))
        return [x], lambda: reduce_sum(mul(reduce_sum(x, axis=1), w))

    def c_reduce_mean(rng):
        x = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        return [x], lambda: reduce_mean(mul(x, x))

    def c_narrow(rng):
        x = Tensor(rng.normal(size=(2, 6)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 3)))
        return [x], lambda: reduce_sum(mul(narrow(x, 1, 2, 3), w))

    def c_transpose(rng):
        x = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2)))
        return [x], lambda: reduce_sum(mul(transpose(x), w))

    return [
        ("matmul", c_matmul),
        ("add", c_add),
        ("sub", c_sub),
        ("mul", c_mul),
        ("concat", c_concat),
        ("stack", c_stack),
        ("relu", c_relu),
        ("hinge", c_hinge),
        ("tanh", c_tanh),
        ("sigmoid", c_sigmoid),
        ("embedding_lookup", c_embedding),
        ("conv2d", c_conv2d),
        ("maxpool1d", c_maxpool),
        ("squared_l2_distance", c_sql2),
        ("softmax_cross_entropy", c_ce),
        ("reduce_sum_axis", c_reduce_sum_axis),
        ("reduce_mean", c_reduce_mean),
        ("narrow", c_narrow),
        ("transpose", c_transpose),
    ]


@pytest.mark.parametrize("name,builder", _gradcheck_cases(), ids=lambda v: v if isinstance(v, str) else "")
def test_op_gradients_at_ten_seeded_points(name, builder):
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        params, f = builder(rng)
        rep = finite_diff_check(f, params, h=1e-5, tol=1e-4)
        assert rep.passed, f"{name} seed {seed}: max rel err {rep.max_rel_error}"


# ---------------------------------------------------------------- optimizer


def test_adam_first_step_delta():
    w = Tensor([0.7, -1.2], requires_grad=True)
    opt = Adam([w])
    w.grad = np.ones(2)
    opt.step()
    # first-step delta is -lr * 1/(1 + eps), i.e. -0.001 to within 1e-9
    assert abs(w.data[0] - (0.7 - 0.001)) < 1e-9
    assert abs(w.data[1] - (-1.2 - 0.001)) < 1e-9


def test_adam_zero_grad_leaves_params_unchanged():
    w = Tensor([0.3, 0.4], requires_grad=True)
    opt = Adam([w])
    w.grad = np.zeros(2)
    opt.step()
    assert w.data.tolist() == [0.3, 0.4]
    w.grad = None
    opt.step()
    assert w.data.tolist() == [0.3, 0.4]


def test_adam_converges_on_quadratic():
    # Adam's step size is bounded by roughly lr per step, so the documented
    # 200-step run uses lr=0.1 to cover the distance from 0 to 5.
    w = Tensor(0.0, requires_grad=True)
    opt = Adam([w], lr=0.1)
    for _ in range(200):
        opt.zero_grad()
        with Tape() as tape:
            d = sub(w, 5.0)
            loss = mul(d, d)
        tape.backward(loss)
        opt.step()
    assert abs(w.data - 5.0) < 0.5


def test_training_is_deterministic():
    def run():
        rng = np.random.default_rng(42)
        w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
        x = Tensor(rng.normal(size=(4, 3)))
        opt = Adam([w], lr=0.01)
        for _ in range(5):
            opt.zero_grad()
            with Tape() as tape:
                loss = softmax_cross_entropy(matmul(x, w), [0, 1, 0, 1])
            tape.backward(loss)
            opt.step()
        return w.data.copy()

    first, second = run(), run()
    assert np.array_equal(first, second)


# ---------------------------------------------------------------- checkpoints


def test_checkpoint_roundtrip(tmp_path):
    path = tmp_path / "model.ckpt.json"
    params = {
        "w": Tensor([[1.5, -2.0], [0.25, 3.0]], requires_grad=True),
        "b": Tensor([0.0, 1e-7], requires_grad=True),
    }
    save_checkpoint(path, params, meta={"note": "round-trip"})
    loaded, meta = load_checkpoint(path)
    assert meta["note"] == "round-trip"
    assert set(loaded) == {"w", "b"}
    assert np.array_equal(loaded["w"], params["w"].data)
    assert np.array_equal(loaded["b"], params["b"].data)
    assert loaded["w"].shape == (2, 2)


def test_checkpoint_is_versioned_json(tmp_path):
    path = tmp_path / "m.json"
    save_checkpoint(path, {"w": Tensor([1.0])})
    blob = json.loads(path.read_text())
    assert blob["version"] == 1
    assert blob["params"]["w"]["shape"] == [1]


def test_checkpoint_rejects_unknown_version(tmp_path):
    path = tmp_path / "m.json"
    save_checkpoint(path, {"w": Tensor([1.0])})
    blob = json.loads(path.read_text())
    blob["version"] = 99
    path.write_text(json.dumps(blob))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_rejects_corrupt_data(tmp_path):
    path = tmp_path / "m.json"
    save_checkpoint(path, {"w": Tensor([[1.0, 2.0]])})
    blob = json.loads(path.read_text())
    blob["params"]["w"]["data"] = [1.0, 2.0, 3.0]
    path.write_text(json.dumps(blob))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
