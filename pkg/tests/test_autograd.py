import numpy as np
import pytest

from oracles import fd_check, naive_conv
from triad.autograd import (Adam, ShapeError, Tensor, UsageError, adam_step, conv1d_same,
                            l2_normalize, parameter, stack)


def test_linear_gradient():
    x = np.array([1.0, -2.0, 3.5])
    w = parameter(np.zeros(3))
    (w * x).sum().backward()
    np.testing.assert_array_equal(w.grad, x)


def test_disconnected_parameter_zero_gradient():
    a, b = parameter([1.0, 2.0]), parameter([3.0])
    loss = (a * a).sum()
    loss.backward()
    assert b.grad is None or np.all(b.grad == 0)


def test_backward_needs_scalar():
    a = parameter(np.ones(3))
    with pytest.raises(UsageError):
        (a * 2).backward()


def test_broadcast_gradients():
    a = parameter(np.ones((4, 3)))
    b = parameter(np.array([1.0, 2.0, 3.0]))
    ((a * b).sum()).backward()
    np.testing.assert_array_equal(b.grad, [4, 4, 4])
    np.testing.assert_array_equal(a.grad, np.tile([1, 2, 3], (4, 1)))


OPS = ["exp", "log", "sqrt", "gelu", "pow", "div", "matmul", "normalize", "stack", "index",
       "swap"]


@pytest.mark.parametrize("op", OPS)
def test_elementary_ops_against_finite_differences(op):
    rng = np.random.default_rng(OPS.index(op))
    a = parameter(rng.uniform(0.5, 1.5, size=(3, 4)))
    c = parameter(rng.normal(size=(4, 2)))

    def f():
        if op == "exp":
            y = a.exp()
        elif op == "log":
            y = a.log()
        elif op == "sqrt":
            y = a.sqrt()
        elif op == "gelu":
            y = (a - 1.0).gelu()
        elif op == "pow":
            y = a ** 3
        elif op == "div":
            y = 1.0 / a + a / (a + 2.0)
        elif op == "matmul":
            y = a @ c
        elif op == "normalize":
            y = l2_normalize(a)
        elif op == "stack":
            y = stack([a, a * 2.0], axis=1)
        elif op == "index":
            y = a[1:, ::2]
        else:
            y = a.swapaxes(0, 1).reshape(2, 6)
        return (y * y).sum() + y.mean()

    assert fd_check(f, [a, c], rng) < 1e-5


def test_conv_identity_kernel():
    x = np.random.default_rng(0).normal(size=(20, 3))
    w = np.zeros((3, 3, 3))
    for c in range(3):
        w[c, c, 1] = 1.0
    for d in (1, 2, 4):
        np.testing.assert_array_equal(conv1d_same(x, w, dilation=d).data, x)


def test_conv_dilated_hand_example():
    x = np.array([0, 0, 1, 0, 0], float)[:, None]
    w = np.ones((1, 1, 3))
    np.testing.assert_array_equal(conv1d_same(x, w, dilation=2).data[:, 0], [1, 0, 1, 0, 1])


def test_conv_matches_naive_random():
    rng = np.random.default_rng(1)
    for _ in range(200):
        L = int(rng.integers(4, 24))
        k = int(rng.choice([1, 3, 5]))
        dmax = max(1, (L - 1) // max(1, k - 1)) if k > 1 else 4
        d = int(rng.integers(1, min(dmax, 8) + 1))
        if 2 * d * (k // 2) + 1 >= 2 * L:
            continue
        c_in, c_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        x = rng.normal(size=(L, c_in))
        w = rng.normal(size=(c_out, c_in, k))
        b = rng.normal(size=c_out)
        got = conv1d_same(x, w, b, d).data
        np.testing.assert_allclose(got, naive_conv(x, w, b, d), atol=1e-9)


def test_conv_gradients():
    rng = np.random.default_rng(2)
    x = parameter(rng.normal(size=(2, 10, 3)))
    w = parameter(rng.normal(size=(4, 3, 3)))
    b = parameter(rng.normal(size=4))

    def f():
        y = conv1d_same(x, w, b, dilation=2)
        return (y * y).sum()

    assert fd_check(f, [x, w, b], rng) < 1e-6


def test_conv_shape_errors():
    with pytest.raises(ShapeError):
        conv1d_same(np.ones((5, 2)), np.ones((1, 3, 3)))
    with pytest.raises(ShapeError):
        conv1d_same(np.ones((5, 1)), np.ones((1, 1, 2)))
    with pytest.raises(ShapeError):
        conv1d_same(np.ones((4, 1)), np.ones((1, 1, 3)), dilation=8)


def test_matmul_requires_matrices():
    with pytest.raises(ShapeError):
        Tensor(np.ones(3)) @ Tensor(np.ones((3, 2)))


def test_adam_zero_gradient_no_move():
    p = [np.array([1.0, -2.0])]
    new, _ = adam_step(p, [np.zeros(2)], {}, lr=0.1)
    np.testing.assert_array_equal(new[0], p[0])


def test_adam_first_step_magnitude():
    p = [np.zeros(3)]
    new, state = adam_step(p, [np.array([0.3, -5.0, 1e-3])], {}, lr=1e-2)
    # bias-corrected first step is lr * g/|g| up to eps
    np.testing.assert_allclose(new[0], -1e-2 * np.array([1, -1, 1]), rtol=1e-4)
    assert state["t"] == 1


def test_adam_quadratic_bowl():
    target = np.array([3.0, -1.0, 0.5])
    w = parameter(np.zeros(3))
    opt = Adam([w], lr=0.05)
    losses = []
    for _ in range(200):
        opt.zero_grad()
        loss = ((w - target) * (w - target)).sum()
        loss.backward()
        opt.step()
        losses.append(float(loss.data))
    warm = losses[10:120]
    assert all(b <= a + 1e-12 for a, b in zip(warm, warm[1:]))
    assert losses[-1] < 1e-2 * losses[0]
