"""Backward-pass contracts: analytic cases, linearity, finite-difference oracle."""

import numpy as np
import pytest

import dockscore.numeric as dn
from dockscore.errors import NonFiniteError, TapeError
from dockscore.numeric import Adam, SeededRng, Tensor, finite_diff_check


def test_grad_of_sum_is_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    dn.backward(dn.reduce_sum(x))
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_grad_of_sum_of_squares():
    x = Tensor([2.0, -3.0], requires_grad=True)
    dn.backward(dn.reduce_sum(dn.mul(x, x)))
    np.testing.assert_allclose(x.grad, [4.0, -6.0])


def test_grad_accumulates_across_uses():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = dn.add(dn.mul(x, x), x)  # x appears in two paths
    dn.backward(dn.reduce_sum(y))
    np.testing.assert_allclose(x.grad, [3.0, 5.0])  # 2x + 1


def test_backward_requires_scalar_and_fresh_tape():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = dn.mul(x, x)
    with pytest.raises(TapeError):
        dn.backward(y)
    s = dn.reduce_sum(y)
    dn.backward(s)
    with pytest.raises(TapeError):
        dn.backward(s)


def test_backward_linearity():
    rng = SeededRng(21)
    base = rng.normal(size=(5,))

    def run(a, b):
        x = Tensor(base, requires_grad=True)
        f = dn.reduce_sum(dn.mul(x, x))
        g = dn.reduce_sum(dn.exp(dn.scalar_mul(x, 0.3)))
        dn.backward(dn.add(dn.scalar_mul(f, a), dn.scalar_mul(g, b)))
        return x.grad.copy()

    ga = run(1.0, 0.0)
    gb = run(0.0, 1.0)
    combined = run(2.0, -3.0)
    np.testing.assert_allclose(combined, 2.0 * ga - 3.0 * gb, rtol=1e-12)


def test_three_layer_mlp_matches_finite_differences():
    rng = SeededRng(42)
    sizes = [(6, 8), (8, 8), (8, 1)]
    weights = [rng.child("w", i).normal(size=s) * 0.5 for i, s in enumerate(sizes)]

    def f(x):
        h = x
        for i, w in enumerate(weights):
            h = dn.matmul(h, Tensor(w))
            if i < 2:
                h = dn.tanh(h)
        return dn.reduce_sum(h)

    x0 = Tensor(rng.child("x").normal(size=(4, 6)))
    res = finite_diff_check(f, x0, h=1e-5)
    assert res.max_rel_error < 1e-4


def test_finite_diff_sum_of_squares_tight():
    res = finite_diff_check(
        lambda x: dn.reduce_sum(dn.mul(x, x)), Tensor([1.0, 2.0, 3.0]), h=1e-5)
    assert res.max_rel_error < 1e-7


def test_finite_diff_softmax_dot():
    rng = SeededRng(17)
    v = rng.normal(size=(1, 7))

    def f(x):
        return dn.reduce_sum(dn.mul(dn.softmax(x, axis=-1), Tensor(v)))

    res = finite_diff_check(f, Tensor(rng.normal(size=(1, 7))), h=1e-5)
    assert res.max_rel_error < 1e-4


def test_finite_diff_skips_relu_kink_at_zero():
    x = Tensor([0.0, 1.0, -2.0])
    res = finite_diff_check(lambda t: dn.reduce_sum(dn.relu(t)), x, h=1e-5)
    assert res.skipped == [0]
    assert res.checked == 2
    assert res.max_rel_error < 1e-7


OP_CASES = {
    "matmul": lambda x: dn.reduce_sum(dn.matmul(x, Tensor(_R.child("m").normal(size=(5, 3))))),
    "add": lambda x: dn.reduce_sum(dn.add(x, Tensor(_R.child("a").normal(size=(4, 5))))),
    "add-broadcast": lambda x: dn.reduce_sum(dn.add(x, Tensor(_R.child("ab").normal(size=(5,))))),
    "sub": lambda x: dn.reduce_sum(dn.sub(Tensor(_R.child("s").normal(size=(4, 5))), x)),
    "mul": lambda x: dn.reduce_sum(dn.mul(x, Tensor(_R.child("mu").normal(size=(4, 5))))),
    "scalar-mul": lambda x: dn.reduce_sum(dn.scalar_mul(x, -1.7)),
    "concat": lambda x: dn.reduce_sum(dn.mul(
        dn.concat([x, x], axis=1), Tensor(_R.child("c").normal(size=(4, 10))))),
    "slice": lambda x: dn.reduce_sum(dn.mul(
        dn.slice_axis(x, 1, 1, 4), Tensor(_R.child("sl").normal(size=(4, 3))))),
    "transpose": lambda x: dn.reduce_sum(dn.mul(
        dn.transpose(x), Tensor(_R.child("t").normal(size=(5, 4))))),
    "exp": lambda x: dn.reduce_sum(dn.exp(x)),
    "log": lambda x: dn.reduce_sum(dn.log(dn.add(dn.mul(x, x), Tensor(np.full((4, 5), 0.5))))),
    "sqrt": lambda x: dn.reduce_sum(dn.sqrt(dn.add(dn.mul(x, x), Tensor(np.full((4, 5), 0.5))))),
    "relu": lambda x: dn.reduce_sum(dn.relu(x)),
    "elu": lambda x: dn.reduce_sum(dn.elu(x)),
    "tanh": lambda x: dn.reduce_sum(dn.tanh(x)),
    "sigmoid": lambda x: dn.reduce_sum(dn.sigmoid(x)),
    "signed-root": lambda x: dn.reduce_sum(dn.signed_root(x, 4)),
    "softmax": lambda x: dn.reduce_sum(dn.mul(
        dn.softmax(x, axis=-1), Tensor(_R.child("sm").normal(size=(4, 5))))),
    "softmax-masked": lambda x: dn.reduce_sum(dn.mul(
        dn.softmax(x, axis=-1, mask=_MASK), Tensor(_R.child("smm").normal(size=(4, 5))))),
    "layer-norm": lambda x: dn.reduce_sum(dn.mul(
        dn.layer_norm(x, axis=-1), Tensor(_R.child("ln").normal(size=(4, 5))))),
    "reduce-sum": lambda x: dn.reduce_sum(dn.mul(
        dn.reduce_sum(x, axis=0), Tensor(_R.child("rs").normal(size=(5,))))),
    "reduce-mean": lambda x: dn.reduce_sum(dn.mul(
        dn.reduce_mean(x, axis=1), Tensor(_R.child("rm").normal(size=(4,))))),
    "reduce-max": lambda x: dn.reduce_sum(dn.mul(
        dn.reduce_max(x, axis=1), Tensor(_R.child("rx").normal(size=(4,))))),
    "reduce-min": lambda x: dn.reduce_min(x),
    "segment-sum": lambda x: dn.reduce_sum(dn.mul(
        dn.segment_reduce(x, _SEG, 3, "sum"), Tensor(_R.child("gs").normal(size=(3, 5))))),
    "segment-mean": lambda x: dn.reduce_sum(dn.mul(
        dn.segment_reduce(x, _SEG, 3, "mean"), Tensor(_R.child("gm").normal(size=(3, 5))))),
    "segment-max": lambda x: dn.reduce_sum(dn.mul(
        dn.segment_reduce(x, _SEG, 3, "max"), Tensor(_R.child("gx").normal(size=(3, 5))))),
    "segment-min": lambda x: dn.reduce_sum(dn.mul(
        dn.segment_reduce(x, _SEG, 3, "min"), Tensor(_R.child("gn").normal(size=(3, 5))))),
    "segment-prod": lambda x: dn.reduce_sum(dn.mul(
        dn.segment_reduce(x, _SEG, 3, "prod"), Tensor(_R.child("gp").normal(size=(3, 5))))),
    "gather-rows": lambda x: dn.reduce_sum(dn.mul(
        dn.gather_rows(x, _IDX), Tensor(_R.child("gr").normal(size=(6, 5))))),
    "dropout": lambda x: dn.reduce_sum(dn.dropout(x, 0.4, True, SeededRng(77))),
}

_R = SeededRng(1234)
_SEG = np.array([0, 0, 1, 2])
_IDX = np.array([0, 3, 3, 1, 2, 0])
_MASK = np.array([[True] * 5, [True, False, True, False, True],
                  [False, True, True, True, False], [True] * 5])


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_every_op_gradient_matches_finite_differences(name):
    x0 = Tensor(_R.child("x", name).normal(size=(4, 5)))
    res = finite_diff_check(OP_CASES[name], x0, h=1e-5)
    assert res.checked > 0
    assert res.max_rel_error < 1e-4, f"{name}: {res.max_rel_error}"


def test_adam_zero_gradient_leaves_parameters():
    p = Tensor([1.0, 2.0], requires_grad=True)
    opt = Adam({"p": p}, lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    np.testing.assert_array_equal(p.data, [1.0, 2.0])


def test_adam_first_step_closed_form():
    p = Tensor([0.0], requires_grad=True)
    opt = Adam({"p": p}, lr=0.001)
    p.grad = np.array([1.0])
    opt.step()
    # bias-corrected first step moves by ~ -lr * g / (|g| + eps)
    assert abs(p.data[0] + 0.001) < 1e-9
    assert p.grad is None  # zeroed afterward


def test_adam_identical_streams_are_bit_identical():
    def run():
        rng = SeededRng(5)
        p = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
        opt = Adam({"w": p}, lr=0.01)
        for i in range(20):
            p.grad = rng.child("g", i).normal(size=(3, 3))
            opt.step()
        return p.data.copy()

    a, b = run(), run()
    assert np.array_equal(a, b)


def test_adam_aborts_on_nonfinite_gradient():
    p = Tensor([1.0], requires_grad=True)
    opt = Adam({"p": p}, lr=0.1)
    p.grad = np.array([np.nan])
    with pytest.raises(NonFiniteError):
        opt.step()
    np.testing.assert_array_equal(p.data, [1.0])


def test_deterministic_forward_backward_with_fixed_rng():
    def run():
        rng = SeededRng(99)
        x = Tensor(rng.child("x").normal(size=(8, 4)), requires_grad=True)
        h = dn.dropout(dn.tanh(dn.matmul(x, Tensor(rng.child("w").normal(size=(4, 4))))),
                       0.5, True, rng.child("drop"))
        loss = dn.reduce_sum(dn.mul(h, h))
        dn.backward(loss)
        return loss.data.copy(), x.grad.copy()

    (l1, g1), (l2, g2) = run(), run()
    assert np.array_equal(l1, l2) and np.array_equal(g1, g2)
