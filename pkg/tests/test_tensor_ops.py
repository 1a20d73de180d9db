"""Forward-op contracts: shapes, worked examples, and scalar-loop oracles."""

import numpy as np
import pytest

import dockscore.numeric as dn
from dockscore.errors import NonFiniteError, ShapeError
from dockscore.numeric import SeededRng, Tensor


def test_matmul_identity():
    rng = SeededRng(1)
    m = rng.normal(size=(3, 3))
    out = dn.matmul(Tensor(np.eye(3)), Tensor(m))
    np.testing.assert_array_equal(out.data, m)


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        dn.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_softmax_uniform_over_equal_entries():
    out = dn.softmax(Tensor([[5.0, 5.0, 5.0, 5.0]]), axis=-1)
    np.testing.assert_allclose(out.data, 0.25)


def test_softmax_masked_row_returns_zeros_with_warning():
    x = Tensor([[1.0, 2.0], [3.0, 4.0]])
    mask = np.array([[True, True], [False, False]])
    with pytest.warns(RuntimeWarning):
        out = dn.softmax(x, axis=-1, mask=mask)
    np.testing.assert_allclose(out.data[1], 0.0)
    np.testing.assert_allclose(out.data[0].sum(), 1.0)


def test_segment_mean_hand_example():
    rows = Tensor([[1.0, 3.0], [5.0, 7.0], [2.0, 2.0]])
    out = dn.segment_reduce(rows, [0, 0, 1], 2, "mean")
    np.testing.assert_allclose(out.data, [[3.0, 5.0], [2.0, 2.0]])


@pytest.mark.parametrize("kind", ["sum", "mean", "max", "min", "prod"])
def test_segment_reduce_matches_scalar_loop(kind):
    rng = SeededRng(7).child(kind)
    vals = rng.normal(size=(40, 3))
    seg = rng.integers(0, 6, size=40)
    out = dn.segment_reduce(Tensor(vals), seg, 7, kind).data

    expect = np.zeros((7, 3))
    for s in range(7):
        members = vals[seg == s]
        if members.size == 0:
            continue  # empty segments are defined to be zero
        if kind == "sum":
            expect[s] = members.sum(axis=0)
        elif kind == "mean":
            expect[s] = members.mean(axis=0)
        elif kind == "max":
            expect[s] = members.max(axis=0)
        elif kind == "min":
            expect[s] = members.min(axis=0)
        else:
            expect[s] = members.prod(axis=0)
    np.testing.assert_allclose(out, expect, atol=1e-12)
    assert np.all(out[6] == 0.0)


def test_segment_reduce_unsorted_ids_match_sorted():
    rng = SeededRng(3)
    vals = rng.normal(size=(10, 2))
    seg = np.array([2, 0, 1, 2, 0, 1, 1, 0, 2, 0])
    order = np.argsort(seg, kind="stable")
    a = dn.segment_reduce(Tensor(vals), seg, 3, "sum").data
    b = dn.segment_reduce(Tensor(vals[order]), seg[order], 3, "sum").data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_segment_sum_equals_indicator_matmul():
    # scatter/gather oracle: segment-sum == indicator-matrix product
    rng = SeededRng(11)
    for trial in range(5):
        n = int(rng.integers(1, 20))
        vals = rng.normal(size=(n, 4))
        seg = rng.integers(0, 5, size=n)
        ind = np.zeros((5, n))
        ind[seg, np.arange(n)] = 1.0
        out = dn.segment_reduce(Tensor(vals), seg, 5, "sum").data
        np.testing.assert_allclose(out, ind @ vals, atol=1e-12)


def test_gather_rows_roundtrip():
    x = Tensor(np.arange(12.0).reshape(4, 3))
    out = dn.gather_rows(x, [3, 0, 0, 2])
    np.testing.assert_array_equal(out.data, x.data[[3, 0, 0, 2]])
    with pytest.raises(ShapeError):
        dn.gather_rows(x, [4])


def test_concat_slice_transpose():
    a = Tensor(np.ones((2, 3)))
    b = Tensor(np.zeros((2, 2)))
    cat = dn.concat([a, b], axis=1)
    assert cat.shape == (2, 5)
    sl = dn.slice_axis(cat, 1, 3, 5)
    np.testing.assert_array_equal(sl.data, b.data)
    np.testing.assert_array_equal(dn.transpose(a).data, a.data.T)


def test_layer_norm_normalizes_rows():
    rng = SeededRng(5)
    x = rng.normal(size=(6, 8)) * 3.0 + 1.0
    out = dn.layer_norm(Tensor(x), axis=-1).data
    np.testing.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-4)


def test_nonfinite_results_raise():
    with pytest.raises(NonFiniteError):
        dn.exp(Tensor([1000.0]))
    with pytest.raises(NonFiniteError):
        dn.log(Tensor([0.0]))


def test_dropout_identity_when_not_training():
    x = Tensor(np.ones((5, 5)))
    assert dn.dropout(x, 0.4, training=False) is x
    assert dn.dropout(x, 0.0, training=True, rng=SeededRng(0)) is x


def test_dropout_preserves_expectation():
    # inverted scaling: E[output] == input, checked over >= 1e4 draws
    rng = SeededRng(123)
    p = 0.3
    draws = np.stack([
        dn.dropout(Tensor(np.ones(100)), p, True, rng.child("d", i)).data
        for i in range(120)
    ])
    assert draws.size >= 10_000
    assert abs(draws.mean() - 1.0) < 0.02


def test_forward_op_dispatch_covers_named_kinds():
    rng = SeededRng(9)
    x = Tensor(rng.normal(size=(4, 4)))
    y = Tensor(rng.normal(size=(4, 4)))
    seg = np.array([0, 0, 1, 2])
    cases = {
        "matmul": ([x, y], {}),
        "add": ([x, y], {}),
        "sub": ([x, y], {}),
        "elementwise-mul": ([x, y], {}),
        "scalar-mul": ([x], {"c": 2.5}),
        "concat": ([x, y], {"axis": 0}),
        "slice": ([x], {"axis": 0, "start": 1, "stop": 3}),
        "exp": ([x], {}),
        "sqrt": ([Tensor(np.abs(x.data) + 1)], {}),
        "log": ([Tensor(np.abs(x.data) + 1)], {}),
        "relu": ([x], {}),
        "elu": ([x], {}),
        "tanh": ([x], {}),
        "sigmoid": ([x], {}),
        "softmax": ([x], {"axis": -1}),
        "layer-norm": ([x], {"axis": -1}),
        "reduce-sum": ([x], {"axis": 0}),
        "reduce-mean": ([x], {}),
        "reduce-max": ([x], {"axis": 1}),
        "reduce-min": ([x], {}),
        "segment-reduce-sum": ([x], {"segment_ids": seg, "num_segments": 3}),
        "segment-reduce-mean": ([x], {"segment_ids": seg, "num_segments": 3}),
        "segment-reduce-max": ([x], {"segment_ids": seg, "num_segments": 3}),
        "segment-reduce-min": ([x], {"segment_ids": seg, "num_segments": 3}),
        "segment-reduce-prod": ([x], {"segment_ids": seg, "num_segments": 3}),
        "dropout": ([x], {"p": 0.5, "training": True, "rng": SeededRng(1)}),
        "gather-rows": ([x], {"index": [0, 2]}),
        "transpose": ([x], {}),
        "signed-root": ([x], {"n": 4}),
    }
    for kind, (inputs, attrs) in cases.items():
        out = dn.forward_op(kind, inputs, **attrs)
        assert np.all(np.isfinite(out.data)), kind
    with pytest.raises(ShapeError):
        dn.forward_op("no-such-op", [x])
