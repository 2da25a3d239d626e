
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aspectnet.gradcore import NonFiniteError, ShapeError, Tensor, finite_difference_check, is_grad_enabled, no_grad, ops, set_debug
from aspectnet.gradcore import checkpoint
from aspectnet.gradcore.check import relative_discrepancy

TOL = 1e-5


def _point(rng, *shape):
    return rng.normal(size=shape)


# each case: (name, fn building a scalar from one input tensor, input shape)
def _cases(rng):
    w = rng.normal(size=(4, 3))
    gamma, beta = rng.normal(size=3), rng.normal(size=3)
    mask = np.array([[True, True, False], [True, False, False]])
    target = np.array([0, 2])
    return [
        ("add_broadcast", lambda x: ops.sum(ops.mul(ops.add(x, np.arange(3.0)), x)), (2, 3)),
        ("sub", lambda x: ops.sum(ops.mul(ops.sub(1.5, x), x)), (2, 3)),
        ("matmul", lambda x: ops.sum(ops.tanh(ops.matmul(x, w))), (5, 4)),
        ("sigmoid", lambda x: ops.sum(ops.sigmoid(x)), (3, 3)),
        ("exp_log", lambda x: ops.sum(ops.log(ops.add(ops.exp(x), 1.0))), (3, 2)),
        ("softmax_masked", lambda x: ops.sum(ops.mul(ops.softmax(x, mask=mask), np.arange(3.0))), (2, 3)),
        ("log_softmax", lambda x: ops.sum(ops.mul(ops.log_softmax(x), np.arange(3.0))), (2, 3)),
        ("layer_norm", lambda x: ops.sum(ops.mul(ops.layer_norm(x, gamma, beta), np.arange(3.0))), (4, 3)),
        ("cross_entropy", lambda x: ops.cross_entropy(x, target), (2, 3)),
        ("concat_slice", lambda x: ops.sum(ops.mul(ops.concat([x, x[:, :1]], axis=1), 2.0)), (2, 3)),
        ("stack_transpose", lambda x: ops.sum(ops.tanh(ops.transpose(ops.stack([x, x * x]), (2, 1, 0)))), (2, 3)),
        ("mean_reshape", lambda x: ops.mean(ops.mul(ops.reshape(x, (3, 2)), ops.reshape(x, (3, 2)))), (2, 3)),
    ]


@pytest.mark.parametrize("index", range(12))
def test_op_gradients(index):
    rng = np.random.default_rng(index)
    name, fn, shape = _cases(rng)[index]
    assert finite_difference_check(fn, _point(rng, *shape)) < TOL, name


def test_relu_gradient_away_from_kink(rng):
    x = rng.normal(size=(3, 4))
    x[np.abs(x) < 0.05] = 0.5
    assert finite_difference_check(lambda t: ops.sum(ops.mul(ops.relu(t), t)), x) < TOL


def test_embedding_lookup_accumulates_repeated_rows():
    table = Tensor(np.arange(12.0).reshape(4, 3), requires_grad=True)
    out = ops.sum(ops.embedding_lookup(table, np.array([[1, 1], [3, 0]])))
    out.backward()
    np.testing.assert_array_equal(table.grad[:, 0], [1, 2, 0, 1])


def test_shared_node_gradients_sum():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = ops.mul(x, x)
    ops.sum(ops.add(y, y)).backward()
    assert x.grad[0] == pytest.approx(8.0)


def test_shape_errors_are_raised():
    with pytest.raises(ShapeError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))
    with pytest.raises(ShapeError):
        ops.cross_entropy(Tensor(np.ones((2, 3))), np.zeros(3, dtype=int))


def test_debug_mode_flags_non_finite():
    set_debug(True)
    try:
        with pytest.raises(NonFiniteError):
            ops.log(Tensor(np.array([-1.0]), requires_grad=True))
    finally:
        set_debug(False)


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = ops.mul(x, 2.0)
    assert not y.requires_grad


def test_no_grad_on_overlapping_threads_leaves_caller_enabled():
    inside, release = threading.Barrier(4), threading.Event()

    def worker():
        with no_grad():
            inside.wait()
            release.wait()

    threads = [threading.Thread(target=worker) for _ in range(3)]
    for t in threads:
        t.start()
    inside.wait()
    assert is_grad_enabled()
    release.set()
    for t in threads:
        t.join()
    assert is_grad_enabled()


def test_dropout_is_identity_at_eval_and_unbiased_in_training(rng):
    x = Tensor(np.ones((200, 200)))
    assert ops.dropout(x, 0.3, rng, training=False) is x
    assert ops.dropout(x, 0.3, rng).data.mean() == pytest.approx(1.0, abs=0.02)


def test_cross_entropy_gradient_is_softmax_minus_onehot(rng):
    z = rng.normal(size=(3, 4))
    t = np.array([0, 3, 1])
    x = Tensor(z, requires_grad=True)
    ops.cross_entropy(x, t).backward()
    p = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(x.grad, (p - np.eye(4)[t]) / 3, atol=1e-14)


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 5)),
              elements=st.floats(-30, 30, allow_nan=False)))
def test_softmax_rows_are_distributions(x):
    p = ops.softmax(Tensor(x)).data
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)


@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(2, 5)),
              elements=st.floats(-5, 5, allow_nan=False)),
       st.integers(0, 2**16))
def test_fully_masked_softmax_rows_are_zero(x, seed):
    mask = np.random.default_rng(seed).random(x.shape) < 0.5
    mask[0] = False
    p = ops.softmax(Tensor(x), mask=mask).data
    assert np.all(p[0] == 0)
    assert np.all(p[~mask] == 0)


def test_relative_discrepancy_floor():
    assert relative_discrepancy(np.zeros(2), np.zeros(2)).max() == 0.0


# -- checkpoint -----------------------------------------------------------------


@given(st.dictionaries(st.text(min_size=1, max_size=12),
                       arrays(np.float64, st.lists(st.integers(0, 3), max_size=3).map(tuple),
                              elements=st.floats(allow_nan=False)),
                       max_size=4))
def test_checkpoint_round_trip(tensors):
    back = checkpoint.loads(checkpoint.dumps(tensors))
    assert list(back) == list(tensors)
    for k in tensors:
        np.testing.assert_array_equal(back[k], tensors[k])
        assert back[k].shape == tensors[k].shape


def test_checkpoint_layout_is_little_endian():
    blob = checkpoint.dumps({"w": np.array([[1.0, 2.0]])})
    assert blob[:4] == b"AGCK"
    assert blob[4:8] == (1).to_bytes(4, "little")
    assert blob[8:12] == (1).to_bytes(4, "little")
    assert blob[12:16] == (1).to_bytes(4, "little") and blob[16:17] == b"w"
    assert blob[-16:] == np.array([1.0, 2.0], dtype="<f8").tobytes()


def test_checkpoint_rejects_corruption():
    blob = checkpoint.dumps({"w": np.ones(3)})
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(b"XXXX" + blob[4:])
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(blob[:-3])
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(blob + b"\0")


def test_checkpoint_save_returns_file_digest(tmp_path):
    import hashlib

    digest = checkpoint.save(tmp_path / "m.ckpt", {"a": np.ones(2)})
    assert digest == hashlib.sha256((tmp_path / "m.ckpt").read_bytes()).hexdigest()
