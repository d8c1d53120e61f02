import numpy as np
import pytest

from vranrl.nn import (IDENTITY, RELU, AdamState, DenseNet, Layer, SignatureError, adam_step, load_arrays,
                       load_params, save_arrays, save_params)

from support import dense_forward


def test_identity_layer_example():
    net = DenseNet([Layer(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0.5, -0.5]), IDENTITY)])
    assert net.predict(np.array([1.0, 1.0])).tolist() == [[4.5, 5.5]]


def test_relu_clips_negative():
    net = DenseNet([Layer(np.array([[1.0, -1.0]]), np.zeros(2), RELU)])
    assert net.predict(np.array([[2.0]])).tolist() == [[2.0, 0.0]]


def test_forward_matches_matrix_products():
    rng = np.random.default_rng(0)
    net = DenseNet.build([7, 9, 5, 3], [RELU, RELU, IDENTITY], rng)
    x = rng.normal(size=(11, 7))
    want = dense_forward([(l.W, l.b, l.activation) for l in net.layers], x)
    assert np.max(np.abs(net.predict(x) - want)) < 1e-12


def test_construction_errors():
    with pytest.raises(ValueError):
        DenseNet([Layer(np.ones((2, 3)), np.zeros(3)), Layer(np.ones((2, 1)), np.zeros(1))])
    with pytest.raises(ValueError):
        DenseNet([Layer(np.ones((2, 3)), np.zeros(3), "tanh")])
    with pytest.raises(ValueError):
        DenseNet.build([2, 3], [RELU, RELU], np.random.default_rng(0))
    net = DenseNet.build([2, 3], [RELU], np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.predict(np.ones((1, 4)))
    with pytest.raises(ValueError):
        net.backward(None, np.ones((1, 3)))


def _loss(net, x, y):
    return 0.5 * float(((net.predict(x) - y) ** 2).sum())


@pytest.mark.parametrize("seed", range(5))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = DenseNet.build([4, 8, 8, 3], [RELU, RELU, IDENTITY], rng)
    for p in net.params():  # move biases off zero so kinks are unlikely
        p += rng.normal(scale=0.1, size=p.shape)
    x, y = rng.normal(size=(6, 4)), rng.normal(size=(6, 3))
    out, cache = net.forward(x)
    grads, gx = net.backward(cache, out - y)
    h = 1e-5
    for p, g in zip(net.params(), grads):
        num = np.zeros_like(p)
        for i in np.ndindex(p.shape):
            old = p[i]
            p[i] = old + h
            up = _loss(net, x, y)
            p[i] = old - h
            down = _loss(net, x, y)
            p[i] = old
            num[i] = (up - down) / (2 * h)
        rel = np.abs(num - g) / np.maximum(1e-8, np.abs(num) + np.abs(g))
        assert rel.max() < 1e-5
    # input gradient
    i = (2, 1)
    x2 = x.copy()
    x2[i] += h
    up = _loss(net, x2, y)
    x2[i] -= 2 * h
    assert (up - _loss(net, x2, y)) / (2 * h) == pytest.approx(gx[i], rel=1e-5)


def test_adam_zero_gradient_leaves_params():
    p = [np.array([1.0, -2.0])]
    st = AdamState.for_params(p, lr=0.1)
    adam_step(p, [np.zeros(2)], st)
    assert p[0].tolist() == [1.0, -2.0] and st.step == 1


def test_adam_first_step_moves_by_lr():
    # with bias correction the first update is lr * g/|g| (up to eps)
    p = [np.array([0.0, 0.0])]
    st = AdamState.for_params(p, lr=1e-3)
    adam_step(p, [np.array([3.0, -0.5])], st)
    assert p[0] == pytest.approx([-1e-3, 1e-3], rel=1e-6)


def test_adam_constant_gradient_step_tends_to_lr():
    p = [np.zeros(1)]
    st = AdamState.for_params(p, lr=0.01)
    prev = 0.0
    for _ in range(2000):
        adam_step(p, [np.array([2.0])], st)
        step, prev = prev - p[0][0], p[0][0]
    assert step == pytest.approx(0.01, rel=1e-6)


def test_adam_shape_checks():
    p = [np.zeros(2)]
    st = AdamState.for_params(p)
    with pytest.raises(ValueError):
        adam_step(p, [np.zeros(3)], st)
    with pytest.raises(ValueError):
        adam_step(p, [], st)


def test_build_deterministic():
    a = DenseNet.build([3, 4, 2], [RELU, IDENTITY], np.random.default_rng(9))
    b = DenseNet.build([3, 4, 2], [RELU, IDENTITY], np.random.default_rng(9))
    assert all(np.array_equal(p, q) for p, q in zip(a.params(), b.params()))


def test_copy_is_deep_and_load_from_checks_shape():
    net = DenseNet.build([3, 4, 2], [RELU, IDENTITY], np.random.default_rng(1))
    c = net.copy()
    c.layers[0].W += 1
    assert not np.array_equal(c.layers[0].W, net.layers[0].W)
    c.load_from(net)
    assert np.array_equal(c.layers[0].W, net.layers[0].W)
    with pytest.raises(SignatureError):
        c.load_from(DenseNet.build([3, 5, 2], [RELU, IDENTITY], np.random.default_rng(1)))


def test_checkpoint_round_trip(tmp_path):
    net = DenseNet.build([5, 6, 2], [RELU, IDENTITY], np.random.default_rng(2))
    save_params(net, tmp_path / "n.ckpt")
    other = DenseNet.build([5, 6, 2], [RELU, IDENTITY], np.random.default_rng(3))
    load_params(other, tmp_path / "n.ckpt")
    x = np.random.default_rng(4).normal(size=(3, 5))
    assert np.array_equal(net.predict(x), other.predict(x))


def test_checkpoint_signature_mismatch(tmp_path):
    save_params(DenseNet.build([5, 6, 2], [RELU, IDENTITY], np.random.default_rng(2)), tmp_path / "n.ckpt")
    with pytest.raises(SignatureError):
        load_params(DenseNet.build([5, 7, 2], [RELU, IDENTITY], np.random.default_rng(2)), tmp_path / "n.ckpt")


@pytest.mark.parametrize("damage", ["magic", "truncate", "trailing", "version"])
def test_corrupt_checkpoint_rejected(tmp_path, damage):
    path = tmp_path / "a.ckpt"
    save_arrays(path, [("w", np.arange(6.0).reshape(2, 3))])
    data = bytearray(path.read_bytes())
    if damage == "magic":
        data[0] ^= 0xFF
    elif damage == "truncate":
        data = data[:-5]
    elif damage == "trailing":
        data += b"\0"
    else:
        data[8] = 7
    path.write_bytes(bytes(data))
    with pytest.raises(ValueError):
        load_arrays(path)


def test_arrays_round_trip_exact(tmp_path):
    arrs = [("a", np.array([np.pi, -0.0, 1e-300])), ("b", np.zeros((0, 3))), ("c", np.ones((2, 2, 2)))]
    save_arrays(tmp_path / "x", arrs)
    back = load_arrays(tmp_path / "x")
    assert [n for n, _ in back] == ["a", "b", "c"]
    for (_, u), (_, v) in zip(arrs, back):
        assert u.shape == v.shape and u.tobytes() == v.tobytes()
