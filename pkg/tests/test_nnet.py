import numpy as np
import pytest

from groupshare.nnet import (
    AdadeltaState,
    adadelta_update,
    conv_backward,
    conv_forward,
    dropout,
    init_filter_bank,
    maxpool1,
    maxpool1_backward,
    softmax_xent,
    softmax_xent_backward,
)


def conv_loops(x, weights, bias, activation="relu"):
    """Triple-loop convolution used as the oracle."""
    length, dim = x.shape
    f, height, _ = weights.shape
    out = np.zeros((length - height + 1, f))
    for t in range(length - height + 1):
        for k in range(f):
            acc = 0.0
            for o in range(height):
                for j in range(dim):
                    acc += x[t + o, j] * weights[k, o, j]
            out[t, k] = acc + bias[k]
    if activation == "relu":
        out = np.maximum(out, 0.0)
    return out


def test_conv_forward_matches_loop_oracle():
    rng = np.random.default_rng(12)
    for trial in range(20):
        length = int(rng.integers(2, 12))
        height = int(rng.integers(1, length + 1))
        dim = int(rng.integers(1, 7))
        f = int(rng.integers(1, 6))
        x = rng.normal(0, 1, size=(length, dim))
        w = rng.normal(0, 1, size=(f, height, dim))
        b = rng.normal(0, 1, size=f)
        act = "relu" if trial % 2 else "linear"
        out, _ = conv_forward(x, w, b, activation=act)
        expected = conv_loops(x, w, b, activation=act)
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)


def test_conv_forward_input_validation():
    x = np.zeros((3, 4))
    w = np.zeros((2, 2, 4))
    b = np.zeros(2)
    with pytest.raises(ValueError, match="shorter"):
        conv_forward(np.zeros((1, 4)), w, b)
    with pytest.raises(ValueError, match="width"):
        conv_forward(np.zeros((3, 5)), w, b)
    with pytest.raises(ValueError, match="activation"):
        conv_forward(x, w, b, activation="tanh")


def test_conv_backward_finite_differences():
    rng = np.random.default_rng(23)
    eps = 1e-6
    for trial in range(8):
        length = int(rng.integers(3, 9))
        height = int(rng.integers(1, 4))
        dim = int(rng.integers(1, 5))
        f = int(rng.integers(1, 4))
        x = rng.normal(0, 1, size=(length, dim))
        w = rng.normal(0, 1, size=(f, height, dim))
        b = rng.normal(0, 1, size=f)
        proj = rng.normal(0, 1, size=(length - height + 1, f))

        def loss(xv, wv, bv):
            out, _ = conv_forward(xv, wv, bv)
            return float((out * proj).sum())

        out, cache = conv_forward(x, w, b)
        dx, dw, db = conv_backward(proj, cache)
        for arr, grad, which in ((x, dx, "x"), (w, dw, "w"), (b, db, "b")):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for idx in rng.choice(flat.size, size=min(6, flat.size), replace=False):
                old = flat[idx]
                flat[idx] = old + eps
                up = loss(x, w, b)
                flat[idx] = old - eps
                down = loss(x, w, b)
                flat[idx] = old
                fd = (up - down) / (2 * eps)
                assert abs(fd - gflat[idx]) < 1e-5, (which, trial)


def test_maxpool_first_index_wins_ties():
    vals = np.array([[1.0, 5.0], [3.0, 5.0], [3.0, 2.0]])
    out, idx = maxpool1(vals)
    np.testing.assert_array_equal(out, [3.0, 5.0])
    np.testing.assert_array_equal(idx, [1, 0])
    one_d, i = maxpool1(np.array([2.0, 7.0, 7.0]))
    assert one_d == 7.0 and i == 1
    with pytest.raises(ValueError):
        maxpool1(np.zeros((0, 3)))


def test_maxpool_backward_scatters_to_argmax():
    rng = np.random.default_rng(9)
    for _ in range(15):
        n = int(rng.integers(1, 9))
        f = int(rng.integers(1, 6))
        vals = rng.normal(0, 1, size=(n, f))
        out, idx = maxpool1(vals)
        d_out = rng.normal(0, 1, size=f)
        grad = maxpool1_backward(d_out, idx, n)
        assert grad.shape == vals.shape
        for k in range(f):
            for t in range(n):
                expected = d_out[k] if t == idx[k] else 0.0
                assert grad[t, k] == expected


def test_softmax_xent_values_and_stability():
    logits = np.array([1.0, 2.0, 3.0])
    loss, probs = softmax_xent(logits, 2)
    assert abs(probs.sum() - 1.0) < 1e-12
    assert abs(loss + np.log(probs[2])) < 1e-12
    big_loss, big_probs = softmax_xent(np.array([1e4, 0.0]), 0)
    assert np.isfinite(big_loss) and big_loss < 1e-12
    assert np.isfinite(big_probs).all()
    zero_loss, zero_probs = softmax_xent(np.zeros(4), 1)
    assert zero_loss == pytest.approx(np.log(4.0), abs=1e-15)
    with pytest.raises(ValueError):
        softmax_xent(logits, 3)
    with pytest.raises(ValueError):
        softmax_xent(logits, -1)
    with pytest.raises(ValueError):
        softmax_xent(np.zeros((2, 2)), 0)


def test_softmax_backward_finite_differences():
    rng = np.random.default_rng(77)
    eps = 1e-7
    for _ in range(10):
        c = int(rng.integers(2, 7))
        logits = rng.normal(0, 2, size=c)
        label = int(rng.integers(0, c))
        _, probs = softmax_xent(logits, label)
        grad = softmax_xent_backward(probs, label)
        for j in range(c):
            bumped = logits.copy()
            bumped[j] += eps
            up, _ = softmax_xent(bumped, label)
            bumped[j] -= 2 * eps
            down, _ = softmax_xent(bumped, label)
            fd = (up - down) / (2 * eps)
            assert abs(fd - grad[j]) < 1e-6


def test_dropout_modes():
    rng = np.random.default_rng(4)
    vec = rng.normal(0, 1, size=2000)
    out, mask = dropout(vec, 0.5, train=False)
    np.testing.assert_array_equal(out, vec)
    assert mask is None
    out, mask = dropout(vec, 0.0, train=True, rng=rng)
    np.testing.assert_array_equal(out, vec)
    assert mask is None
    out, mask = dropout(vec, 0.5, train=True, rng=np.random.default_rng(1))
    dropped = np.count_nonzero(mask == 0.0)
    assert 0.4 < dropped / vec.size < 0.6
    surviving = mask[mask > 0]
    np.testing.assert_allclose(surviving, 2.0)
    np.testing.assert_array_equal(out, vec * mask)
    with pytest.raises(ValueError):
        dropout(vec, 1.0, train=True, rng=rng)
    with pytest.raises(ValueError):
        dropout(vec, -0.1, train=True, rng=rng)
    with pytest.raises(ValueError, match="generator"):
        dropout(vec, 0.5, train=True)


def test_dropout_preserves_expectation():
    rng = np.random.default_rng(6)
    vec = np.ones(5000)
    total = np.zeros_like(vec)
    reps = 200
    for _ in range(reps):
        out, _ = dropout(vec, 0.3, train=True, rng=rng)
        total += out
    # global mean over 10^6 draws: std ~ 0.00065, so 0.01 is generous
    assert abs((total / reps).mean() - 1.0) < 0.01


def test_adadelta_first_step_closed_form():
    param = np.array([1.0])
    state = AdadeltaState.zeros(1)
    rho = 0.95
    adadelta_update(param, np.array([1.0]), state, rho=rho, eps=1e-6)
    acc = (1.0 - rho) * 1.0 * 1.0
    expected_delta = -np.sqrt(1e-6) / np.sqrt(acc + 1e-6)
    assert param[0] == 1.0 + expected_delta
    assert state.sq_grad[0] == acc
    assert state.sq_delta[0] == (1.0 - rho) * expected_delta**2


def test_adadelta_matches_scalar_recurrence():
    rng = np.random.default_rng(42)
    rho, eps = 0.9, 1e-5
    param = rng.normal(0, 1, size=6)
    state = AdadeltaState.zeros(6)
    # scalar replay of the same recurrence
    p2 = param.copy()
    eg = np.zeros(6)
    ed = np.zeros(6)
    for step in range(50):
        grad = rng.normal(0, 1, size=6)
        adadelta_update(param, grad, state, rho=rho, eps=eps)
        for i in range(6):
            eg[i] = rho * eg[i] + (1 - rho) * grad[i] * grad[i]
            delta = -np.sqrt(ed[i] + eps) / np.sqrt(eg[i] + eps) * grad[i]
            ed[i] = rho * ed[i] + (1 - rho) * delta * delta
            p2[i] = p2[i] + delta
        np.testing.assert_array_equal(param, p2)
        np.testing.assert_array_equal(state.sq_grad, eg)
        np.testing.assert_array_equal(state.sq_delta, ed)


def test_adadelta_rejects_bad_gradients():
    param = np.zeros(3)
    state = AdadeltaState.zeros(3)
    with pytest.raises(ValueError, match="non-finite"):
        adadelta_update(param, np.array([1.0, np.nan, 0.0]), state)
    with pytest.raises(ValueError, match="shape"):
        adadelta_update(param, np.zeros(4), state)


def test_adadelta_step_size_adapts():
    # constant gradient: steps grow as the update accumulator fills
    param = np.array([0.0])
    state = AdadeltaState.zeros(1)
    deltas = []
    for _ in range(20):
        before = param[0]
        adadelta_update(param, np.array([1.0]), state)
        deltas.append(before - param[0])
    assert deltas[5] > deltas[0] > 0


def test_filter_bank_init():
    rng = np.random.default_rng(3)
    bank = init_filter_bank([3, 4, 5], 10, 7, rng)
    assert bank.heights == (3, 4, 5)
    assert bank.num_features() == 30
    for h in (3, 4, 5):
        assert bank.weights[h].shape == (10, h, 7)
        np.testing.assert_array_equal(bank.biases[h], np.full(10, 0.1))
    assert abs(bank.weights[3].std() - 0.1) < 0.02
    same = init_filter_bank([3, 4, 5], 10, 7, np.random.default_rng(3))
    np.testing.assert_array_equal(same.weights[4], bank.weights[4])
    with pytest.raises(ValueError):
        init_filter_bank([0], 10, 7, rng)
