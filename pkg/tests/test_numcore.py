import numpy as np
import pytest

from hierssl.numcore import (
    AdamState,
    NonFiniteGradientError,
    ShapeError,
    Tape,
    TapeError,
    adam_step,
    backward,
    clip_global_norm,
    global_norm,
    grad_check,
)
from hierssl.numcore import ops as T


def run(fn, **params):
    tape = Tape()
    leaves = tape.params({k: np.asarray(v, dtype=np.float64) for k, v in params.items()})
    out = fn(tape, leaves)
    return tape, leaves, out


# -- forward primitives ----------------------------------------------------------

def test_relu_values():
    _, _, y = run(lambda t, p: T.relu(p["x"]), x=[[-1.0, 0.0, 2.0]])
    assert y.value.tolist() == [[0.0, 0.0, 2.0]]


def test_softmax_equal_scores_at_tau5():
    _, _, y = run(lambda t, p: T.softmax(p["s"], 5.0), s=[[5.0], [5.0]])
    np.testing.assert_allclose(y.value.ravel(), [0.5, 0.5])


def test_l2_normalize_3_4():
    _, _, y = run(lambda t, p: T.l2_normalize_rows(p["x"]), x=[[3.0, 4.0]])
    np.testing.assert_allclose(y.value, [[0.6, 0.8]], rtol=0, atol=1e-15)


def test_l2_normalize_zero_row_is_zero():
    tape, p, y = run(lambda t, p: T.l2_normalize_rows(p["x"]), x=[[0.0, 0.0], [1.0, 0.0]])
    assert y.value[0].tolist() == [0.0, 0.0]
    g = backward(tape, T.total(y))
    assert np.all(g["x"][0] == 0)


def test_layer_norm_rows_standardized():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 7)) * 3 + 2
    _, _, y = run(lambda t, p: T.layer_norm(p["x"], t.const(np.ones((1, 7))), t.const(np.zeros((1, 7)))), x=x)
    np.testing.assert_allclose(y.value.mean(1), 0, atol=1e-12)
    np.testing.assert_allclose(y.value.var(1), 1, rtol=1e-4)


def test_mean_rows_and_concat():
    _, _, y = run(lambda t, p: T.concat_cols([T.mean_rows(p["a"]), T.mean_rows(p["b"])]),
                  a=[[1.0, 2.0], [3.0, 4.0]], b=[[0.0], [2.0]])
    assert y.value.tolist() == [[2.0, 3.0, 1.0]]


@pytest.mark.parametrize("fn", [
    lambda t, a, b: T.matmul(a, b),
    lambda t, a, b: T.add(a, b),
])
def test_shape_errors_name_op(fn):
    tape = Tape()
    a, b = tape.const(np.ones((2, 3))), tape.const(np.ones((4, 5)))
    with pytest.raises(ShapeError) as ei:
        fn(tape, a, b)
    assert "(2, 3)" in str(ei.value) and "(4, 5)" in str(ei.value)


def test_primitives_bit_deterministic():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((20, 8))

    def f(t, p):
        h = T.layer_norm(p["x"], t.const(np.ones((1, 8))), t.const(np.zeros((1, 8))))
        return T.mmd_rbf(T.relu(h), T.sigmoid(h))
    v1 = run(f, x=x)[2].value
    v2 = run(f, x=x)[2].value
    assert v1.tobytes() == v2.tobytes()


# -- backward ---------------------------------------------------------------------

def test_linear_map_gradient():
    tape, p, _ = run(lambda t, p: None, W=np.ones((3, 2)))
    x = tape.const(np.array([[1.0], [2.0]]))
    loss = T.total(T.matmul(p["W"], x))
    g = backward(tape, loss)
    np.testing.assert_array_equal(g["W"], [[1, 2]] * 3)


def test_zero_times_loss_gives_zero_gradients():
    tape, p, _ = run(lambda t, p: None, W=np.random.default_rng(0).standard_normal((4, 4)), u=np.ones((2, 2)))
    loss = T.scale(T.total(T.square(T.relu(p["W"]))), 0.0)
    g = backward(tape, loss)
    assert np.all(g["W"] == 0) and np.all(g["u"] == 0)


def test_loss_not_on_tape_errors():
    t1, t2 = Tape(), Tape()
    loss = T.total(t2.param("w", np.ones((2, 2))))
    t1.param("v", np.ones(1))
    with pytest.raises(TapeError):
        backward(t1, loss)


def test_stop_gradient_branch_is_zero():
    tape, p, _ = run(lambda t, p: None, z=np.arange(6.0).reshape(2, 3))
    loss = T.total(T.square(T.stop_gradient(p["z"])))
    g = backward(tape, loss)
    assert np.all(g["z"] == 0)


# -- clipping and Adam --------------------------------------------------------------

def test_clip_halves_norm_two():
    g = {"a": np.array([2.0, 0.0]), "b": np.array([0.0])}
    out = clip_global_norm(g, 1.0)
    np.testing.assert_allclose(out["a"], [1.0, 0.0])


def test_clip_below_threshold_unchanged():
    g = {"a": np.array([0.3, 0.4])}
    assert clip_global_norm(g, 1.0)["a"].tolist() == [0.3, 0.4]


def test_clip_3_4():
    out = clip_global_norm({"a": np.array([3.0, 4.0])}, 1.0)
    np.testing.assert_allclose(out["a"], [0.6, 0.8], atol=1e-15)


def test_clip_idempotent():
    rng = np.random.default_rng(1)
    g = {"a": rng.standard_normal(10) * 5, "b": rng.standard_normal((3, 3))}
    once = clip_global_norm(g)
    twice = clip_global_norm(once)
    for k in g:
        np.testing.assert_allclose(once[k], twice[k], rtol=1e-15)
    assert global_norm(once) == pytest.approx(1.0)


def test_clip_nonfinite_names_param():
    with pytest.raises(NonFiniteGradientError) as ei:
        clip_global_norm({"ok": np.ones(2), "bad": np.array([np.nan])})
    assert ei.value.name == "bad"


def test_adam_zero_grad_zero_wd_unchanged():
    p = {"w": np.array([1.0, -2.0])}
    st = AdamState.for_params(p, weight_decay=0.0)
    out = adam_step(p, {"w": np.zeros(2)}, st)
    np.testing.assert_array_equal(out["w"], p["w"])


def test_adam_first_step_magnitude_is_lr():
    p = {"w": np.array([0.5])}
    st = AdamState.for_params(p, weight_decay=0.0)
    out = adam_step(p, {"w": np.array([1.0])}, st)
    # m_hat = v_hat = 1 -> update = lr * 1 / (1 + eps)
    assert p["w"][0] - out["w"][0] == pytest.approx(1e-3 / (1 + 1e-8), rel=1e-12)


def test_adam_stateful():
    # with a constant gradient the bias-corrected ratio m_hat / sqrt(v_hat) is the
    # same every step, so statefulness shows in the moments and in history dependence
    p = {"w": np.array([0.5])}
    st = AdamState.for_params(p)
    adam_step(p, {"w": np.array([0.3])}, st)
    m1 = st.m["w"].copy()
    b = adam_step(p, {"w": np.array([-0.1])}, st)
    fresh = adam_step(p, {"w": np.array([-0.1])}, AdamState.for_params(p))
    assert st.step == 2 and not np.array_equal(st.m["w"], m1)
    assert b["w"][0] != fresh["w"][0]


def test_adam_decoupled_weight_decay():
    p = {"w": np.array([2.0])}
    st = AdamState.for_params(p, lr=0.1, weight_decay=0.5)
    out = adam_step(p, {"w": np.array([0.0])}, st)
    assert out["w"][0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


def test_adam_shape_mismatch():
    p = {"w": np.zeros(3)}
    with pytest.raises(ShapeError):
        adam_step(p, {"w": np.zeros(4)}, AdamState.for_params(p))


# -- grad_check ----------------------------------------------------------------------

def test_gradcheck_quadratic():
    rng = np.random.default_rng(0)
    err = grad_check(lambda t, p: T.total(T.square(p["W"])), {"W": rng.standard_normal((4, 5))})
    assert err < 1e-8


def test_gradcheck_skips_relu_kink():
    w = np.array([[1e-6, 1.0, -1.0]])
    err, details, skipped = grad_check(lambda t, p: T.total(T.relu(p["w"])), {"w": w},
                                       return_details=True)
    assert skipped == 1
    assert [d[1] for d in details] == [1, 2]
    assert err < 1e-8


def test_gradcheck_multi_output_matches_single():
    rng = np.random.default_rng(2)
    params = {"a": rng.standard_normal((6, 3))}
    outs = {"sq": lambda p: T.total(T.square(p["a"])), "sig": lambda p: T.mean(T.sigmoid(p["a"]))}
    multi, details, skipped = grad_check(lambda t, p: {k: f(p) for k, f in outs.items()}, params,
                                         coords_per_param=5, return_details=True)
    assert set(multi) == set(outs) and skipped == 0
    for k, f in outs.items():
        _, single, _ = grad_check(lambda t, p: f(p), params, coords_per_param=5, return_details=True)
        assert details[k] == single


def test_gradcheck_simsiam_random_embeddings():
    from hierssl.sslmodel.losses import simsiam_loss
    rng = np.random.default_rng(5)
    params = {k: rng.standard_normal((10, 8)) for k in ("pa", "zb", "pb", "za")}
    err = grad_check(lambda t, p: simsiam_loss(p["pa"], p["zb"], p["pb"], p["za"]), params)
    assert err < 1e-5


@pytest.mark.parametrize("name,fn", [
    ("sigmoid_ratio", lambda t, p: T.total(T.sigmoid(p["a"]) * T.reciprocal(T.total(T.sigmoid(p["a"]))) * t.const(np.arange(80.0).reshape(10, 8)))),
    ("layer_norm", lambda t, p: T.total(T.square(T.layer_norm(p["a"], p["g"], p["b"])) * t.const(np.sin(np.arange(80.0)).reshape(10, 8)))),
    ("softmax", lambda t, p: T.total(T.softmax(T.matmul(p["a"], t.const(np.ones((8, 1)))), 5.0) * t.const(np.arange(10.0).reshape(10, 1)))),
    ("log_softmax", lambda t, p: T.total(T.log_softmax_rows(p["a"]) * t.const(np.cos(np.arange(80.0)).reshape(10, 8)))),
    ("l2norm", lambda t, p: T.total(T.l2_normalize_rows(p["a"]) * t.const(np.arange(80.0).reshape(10, 8)))),
    ("mmd", lambda t, p: T.mmd_rbf(p["a"], T.gather_rows(p["a"], np.arange(5)) * 0.5)),
    ("exp_log_sqrt", lambda t, p: T.mean(T.log(T.exp(p["a"]) + 1.0) + T.sqrt(T.square(p["a"]) + 1.0))),
    ("spmm", lambda t, p: T.total(T.square(T.spmm(np.eye(10)[::-1] * 0.5, p["a"])))),
])
def test_gradcheck_primitives(name, fn):
    rng = np.random.default_rng(11)
    params = {"a": rng.standard_normal((10, 8)), "g": rng.standard_normal((1, 8)) + 2,
              "b": rng.standard_normal((1, 8))}
    assert grad_check(fn, params) < 1e-6, name


@pytest.mark.parametrize("sigmas", [(0.5, 1.0, 2.0), (0.7, 1.3)])
def test_rbf_stats_match_dense_oracle(sigmas):
    from hierssl import kernels

    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((300, 4)) * 0.7, rng.standard_normal((270, 4)) * 0.7

    def dense(a, b):
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
        k = np.mean([np.exp(-d2 / (2 * s * s)) for s in sigmas], axis=0)
        w = np.mean([np.exp(-d2 / (2 * s * s)) / (s * s) for s in sigmas], axis=0)
        return k.sum(), w
    ksum, w = dense(x, y)
    total, rows, wy, cols, wtx = kernels.rbf_stats(x, y, sigmas, tile=64)
    assert total == pytest.approx(ksum, rel=1e-12)
    np.testing.assert_allclose(rows, w.sum(1), rtol=1e-12)
    np.testing.assert_allclose(wy, w @ y, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(cols, w.sum(0), rtol=1e-12)
    np.testing.assert_allclose(wtx, w.T @ x, rtol=1e-10, atol=1e-12)
    ksum, w = dense(x, x)
    total, rows, wx = kernels.rbf_stats_sym(x, sigmas, tile=64)
    assert total == pytest.approx(ksum, rel=1e-12)
    np.testing.assert_allclose(rows, w.sum(1), rtol=1e-12)
    np.testing.assert_allclose(wx, w @ x, rtol=1e-10, atol=1e-12)
