import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from bridgedpi import autodiff as ad
from bridgedpi.autodiff import Tape, TapeError, Tensor, apply_primitive, finite_difference_check
from gradcases import model_case, primitive_cases

CASES = primitive_cases()


@pytest.mark.parametrize("name", sorted(CASES))
def test_primitive_gradients(name):
    fn, params = CASES[name]
    report = finite_difference_check(fn, params)
    assert report.passed(1e-6), report.errors


def test_every_registered_primitive_is_checked():
    covered = {name.removesuffix("_vector").removesuffix("_train").removesuffix("_eval") for name in CASES}
    assert set(ad.PRIMITIVES) <= covered


def test_full_model_gradient_m4():
    fn, params = model_case(m=4)
    report = finite_difference_check(fn, params, step=1e-4, max_entries=40)
    assert report.passed(1e-4), report.errors


def test_quadratic_known_gradient():
    x = Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    with Tape() as tape:
        y = ad.tsum(x * x)
    grads = tape.backward(y)
    assert np.array_equal(grads[x], 2 * x.data)
    assert np.array_equal(x.grad, 2 * x.data)


def test_reused_tensor_accumulates():
    x = Tensor(np.array(2.0), requires_grad=True)
    with Tape() as tape:
        y = x * x + x * 3.0
    assert tape.backward(y)[x] == pytest.approx(7.0)


def test_grad_accumulates_across_tapes():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    for _ in range(2):
        with Tape() as tape:
            y = ad.tsum(x * 3.0)
        tape.backward(y)
    assert np.array_equal(x.grad, [6.0, 6.0])
    x.zero_grad()
    assert x.grad is None


def test_non_scalar_backward_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(TapeError):
        tape.backward(y)


def test_tape_single_use():
    x = Tensor(np.ones(2), requires_grad=True)
    with Tape() as tape:
        y = ad.tsum(x)
    tape.backward(y)
    with pytest.raises(TapeError):
        tape.backward(y)
    with pytest.raises(TapeError):
        with tape:
            ad.tsum(x)


def test_no_tape_means_no_recording():
    x = Tensor(np.ones(2), requires_grad=True)
    y = ad.tsum(x)
    assert not y.requires_grad


def test_constants_get_no_gradient():
    x = Tensor(np.ones(2), requires_grad=True)
    c = Tensor(np.full(2, 5.0))
    with Tape() as tape:
        y = ad.tsum(x * c)
    grads = tape.backward(y)
    assert c not in grads and c.grad is None


def test_unknown_primitive():
    with pytest.raises(ValueError):
        apply_primitive("nope", Tensor(np.ones(1)))


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ValueError):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((4,)))


def test_scalars_keep_float32():
    x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
    assert (1 - x).dtype == np.float32
    assert (x * 0.5).dtype == np.float32


def test_relu_subgradient_at_zero_is_zero():
    x = Tensor(np.array([-1.0, 0.0, 1.0]), requires_grad=True)
    with Tape() as tape:
        y = ad.tsum(ad.relu(x))
    assert tape.backward(y)[x].tolist() == [0.0, 0.0, 1.0]


def test_sigmoid_is_stable_for_large_inputs():
    with np.errstate(over="raise", invalid="raise"):
        out = ad.sigmoid(Tensor(np.array([-800.0, 0.0, 800.0]))).data
    assert out.tolist() == [0.0, 0.5, 1.0]


def test_maxpool_routes_to_first_argmax():
    x = Tensor(np.array([[[1.0], [3.0], [3.0]]]), requires_grad=True)
    with Tape() as tape:
        y = ad.tsum(ad.global_maxpool(x))
    assert tape.backward(y)[x].ravel().tolist() == [0.0, 1.0, 0.0]


def test_batchnorm_updates_running_stats():
    x = Tensor(np.array([[1.0], [3.0]]))
    mean, var = np.zeros(1), np.ones(1)
    ad.batchnorm(x, Tensor(np.ones(1)), Tensor(np.zeros(1)), mean, var, training=True, momentum=0.9)
    assert mean[0] == pytest.approx(0.2)
    assert var[0] == pytest.approx(0.9 + 0.1 * 1.0)


def test_dropout_inverted_scaling_and_inference_guard():
    x = Tensor(np.ones(10000))
    out = ad.dropout(x, 0.5, np.random.default_rng(0)).data
    assert set(np.unique(out)) <= {0.0, 2.0}
    assert abs(out.mean() - 1.0) < 0.05
    with pytest.raises(ValueError):
        ad.dropout(x, 0.5, np.random.default_rng(0), training=False)


def test_sym_normalize_matches_dense_formula():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 1, size=(5, 5))
    a = (a + a.T) / 2
    d = a.sum(axis=1)
    want = a / np.sqrt(np.outer(d, d))
    assert np.allclose(ad.sym_normalize(Tensor(a)).data, want, atol=1e-12)


def test_cosine_matrix_diagonal_is_one():
    z = Tensor(np.random.default_rng(0).normal(size=(3, 4, 5)))
    c = ad.cosine_similarity_matrix(z).data
    assert np.allclose(np.diagonal(c, axis1=1, axis2=2), 1.0, atol=1e-7)
    assert np.allclose(c, np.swapaxes(c, 1, 2))


def test_finite_difference_detects_wrong_gradient():
    x = Tensor(np.array([0.3, 0.7]), requires_grad=True)

    def fn():
        # apply a primitive whose backward we deliberately break below
        return ad.tsum(ad.sigmoid(x))

    original = ad.PRIMITIVES["sigmoid"]
    ad.PRIMITIVES["sigmoid"] = ad.Primitive(original.forward, lambda saved, g: (g,), original.n_inputs)
    try:
        report = finite_difference_check(fn, {"x": x})
    finally:
        ad.PRIMITIVES["sigmoid"] = original
    assert not report.passed(1e-4)


def test_finite_difference_requires_determinism():
    x = Tensor(np.ones(2), requires_grad=True)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        finite_difference_check(lambda: ad.tsum(x * Tensor(rng.normal(size=2))), {"x": x})


def test_tapes_are_thread_local():
    results = {}

    def work(k):
        x = Tensor(np.array(float(k)), requires_grad=True)
        with Tape() as tape:
            y = x * x
        results[k] = float(tape.backward(y)[x])

    threads = [threading.Thread(target=work, args=(k,)) for k in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == {k: 2.0 * k for k in range(4)}


shapes = hnp.array_shapes(min_dims=1, max_dims=3, min_side=1, max_side=4)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, shapes, elements=st.floats(-3, 3)))
def test_broadcast_add_gradient_sums_out(arr):
    x = Tensor(arr, requires_grad=True)
    b = Tensor(np.ones(arr.shape[-1:]), requires_grad=True)
    with Tape() as tape:
        y = ad.tsum(x + b)
    grads = tape.backward(y)
    assert np.array_equal(grads[x], np.ones_like(arr))
    assert np.array_equal(grads[b], np.full(arr.shape[-1:], arr.size // arr.shape[-1], dtype=float))
