"""Parity tests between the compiled kernels and the numpy fallback."""

import numpy as np
import pytest

import confopt._kernels as kernels
from confopt._kernels import _argmax_np

try:
    from confopt._kernels import _argmax_cy
except ImportError:
    _argmax_cy = None

BOTH = [_argmax_np] if _argmax_cy is None else [_argmax_np, _argmax_cy]


def workload(seed=0, m=500, n=4, t=7):
    rng = np.random.default_rng(seed)
    eta = rng.dirichlet(np.ones(n), size=m)
    labels = rng.integers(0, n, size=m).astype(np.int64)
    gains = rng.uniform(-1.0, 1.0, size=(t, n, n))
    weights = rng.dirichlet(np.ones(t))
    return eta, labels, gains, weights


def slow_weighted_argmax(eta, gain):
    """Reference: per-row score loop with the larger-index tie rule."""
    m, n = eta.shape
    out = np.empty(m, dtype=np.int64)
    for r in range(m):
        best, best_y = -np.inf, 0
        for y in range(n):
            s = float(eta[r] @ gain[:, y])
            if s >= best:
                best, best_y = s, y
        out[r] = best_y
    return out


def test_numpy_backend_matches_reference_loop():
    eta, _, gains, _ = workload(seed=1)
    for g in gains:
        got = _argmax_np.weighted_argmax_batch(eta, g)
        assert np.array_equal(got, slow_weighted_argmax(eta, g))


@pytest.mark.skipif(_argmax_cy is None, reason="compiled extension not built")
def test_backends_agree_on_generic_data():
    eta, labels, gains, weights = workload(seed=2, m=800, n=3, t=11)
    a = _argmax_np.weighted_argmax_batch(eta, gains[0])
    b = _argmax_cy.weighted_argmax_batch(eta, gains[0])
    assert np.array_equal(a, b)
    ca = _argmax_np.per_gain_confusions(eta, labels, gains)
    cb = _argmax_cy.per_gain_confusions(eta, labels, gains)
    # The accumulation order differs (count then divide vs add 1/m per
    # point), so agreement is to rounding, not bitwise.
    assert np.abs(ca - cb).max() <= 1e-12
    pa = _argmax_np.mixture_predictions(eta, gains, weights)
    pb = _argmax_cy.mixture_predictions(eta, gains, weights)
    assert np.abs(pa - pb).max() <= 1e-12


@pytest.mark.skipif(_argmax_cy is None, reason="compiled extension not built")
def test_backends_agree_on_exact_ties():
    # Uniform scores force the tie rule; both backends must pick the last class.
    eta = np.full((5, 3), 1.0 / 3.0)
    gain = np.ones((3, 3))
    for impl in (_argmax_np, _argmax_cy):
        assert np.all(impl.weighted_argmax_batch(eta, gain) == 2)
    # Two-way ties on designed score patterns.
    eta2 = np.array([[0.5, 0.5], [0.25, 0.75]])
    g2 = np.array([[1.0, 1.0], [1.0, 1.0]])
    for impl in (_argmax_np, _argmax_cy):
        assert np.array_equal(impl.weighted_argmax_batch(eta2, g2), [1, 1])


def test_per_gain_confusion_rows_match_label_frequencies():
    eta, labels, gains, _ = workload(seed=3, m=600, n=4, t=5)
    confs = kernels.per_gain_confusions(eta, labels, gains)
    freq = np.bincount(labels, minlength=4) / labels.size
    assert np.abs(confs.sum(axis=2) - freq).max() <= 1e-12
    assert np.abs(confs.sum(axis=(1, 2)) - 1.0).max() <= 1e-12


def test_mixture_predictions_are_weighted_one_hot_averages():
    eta, _, gains, weights = workload(seed=4, m=200, n=3, t=6)
    probs = kernels.mixture_predictions(eta, gains, weights)
    want = np.zeros_like(probs)
    for w, g in zip(weights, gains):
        preds = kernels.weighted_argmax_batch(eta, g)
        want[np.arange(eta.shape[0]), preds] += w
    assert np.abs(probs - want).max() <= 1e-12


def test_wrappers_accept_frozen_and_noncontiguous_arrays():
    eta, labels, gains, weights = workload(seed=5, m=100, n=3, t=4)
    frozen = eta.copy()
    frozen.setflags(write=False)
    strided = np.asfortranarray(gains[0])
    a = kernels.weighted_argmax_batch(frozen, strided)
    b = kernels.weighted_argmax_batch(eta, gains[0])
    assert np.array_equal(a, b)
    confs = kernels.per_gain_confusions(frozen, labels, gains)
    assert confs.shape == (4, 3, 3)


def test_backend_name_is_declared():
    assert kernels.BACKEND in ("cython", "numpy")
    assert _argmax_np.BACKEND == "numpy"
    if _argmax_cy is not None:
        assert _argmax_cy.BACKEND == "cython"
