"""Kernel backend selection.

Imports the compiled Cython kernels when the extension was built, otherwise
falls back to the numpy implementations. Both expose the same three
functions; ``BACKEND`` names the one in use ("cython" or "numpy").
"""

import os

import numpy as np

if os.environ.get("CONFOPT_FORCE_NUMPY_KERNELS"):
    from confopt._kernels import _argmax_np as _impl
else:
    try:
        from confopt._kernels import _argmax_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        from confopt._kernels import _argmax_np as _impl

BACKEND: str = _impl.BACKEND


def _c64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def weighted_argmax_batch(eta, gain):
    """0-based predicted class per row of ``eta`` under one gain matrix."""
    return _impl.weighted_argmax_batch(_c64(eta), _c64(gain))


def per_gain_confusions(eta, label_idx, gains):
    """(T, n, n) confusion matrices, one per gain matrix."""
    idx = np.ascontiguousarray(label_idx, dtype=np.int64)
    return _impl.per_gain_confusions(_c64(eta), idx, _c64(gains))


def mixture_predictions(eta, gains, weights):
    """(M, n) weighted one-hot average of per-gain argmax predictions."""
    return _impl.mixture_predictions(_c64(eta), _c64(gains), _c64(weights))
