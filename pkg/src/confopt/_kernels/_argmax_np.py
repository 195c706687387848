"""Pure-numpy kernel backend.

Same contracts as the compiled backend in ``_argmax_cy.pyx``. Scores for a
gain matrix G are ``eta @ G`` (column y of G scores class y) and argmax ties
always resolve to the larger class index.
"""

import numpy as np

BACKEND = "numpy"

# Gain matrices per chunk when sweeping many candidates; bounds the size of
# the (M, block*n) score buffer.
_BLOCK = 128


def _argmax_tie_high(scores: np.ndarray) -> np.ndarray:
    """Argmax over the last axis with ties going to the larger index."""
    n = scores.shape[-1]
    return n - 1 - np.argmax(scores[..., ::-1], axis=-1)


def weighted_argmax_batch(eta: np.ndarray, gain: np.ndarray) -> np.ndarray:
    """Predicted class index (0-based) for each row of ``eta`` under ``gain``."""
    return _argmax_tie_high(eta @ gain).astype(np.int64, copy=False)


def per_gain_confusions(eta: np.ndarray, label_idx: np.ndarray, gains: np.ndarray) -> np.ndarray:
    """Confusion matrix of the argmax rule of each gain matrix.

    Parameters
    ----------
    eta : (M, n) float64
        Score vectors (conditional class probability estimates) per point.
    label_idx : (M,) int64
        True class indices, 0-based.
    gains : (T, n, n) float64
        Gain matrices to sweep.

    Returns
    -------
    (T, n, n) float64, entry [t, i, j] = fraction of points with true class i
    predicted as j by the argmax rule of gains[t].
    """
    m, n = eta.shape
    t_total = gains.shape[0]
    out = np.empty((t_total, n, n), dtype=np.float64)
    base = label_idx * n
    for start in range(0, t_total, _BLOCK):
        block = gains[start : start + _BLOCK]
        b = block.shape[0]
        # One BLAS call for the whole block: (M, n) @ (n, b*n) -> (M, b, n).
        scores = (eta @ block.transpose(1, 0, 2).reshape(n, b * n)).reshape(m, b, n)
        preds = _argmax_tie_high(scores)
        flat = base[:, None] + preds
        for k in range(b):
            out[start + k] = np.bincount(flat[:, k], minlength=n * n).reshape(n, n)
    out /= m
    return out


def mixture_predictions(eta: np.ndarray, gains: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted one-hot average of per-gain argmax predictions, shape (M, n)."""
    m, n = eta.shape
    out = np.zeros((m, n), dtype=np.float64)
    rows = np.arange(m)
    for gain, w in zip(gains, weights):
        out[rows, weighted_argmax_batch(eta, gain)] += w
    return out
