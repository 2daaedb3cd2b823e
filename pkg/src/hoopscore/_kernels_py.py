"""Numpy implementations of the hot kernels.

These are the reference versions; ``_kernels.pyx`` must agree with them to
rounding. Selected by :mod:`hoopscore.kernels` when the compiled module is
missing or ``HOOPSCORE_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

LOG_2PI = float(np.log(2.0 * np.pi))
_CHUNK = 512


def window_starts(n_frames: int, segment_length: int, stride: int) -> np.ndarray:
    if n_frames < segment_length:
        return np.empty(0, dtype=np.int64)
    return np.arange(0, n_frames - segment_length + 1, stride, dtype=np.int64)


def window_halves_max(x: np.ndarray, segment_length: int, stride: int) -> np.ndarray:
    """Max of each channel over both halves of every window.

    ``x`` is ``(T, C)``; the result is ``(n_windows, 2C)`` laid out as
    ``(c0 first half, c0 second half, c1 first half, ...)``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n_frames, n_channels = x.shape
    half = segment_length // 2
    starts = window_starts(n_frames, segment_length, stride)
    out = np.empty((len(starts), 2 * n_channels), dtype=np.float64)
    if len(starts) == 0:
        return out
    view = sliding_window_view(x, half, axis=0)  # (T - half + 1, C, half)
    out[:, 0::2] = view[starts].max(axis=2)
    out[:, 1::2] = view[starts + half].max(axis=2)
    return out


def window_mean(x: np.ndarray, segment_length: int, stride: int) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    starts = window_starts(len(x), segment_length, stride)
    if len(starts) == 0:
        return np.empty(0, dtype=np.float64)
    view = sliding_window_view(x, segment_length)
    return view[starts].mean(axis=1)


def encode_batch(
    b: np.ndarray,
    means: np.ndarray,
    variances: np.ndarray,
    active: np.ndarray,
) -> np.ndarray:
    """Posterior responsibilities of the active components for every row of ``b``.

    Inactive columns are exactly zero. Computed in log space with a
    max-shift so floored variances cannot overflow.
    """
    b = np.ascontiguousarray(b, dtype=np.float64)
    n, _ = b.shape
    n_components = means.shape[0]
    phi = np.zeros((n, n_components), dtype=np.float64)
    if n == 0:
        return phi
    mu = means[active]
    var = variances[active]
    log_norm = np.log(2.0 * np.pi * var)  # (A, D)
    for lo in range(0, n, _CHUNK):
        rows = b[lo:lo + _CHUNK]
        diff = rows[:, None, :] - mu[None, :, :]
        logp = -0.5 * (log_norm[None, :, :] + diff * diff / var[None, :, :]).sum(axis=2)
        logp -= logp.max(axis=1, keepdims=True)
        p = np.exp(logp)
        p /= p.sum(axis=1, keepdims=True)
        phi[lo:lo + _CHUNK, active] = p
    return phi
