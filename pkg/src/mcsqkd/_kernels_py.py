"""Numpy implementations of the hot kernels (fallback for the compiled module)."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

# Detector order used throughout: D1H, D1V, D2H, D2V.
# Accepted coincidences y1..y4: (D1H,D1V), (D2H,D2V), (D1H,D2V), (D2H,D1V).
PATTERN_CLICKS = np.array([[0, 1], [2, 3], [0, 3], [2, 1]], dtype=np.int64)
PATTERN_SILENT = np.array([[2, 3], [0, 1], [2, 1], [0, 3]], dtype=np.int64)


@lru_cache(maxsize=None)
def _compositions(n: int) -> np.ndarray:
    rows = [
        (a, b, c, n - a - b - c)
        for a in range(n + 1)
        for b in range(n + 1 - a)
        for c in range(n + 1 - a - b)
    ]
    out = np.array(rows, dtype=np.int64).reshape(-1, 4)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _log_factorials(k_max: int) -> np.ndarray:
    return np.array([math.lgamma(k + 1.0) for k in range(k_max + 1)])


def _expand_power(n: int, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Monomials and coefficients of ``(u . a)^n`` over four modes."""
    exps = _compositions(n)
    lf = _log_factorials(n)
    multinom = np.exp(lf[n] - lf[exps].sum(axis=1))
    coef = multinom * np.prod(u[None, :] ** exps, axis=1)
    return exps, coef


def fock_product(n: int, m: int, u, v) -> tuple[np.ndarray, np.ndarray]:
    """Output Fock distribution of ``(u.a+)^n (v.a+)^m |0> / sqrt(n! m!)``.

    Returns the occupied 4-mode configurations (sorted by mixed-radix index)
    and their probabilities.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    ea, ca = _expand_power(n, u)
    eb, cb = _expand_power(m, v)
    base = n + m + 1
    radix = base ** np.arange(4, dtype=np.int64)
    flat = ((ea @ radix)[:, None] + (eb @ radix)[None, :]).ravel()
    coef = (ca[:, None] * cb[None, :]).ravel()
    size = base**4
    re = np.bincount(flat, coef.real, minlength=size)
    im = np.bincount(flat, coef.imag, minlength=size)
    keys = np.unique(flat)
    configs = (keys[:, None] // radix[None, :]) % base
    lf = _log_factorials(n + m)
    weight = np.exp(lf[configs].sum(axis=1) - lf[n] - lf[m])
    probs = (re[keys] ** 2 + im[keys] ** 2) * weight
    return configs, probs


def segment_pattern_sums(configs, probs, offsets, click, silence) -> np.ndarray:
    """Per-segment sums of the four accepted-coincidence probabilities.

    Row r contributes ``probs[r] * click[k_a] * click[k_b] * silence[k_c] * silence[k_d]``
    to pattern (a, b | c, d). ``offsets`` has one more entry than there are segments.
    """
    configs = np.asarray(configs, dtype=np.int64)
    probs = np.asarray(probs, dtype=float)
    offsets = np.asarray(offsets, dtype=np.int64)
    click = np.asarray(click, dtype=float)
    silence = np.asarray(silence, dtype=float)
    nseg = offsets.size - 1
    out = np.zeros((nseg, 4))
    if configs.shape[0] == 0:
        return out
    c = click[configs]
    s = silence[configs]
    rows = np.empty((configs.shape[0], 4))
    for j in range(4):
        a, b = PATTERN_CLICKS[j]
        e, f = PATTERN_SILENT[j]
        rows[:, j] = probs * c[:, a] * c[:, b] * s[:, e] * s[:, f]
    starts = offsets[:-1]
    nonempty = offsets[1:] > starts
    out[nonempty] = np.add.reduceat(rows, starts[nonempty], axis=0)
    return out
