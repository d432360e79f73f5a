"""Small shared numerical kernels."""

from __future__ import annotations

import numpy as np

DEFAULT_BUDGET = 2**24


def kahan_cumsum(arr: np.ndarray, axis: int) -> np.ndarray:
    """Compensated running sums along one axis.

    Same contract as np.cumsum but with Kahan-style error carry, so prefix
    sums over ~1e6 terms keep full double precision. Works for real and
    complex input; the loop runs along the chosen axis only, everything else
    is vectorized.
    """
    moved = np.moveaxis(np.asarray(arr), axis, 0)
    out = np.empty_like(moved)
    total = moved[0].copy()
    comp = np.zeros_like(total)
    out[0] = total
    for t in range(1, moved.shape[0]):
        y = moved[t] - comp
        acc = total + y
        comp = (acc - total) - y
        total = acc
        out[t] = total
    return np.moveaxis(out, 0, axis)
