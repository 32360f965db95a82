"""First-order linear recurrences over the time axis, sequential and parallel.

The recurrence ``h_l = a_l * h_{l-1} + b_l`` with ``h_0 = 0`` underlies both
the plain cumulative sum (``a = 1``) and the channelwise geometric scan
(``a = lambda`` constant).  The parallel mode evaluates the same recurrence
by prefix doubling over the associative composition

    (a1, b1) then (a2, b2)  ==  (a1 * a2, a2 * b1 + b2),

so both modes agree up to floating-point reassociation; the sequential loop
is the reference semantics.
"""

from __future__ import annotations

import numpy as np


def linear_recurrence(coeffs, values: np.ndarray, parallel: bool = False) -> np.ndarray:
    """Solve ``h_l = coeffs_l * h_{l-1} + values_l`` along axis 0 with ``h_0 = 0``.

    ``coeffs`` broadcasts against ``values`` (e.g. a constant per-channel
    decay row).  Returns the stacked ``h_1..h_L``.
    """
    values = np.asarray(values, dtype=float)
    a = np.broadcast_to(np.asarray(coeffs, dtype=float), values.shape)
    if values.shape[0] == 0:
        return values.copy()
    if not parallel:
        out = np.empty_like(values)
        h = np.zeros(values.shape[1:])
        for l in range(values.shape[0]):
            h = a[l] * h + values[l]
            out[l] = h
        return out
    acc_a = np.array(a, copy=True)
    acc_b = values.copy()
    offset = 1
    while offset < values.shape[0]:
        acc_b[offset:] = acc_a[offset:] * acc_b[:-offset] + acc_b[offset:]
        acc_a[offset:] = acc_a[offset:] * acc_a[:-offset]
        offset *= 2
    return acc_b


def geometric_scan(values: np.ndarray, decay, parallel: bool = False) -> np.ndarray:
    """Channelwise geometric scan: ``out_l = sum_{k<=l} decay^(l-k) values_k``."""
    return linear_recurrence(np.asarray(decay, dtype=float), values, parallel=parallel)
