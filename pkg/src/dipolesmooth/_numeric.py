"""Small numeric helpers shared across the package."""

from __future__ import annotations

import numpy as np


def logsumexp(a, axis=None, keepdims=False):
    """log(sum(exp(a))) with the usual max shift; -inf blocks stay -inf.

    Lean replacement for the scipy version in hot loops (no dtype
    promotion or array-API dispatch overhead).
    """
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True) if a.size else np.float64(-np.inf)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = m_safe + np.log(np.sum(np.exp(a - m_safe), axis=axis, keepdims=True))
    out = np.where(np.isfinite(m), out, m)
    if not keepdims and axis is not None:
        out = np.squeeze(out, axis=axis)
    elif not keepdims:
        out = out.reshape(())
    if out.ndim == 0:
        return float(out)
    return out
