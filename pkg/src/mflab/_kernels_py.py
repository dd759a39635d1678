"""Pure-numpy fallback for the hot kernels.

Same contract as the compiled module ``_kernels``: overflow-safe weighted
log-sum-exp reductions over flat float64 arrays.  Weights may contain
zeros (nodes where h vanishes); the max-shift is taken over the support
of the weights only, so exponents stay bounded for any finite input.
Sums use math.fsum so the absolute error of a log-mass stays O(eps)
independent of the node count, matching the compensated summation of the
compiled kernels.
"""

import math

import numpy as np

IS_COMPILED = False


def logsumexp_weighted(v, w):
    """log(sum_i w_i * exp(v_i)) with w_i >= 0."""
    mask = w > 0.0
    if not mask.any():
        return -math.inf
    vm = v[mask]
    m = float(np.max(vm))
    s = math.fsum(w[mask] * np.exp(vm - m))
    return m + math.log(s)


def logsumexp_weighted_line(u, d, t, w):
    """log(sum_i w_i * exp(u_i + t * d_i)) with w_i >= 0."""
    mask = w > 0.0
    if not mask.any():
        return -math.inf
    e = u[mask] + t * d[mask]
    m = float(np.max(e))
    s = math.fsum(w[mask] * np.exp(e - m))
    return m + math.log(s)


def logsumexp_weighted_scaled(d, t, w):
    """log(sum_i w_i * exp(t * d_i)) with w_i >= 0."""
    mask = w > 0.0
    if not mask.any():
        return -math.inf
    e = t * d[mask]
    m = float(np.max(e))
    s = math.fsum(w[mask] * np.exp(e - m))
    return m + math.log(s)


def exp_shift(v, shift, out):
    """out_i = exp(v_i - shift)."""
    np.exp(v - shift, out=out)
    return out


def weighted_exp_shift(logw, v, shift, scale, out):
    """out_i = exp(logw_i + v_i - shift) * scale_i (zero where logw = -inf)."""
    np.exp(logw + (v - shift), out=out)
    out *= scale
    return out
