import math
import subprocess
import sys

import numpy as np
import pytest

from mflab import _kernels_py

try:
    from mflab import _kernels
    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled kernels not built")


def _cases():
    rng = np.random.default_rng(42)
    n = 4096
    v = rng.normal(size=n) * 5
    w = np.abs(rng.normal(size=n))
    w[::7] = 0.0  # zero-weight nodes must be skipped
    d = rng.normal(size=n)
    big = v + 690.0
    return v, w, d, big


@needs_compiled
def test_backend_parity_logsumexp():
    v, w, d, big = _cases()
    for vv in (v, big, -big):
        a = _kernels.logsumexp_weighted(vv, w)
        b = _kernels_py.logsumexp_weighted(vv, w)
        assert abs(a - b) < 1e-12 * max(1.0, abs(b))


@needs_compiled
def test_backend_parity_line_and_scaled():
    v, w, d, big = _cases()
    for t in (-2.0, -1e-5, 0.0, 0.3, 1.0):
        a = _kernels.logsumexp_weighted_line(v, d, t, w)
        b = _kernels_py.logsumexp_weighted_line(v, d, t, w)
        assert abs(a - b) < 1e-12 * max(1.0, abs(b))
        a = _kernels.logsumexp_weighted_scaled(d, t, w)
        b = _kernels_py.logsumexp_weighted_scaled(d, t, w)
        assert abs(a - b) < 1e-12 * max(1.0, abs(b))


@needs_compiled
def test_backend_parity_exp_shift():
    v, w, d, big = _cases()
    out_a = np.empty_like(v)
    out_b = np.empty_like(v)
    _kernels.exp_shift(v, 2.0, out_a)
    _kernels_py.exp_shift(v, 2.0, out_b)
    assert np.allclose(out_a, out_b, rtol=1e-15)
    with np.errstate(divide="ignore"):
        lw = np.log(w)
    scale = np.full_like(v, 1.5)
    _kernels.weighted_exp_shift(lw, v, 1.0, scale, out_a)
    _kernels_py.weighted_exp_shift(lw, v, 1.0, scale, out_b)
    assert np.allclose(out_a, out_b, rtol=1e-15)
    assert np.all(out_a[::7] == 0.0)  # zero weights stay exactly zero


def test_all_zero_weights_give_minus_inf():
    v = np.zeros(16)
    w = np.zeros(16)
    assert _kernels_py.logsumexp_weighted(v, w) == -math.inf
    if HAVE_COMPILED:
        assert _kernels.logsumexp_weighted(v, w) == -math.inf


def test_no_overflow_at_amplitude_700():
    v, w, d, big = _cases()
    for mod in ([_kernels, _kernels_py] if HAVE_COMPILED else [_kernels_py]):
        out = mod.logsumexp_weighted(big, w)
        assert math.isfinite(out) and out > 600


def test_pure_backend_selectable_via_env():
    code = ("import mflab; import sys; "
            "sys.exit(0 if mflab.backend_name() == 'pure-python' else 1)")
    proc = subprocess.run([sys.executable, "-c", code],
                          env={"MFLAB_PURE": "1", "PATH": "/usr/bin:/bin"})
    assert proc.returncode == 0
