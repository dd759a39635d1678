"""Builtin weight fields, conformal factors, and synthetic test fields."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameter
from .surface import ScalarField, TorusGrid, make_field, min_image_distance


def constant_weight(grid: TorusGrid, value: float = 1.0) -> ScalarField:
    if value <= 0:
        raise InvalidParameter("constant weight must be positive")
    return make_field(grid, np.full((grid.n, grid.n), float(value)))


def cosine_line_zero(grid: TorusGrid) -> ScalarField:
    """h = 1 + cos(2 pi x1): nonnegative with a zero line at x1 = 1/2."""
    x1, _ = grid.coords()
    return make_field(grid, 1.0 + np.cos(2.0 * np.pi * x1))


def single_peak(grid: TorusGrid, center=(0.5, 0.5), sigma: float = 0.06,
                cutoff_radius: float = 0.2) -> ScalarField:
    """Periodized Gaussian bump clamped to 0 outside cutoff_radius.

    Peak value 1; identically zero on most of the torus.
    """
    if sigma <= 0 or not (0 < cutoff_radius <= 0.5):
        raise InvalidParameter("single-peak needs sigma > 0, cutoff in (0, 1/2]")
    d = min_image_distance(grid, center[0], center[1])
    g = np.exp(-d * d / (2.0 * sigma * sigma))
    cut = np.exp(-cutoff_radius**2 / (2.0 * sigma * sigma))
    h = np.clip((g - cut) / (1.0 - cut), 0.0, None)
    return make_field(grid, h)


BUILTIN_WEIGHTS = ("constant", "cosine-line-zero", "single-peak")


def builtin_weight(grid: TorusGrid, spec) -> ScalarField:
    """Build a weight from a name or a {kind: ...} descriptor."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "constant":
        return constant_weight(grid, spec.get("value", 1.0))
    if kind == "cosine-line-zero":
        return cosine_line_zero(grid)
    if kind == "single-peak":
        return single_peak(
            grid,
            center=tuple(spec.get("center", (0.5, 0.5))),
            sigma=spec.get("sigma", 0.06),
            cutoff_radius=spec.get("cutoff_radius", 0.2),
        )
    raise InvalidParameter(f"unknown weight kind {kind!r}")


def conformal_from_spec(spec):
    """Descriptor -> callable phi(x1, x2), or None for a flat metric.

    Supported: {"kind": "cosine", "amplitude": a, "mode": [k1, k2],
    "phase": p} and {"kind": "sum", "terms": [cosine-spec, ...]}.
    """
    if spec is None:
        return None

    def one_term(term):
        a = float(term.get("amplitude", 0.0))
        k1, k2 = term.get("mode", [1, 0])
        phase = float(term.get("phase", 0.0))
        return lambda x1, x2: a * np.cos(
            2.0 * np.pi * (k1 * x1 + k2 * x2) + phase)

    kind = spec.get("kind")
    if kind == "cosine":
        return one_term(spec)
    if kind == "sum":
        fns = [one_term(t) for t in spec.get("terms", [])]
        return lambda x1, x2: sum(f(x1, x2) for f in fns)
    raise InvalidParameter(f"unknown conformal kind {kind!r}")


def random_smooth(grid: TorusGrid, rng: np.random.Generator,
                  max_mode: int = 6, amplitude: float = 1.0) -> ScalarField:
    """Band-limited random field: Gaussian mode coefficients with decay."""
    x1, x2 = grid.coords()
    f = np.zeros((grid.n, grid.n))
    for k1 in range(-max_mode, max_mode + 1):
        for k2 in range(0, max_mode + 1):
            if k2 == 0 and k1 <= 0:
                continue
            a, b = rng.normal(size=2)
            decay = np.exp(-(k1 * k1 + k2 * k2) / float(max_mode))
            phase = 2.0 * np.pi * (k1 * x1 + k2 * x2)
            f += decay * (a * np.cos(phase) + b * np.sin(phase))
    return make_field(grid, amplitude * f)


def truncated_bubble(grid: TorusGrid, amplitude: float,
                     center=(0.5, 0.5), h_peak: float = 1.0) -> ScalarField:
    """Concentrated profile lam - 2 log(1 + pi h_peak e^lam r^2).

    Periodized by the min-image distance; max value = amplitude at the
    center.  Stable for amplitudes up to ~700 (log-space evaluation).
    """
    if h_peak <= 0:
        raise InvalidParameter("bubble needs h_peak > 0")
    d = min_image_distance(grid, center[0], center[1])
    with np.errstate(divide="ignore"):
        z = amplitude + np.log(np.pi * h_peak) + 2.0 * np.log(d)
    # log(1 + e^z) without overflow; z = -inf at the center node
    softplus = np.logaddexp(0.0, z)
    return make_field(grid, amplitude - 2.0 * softplus)
