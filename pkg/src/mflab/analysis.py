"""Blow-up and existence diagnostics.

Covers the explicit energy floor under concentration, the pointwise
existence condition at the maximizer of A + 2 log h, concentration masses
of e^v over shrinking balls, the entire-plane bubble profile and
comparison of rescaled minimizers against it, the Moser-Trudinger energy
chain, and the zero-avoidance check (concentration points must carry
h > 0 even when h has zeros).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .backend import kernels
from .errors import (
    EmptyAdmissibleSet,
    InsufficientSamples,
    InvalidBubble,
    InvalidParameter,
    UnsupportedMetric,
)
from .functional import (
    RHO_CRITICAL,
    empirical_tm_constant,
    eval_functional,
    validate_weight,
)
from .minimizer import ContinuationResult
from .surface import (
    GridPoint,
    ScalarField,
    TorusGrid,
    _check_same_grid,
    dirichlet_energy,
    gauss_curvature,
    gradient_values,
    integrate,
    laplacian,
    min_image_distance,
)

HALF_DIAMETER = 0.5 * math.sqrt(2.0)  # max torus distance on [0,1)^2


@dataclass(frozen=True)
class EnergyFloorReport:
    """Explicit lower bound the infimum satisfies under blow-up."""

    floor: float            # -8 pi - 8 pi log pi - 4 pi * score_max
    argmax_point: GridPoint
    robin_A: float
    score_max: float        # max over admissible nodes of A + 2 log h
    h_min_threshold: float

    def as_dict(self):
        return {
            "floor": self.floor,
            "argmax_point": self.argmax_point.as_dict(),
            "robin_A": self.robin_A,
            "score_max": self.score_max,
            "h_min_threshold": self.h_min_threshold,
        }


@dataclass(frozen=True)
class ConditionReport:
    """Pointwise existence condition at a candidate maximizer."""

    point: GridPoint
    lhs: float              # lap h + 2 (b1 k1 + b2 k2)
    rhs: float              # -(8 pi + b1^2 + b2^2 - 2 K) h
    margin: float
    holds: bool
    k1: float
    k2: float
    curvature: float
    h_at_point: float
    b1: float
    b2: float

    def as_dict(self):
        return {
            "point": self.point.as_dict(),
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "holds": self.holds,
            "k1": self.k1,
            "k2": self.k2,
            "curvature": self.curvature,
            "h_at_point": self.h_at_point,
            "b1": self.b1,
            "b2": self.b2,
        }


@dataclass(frozen=True)
class BlowupDiagnostics:
    epsilon: float
    u_max: float
    peak: GridPoint
    h_at_peak: float
    masses: list            # [(r, mass of e^v over B_r(peak))]
    bubble_dev: float | None

    def as_dict(self):
        return {
            "epsilon": self.epsilon,
            "u_max": self.u_max,
            "peak": self.peak.as_dict(),
            "h_at_peak": self.h_at_peak,
            "masses": [{"r": r, "mass": m} for r, m in self.masses],
            "bubble_dev": self.bubble_dev,
        }


def blowup_energy_floor(grid: TorusGrid, h: ScalarField, robin_A: float,
                        h_min_threshold: float) -> EnergyFloorReport:
    """Floor = -8 pi - 8 pi log pi - 4 pi max(A + 2 log h).

    On the flat torus A is source-independent, so the max runs over nodes
    with h above the threshold (exact zeros self-exclude: 2 log h diverges
    to -inf there).
    """
    if not grid.flat:
        raise UnsupportedMetric("energy floor needs a flat grid "
                                "(A is extracted flat-only)")
    validate_weight(grid, h)
    if h_min_threshold <= 0:
        raise InvalidParameter("h_min_threshold must be positive")
    admissible = h.values > h_min_threshold
    if not admissible.any():
        raise EmptyAdmissibleSet("no node has h above the threshold")
    score = np.where(admissible, robin_A + 2.0 * np.log(
        np.where(admissible, h.values, 1.0)), -np.inf)
    flat_idx = int(np.argmax(score))
    i, j = divmod(flat_idx, grid.n)
    score_max = float(score[i, j])
    floor = (-RHO_CRITICAL - RHO_CRITICAL * math.log(math.pi)
             - 4.0 * math.pi * score_max)
    return EnergyFloorReport(
        floor=floor, argmax_point=grid.point(i, j), robin_A=robin_A,
        score_max=score_max, h_min_threshold=h_min_threshold,
    )


def existence_condition(grid: TorusGrid, h: ScalarField, point: GridPoint,
                        b1: float, b2: float) -> ConditionReport:
    """Evaluate lap h + 2(b1 k1 + b2 k2) > -(8 pi + b1^2 + b2^2 - 2K) h.

    Derivatives are spectral; gradient components are expressed in the
    orthonormal frame at the point (factor e^{-phi} on conformal grids).
    """
    validate_weight(grid, h)
    lap_h = laplacian(grid, h).values[point.i, point.j]
    d1, d2 = gradient_values(grid, h.values)
    frame = math.exp(-float(grid.phi[point.i, point.j]))
    k1 = frame * float(d1[point.i, point.j])
    k2 = frame * float(d2[point.i, point.j])
    curv = float(gauss_curvature(grid).values[point.i, point.j])
    h_p = float(h.values[point.i, point.j])
    lhs = float(lap_h) + 2.0 * (b1 * k1 + b2 * k2)
    rhs = -(RHO_CRITICAL + b1 * b1 + b2 * b2 - 2.0 * curv) * h_p
    margin = lhs - rhs
    return ConditionReport(
        point=point, lhs=lhs, rhs=rhs, margin=margin, holds=margin > 0.0,
        k1=k1, k2=k2, curvature=curv, h_at_point=h_p, b1=b1, b2=b2,
    )


def concentration_masses(grid: TorusGrid, h: ScalarField, u: ScalarField,
                         radii, epsilon: float = math.nan) -> BlowupDiagnostics:
    """Masses of e^v over balls around the peak, v = u - log int e^u dv.

    Balls use the minimal-image flat distance; masses are nondecreasing in
    r and reach 1 at the half-diameter of the torus.
    """
    validate_weight(grid, h)
    _check_same_grid(grid, u)
    radii = [float(r) for r in radii]
    if any(r <= 0 or r > HALF_DIAMETER + 1e-12 for r in radii):
        raise InvalidParameter(
            f"radii must lie in (0, {HALF_DIAMETER:.6f}]")
    values = u.values
    flat_idx = int(np.argmax(values))
    i, j = divmod(flat_idx, grid.n)
    peak = grid.point(i, j)
    quad_flat = grid.quad.ravel()
    log_total = kernels.logsumexp_weighted(values.ravel(), quad_flat)
    dist = min_image_distance(grid, peak.x1, peak.x2).ravel()
    v_flat = np.ascontiguousarray(values.ravel())
    masses = []
    for r in radii:
        sel = dist <= r
        lm = kernels.logsumexp_weighted(
            np.ascontiguousarray(v_flat[sel]),
            np.ascontiguousarray(quad_flat[sel]))
        mass = math.exp(lm - log_total) if math.isfinite(lm) else 0.0
        masses.append((r, mass))
    return BlowupDiagnostics(
        epsilon=epsilon, u_max=float(values[i, j]), peak=peak,
        h_at_peak=float(h.values[i, j]), masses=masses, bubble_dev=None,
    )


def bubble_profile(h_peak: float, points) -> np.ndarray:
    """Entire-plane profile phi(y) = -2 log(1 + pi h_peak |y|^2).

    Solves Delta phi + 8 pi h_peak e^phi = 0 with phi(0) = 0 = sup phi.
    Only defined for h_peak > 0: with h_peak <= 0 no such concentrated
    profile exists, which is exactly why concentration points must carry
    positive weight.
    """
    if h_peak <= 0:
        raise InvalidBubble("bubble profile requires h_peak > 0")
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-1] != 2:
        raise InvalidParameter("points must have trailing dimension 2")
    rsq = pts[..., 0] ** 2 + pts[..., 1] ** 2
    return -2.0 * np.log1p(math.pi * h_peak * rsq)


def bubble_mass(h_peak: float, radius: float) -> float:
    """Closed-form int_{|y|<R} h_peak e^phi dy = 1 - 1/(1 + pi h_peak R^2)."""
    if h_peak <= 0:
        raise InvalidBubble("bubble profile requires h_peak > 0")
    x = math.pi * h_peak * radius * radius
    return x / (1.0 + x)


def compare_to_bubble(grid: TorusGrid, h: ScalarField, u: ScalarField,
                      lam: float, x_center: GridPoint,
                      window_radius: float, samples: int = 61) -> float:
    """Sup deviation of the rescaled field from the bubble profile.

    Rescales phi_disc(y) = u(x_center + y e^{-lam/2}) - lam on the disk
    |y| <= window_radius e^{lam/2} via periodic bicubic interpolation and
    compares against bubble_profile with h_peak = h(x_center).
    """
    validate_weight(grid, h)
    _check_same_grid(grid, u)
    h_peak = float(h.values[x_center.i, x_center.j])
    if h_peak <= 0:
        raise InvalidBubble("h vanishes at the window center")
    if lam <= 0:
        raise InvalidParameter("lam must be positive")
    if not (0 < window_radius <= 0.5):
        raise InvalidParameter("window_radius must lie in (0, 1/2]")
    n_inside = int(np.count_nonzero(
        min_image_distance(grid, x_center.x1, x_center.x2) <= window_radius))
    if n_inside < 10:
        raise InsufficientSamples(
            f"window holds only {n_inside} grid nodes (< 10)")

    lam_star = math.exp(0.5 * lam)
    y_max = window_radius * lam_star
    ax = np.linspace(-y_max, y_max, samples)
    y1, y2 = np.meshgrid(ax, ax, indexing="ij")
    keep = (y1 * y1 + y2 * y2) <= y_max * y_max
    y1 = y1[keep]
    y2 = y2[keep]
    x1 = (x_center.x1 + y1 / lam_star) / grid.spacing
    x2 = (x_center.x2 + y2 / lam_star) / grid.spacing
    interp = ndimage.map_coordinates(u.values, np.stack([x1, x2]),
                                     order=3, mode="grid-wrap")
    phi_disc = interp - lam
    phi_ref = bubble_profile(h_peak, np.stack([y1, y2], axis=-1))
    return float(np.max(np.abs(phi_disc - phi_ref)))


def energy_inequality_check(grid: TorusGrid, h: ScalarField, u: ScalarField,
                            epsilon: float,
                            c_emp: float | None = None) -> dict:
    """Moser-Trudinger energy chain at the empirical constant.

    With D = ||grad u||^2, rho = 8 pi - eps and ubar = int u dv:

        D/2 + rho ubar - rho (D/16 pi + ubar)
            <= F_eps(u) + rho log(C int h e^u dv / int e^u dv)

    holds whenever C is at least the ratio the sharp-coefficient
    inequality bounds; C defaults to the grid's empirical suite maximum.
    """
    if not (0.0 < epsilon < RHO_CRITICAL):
        raise InvalidParameter("epsilon must lie in (0, 8pi)")
    validate_weight(grid, h)
    _check_same_grid(grid, u)
    if c_emp is None:
        c_emp = empirical_tm_constant(grid)
    rho = RHO_CRITICAL - epsilon
    d = dirichlet_energy(grid, u)
    ubar = integrate(grid, u)
    quad_flat = grid.quad.ravel()
    log_he = kernels.logsumexp_weighted(u.values.ravel(),
                                        (h.values * grid.quad).ravel())
    log_e = kernels.logsumexp_weighted(u.values.ravel(), quad_flat)
    lhs = 0.5 * d + rho * ubar - rho * (d / (16.0 * math.pi) + ubar)
    value = eval_functional(grid, h, u, epsilon).value
    rhs = value + rho * (math.log(c_emp) + log_he - log_e)
    holds = lhs <= rhs + 1e-9 * max(1.0, abs(rhs))
    return {"lhs": lhs, "rhs": rhs, "holds": holds, "c_emp": c_emp}


def zero_avoidance_report(result: ContinuationResult, h: ScalarField,
                          threshold_frac: float) -> dict:
    """Did every recorded concentration point carry h above the threshold?"""
    if len(result.steps) == 0:
        raise InvalidParameter("continuation has no recorded steps")
    if not (0 < threshold_frac <= 1):
        raise InvalidParameter("threshold_frac must lie in (0, 1]")
    h_max = float(np.max(h.values))
    min_h = min(s.h_at_peak for s in result.steps)
    threshold = threshold_frac * h_max
    return {
        "min_h_at_peak": min_h,
        "h_max": h_max,
        "threshold": threshold,
        "threshold_frac": threshold_frac,
        "passes": bool(min_h >= threshold),
    }
