"""Green function of Delta G = 8 pi - 8 pi delta_p on the flat unit torus.

The spectral solve is exact in the discrete Fourier representation; the
local expansion

    G(x) = -4 log r + A + b1 y1 + b2 y2 + c1 y1^2 + 2 c2 y1 y2 + c3 y2^2
           + O(r^3)

is recovered by least squares on an annulus around the source, with
displacements taken in the minimal-image convention.  An independent
Ewald-type lattice sum provides the continuum constant A for the unit
square torus.

Restricted to flat grids: on curved metrics the expansion requires
geodesic normal coordinates whose discrete construction would contaminate
the fitted coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from .errors import InsufficientSamples, InvalidParameter, UnsupportedMetric
from .surface import (
    GridPoint,
    ScalarField,
    TorusGrid,
    _check_same_grid,
    _freeze,
    min_image_delta,
    poisson_solve_flat,
)


@dataclass(frozen=True)
class GreenExpansion:
    source: GridPoint
    A: float
    b1: float
    b2: float
    c1: float
    c2: float
    c3: float
    fit_residual: float   # RMS misfit over the annulus
    r_min: float
    r_max: float

    def as_dict(self):
        return {
            "source": self.source.as_dict(),
            "A": self.A,
            "b1": self.b1,
            "b2": self.b2,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "fit_residual": self.fit_residual,
            "annulus": {"r_min": self.r_min, "r_max": self.r_max},
        }


def solve_green(grid: TorusGrid, p: GridPoint) -> ScalarField:
    """Spectral solve of Delta G = 8 pi - 8 pi delta_p with zero mean.

    The point mass sits on a single node with weight 1/spacing^2 so its
    integral is exactly 1; the zero mode is projected out, giving
    int G dv = 0.
    """
    if not grid.flat:
        raise UnsupportedMetric("Green machinery requires a flat grid")
    n = grid.n
    rhs = np.full((n, n), 8.0 * math.pi)
    rhs[p.i, p.j] -= 8.0 * math.pi * n * n
    g = poisson_solve_flat(grid, rhs)
    return ScalarField(grid=grid, values=_freeze(g))


def annulus_mask(grid: TorusGrid, p: GridPoint, r_min: float, r_max: float):
    """Boolean node mask r_min <= r <= r_max plus centered displacements."""
    x = np.arange(grid.n) * grid.spacing
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    y1 = min_image_delta(x1, p.x1)
    y2 = min_image_delta(x2, p.x2)
    r = np.sqrt(y1 * y1 + y2 * y2)
    return (r >= r_min) & (r <= r_max), y1, y2, r


def extract_expansion(grid: TorusGrid, G: ScalarField, p: GridPoint,
                      r_min: float, r_max: float) -> GreenExpansion:
    """Fit G + 4 log r against {1, y1, y2, y1^2, 2 y1 y2, y2^2} on an annulus."""
    if not grid.flat:
        raise UnsupportedMetric("expansion extraction requires a flat grid")
    _check_same_grid(grid, G)
    if r_min < 4.0 * grid.spacing:
        raise InvalidParameter(
            f"r_min must be >= 4*spacing = {4.0 * grid.spacing}")
    if r_max > 0.25 or r_max <= r_min:
        raise InvalidParameter("need r_min < r_max <= 0.25")
    mask, y1, y2, r = annulus_mask(grid, p, r_min, r_max)
    m = int(np.count_nonzero(mask))
    if m < 50:
        raise InsufficientSamples(f"annulus holds only {m} nodes (< 50)")

    target = G.values[mask] + 4.0 * np.log(r[mask])
    u1 = y1[mask]
    u2 = y2[mask]
    design = np.column_stack([
        np.ones(m), u1, u2, u1 * u1, 2.0 * u1 * u2, u2 * u2,
    ])
    coef, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    resid = design @ coef - target
    rms = float(np.sqrt(np.mean(resid * resid)))
    return GreenExpansion(
        source=p,
        A=float(coef[0]), b1=float(coef[1]), b2=float(coef[2]),
        c1=float(coef[3]), c2=float(coef[4]), c3=float(coef[5]),
        fit_residual=rms, r_min=r_min, r_max=r_max,
    )


def robin_constant_oracle(terms: int = 10_000) -> float:
    """Continuum constant A for the unit square torus by Ewald summation.

    Splits the periodic -Delta Green function (unit source, background -1,
    zero mean) into a Gaussian-screened real-space part and a rapidly
    converging reciprocal sum, then removes the -(1/2 pi) log r
    singularity at the source:

        A = 8 pi * lim_{x->0} [ G0(x) + (1/2 pi) log |x| ].

    ``terms`` caps the lattice points per sum; both sums decay like
    exp(-pi |n|^2), so the value saturates almost immediately.
    """
    if terms < 100:
        raise InvalidParameter("terms must be >= 100")
    m = max(3, math.isqrt(terms) // 2)
    rng = np.arange(-m, m + 1)
    n1, n2 = np.meshgrid(rng, rng, indexing="ij")
    nsq = (n1 * n1 + n2 * n2).astype(float)
    nonzero = nsq > 0
    # splitting parameter eta^2 = pi balances the two sums
    s_real = float(np.sum(exp1(math.pi * nsq[nonzero]))) / (4.0 * math.pi)
    s_recip = float(np.sum(np.exp(-math.pi * nsq[nonzero]) /
                           (4.0 * math.pi**2 * nsq[nonzero])))
    c0 = (-(np.euler_gamma + math.log(math.pi)) / (4.0 * math.pi)
          + s_real + s_recip - 1.0 / (4.0 * math.pi))
    return 8.0 * math.pi * c0
