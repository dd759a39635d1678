"""Descent minimization of the subcritical functional, and continuation.

The iteration lives on the zero-mean gauge slice.  Each step takes the
L^2(dv) gradient, optionally preconditions it with the inverse Laplacian
(zero mode removed), and backtracks until the Armijo condition holds.
Along a search ray u - t*d the Dirichlet and mean terms are quadratic /
linear in t, so only the log-mass term is re-evaluated per trial step;
that reduction is the hot kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import InvalidParameter
from .functional import (
    RHO_CRITICAL,
    FunctionalReport,
    eval_functional,
    validate_weight,
)
from .surface import (
    GridPoint,
    ScalarField,
    TorusGrid,
    _check_same_grid,
    _freeze,
    make_field,
)


@dataclass(frozen=True)
class MinimizeOptions:
    grad_tol: float = 1e-8
    max_iters: int = 50_000
    step_init: float = 1.0
    armijo_c: float = 1e-4
    armijo_backtrack: float = 0.5
    preconditioned: bool = False
    record_trace: bool = False

    def __post_init__(self):
        if self.grad_tol <= 0 or self.max_iters < 1:
            raise InvalidParameter("grad_tol > 0 and max_iters >= 1 required")
        if not (0 < self.armijo_c < 1 and 0 < self.armijo_backtrack < 1):
            raise InvalidParameter("armijo parameters must lie in (0,1)")

    def as_dict(self):
        return {
            "grad_tol": self.grad_tol,
            "max_iters": self.max_iters,
            "step_init": self.step_init,
            "armijo_c": self.armijo_c,
            "armijo_backtrack": self.armijo_backtrack,
            "preconditioned": self.preconditioned,
        }


@dataclass(frozen=True)
class MinimizeResult:
    u: ScalarField          # unit-mass gauge: int h e^u dv = 1
    report: FunctionalReport
    grad_norm: float
    iters: int
    converged: bool
    options: MinimizeOptions
    gauge_residual: float = 0.0  # |int u dv| of the final zero-mean iterate
    trace: list | None = None    # per-iteration values when record_trace


@dataclass(frozen=True)
class ContinuationStep:
    epsilon: float
    u_max: float            # sup of the unit-mass minimizer
    peak: GridPoint         # argmax node (lexicographic tie-break)
    h_at_peak: float
    value: float
    grad_norm: float
    dirichlet: float        # ||grad u||_2^2
    iters: int
    converged: bool

    def as_dict(self):
        return {
            "epsilon": self.epsilon,
            "u_max": self.u_max,
            "peak": self.peak.as_dict(),
            "h_at_peak": self.h_at_peak,
            "value": self.value,
            "grad_norm": self.grad_norm,
            "dirichlet": self.dirichlet,
            "iters": self.iters,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class ContinuationResult:
    steps: list
    classification: str     # converged-family | blowup-suspected | stalled
    blowup_lambda: float
    growth_tol: float       # classifier threshold, reported not sharp

    def as_dict(self):
        return {
            "steps": [s.as_dict() for s in self.steps],
            "classification": self.classification,
            "blowup_lambda": self.blowup_lambda,
            "growth_tol": self.growth_tol,
        }


def default_schedule(count: int = 12):
    """Geometric subcritical schedule 8 pi 2^{-k}, k = 1..count."""
    return [RHO_CRITICAL * 2.0 ** (-k) for k in range(1, count + 1)]


class _DescentState:
    """Cached per-iterate spectral data for one minimization run."""

    def __init__(self, grid: TorusGrid, h: ScalarField, epsilon: float):
        self.grid = grid
        self.rho = RHO_CRITICAL - epsilon
        self.quad_flat = grid.quad.ravel()
        self.wh = np.ascontiguousarray((h.values * grid.quad).ravel())
        with np.errstate(divide="ignore"):
            self.lwh = np.ascontiguousarray(np.log(self.wh))
        self.inv_quad = np.ascontiguousarray((1.0 / grid.quad).ravel())
        self.n4 = float(grid.n) ** 4
        self._buf = np.empty(grid.n * grid.n)

    def spectral(self, u: np.ndarray):
        fh = np.fft.fft2(u)
        dirichlet = float(np.sum(self.grid.ksq *
                                 (fh.real**2 + fh.imag**2)) / self.n4)
        flat_lap = np.fft.ifft2(-self.grid.ksq * fh).real
        return fh, dirichlet, flat_lap

    def log_mass(self, u: np.ndarray) -> float:
        return kernels.logsumexp_weighted(u.ravel(), self.wh)

    def density(self, u: np.ndarray, lm: float) -> np.ndarray:
        kernels.weighted_exp_shift(self.lwh, u.ravel(), lm, self.inv_quad,
                                   self._buf)
        return self._buf.reshape(self.grid.n, self.grid.n)

    def grad_norm_of(self, u: np.ndarray) -> float:
        """L^2(dv) norm of the gradient at u (overwrites the density buffer)."""
        grid = self.grid
        flat_lap = np.fft.ifft2(-grid.ksq * np.fft.fft2(u)).real
        lap_g = flat_lap if grid.flat else flat_lap / grid.area_element
        lm = self.log_mass(u)
        density = self.density(u, lm)
        g = -lap_g + self.rho * (1.0 - density)
        return float(np.sqrt(np.sum(grid.quad * g * g)))


def minimize_subcritical(grid: TorusGrid, h: ScalarField, epsilon: float,
                         opts: MinimizeOptions | None = None,
                         u_init: ScalarField | None = None) -> MinimizeResult:
    """Minimize F_eps over the zero-mean gauge; return the unit-mass result.

    Non-convergence within max_iters is reported via converged=False, not
    an exception.  A converged result always satisfies the constant-level
    bound F_eps(u) <= -(8 pi - eps) log int h dv (if a warm start ends
    above that level, the solve is repeated once from u = 0).
    """
    if opts is None:
        opts = MinimizeOptions()
    if not (0.0 < epsilon < RHO_CRITICAL):
        raise InvalidParameter(f"epsilon must lie in (0, 8pi), got {epsilon}")
    validate_weight(grid, h)
    if u_init is not None:
        _check_same_grid(grid, u_init)

    result = _descend(grid, h, epsilon, opts, u_init)
    if u_init is not None:
        log_h_mass = kernels.logsumexp_weighted(
            np.zeros(grid.n * grid.n), (h.values * grid.quad).ravel())
        bound = -(RHO_CRITICAL - epsilon) * log_h_mass
        if not result.converged or result.report.value > bound + 1e-8:
            retry = _descend(grid, h, epsilon, opts, None)
            if retry.report.value < result.report.value or (
                    retry.converged and not result.converged):
                result = retry
    return result


def _descend(grid, h, epsilon, opts, u_init) -> MinimizeResult:
    st = _DescentState(grid, h, epsilon)
    rho = st.rho
    quad = grid.quad

    if u_init is None:
        u = np.zeros((grid.n, grid.n))
    else:
        u = u_init.values.copy()
    u -= np.sum(quad * u)  # zero-mean gauge (area is 1)

    step_prev = opts.step_init
    iters = 0
    converged = False
    grad_norm = math.inf
    trace = [] if opts.record_trace else None

    while True:
        fh, dir_u, flat_lap = st.spectral(u)
        lap_g = flat_lap if grid.flat else flat_lap / grid.area_element
        ubar = float(np.sum(quad * u))
        lm = st.log_mass(u)
        density = st.density(u, lm)
        g = -lap_g + rho * (1.0 - density)
        grad_norm = float(np.sqrt(np.sum(quad * g * g)))
        value = 0.5 * dir_u + rho * ubar - rho * lm
        if trace is not None:
            trace.append(value)

        if grad_norm <= opts.grad_tol:
            converged = True
            break
        if iters >= opts.max_iters:
            break

        if opts.preconditioned:
            rhs = np.fft.fft2(g if grid.flat else g * grid.area_element)
            with np.errstate(divide="ignore", invalid="ignore"):
                dh_hat = np.where(grid.ksq > 0, rhs / grid.ksq, 0.0)
            dh_hat[0, 0] = 0.0
            d = np.fft.ifft2(dh_hat).real
        else:
            d = g
        slope = float(np.sum(quad * g * d))
        if slope <= 0.0:  # numerically defective direction; fall back
            d = g
            slope = grad_norm * grad_norm

        d_hat = np.fft.fft2(d)
        dir_d = float(np.sum(grid.ksq * (d_hat.real**2 + d_hat.imag**2))
                      / st.n4)
        cross = float(np.sum(grid.ksq * (fh.real * d_hat.real +
                                         fh.imag * d_hat.imag)) / st.n4)
        dbar = float(np.sum(quad * d))

        # Decrease along the ray, evaluated without the O(1) cancellation
        # of trial-minus-value: the log-mass change is taken directly as
        # log int q e^{-t d} against the current density q (sum = 1), so
        # its absolute error is O(eps).  Once the required Armijo decrease
        # falls below that resolution the test switches to the gradient
        # norm, which stays accurately measurable down to the tolerance.
        q = density.ravel() * st.quad_flat
        noise = 64.0 * np.finfo(float).eps * (1.0 + abs(value))
        t = min(opts.step_init, step_prev / opts.armijo_backtrack)
        accepted = False
        u_next = None
        for _ in range(200):
            need = opts.armijo_c * t * slope
            if need > noise:
                logratio = kernels.logsumexp_weighted_scaled(d.ravel(), -t, q)
                delta = (0.5 * t * t * dir_d - t * cross - rho * t * dbar
                         - rho * logratio)
                if delta <= -need:
                    accepted = True
                    break
            else:
                u_try = u - t * d
                u_try -= np.sum(quad * u_try)
                if st.grad_norm_of(u_try) < grad_norm:
                    accepted = True
                    u_next = u_try
                    break
            t *= opts.armijo_backtrack
        if not accepted:
            break  # step underflow: no further progress possible

        if u_next is None:
            u = u - t * d
            u -= np.sum(quad * u)
        else:
            u = u_next
        step_prev = t
        iters += 1

    gauge_residual = abs(float(np.sum(quad * u)))
    lm = st.log_mass(u)
    u_norm = make_field(grid, u - lm)
    report = eval_functional(grid, h, u_norm, epsilon)
    return MinimizeResult(u=u_norm, report=report, grad_norm=grad_norm,
                          iters=iters, converged=converged, options=opts,
                          gauge_residual=gauge_residual, trace=trace)


def continuation(grid: TorusGrid, h: ScalarField, eps_schedule,
                 opts: MinimizeOptions | None = None,
                 blowup_lambda: float = 30.0,
                 growth_tol: float = 0.1,
                 warm_start: bool = True,
                 step_callback=None) -> ContinuationResult:
    """Solve along a decreasing epsilon schedule and classify the family.

    blowup-suspected when some u_max exceeds blowup_lambda, or when u_max
    grows by more than growth_tol per step over the last 3 steps with the
    Dirichlet energy increasing as well (a saturating family has step
    differences collapsing to rounding level, a concentrating one grows by
    about log 2 per halving of epsilon); stalled when a solve fails to
    converge (recording stops there).  Thresholds are echoed in the
    result; they are working desk-scale choices, not sharp.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if len(eps_schedule) == 0:
        raise InvalidParameter("empty epsilon schedule")
    if any(not (0.0 < e < RHO_CRITICAL) for e in eps_schedule):
        raise InvalidParameter("schedule entries must lie in (0, 8pi)")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise InvalidParameter("schedule must be strictly decreasing")
    if blowup_lambda <= 0:
        raise InvalidParameter("blowup_lambda must be positive")
    validate_weight(grid, h)

    steps = []
    u_warm = None
    stalled = False
    for eps in eps_schedule:
        res = minimize_subcritical(grid, h, eps, opts, u_init=u_warm)
        values = res.u.values
        flat_idx = int(np.argmax(values))  # first max = lexicographic (i, j)
        i, j = divmod(flat_idx, grid.n)
        peak = grid.point(i, j)
        step = ContinuationStep(
            epsilon=eps,
            u_max=float(values[i, j]),
            peak=peak,
            h_at_peak=float(h.values[i, j]),
            value=res.report.value,
            grad_norm=res.grad_norm,
            dirichlet=2.0 * res.report.dirichlet_term,
            iters=res.iters,
            converged=res.converged,
        )
        steps.append(step)
        if step_callback is not None:
            step_callback(step, res)
        if not res.converged:
            stalled = True
            break
        if warm_start:
            u_warm = res.u

    if stalled:
        classification = "stalled"
    else:
        lam = [s.u_max for s in steps]
        dir_e = [s.dirichlet for s in steps]
        growing = (len(steps) >= 3
                   and lam[-2] - lam[-3] > growth_tol
                   and lam[-1] - lam[-2] > growth_tol
                   and dir_e[-3] < dir_e[-2] < dir_e[-1])
        if max(lam) > blowup_lambda or growing:
            classification = "blowup-suspected"
        else:
            classification = "converged-family"
    return ContinuationResult(steps=steps, classification=classification,
                              blowup_lambda=blowup_lambda,
                              growth_tol=growth_tol)


def total_iterations(result: ContinuationResult) -> int:
    return sum(s.iters for s in result.steps)


def oscillation_monitor(grid: TorusGrid, h: ScalarField, u: ScalarField,
                        domain_mask, delta: float) -> dict:
    """Mass of h e^u over a domain, and oscillation of u - ubar inside it.

    domain_mask is a boolean node array or a predicate of coordinates; the
    oscillation is taken on the erosion of the domain by distance delta.
    Diagnostic only: no bound is asserted.
    """
    validate_weight(grid, h)
    _check_same_grid(grid, u)
    if not (0.0 < delta < 0.5):
        raise InvalidParameter("delta must lie in (0, 1/2)")
    if callable(domain_mask):
        x1, x2 = grid.coords()
        mask = np.asarray(domain_mask(x1, x2), dtype=bool)
    else:
        mask = np.asarray(domain_mask, dtype=bool)
    if mask.shape != (grid.n, grid.n):
        raise InvalidParameter("mask shape does not match grid")
    from .errors import InvalidDomain
    if not mask.any():
        raise InvalidDomain("empty domain mask")

    wh = (h.values * grid.quad).ravel()
    total = kernels.logsumexp_weighted(u.values.ravel(), wh)
    if abs(math.exp(total) - 1.0) > 1e-8:
        raise InvalidParameter("u must be unit-mass normalized "
                               "(int h e^u dv = 1)")
    mask_flat = mask.ravel()
    lm_mass = kernels.logsumexp_weighted(
        np.ascontiguousarray(u.values.ravel()[mask_flat]),
        np.ascontiguousarray(wh[mask_flat]))
    mass = math.exp(lm_mass) if math.isfinite(lm_mass) else 0.0

    if mask.all():
        core = mask
    else:
        # erode by delta: drop nodes with a complement node within delta
        from .surface import min_image_distance
        disk = (min_image_distance(grid, 0.0, 0.0) <= delta).astype(float)
        counts = np.fft.ifft2(np.fft.fft2((~mask).astype(float)) *
                              np.fft.fft2(disk)).real
        core = mask & (counts < 0.5)
    if not core.any():
        raise InvalidDomain("domain erodes to nothing at this delta")
    w = u.values - float(np.sum(grid.quad * u.values))
    osc = float(np.max(w[core]) - np.min(w[core]))
    return {"mass": mass, "osc": osc}
