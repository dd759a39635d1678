"""Discrete unit-area tori with spectral calculus.

Geometry
--------
The fundamental domain is [0,1)^2 sampled on an n-by-n grid (n even,
spacing 1/n).  A conformal factor phi turns the flat metric into
g = e^{2 phi} (dx1^2 + dx2^2); the area element is e^{2 phi} and phi is
shifted by a constant at construction so the total area is exactly 1.

Sign convention
---------------
Delta = div(grad), i.e. Delta e^{2 pi i k.x} = -4 pi^2 |k|^2 e^{2 pi i k.x}.
With this sign, Delta(-4 log r) = -8 pi delta_0 in two dimensions, which is
the convention every downstream formula in this package relies on.
On conformal grids Delta_g = e^{-2 phi} Delta_flat.

All derivatives are Fourier multipliers, exact for band-limited data.
The Nyquist mode of first derivatives is zeroed (it has no well-defined
sign); second-derivative multipliers keep it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    IncompatibleField,
    InvalidFieldFile,
    InvalidMetric,
    InvalidResolution,
)


@dataclass(frozen=True)
class TorusGrid:
    """Immutable n-by-n discretization of a unit-area torus."""

    n: int
    spacing: float
    phi: np.ndarray           # conformal factor (log metric scale), n x n
    area_element: np.ndarray  # e^{2 phi}
    quad: np.ndarray          # node weights for integrals: e^{2 phi} / n^2
    flat: bool
    # cached Fourier multipliers
    ksq: np.ndarray           # 4 pi^2 |k|^2
    ik1: np.ndarray           # 2 pi i k1, Nyquist zeroed
    ik2: np.ndarray           # 2 pi i k2, Nyquist zeroed

    def coords(self):
        """Node coordinates (X1, X2) as meshgrids over [0,1)^2."""
        x = np.arange(self.n) * self.spacing
        return np.meshgrid(x, x, indexing="ij")

    def point(self, i: int, j: int) -> "GridPoint":
        n = self.n
        if not (0 <= i < n and 0 <= j < n):
            raise IncompatibleField(f"node ({i},{j}) outside {n}x{n} grid")
        return GridPoint(i=i, j=j, x1=i * self.spacing, x2=j * self.spacing)

    def nearest_point(self, x1: float, x2: float) -> "GridPoint":
        i = int(round(x1 / self.spacing)) % self.n
        j = int(round(x2 / self.spacing)) % self.n
        return self.point(i, j)


@dataclass(frozen=True)
class ScalarField:
    """Real values on the nodes of a TorusGrid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.shape != (self.grid.n, self.grid.n):
            raise IncompatibleField(
                f"field shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise IncompatibleField("field contains non-finite values")


@dataclass(frozen=True)
class GridPoint:
    i: int
    j: int
    x1: float
    x2: float

    def as_dict(self):
        return {"i": self.i, "j": self.j, "x1": self.x1, "x2": self.x2}


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def make_field(grid: TorusGrid, values) -> ScalarField:
    """Wrap an array or evaluate a callable f(x1, x2) on the grid nodes."""
    if callable(values):
        x1, x2 = grid.coords()
        values = values(x1, x2)
    values = np.broadcast_to(np.asarray(values, dtype=np.float64),
                             (grid.n, grid.n))
    return ScalarField(grid=grid, values=_freeze(np.array(values)))


def build_torus(n: int, conformal_spec=None) -> TorusGrid:
    """Build a unit-area torus grid, optionally conformally curved.

    conformal_spec is None (flat) or a callable f(x1, x2) giving the raw
    conformal factor; an additive constant is applied so the total area
    comes out exactly 1.
    """
    if n < 16 or n % 2 != 0:
        raise InvalidResolution(f"n must be even and >= 16, got {n}")
    spacing = 1.0 / n
    x = np.arange(n) * spacing
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    if conformal_spec is None:
        phi = np.zeros((n, n))
        flat = True
    else:
        phi = np.asarray(conformal_spec(x1, x2), dtype=np.float64)
        phi = np.broadcast_to(phi, (n, n)).copy()
        if not np.all(np.isfinite(phi)):
            raise InvalidMetric("conformal factor is not finite everywhere")
        # shift so that integral of e^{2 phi} is exactly 1
        area = np.sum(np.exp(2.0 * phi)) * spacing * spacing
        if not np.isfinite(area) or area <= 0:
            raise InvalidMetric("conformal factor yields invalid area")
        phi = phi - 0.5 * np.log(area)
        flat = bool(np.all(phi == 0.0))

    area_element = np.exp(2.0 * phi)
    quad = area_element * spacing * spacing

    k = np.fft.fftfreq(n, d=spacing)  # integer wave numbers
    k1 = k[:, None]
    k2 = k[None, :]
    ksq = (2.0 * np.pi) ** 2 * (k1**2 + k2**2)
    # first-derivative multipliers: zero the (signless) Nyquist mode
    kd = k.copy()
    kd[n // 2] = 0.0
    ik1 = np.ascontiguousarray(2.0j * np.pi * kd[:, None] * np.ones((1, n)))
    ik2 = np.ascontiguousarray(2.0j * np.pi * np.ones((n, 1)) * kd[None, :])
    ik1.flags.writeable = False
    ik2.flags.writeable = False

    return TorusGrid(
        n=n,
        spacing=spacing,
        phi=_freeze(phi),
        area_element=_freeze(area_element),
        quad=_freeze(quad),
        flat=flat,
        ksq=_freeze(ksq),
        ik1=ik1,
        ik2=ik2,
    )


def _check_same_grid(grid: TorusGrid, f: ScalarField) -> None:
    g = f.grid
    if g is grid:
        return
    if g.n != grid.n or not np.array_equal(g.phi, grid.phi):
        raise IncompatibleField("field lives on a different grid")


def laplacian(grid: TorusGrid, f: ScalarField) -> ScalarField:
    """Metric Laplacian Delta_g f = e^{-2 phi} Delta_flat f (spectral)."""
    _check_same_grid(grid, f)
    fh = np.fft.fft2(f.values)
    flat_lap = np.fft.ifft2(-grid.ksq * fh).real
    if grid.flat:
        out = flat_lap
    else:
        out = flat_lap / grid.area_element
    return ScalarField(grid=grid, values=_freeze(out))


def flat_laplacian_values(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    fh = np.fft.fft2(values)
    return np.fft.ifft2(-grid.ksq * fh).real


def gradient_values(grid: TorusGrid, values: np.ndarray):
    """Flat-coordinate partial derivatives (d1 f, d2 f), spectral."""
    fh = np.fft.fft2(values)
    d1 = np.fft.ifft2(grid.ik1 * fh).real
    d2 = np.fft.ifft2(grid.ik2 * fh).real
    return d1, d2


def poisson_solve_flat(grid: TorusGrid, rhs: np.ndarray) -> np.ndarray:
    """Solve Delta_flat u = rhs with the zero mode projected out.

    The rhs zero mode is discarded (valid when the data integrates to
    zero); the solution has zero flat mean.
    """
    fh = np.fft.fft2(rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        uh = np.where(grid.ksq > 0, fh / (-grid.ksq), 0.0)
    uh[0, 0] = 0.0
    return np.fft.ifft2(uh).real


def integrate(grid: TorusGrid, f: ScalarField) -> float:
    """Integral of f against the metric volume dv_g."""
    _check_same_grid(grid, f)
    return float(np.sum(f.values * grid.quad))


def integrate_values(grid: TorusGrid, values: np.ndarray) -> float:
    return float(np.sum(values * grid.quad))


def dirichlet_energy(grid: TorusGrid, f: ScalarField) -> float:
    """Integral of |grad f|^2 dv_g (no 1/2 factor).

    Conformally invariant in two dimensions, so this is the flat Dirichlet
    energy regardless of phi.  Computed as sum of 4 pi^2 |k|^2 |f_k|^2,
    which makes it the exact discrete adjoint of ``laplacian``.
    """
    _check_same_grid(grid, f)
    return dirichlet_energy_values(grid, f.values)


def dirichlet_energy_values(grid: TorusGrid, values: np.ndarray) -> float:
    fh = np.fft.fft2(values)
    n4 = float(grid.n) ** 4
    return float(np.sum(grid.ksq * (fh.real**2 + fh.imag**2)) / n4)


def gauss_curvature(grid: TorusGrid) -> ScalarField:
    """Curvature K = -e^{-2 phi} Delta_flat phi; identically 0 when flat."""
    if grid.flat:
        return make_field(grid, np.zeros((grid.n, grid.n)))
    lap_phi = flat_laplacian_values(grid, grid.phi)
    return ScalarField(grid=grid,
                       values=_freeze(-lap_phi / grid.area_element))


def min_image_delta(a: np.ndarray, b: float) -> np.ndarray:
    """Componentwise displacement a-b mapped to (-1/2, 1/2]."""
    d = a - b
    return d - np.round(d)


def min_image_distance(grid: TorusGrid, x1: float, x2: float):
    """Per-node torus distance to the point (x1, x2)."""
    g1, g2 = grid.coords()
    d1 = min_image_delta(g1, x1)
    d2 = min_image_delta(g2, x2)
    return np.sqrt(d1 * d1 + d2 * d2)


# ---------------------------------------------------------------------------
# Field files: JSON header + row-major CSV of values at 17 significant digits

def save_field(f: ScalarField, base_path, description: str = "") -> tuple:
    """Write <base>.json and <base>.csv; values round-trip bit-exactly."""
    base = Path(base_path)
    header = {
        "n": f.grid.n,
        "flat": f.grid.flat,
        "description": description,
        "min": float(np.min(f.values)),
        "max": float(np.max(f.values)),
    }
    from . import serialize
    json_path = base.with_suffix(".json")
    csv_path = base.with_suffix(".csv")
    serialize.dump_json(header, json_path)
    lines = []
    for row in f.values:
        lines.append(",".join(f"{v:.17g}" for v in row))
    csv_path.write_text("\n".join(lines) + "\n")
    return json_path, csv_path


def load_field_values(base_path) -> tuple[dict, np.ndarray]:
    """Read a field file pair; returns (header, values)."""
    base = Path(base_path)
    json_path = base.with_suffix(".json")
    csv_path = base.with_suffix(".csv")
    try:
        header = json.loads(json_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidFieldFile(f"bad field header {json_path}: {exc}") from exc
    if not isinstance(header, dict) or "n" not in header:
        raise InvalidFieldFile(f"field header {json_path} lacks 'n'")
    n = header["n"]
    try:
        values = np.loadtxt(csv_path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidFieldFile(f"bad field values {csv_path}: {exc}") from exc
    if values.shape != (n, n):
        raise InvalidFieldFile(
            f"field values shape {values.shape} != ({n},{n})")
    if not np.all(np.isfinite(values)):
        raise InvalidFieldFile("field values contain non-finite entries")
    return header, values


def load_field(grid: TorusGrid, base_path) -> ScalarField:
    header, values = load_field_values(base_path)
    if header["n"] != grid.n:
        raise InvalidFieldFile(
            f"field resolution {header['n']} != grid {grid.n}")
    return make_field(grid, values)
