import math

import numpy as np
import pytest

from mflab import (
    build_torus,
    dirichlet_energy,
    gauss_curvature,
    integrate,
    laplacian,
    load_field,
    make_field,
    save_field,
)
from mflab.errors import (
    IncompatibleField,
    InvalidFieldFile,
    InvalidMetric,
    InvalidResolution,
)
from mflab.surface import load_field_values

from conftest import bessel_i0, trapezoid_periodic


def test_flat_grid_basics(grid64):
    assert grid64.flat
    assert grid64.spacing * grid64.n == 1.0
    assert np.all(grid64.area_element > 0)
    assert abs(integrate(grid64, make_field(grid64, 1.0)) - 1.0) < 1e-12


@pytest.mark.parametrize("n", [15, 14, 33, 63])
def test_bad_resolution_rejected(n):
    with pytest.raises(InvalidResolution):
        build_torus(n)


def test_nonfinite_conformal_rejected():
    with pytest.raises(InvalidMetric):
        build_torus(64, lambda x1, x2: np.where(x1 < 0.5, 0.0, np.inf))


def test_constant_conformal_absorbed():
    g = build_torus(64, lambda x1, x2: 0.3 * np.ones_like(x1))
    assert np.max(np.abs(g.phi)) < 1e-14


def test_unit_area_and_normalization_constant(grid128=None):
    g = build_torus(128, lambda x1, x2: 0.2 * np.cos(2 * np.pi * x1))
    assert abs(np.sum(g.quad) - 1.0) < 1e-12
    # the additive constant is -1/2 log int e^{0.4 cos(2 pi x)} dx
    shift = trapezoid_periodic(lambda x: np.exp(0.4 * np.cos(2 * np.pi * x)))
    expected = -0.5 * math.log(shift)
    x1, _ = g.coords()
    raw = 0.2 * np.cos(2 * np.pi * x1)
    assert np.max(np.abs(g.phi - raw - expected)) < 1e-12


def test_unit_area_for_family(conformal_family):
    for spec in conformal_family:
        g = build_torus(64, spec)
        assert abs(np.sum(g.quad) - 1.0) < 1e-12
        assert np.all(g.area_element > 0)


def test_laplacian_constant_and_eigenfunction(grid64):
    c = make_field(grid64, 2.5)
    assert np.max(np.abs(laplacian(grid64, c).values)) < 1e-12
    f = make_field(grid64, lambda x1, x2: np.cos(2 * np.pi * x1))
    lap = laplacian(grid64, f)
    assert np.max(np.abs(lap.values + 4 * np.pi**2 * f.values)) < 1e-10


def test_laplacian_conformal_formula():
    g = build_torus(64, lambda x1, x2: 0.2 * np.cos(2 * np.pi * x2))
    f = make_field(g, lambda x1, x2: np.cos(2 * np.pi * x1))
    lap = laplacian(g, f)
    # metric laplacian = e^{-2 phi} Delta_flat; phi carries the unit-area
    # shift, so the analytic reference uses the actually-built phi
    expected = np.exp(-2.0 * g.phi) * (-4 * np.pi**2) * f.values
    assert np.max(np.abs(lap.values - expected)) < 1e-9


def test_laplacian_linearity(grid64):
    rng = np.random.default_rng(3)
    from mflab.fields import random_smooth
    f = random_smooth(grid64, rng, 6, 1.0)
    g = random_smooth(grid64, rng, 6, 1.0)
    a, b = 1.7, -0.4
    combo = make_field(grid64, a * f.values + b * g.values)
    lhs = laplacian(grid64, combo).values
    rhs = (a * laplacian(grid64, f).values
           + b * laplacian(grid64, g).values)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_divergence_theorem(grid64, grid64_conformal):
    rng = np.random.default_rng(4)
    from mflab.fields import random_smooth
    for g in (grid64, grid64_conformal):
        f = random_smooth(g, rng, 6, 1.0)
        assert abs(integrate(g, laplacian(g, f))) < 1e-10


def test_grid_mismatch_rejected(grid64):
    other = build_torus(32) if False else build_torus(128)
    f = make_field(other, 1.0)
    with pytest.raises(IncompatibleField):
        laplacian(grid64, f)
    with pytest.raises(IncompatibleField):
        dirichlet_energy(grid64, f)


def test_integrate_examples(grid64):
    x1, _ = grid64.coords()
    assert abs(integrate(grid64, make_field(grid64, 1.0)) - 1.0) < 1e-14
    cosf = make_field(grid64, np.cos(2 * np.pi * x1))
    assert abs(integrate(grid64, cosf)) < 1e-14
    cos2 = make_field(grid64, np.cos(2 * np.pi * x1) ** 2)
    assert abs(integrate(grid64, cos2) - 0.5) < 1e-14


def test_dirichlet_energy_examples(grid64, grid64_conformal):
    assert dirichlet_energy(grid64, make_field(grid64, 3.0)) == 0.0
    f = lambda x1, x2: np.cos(2 * np.pi * x1)
    e_flat = dirichlet_energy(grid64, make_field(grid64, f))
    assert abs(e_flat - 2 * np.pi**2) < 1e-10
    e_conf = dirichlet_energy(grid64_conformal,
                              make_field(grid64_conformal, f))
    assert abs(e_conf - e_flat) < 1e-12


def test_gauss_curvature_flat_and_formula(grid64):
    assert np.max(np.abs(gauss_curvature(grid64).values)) == 0.0
    a = 0.25
    g = build_torus(128, lambda x1, x2: a * np.cos(2 * np.pi * x1))
    K = gauss_curvature(g).values
    x1, _ = g.coords()
    expected = (4 * np.pi**2 * a * np.exp(-2.0 * g.phi)
                * np.cos(2 * np.pi * x1))
    assert np.max(np.abs(K - expected)) < 1e-8


def test_gauss_bonnet(conformal_family):
    for spec in conformal_family:
        g = build_torus(64, spec)
        assert abs(integrate(g, gauss_curvature(g))) < 1e-10


def test_shift_equivariance(grid64):
    rng = np.random.default_rng(5)
    from mflab.fields import random_smooth
    f = random_smooth(grid64, rng, 6, 1.0)
    si, sj = 13, 41
    rolled = make_field(grid64, np.roll(np.roll(f.values, si, 0), sj, 1))
    lhs = laplacian(grid64, rolled).values
    rhs = np.roll(np.roll(laplacian(grid64, f).values, si, 0), sj, 1)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    assert np.max(np.abs(lhs - rhs)) < 1e-13 * scale
    assert abs(dirichlet_energy(grid64, rolled)
               - dirichlet_energy(grid64, f)) < 1e-10


def test_field_file_roundtrip(grid64, tmp_path):
    rng = np.random.default_rng(6)
    from mflab.fields import random_smooth
    f = random_smooth(grid64, rng, 6, 1.0)
    save_field(f, tmp_path / "field", "roundtrip test")
    back = load_field(grid64, tmp_path / "field")
    assert np.array_equal(back.values, f.values)  # bit-identical
    header, _ = load_field_values(tmp_path / "field")
    assert header["n"] == 64
    assert header["flat"] is True
    assert header["min"] == float(np.min(f.values))
    assert header["max"] == float(np.max(f.values))


def test_field_file_errors(grid64, tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    (tmp_path / "bad.csv").write_text("1,2\n")
    with pytest.raises(InvalidFieldFile):
        load_field(grid64, tmp_path / "bad")
    (tmp_path / "short.json").write_text('{"n": 64}')
    (tmp_path / "short.csv").write_text("1.0,2.0\n3.0,4.0\n")
    with pytest.raises(InvalidFieldFile):
        load_field(grid64, tmp_path / "short")


def test_fields_are_immutable(grid64):
    f = make_field(grid64, 1.0)
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0
    with pytest.raises(ValueError):
        grid64.phi[0, 0] = 1.0


def test_nonfinite_field_rejected(grid64):
    vals = np.zeros((64, 64))
    vals[3, 3] = np.inf
    with pytest.raises(IncompatibleField):
        make_field(grid64, vals)
