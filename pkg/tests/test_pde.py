import os

import numpy as np
import pytest

from phasekernel import pde, phasespace
from phasekernel.errors import BoxTooSmallError, InvalidArgumentError

from conftest import magnetic_kernel


def _spec(n=64, l=6.0, dt=2e-3, **kw):
    return pde.GridSpec(N=n, L=l, dt=dt, **kw)


def test_gridspec_validation():
    with pytest.raises(InvalidArgumentError):
        pde.GridSpec(N=100, L=8.0)  # not a power of two
    with pytest.raises(InvalidArgumentError):
        pde.GridSpec(N=32, L=8.0)  # too coarse


def test_kernel_matches_closed_form():
    nu, t = 8.0, 1.0
    spec = _spec(n=128, l=8.0, dt=1e-3, enforce_band=False)
    gen = pde.GeneratorSpec(nu=nu)
    f = pde.kernel_from_delta((0.0, 0.0), gen, t, spec)
    for q in [(0.0, 0.0), (1.0, 0.0), (0.5, -0.8)]:
        v = pde.read_value(f, q)
        ref = magnetic_kernel(nu, t, q, (0.0, 0.0))
        assert abs(v - ref) / abs(ref) < 5e-3


def test_semigroup_composition():
    spec = _spec(n=64, l=6.0, dt=1e-3)
    gen = pde.GeneratorSpec(nu=4.0)
    f0 = pde.delta_field((0.0, 0.0), spec, gen)
    full = pde.evolve(f0, gen, 0.4, enforce_accuracy=False, check_boundary=False)
    half = pde.evolve(f0, gen, 0.2, enforce_accuracy=False, check_boundary=False)
    two = pde.evolve(half, gen, 0.2, enforce_accuracy=False, check_boundary=False)
    assert np.max(np.abs(full.values - two.values)) < 1e-12 * np.max(np.abs(full.values))


def test_boundary_band_guard():
    spec = _spec(n=64, l=3.0, dt=1e-3)
    gen = pde.GeneratorSpec(nu=8.0)
    with pytest.raises(BoxTooSmallError):
        pde.kernel_from_delta((0.0, 0.0), gen, 1.0, spec)


def test_pin_margin_guard():
    spec = _spec()
    gen = pde.GeneratorSpec(nu=4.0)
    with pytest.raises(InvalidArgumentError):
        pde.kernel_from_delta((5.9, 0.0), gen, 0.1, spec)


def test_potential_damping():
    # Constant h = c multiplies the kernel by exp(-i c t).
    spec = _spec(dt=1e-3, enforce_band=False)
    c = 0.7
    gen0 = pde.GeneratorSpec(nu=4.0)
    genc = pde.GeneratorSpec(nu=4.0, h_field=lambda q: c * np.ones(np.shape(q)[:-1]))
    f0 = pde.kernel_from_delta((0.0, 0.0), gen0, 0.5, spec, enforce_accuracy=False)
    fc = pde.kernel_from_delta((0.0, 0.0), genc, 0.5, spec, enforce_accuracy=False)
    ratio = pde.read_value(fc, (0.4, 0.2)) / pde.read_value(f0, (0.4, 0.2))
    # the split-step rational approximation leaves an O(dt^2) defect
    assert ratio == pytest.approx(np.exp(-1j * c * 0.5), abs=1e-5)


def test_periodic_axis_mass_conservation():
    # Pure diffusion (no gauge) on a doubly periodic grid conserves mass.
    spec = pde.GridSpec(N=64, L=4.0, dt=2e-3, periodic=(True, True))
    gen = pde.GeneratorSpec(nu=2.0, gauge_term=lambda q: np.zeros(np.shape(q)))
    f0 = pde.delta_field((0.3, -0.2), spec, gen)
    f1 = pde.evolve(f0, gen, 0.3, enforce_accuracy=False, check_boundary=False)
    m0 = f0.values.sum() * spec.cell_area
    m1 = f1.values.sum() * spec.cell_area
    assert abs(m1 - m0) < 1e-10 * abs(m0)


def test_covariance_identity_map_exact():
    spec = _spec(n=64, l=6.0, dt=5e-4, enforce_band=False)
    gen = pde.GeneratorSpec(nu=4.0)
    cart, curv, diff = pde.covariance_compare(
        phasespace.identity_map(), gen, 0.5, (1.2, 0.4), (0.8, 0.2), spec, spec)
    assert diff == 0.0


def test_covariance_rotation_map():
    spec = _spec(n=128, l=8.0, dt=5e-4, enforce_band=False)
    gen = pde.GeneratorSpec(nu=4.0)
    cart, curv, diff = pde.covariance_compare(
        phasespace.rotation_map(0.3), gen, 0.5, (1.8, 2.6), (2.2, 2.2), spec, spec)
    assert diff < 1e-3


def test_csv_and_binary_round_trip(tmp_path):
    spec = _spec(enforce_band=False)
    gen = pde.GeneratorSpec(nu=4.0)
    f = pde.kernel_from_delta((0.0, 0.0), gen, 0.3, spec, enforce_accuracy=False)
    csv = os.path.join(tmp_path, "f.csv")
    pde.to_csv(f, csv)
    assert sum(1 for _ in open(csv)) == spec.N * spec.N + 1
    binpath = os.path.join(tmp_path, "f.bin")
    pde.to_binary(f, binpath, t=0.3, nu=4.0)
    g = pde.from_binary(binpath)
    np.testing.assert_array_equal(g.values, f.values)


def test_binary_checksum_guard(tmp_path):
    spec = _spec(enforce_band=False)
    gen = pde.GeneratorSpec(nu=4.0)
    f = pde.kernel_from_delta((0.0, 0.0), gen, 0.3, spec, enforce_accuracy=False)
    binpath = os.path.join(tmp_path, "f.bin")
    pde.to_binary(f, binpath)
    data = bytearray(open(binpath, "rb").read())
    # corrupt a value near the grid center where the field is appreciable
    centre = 64 + 8 * (2 * (32 * spec.N + 32)) + 6
    data[centre] ^= 0xFF
    open(binpath, "wb").write(bytes(data))
    with pytest.raises(InvalidArgumentError):
        pde.from_binary(binpath)


def test_dense_generator_matches_stepper():
    # expm of the dense generator agrees with the split-step evolution.
    from scipy.linalg import expm
    spec = pde.GridSpec(N=64, L=6.0, dt=5e-4)
    gen = pde.GeneratorSpec(nu=4.0)
    A = pde.build_dense_generator(gen, spec)
    f0 = pde.delta_field((0.0, 0.0), spec, gen)
    t = 0.2
    dense = (expm(t * A) @ f0.values.ravel()).reshape(spec.N, spec.N)
    stepped = pde.evolve(f0, gen, t, enforce_accuracy=False,
                         check_boundary=False).values
    scale = np.max(np.abs(dense))
    assert np.max(np.abs(dense - stepped)) / scale < 2e-3
