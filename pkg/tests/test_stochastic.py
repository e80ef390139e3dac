import numpy as np
import pytest

from phasekernel import stochastic as st
from phasekernel.errors import InvalidArgumentError

from conftest import magnetic_kernel


def test_bridge_pins_endpoints():
    path = st.sample_bridge(4.0, 1.0, 100, (1.0, 2.0), (-0.5, 0.3), seed=9)
    np.testing.assert_allclose(path.points[0], [1.0, 2.0])
    np.testing.assert_allclose(path.points[-1], [-0.5, 0.3])
    assert path.times[0] == 0.0 and path.times[-1] == pytest.approx(1.0)


def test_bridge_midpoint_variance():
    # Pinned diffusion: Var[q(t/2)] = nu * t / 4 per component.
    nu, t, n = 6.0, 1.0, 4000
    mids = np.array([
        st.sample_bridge(nu, t, 64, (0.0, 0.0), (0.0, 0.0), seed=s).points[32]
        for s in range(n)
    ])
    var = mids.var(axis=0)
    np.testing.assert_allclose(var, nu * t / 4.0, rtol=0.1)


def test_square_loop_phase():
    # Counterclockwise unit square: the one-form line integral is the
    # enclosed area, so exp(iS) = exp(i).
    corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.0, 0.0)]
    pts = []
    for a, b in zip(corners[:-1], corners[1:]):
        seg = np.linspace(a, b, 251)[:-1]
        pts.append(seg)
    pts = np.concatenate(pts + [np.array([corners[-1]])])
    path = st.BridgePath(times=np.linspace(0, 1, len(pts)), points=pts, nu=1.0)
    phase = st.stratonovich_action(path, st.ActionSpec())
    assert phase == pytest.approx(np.exp(1j), abs=1e-6)


def test_mc_matches_closed_form():
    nu, t = 4.0, 1.0
    q, qp = (1.0, 0.0), (0.0, 0.0)
    est = st.mc_kernel(1, nu, t, q, qp, st.ActionSpec(),
                       n_samples=20000, steps=400, seed=11, workers=2)
    ref = magnetic_kernel(nu, t, q, qp)
    scale_free = abs(est.value / (2.0 * np.pi * np.exp(nu * t / 2.0)) - ref)
    assert scale_free < 4.0 * est.stderr / (2.0 * np.pi * np.exp(nu * t / 2.0)) + 1e-3


def test_extra_potential_pure_damping():
    # extra(tau, q) = -i*c contributes exp(-c*t) to the magnitude.
    nu, t, c = 4.0, 0.5, 0.8
    base = st.mc_kernel(1, nu, t, (0.5, 0.0), (0.0, 0.0), st.ActionSpec(),
                        n_samples=4000, steps=200, seed=3)
    damped = st.mc_kernel(
        1, nu, t, (0.5, 0.0), (0.0, 0.0),
        st.ActionSpec(extra_potential=lambda tau, q: -1j * c * np.ones(q.shape[:-1])),
        n_samples=4000, steps=200, seed=3)
    assert damped.value / base.value == pytest.approx(np.exp(-c * t), rel=1e-10)


def test_determinism_across_workers():
    args = dict(n_samples=6000, steps=100, seed=42)
    a = st.mc_kernel(1, 8.0, 1.0, (1.0, 0.0), (0.0, 0.0), st.ActionSpec(), workers=1, **args)
    b = st.mc_kernel(1, 8.0, 1.0, (1.0, 0.0), (0.0, 0.0), st.ActionSpec(), workers=4, **args)
    assert a.value == b.value and a.stderr == b.stderr


def test_validation():
    with pytest.raises(InvalidArgumentError):
        st.sample_bridge(4.0, 1.0, 1, (0.0, 0.0), (0.0, 0.0), seed=0)
    with pytest.raises(InvalidArgumentError):
        st.mc_kernel(1, -4.0, 1.0, (0.0, 0.0), (0.0, 0.0), st.ActionSpec(),
                     n_samples=10, steps=10, seed=0)


def test_low_sample_warning_flag():
    est = st.mc_kernel(1, 4.0, 1.0, (0.0, 0.0), (0.0, 0.0), st.ActionSpec(),
                       n_samples=50, steps=10, seed=0)
    assert est.low_sample_warning
