import os

import numpy as np
import pytest

from phasekernel import phasespace as ps
from phasekernel.errors import InvalidArgumentError, InvalidChartError, InvalidMapError

DATA = os.path.join(os.path.dirname(ps.__file__), "data")


def test_canonical_omega_structure():
    om = ps.canonical_omega(2)
    m = om.entries
    assert m.shape == (4, 4)
    np.testing.assert_array_equal(m, -m.T)
    np.testing.assert_allclose(m @ om.inverse, np.eye(4), atol=1e-14)
    np.testing.assert_array_equal(m[:2, :2], [[0.0, 1.0], [-1.0, 0.0]])


def test_canonical_one_form_half_jt():
    alpha = ps.canonical_one_form(1)
    np.testing.assert_allclose(alpha(np.array([2.0, 4.0])), [-2.0, 1.0])


def test_charts_closed_and_potential():
    for chart in (ps.canonical_chart(1), ps.cubic_chart()):
        assert ps.check_closedness(chart, 0.05) < 1e-9
        assert ps.check_alpha_potential(chart, 0.05) < 1e-9


def test_cubic_chart_fields():
    c = ps.cubic_chart()
    q = np.array([0.7, -0.2])
    assert c.omega(q)[0, 1] == pytest.approx(1.0 + 0.49)
    np.testing.assert_allclose(c.alpha(q), [0.0, 0.7 + 0.7 ** 3 / 3.0])
    # Poisson tensor is minus the inverse two-form.
    np.testing.assert_allclose(c.poisson_tensor(q) @ c.omega(q), -np.eye(2), atol=1e-14)


def test_load_chart_matches_builtin():
    loaded = ps.load_chart(os.path.join(DATA, "cubic_chart.json"))
    builtin = ps.cubic_chart()
    for q in ([0.5, 0.1], [-1.2, 0.8]):
        np.testing.assert_allclose(loaded.omega(q), builtin.omega(q))
        np.testing.assert_allclose(loaded.alpha(q), builtin.alpha(q))


def test_non_closed_two_form_rejected():
    # omega_12 = 1 + q2 has d(omega) /= 0 paired with this alpha.
    chart = ps.ChartSpec(
        d=1,
        omega_field=lambda q: np.array([[0.0, 1.0 + q[1]], [-1.0 - q[1], 0.0]]),
        alpha_field=lambda q: np.array([0.0, q[0]]),
        domain_box=np.array([[-2.0, 2.0], [-2.0, 2.0]]),
    )
    assert ps.check_alpha_potential(chart, 0.05) > 1e-3


def test_grid_step_validation():
    with pytest.raises(InvalidArgumentError):
        ps.check_closedness(ps.canonical_chart(1), 5.0)


def test_rotation_map_isometry():
    m = ps.rotation_map(0.4)
    q = np.array([1.0, 2.0])
    np.testing.assert_allclose(m.inverse(m.forward(q)), q, atol=1e-14)
    np.testing.assert_allclose(m.metric_pullback(q), np.eye(2), atol=1e-14)


def test_polar_map_round_trip_and_metric():
    m = ps.polar_map()
    qbar = np.array([2.0, 0.7])  # (r, phi)
    np.testing.assert_allclose(m.inverse(m.forward(qbar)), qbar, atol=1e-12)
    g = m.metric_pullback(qbar)
    np.testing.assert_allclose(g, np.diag([1.0, 4.0]), atol=1e-12)
    box = np.array([[0.5, 3.0], [0.1, 2.0]])
    assert m.round_trip_residual(box) < 1e-10


def test_singular_jacobian_rejected():
    m = ps.CoordinateMap(
        forward=lambda q: np.array([q[0], 0.0 * q[1]]),
        inverse=lambda q: q,
    )
    with pytest.raises(InvalidMapError):
        m.jac(np.array([1.0, 1.0]))


def test_richardson_partial_fourth_order():
    f = lambda q: np.sin(q[0]) * q[1] ** 2
    q = np.array([0.3, 1.7])
    d0 = ps.richardson_partial(f, q, 0, 1e-2)
    assert d0 == pytest.approx(np.cos(0.3) * 1.7 ** 2, abs=1e-10)
