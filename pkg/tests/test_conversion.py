import numpy as np
import pytest

from phasekernel import conversion as cv
from phasekernel import phasespace as ps
from phasekernel.errors import ConversionViolatedError, DarbouxInvalidError


def test_identity_darboux_on_canonical_chart():
    chart = ps.canonical_chart(1)
    d = cv.identity_darboux()
    built = cv.build_darboux(chart, d.Q, d.q_of_Q, jacobian=d.jacobian)
    q = np.array([0.4, -0.6])
    # a = dQ @ J^T with dQ = identity
    np.testing.assert_allclose(built.a_matrix(q), [[0.0, -1.0], [1.0, 0.0]])


def test_cubic_darboux_identities():
    chart = ps.cubic_chart()
    d = cv.cubic_darboux()
    built = cv.build_darboux(chart, d.Q, d.q_of_Q, jacobian=d.jacobian)
    q = np.array([0.7, 0.3])
    jac = built.jac(q)
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    om = chart.omega(q)
    # pullback and contraction identities
    np.testing.assert_allclose(jac @ J @ jac.T, om, atol=1e-10)
    a = built.a_matrix(q)
    np.testing.assert_allclose(a @ J @ a.T, om, atol=1e-10)


def test_finite_difference_jacobian_fallback():
    chart = ps.cubic_chart()
    d = cv.cubic_darboux()
    built = cv.build_darboux(chart, d.Q, d.q_of_Q)  # no analytic jacobian
    q = np.array([0.2, -0.1])
    np.testing.assert_allclose(built.jac(q), cv.cubic_darboux().jacobian(q), atol=1e-8)


def test_non_symplectic_map_rejected():
    chart = ps.canonical_chart(1)
    scale = lambda q: 2.0 * np.asarray(q, dtype=float)
    unscale = lambda Q: 0.5 * np.asarray(Q, dtype=float)
    with pytest.raises(DarbouxInvalidError) as exc:
        cv.build_darboux(chart, scale, unscale)
    assert exc.value.residuals["pullback"] > 0.1


def test_dirac_bracket_matches_chart_poisson():
    for chart in (ps.canonical_chart(1), ps.cubic_chart()):
        assert cv.dirac_bracket_check(chart, n_samples=20, seed=1) < 1e-8


def test_extended_system_brackets_vanish():
    chart = ps.cubic_chart()
    d = cv.cubic_darboux()
    built = cv.build_darboux(chart, d.Q, d.q_of_Q, jacobian=d.jacobian)
    h_base = lambda q: 0.5 * float(np.sum(np.asarray(q) ** 2))
    sys = cv.build_extended(chart, built, h_base, n_samples=10, seed=2)
    # boundary behaviour: sigma vanishes on the constraint surface at theta=0
    q = np.array([0.5, 0.2])
    p = -chart.alpha(q)
    np.testing.assert_allclose(sys.sigma(q, p, np.zeros(2)), 0.0, atol=1e-14)
    np.testing.assert_allclose(sys.vartheta(q, np.zeros(2)), q, atol=1e-12)
    assert sys.h_extended(q, np.zeros(2)) == pytest.approx(h_base(q))


def test_mismatched_darboux_rejected():
    # Pairing the cubic chart with the identity Darboux map breaks the
    # conversion brackets, which the builder must detect.
    chart = ps.cubic_chart()
    d = cv.identity_darboux()
    with pytest.raises((ConversionViolatedError, DarbouxInvalidError)):
        built = cv.build_darboux(chart, d.Q, d.q_of_Q, jacobian=d.jacobian)
        cv.build_extended(chart, built,
                          lambda q: 0.5 * float(np.sum(np.asarray(q) ** 2)),
                          n_samples=5, seed=3)


def test_compose_symplectic_preserves_identities():
    chart = ps.cubic_chart()
    d = cv.cubic_darboux()
    built = cv.build_darboux(chart, d.Q, d.q_of_Q, jacobian=d.jacobian)
    theta = 0.4
    S = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
    composed = cv.compose_symplectic(built, S)
    q = np.array([0.3, 0.6])
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    jac = composed.jac(q)
    np.testing.assert_allclose(jac @ J @ jac.T, chart.omega(q), atol=1e-8)
    assert not np.allclose(composed.a_matrix(q), built.a_matrix(q))
