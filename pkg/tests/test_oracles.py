import numpy as np
import pytest

from phasekernel import oracles
from phasekernel.errors import TruncationTooSmallError, UnsupportedSymbolError


def test_overlap_gaussian_value():
    # Direct quadrature must reproduce the closed Gaussian overlap.
    assert oracles.coherent_overlap((1.0, 0.0), (0.0, 0.0)) == pytest.approx(
        np.exp(-0.25), abs=1e-12)


def test_overlap_cross_phase():
    q, qp = (1.0, 0.7), (0.3, -0.4)
    expected = np.exp(-np.sum((np.subtract(q, qp)) ** 2) / 4.0
                      + 0.5j * (q[0] * qp[1] - q[1] * qp[0]))
    assert oracles.coherent_overlap(q, qp) == pytest.approx(expected, abs=1e-12)


def test_overlap_distant_labels_log_domain():
    v = oracles.coherent_overlap((30.0, 0.0), (0.0, 0.0))
    assert abs(v - np.exp(-900.0 / 4.0)) < 1e-90


def test_propagator_t_zero_reduces_to_overlap():
    spec = oracles.FockSpec(truncation=60, coeffs=(0.0, 1.0))
    k = oracles.fock_propagator(spec, 0.0, (1.0, 0.0), (0.5, 0.5))
    assert k == pytest.approx(oracles.coherent_overlap((1.0, 0.0), (0.5, 0.5)), abs=1e-10)


def test_propagator_number_operator_periodic():
    spec = oracles.FockSpec(truncation=60, coeffs=(0.0, 1.0))
    q, qp = (1.0, 0.2), (0.4, -0.1)
    k0 = oracles.fock_propagator(spec, 0.0, q, qp)
    k2pi = oracles.fock_propagator(spec, 2.0 * np.pi, q, qp)
    assert k2pi == pytest.approx(k0, abs=1e-10)


def test_propagator_vacuum_eigenstate():
    # |q'=(0,0)> is the Fock vacuum; the number operator annihilates it.
    spec = oracles.FockSpec(truncation=60, coeffs=(0.0, 1.0))
    k = oracles.fock_propagator(spec, 1.0, (1.0, 0.0), (0.0, 0.0))
    assert k == pytest.approx(np.exp(-0.25), abs=1e-10)


def test_truncation_tail_guard():
    with pytest.raises(TruncationTooSmallError) as exc:
        oracles.fock_propagator(oracles.FockSpec(truncation=20, coeffs=(0.0, 1.0)),
                                1.0, (6.0, 0.0), (6.0, 0.0))
    assert exc.value.required > 20


def test_symbol_for_number_operator():
    spec = oracles.FockSpec(truncation=60, coeffs=(0.0, 1.0))
    h = oracles.symbol_for(spec)
    q = np.array([1.2, -0.5])
    assert h(q) == pytest.approx(0.5 * (q @ q) - 1.0, abs=1e-12)


def test_symbol_resynthesis_certified():
    spec = oracles.FockSpec(truncation=60, coeffs=(0.5, -1.0, 0.25))
    h = oracles.symbol_for(spec)
    assert oracles.resynthesis_error(h, spec) < 1e-8


def test_symbol_rejects_high_degree():
    with pytest.raises(UnsupportedSymbolError):
        oracles.symbol_for(oracles.FockSpec(truncation=60, coeffs=(0.0, 0.0, 0.0, 1.0)))


def test_unitarity_defect_small():
    spec = oracles.FockSpec(truncation=60, coeffs=(0.0, 1.0))
    assert oracles.unitarity_defect(spec, 1.0, (0.5, 0.5)) < 1e-8
