"""Independent reference computations for acceptance testing.

Coherent-state overlaps by direct wavefunction quadrature, truncated
number-basis propagators by matrix exponential, and the anti-normal symbol
map certified by quadrature re-synthesis.  Nothing here shares machinery
with the bridge sampler or the grid solver: quadrature and dense linear
algebra only.

Label convention: the phase-space point q = (x, p) labels the displaced
unit-frequency ground state with wavefunction

    psi_q(y) = pi^(-1/4) exp(-(y - x)^2 / 2 + i p y - i p x / 2),

equivalently the ladder-operator coherent state of amplitude
beta = (x + i p) / sqrt(2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma

import numpy as np
from scipy.linalg import expm

from .errors import InvalidArgumentError, TruncationTooSmallError, UnsupportedSymbolError

_QUAD_HALFWIDTH = 12.0
_QUAD_POINTS = 4001


def _wavefunction(q, y):
    x, p = float(q[0]), float(q[1])
    return np.pi ** -0.25 * np.exp(-0.5 * (y - x) ** 2 + 1j * p * y - 0.5j * p * x)


def _log_overlap(q, qp):
    beta = (q[0] + 1j * q[1]) / np.sqrt(2.0)
    betap = (qp[0] + 1j * qp[1]) / np.sqrt(2.0)
    return -0.5 * abs(beta) ** 2 - 0.5 * abs(betap) ** 2 + np.conj(beta) * betap


def coherent_overlap(q, qp) -> complex:
    """<q|q'> by numerical quadrature of the two displaced ground states.

    For labels with |q| > 20 the quadrature window is no longer adequate and
    an underflow-guarded log-domain evaluation is used instead.
    """
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    if q.shape != (2,) or qp.shape != (2,):
        raise InvalidArgumentError("coherent_overlap expects d=1 points (x, p)")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qp))):
        raise InvalidArgumentError("non-finite coherent-state label")
    if np.linalg.norm(q) > 20.0 or np.linalg.norm(qp) > 20.0:
        return complex(np.exp(_log_overlap(q, qp)))
    center = 0.5 * (q[0] + qp[0])
    y = np.linspace(center - _QUAD_HALFWIDTH, center + _QUAD_HALFWIDTH, _QUAD_POINTS)
    integrand = np.conj(_wavefunction(q, y)) * _wavefunction(qp, y)
    return complex(np.trapezoid(integrand, y))


def coherent_vector(q, n_fock: int) -> np.ndarray:
    """Number-basis coefficients of |q|>, truncated to n_fock entries."""
    beta = (q[0] + 1j * q[1]) / np.sqrt(2.0)
    n = np.arange(n_fock)
    with np.errstate(divide="ignore"):
        logmag = np.where(n > 0, n * np.log(np.abs(beta) + 1e-300), 0.0)
    logfact = np.array([lgamma(k + 1.0) for k in n])
    mag = np.exp(-0.5 * abs(beta) ** 2 + logmag - 0.5 * logfact)
    phase = np.exp(1j * n * np.angle(beta)) if abs(beta) > 0 else np.ones(n_fock)
    return mag * phase


@dataclass(frozen=True)
class FockSpec:
    """Truncated number-basis Hamiltonian: H = sum_k coeffs[k] * n_hat^k."""

    truncation: int
    coeffs: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.truncation < 20:
            raise InvalidArgumentError("truncation must be >= 20")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def matrix(self) -> np.ndarray:
        n = np.arange(self.truncation, dtype=float)
        diag = np.zeros(self.truncation)
        for k, c in enumerate(self.coeffs):
            diag += c * n ** k
        return np.diag(diag)


def _check_tail(q, n_fock: int):
    vec = coherent_vector(q, n_fock)
    tail = float(np.linalg.norm(vec[3 * n_fock // 4 :]))
    if tail >= 1e-10:
        need = n_fock
        while need < 4096:
            need *= 2
            v = coherent_vector(q, need)
            if np.linalg.norm(v[3 * need // 4 : need]) < 1e-10:
                break
        raise TruncationTooSmallError(required=need, tail_norm=tail)


def fock_propagator(spec: FockSpec, t: float, q, qp) -> complex:
    """<q| exp(-i t H) |q'> in the truncated number basis."""
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    _check_tail(q, spec.truncation)
    _check_tail(qp, spec.truncation)
    U = expm(-1j * t * spec.matrix())
    vq = coherent_vector(q, spec.truncation)
    vqp = coherent_vector(qp, spec.truncation)
    return complex(np.conj(vq) @ U @ vqp)


def symbol_for(spec: FockSpec):
    """Scalar field h with H = integral dq h(q) |q><q| / (2 pi).

    Supports polynomials in the number operator of degree <= 2.  With
    s = |q|^2 / 2 the map is 1 -> 1, n -> s - 1, n^2 -> s^2 - 3 s + 1.
    Certified by re-synthesizing low matrix elements via quadrature.
    """
    coeffs = spec.coeffs
    if len(coeffs) > 3:
        raise UnsupportedSymbolError(
            "symbol map supports number-operator polynomials of degree <= 2"
        )
    c = list(coeffs) + [0.0] * (3 - len(coeffs))

    def h(q):
        q = np.asarray(q, dtype=float)
        s = 0.5 * np.sum(q ** 2, axis=-1)
        return c[0] + c[1] * (s - 1.0) + c[2] * (s * s - 3.0 * s + 1.0)

    err = resynthesis_error(h, spec, n_max=6)
    if err > 1e-8:
        raise UnsupportedSymbolError(
            f"re-synthesis certification failed: max element error {err:.3e}"
        )
    return h


def resynthesis_error(h, spec: FockSpec, n_max: int = 6, r_max: float = 12.0,
                      n_r: int = 2000, n_phi: int = 256) -> float:
    """Max |<m| H_resynth |n> - <m| H |n>| for m, n < n_max.

    H_resynth(m, n) = integral (dx dp / 2 pi) h(q) <m|q><q|n> on a polar grid.
    """
    nodes, gauss_w = np.polynomial.legendre.leggauss(min(n_r, 400))
    r = 0.5 * r_max * (nodes + 1.0)
    wr = 0.5 * r_max * gauss_w
    phi = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    R, PHI = np.meshgrid(r, phi, indexing="ij")
    beta = (R / np.sqrt(2.0)) * np.exp(1j * PHI)  # beta = (x + i p)/sqrt(2)
    s = 0.5 * R ** 2
    q = np.stack([R * np.cos(PHI), R * np.sin(PHI)], axis=-1)
    hval = h(q)
    weight = R * wr[:, None] * (2.0 * np.pi / n_phi) / (2.0 * np.pi)
    H = spec.matrix()[:n_max, :n_max]
    logfact = np.array([lgamma(k + 1.0) for k in range(n_max)])
    # <m|q> = e^{-|beta|^2/2} beta^m / sqrt(m!)
    pows = np.empty((n_max,) + beta.shape, dtype=complex)
    pows[0] = 1.0
    for m in range(1, n_max):
        pows[m] = pows[m - 1] * beta
    amp = np.exp(-s)  # <m|q><q|n> carries e^{-|beta|^2}
    worst = 0.0
    for m in range(n_max):
        for n in range(n_max):
            kern = amp * pows[m] * np.conj(pows[n]) * np.exp(
                -0.5 * (logfact[m] + logfact[n])
            )
            val = np.sum(hval * kern * weight)
            worst = max(worst, abs(val - H[m, n]))
    return float(worst)


def unitarity_defect(spec: FockSpec, t: float, qp, half_width: float = 8.0,
                     n_axis: int = 61) -> float:
    """|1 - sum over a lattice of |<q|U|q'>|^2 * cell / (2 pi)|."""
    axis = np.linspace(-half_width, half_width, n_axis)
    cell = (axis[1] - axis[0]) ** 2
    U = expm(-1j * t * spec.matrix())
    vqp = U @ coherent_vector(np.asarray(qp, dtype=float), spec.truncation)
    total = 0.0
    for x in axis:
        for p in axis:
            amp = np.conj(coherent_vector((x, p), spec.truncation)) @ vqp
            total += abs(amp) ** 2
    return abs(1.0 - total * cell / (2.0 * np.pi))
