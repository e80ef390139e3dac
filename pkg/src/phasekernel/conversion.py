"""Second-class-constraint embedding of a symplectic chart in flat space.

A chart with two-form omega and potential alpha (d alpha = omega) is
embedded in the extended space (q, p) by the constraints
phi_j = p_j + alpha_j(q).  A Darboux map Q with dQ J dQ^T = omega supplies
the matrix a = dQ J^T; adjoining auxiliary variables theta (carrying their
own canonical block J) converts the constraints to the Abelian set

    sigma_j(q, p, theta) = p_j + alpha_j(q) + a_{jk}(q) theta^k,

and observables extend through vartheta(q, theta) = q(theta + Q(q)).

Sign conventions (frozen repo-wide, J = [[0, 1], [-1, 0]] per pair):
(dQ)_{jn} = d_j Q^n; a = dQ J^T; the contraction identity is a J a^T =
omega; the Darboux pullback is dQ J dQ^T = omega; the theta-sector Poisson
tensor is J.  These four choices are the unique consistent set for which
{sigma_j, sigma_k} = 0 and {h_ext, sigma_j} = 0 identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConversionViolatedError,
    DarbouxInvalidError,
    DegenerateSymplecticError,
    InvalidArgumentError,
)
from .phasespace import ChartSpec, _block_diag_J, richardson_partial


def _fd_jacobian(func, q, h=1e-4):
    """(dQ)_{jn} = d_j Q^n by Richardson-refined central differences."""
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    return np.stack([richardson_partial(func, q, j, h) for j in range(n)], axis=0)


@dataclass(frozen=True)
class DarbouxChart:
    """Darboux map with its inverse and the conversion matrix a(q)."""

    Q: Callable
    q_of_Q: Callable
    jacobian: Optional[Callable] = None  # q -> (dQ)_{jn} = d_j Q^n
    name: str = ""

    def jac(self, q) -> np.ndarray:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(np.asarray(q, dtype=float)), dtype=float)
        return _fd_jacobian(self.Q, q)

    def a_matrix(self, q) -> np.ndarray:
        d = np.asarray(q).shape[-1] // 2
        return self.jac(q) @ _block_diag_J(d).T


def build_darboux(chart: ChartSpec, Q, q_of_Q, jacobian=None, name: str = "",
                  per_axis: int = 17, margin: float = 0.15,
                  tol: float = 1e-10, tol_fd: float = 1e-5) -> DarbouxChart:
    """Construct and validate a Darboux chart against all four identities.

    Residuals checked on a sample grid: (1) a vs its finite-difference
    reconstruction, (2) contraction a J a^T = omega, (3) curl condition
    d_j a_{ki} = d_k a_{ji}, (4) pullback dQ J dQ^T = omega.  Analytic
    Jacobians are held to `tol`; finite-difference quantities to `tol_fd`.
    """
    dchart = DarbouxChart(Q=Q, q_of_Q=q_of_Q, jacobian=jacobian, name=name)
    n = chart.n
    Jb = _block_diag_J(chart.d)
    extents = chart.domain_box[:, 1] - chart.domain_box[:, 0]
    pts = chart.sample_points(per_axis=per_axis if n == 2 else 5,
                              margin=margin * float(np.min(extents)))
    analytic = jacobian is not None
    res = {"a_fd": 0.0, "contraction": 0.0, "curl": 0.0, "pullback": 0.0,
           "round_trip": 0.0}
    for q in pts:
        dQ = dchart.jac(q)
        a = dQ @ Jb.T
        w = chart.omega(q)
        res["a_fd"] = max(res["a_fd"],
                          float(np.max(np.abs(_fd_jacobian(Q, q) @ Jb.T - a))))
        res["contraction"] = max(res["contraction"],
                                 float(np.max(np.abs(a @ Jb @ a.T - w))))
        grads = np.stack([richardson_partial(dchart.a_matrix, q, j, 1e-4)
                          for j in range(n)])  # grads[j, k, i] = d_j a_{ki}
        res["curl"] = max(res["curl"],
                          float(np.max(np.abs(grads - grads.transpose(1, 0, 2)))))
        res["pullback"] = max(res["pullback"],
                              float(np.max(np.abs(dQ @ Jb @ dQ.T - w))))
        res["round_trip"] = max(res["round_trip"],
                                float(np.max(np.abs(np.asarray(q_of_Q(np.asarray(Q(q)))) - q))))
    bounds = {
        "a_fd": tol_fd,
        "contraction": tol if analytic else tol_fd,
        "curl": tol_fd,
        "pullback": tol if analytic else tol_fd,
        "round_trip": 1e-10,
    }
    bad = {k: v for k, v in res.items() if v > bounds[k]}
    if bad:
        raise DarbouxInvalidError(residuals=res)
    return dchart


def dirac_bracket_check(chart: ChartSpec, n_samples: int = 50,
                        seed: int = 0) -> float:
    """Max |{q^j, q^k}_D - chart.poisson_tensor| over random sampled points.

    The Dirac bracket is computed numerically from its definition on the
    flat extended space (q, p) with constraints phi_j = p_j + alpha_j(q),
    using Richardson central differences throughout.
    """
    rng = np.random.default_rng(seed)
    n = chart.n
    box = chart.domain_box
    margin = 0.1 * (box[:, 1] - box[:, 0])
    worst = 0.0
    for _ in range(n_samples):
        q = rng.uniform(box[:, 0] + margin, box[:, 1] - margin)
        p = -chart.alpha(q)
        z0 = np.concatenate([q, p])

        def phi(z, m):
            return z[n + m] + chart.alpha(z[:n])[m]

        def coord(z, j):
            return z[j]

        def pbracket(f, g):
            df = np.array([richardson_partial(f, z0, i, 1e-4) for i in range(2 * n)])
            dg = np.array([richardson_partial(g, z0, i, 1e-4) for i in range(2 * n)])
            return float(df[:n] @ dg[n:] - df[n:] @ dg[:n])

        delta = np.array([[pbracket(lambda z, a=i: phi(z, a),
                                    lambda z, b=j: phi(z, b))
                           for j in range(n)] for i in range(n)])
        if abs(np.linalg.det(delta)) < 1e-10:
            raise DegenerateSymplecticError(
                f"constraint matrix singular at {q}: det={np.linalg.det(delta):.3e}"
            )
        cq_phi = np.array([[pbracket(lambda z, a=j: coord(z, a),
                                     lambda z, b=m: phi(z, b))
                            for m in range(n)] for j in range(n)])
        phi_cq = np.array([[pbracket(lambda z, a=m: phi(z, a),
                                     lambda z, b=k: coord(z, b))
                            for k in range(n)] for m in range(n)])
        dirac = -cq_phi @ np.linalg.inv(delta) @ phi_cq
        worst = max(worst, float(np.max(np.abs(dirac - chart.poisson_tensor(q)))))
    return worst


@dataclass(frozen=True)
class ExtendedSystem:
    """Abelianized constraints and extended observables on (q, p, theta)."""

    chart: ChartSpec
    darboux: DarbouxChart
    h_base: Callable

    def sigma(self, q, p, theta) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return (np.asarray(p, dtype=float) + self.chart.alpha(q)
                + self.darboux.a_matrix(q) @ np.asarray(theta, dtype=float))

    def vartheta(self, q, theta) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        u = np.asarray(theta, dtype=float) + np.asarray(self.darboux.Q(q))
        return np.asarray(self.darboux.q_of_Q(u), dtype=float)

    def h_extended(self, q, theta) -> float:
        return float(self.h_base(self.vartheta(q, theta)))


def _extended_poisson_tensor(n: int) -> np.ndarray:
    """Poisson tensor on (q, p, theta): canonical (q, p) block plus the
    theta-sector canonical block J."""
    P = np.zeros((3 * n, 3 * n))
    P[:n, n : 2 * n] = np.eye(n)
    P[n : 2 * n, :n] = -np.eye(n)
    P[2 * n :, 2 * n :] = _block_diag_J(n // 2)
    return P


def build_extended(chart: ChartSpec, darboux: DarbouxChart, h_base,
                   n_samples: int = 100, seed: int = 0,
                   tol: float = 1e-8, tol_fd: float = 1e-5) -> ExtendedSystem:
    """Assemble the extended system and verify the conversion identities
    {sigma_j, sigma_k} = 0 and {h_ext, sigma_j} = 0 at random points."""
    sys = ExtendedSystem(chart=chart, darboux=darboux, h_base=h_base)
    n = chart.n
    bound = tol if darboux.jacobian is not None else tol_fd
    P = _extended_poisson_tensor(n)
    rng = np.random.default_rng(seed)
    box = chart.domain_box
    margin = 0.25 * (box[:, 1] - box[:, 0])
    for _ in range(n_samples):
        q = rng.uniform(box[:, 0] + margin, box[:, 1] - margin)
        p = rng.uniform(-1.0, 1.0, size=n)
        theta = rng.uniform(-0.5, 0.5, size=n)
        z0 = np.concatenate([q, p, theta])

        def grad(f):
            return np.array(
                [richardson_partial(f, z0, i, 1e-4) for i in range(3 * n)]
            )

        def sig(z, j):
            return sys.sigma(z[:n], z[n : 2 * n], z[2 * n :])[j]

        gs = [grad(lambda z, a=j: sig(z, a)) for j in range(n)]
        gh = grad(lambda z: sys.h_extended(z[:n], z[2 * n :]))
        for j in range(n):
            for k in range(j + 1, n):
                r = abs(float(gs[j] @ P @ gs[k]))
                if r > bound:
                    raise ConversionViolatedError("{sigma,sigma}", r, q)
            r = abs(float(gh @ P @ gs[j]))
            if r > bound:
                raise ConversionViolatedError("{h_ext,sigma}", r, q)
    return sys


# ---------------------------------------------------------------------------
# shipped Darboux maps


def identity_darboux() -> DarbouxChart:
    return DarbouxChart(
        Q=lambda q: np.asarray(q, dtype=float),
        q_of_Q=lambda Q: np.asarray(Q, dtype=float),
        jacobian=lambda q: np.eye(np.asarray(q).shape[-1]),
        name="identity",
    )


def cubic_darboux() -> DarbouxChart:
    """Darboux map for the d=1 chart omega_12 = 1 + (q1)^2:
    Q1 = q1 + q1^3/3, Q2 = q2."""

    def Q(q):
        q = np.asarray(q, dtype=float)
        return np.array([q[0] + q[0] ** 3 / 3.0, q[1]])

    def q_of_Q(Qv):
        Qv = np.asarray(Qv, dtype=float)
        target = Qv[0]
        u = np.cbrt(3.0 * target) if abs(target) > 1.0 else target
        for _ in range(60):
            f = u + u ** 3 / 3.0 - target
            u -= f / (1.0 + u * u)
            if abs(f) < 1e-15:
                break
        return np.array([u, Qv[1]])

    def jacobian(q):
        q = np.asarray(q, dtype=float)
        return np.array([[1.0 + q[0] ** 2, 0.0], [0.0, 1.0]])

    return DarbouxChart(Q=Q, q_of_Q=q_of_Q, jacobian=jacobian, name="cubic")


def compose_symplectic(darboux: DarbouxChart, S: np.ndarray) -> DarbouxChart:
    """Compose with a constant linear symplectic map (S J S^T = J): another
    valid Darboux chart for the same omega, with a different a-matrix."""
    S = np.asarray(S, dtype=float)
    d = S.shape[0] // 2
    Jb = _block_diag_J(d)
    if np.max(np.abs(S @ Jb @ S.T - Jb)) > 1e-12:
        raise InvalidArgumentError("S is not symplectic")
    Sinv = np.linalg.inv(S)
    jac = None
    if darboux.jacobian is not None:
        jac = lambda q: darboux.jacobian(q) @ S.T
    return DarbouxChart(
        Q=lambda q: S @ np.asarray(darboux.Q(q), dtype=float),
        q_of_Q=lambda Qv: darboux.q_of_Q(Sinv @ np.asarray(Qv, dtype=float)),
        jacobian=jac,
        name=darboux.name + "+symplectic",
    )
