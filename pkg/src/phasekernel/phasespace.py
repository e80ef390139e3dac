"""Phase-space charts, canonical symplectic structure, and exterior-calculus checks.

Sign conventions frozen repo-wide (d=1 point is (q1, q2) = (x, p)):

* the canonical block is J = [[0, 1], [-1, 0]] per degree of freedom
  (``canonical_omega``); its matrix inverse is -J;
* a chart's two-form matrix is omega_jk = d_j alpha_k - d_k alpha_j;
* the canonical symmetric-gauge one-form is A(q) = (-q2/2, q1/2) per pair,
  i.e. A = (1/2) J^T q, so the line integral of A around a positively
  oriented unit square in the (x, p) plane equals +1;
* the Poisson tensor of a chart is -inverse(omega), which is J for the
  canonical chart (so {q1, q2} = +1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ChartEvaluationError, InvalidArgumentError, InvalidChartError, InvalidMapError
from . import exprs


def _block_diag_J(d: int) -> np.ndarray:
    out = np.zeros((2 * d, 2 * d))
    for i in range(d):
        out[2 * i, 2 * i + 1] = 1.0
        out[2 * i + 1, 2 * i] = -1.0
    return out


@dataclass(frozen=True)
class SymplecticMatrix:
    """Constant antisymmetric invertible matrix with its inverse."""

    entries: np.ndarray
    d: int

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", e)
        n = 2 * self.d
        if e.shape != (n, n):
            raise InvalidArgumentError(f"expected shape ({n},{n}), got {e.shape}")
        if not np.array_equal(e, -e.T):
            raise InvalidChartError("matrix is not exactly antisymmetric")
        inv = np.linalg.inv(e)
        if np.max(np.abs(e @ inv - np.eye(n))) > 1e-14:
            raise InvalidChartError("inverse identity violated beyond 1e-14")
        object.__setattr__(self, "_inv", inv)

    @property
    def inverse(self) -> np.ndarray:
        return self._inv


def canonical_omega(d: int) -> SymplecticMatrix:
    """Block-diagonal canonical form: entries[2i-1,2i] = +1 (1-based)."""
    if not isinstance(d, (int, np.integer)) or d <= 0:
        raise InvalidArgumentError(f"d must be a positive integer, got {d!r}")
    return SymplecticMatrix(_block_diag_J(int(d)), int(d))


def canonical_one_form(d: int) -> Callable[[np.ndarray], np.ndarray]:
    """Symmetric-gauge one-form A(q) = (1/2) J^T q, vectorized over (..., 2d)."""
    K = _block_diag_J(d).T  # J^T = -J

    def alpha(q):
        q = np.asarray(q, dtype=float)
        return 0.5 * q @ K.T

    return alpha


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class ChartSpec:
    """A phase-space chart: two-form field, one-form potential, domain box."""

    d: int
    omega_field: Callable[[np.ndarray], np.ndarray]
    alpha_field: Callable[[np.ndarray], np.ndarray]
    domain_box: np.ndarray  # (2d, 2) rows (lo, hi)
    name: str = ""

    def __post_init__(self):
        box = np.asarray(self.domain_box, dtype=float)
        object.__setattr__(self, "domain_box", box)
        n = 2 * self.d
        if box.shape != (n, 2) or np.any(box[:, 1] <= box[:, 0]):
            raise InvalidArgumentError("domain_box must be (2d, 2) with hi > lo")

    @property
    def n(self) -> int:
        return 2 * self.d

    def omega(self, q) -> np.ndarray:
        try:
            w = np.asarray(self.omega_field(np.asarray(q, dtype=float)), dtype=float)
        except Exception as exc:  # noqa: BLE001 - deliberately surfaced as chart error
            raise ChartEvaluationError(f"omega evaluation failed at {q}: {exc}") from exc
        if not np.all(np.isfinite(w)):
            raise ChartEvaluationError(f"omega non-finite at {q}")
        return w

    def alpha(self, q) -> np.ndarray:
        try:
            a = np.asarray(self.alpha_field(np.asarray(q, dtype=float)), dtype=float)
        except Exception as exc:  # noqa: BLE001
            raise ChartEvaluationError(f"alpha evaluation failed at {q}: {exc}") from exc
        if not np.all(np.isfinite(a)):
            raise ChartEvaluationError(f"alpha non-finite at {q}")
        return a

    def poisson_tensor(self, q) -> np.ndarray:
        """{q^j, q^k} induced by the two-form in the frozen sign convention."""
        return -np.linalg.inv(self.omega(q))

    def sample_points(self, per_axis: int = 9, margin: float = 0.0) -> np.ndarray:
        axes = [
            np.linspace(lo + margin, hi - margin, per_axis)
            for lo, hi in self.domain_box
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def canonical_chart(d: int = 1, half_width: float = 3.0) -> ChartSpec:
    """Flat chart: omega = J blocks, alpha the symmetric-gauge one-form."""
    J = _block_diag_J(d)
    box = np.array([[-half_width, half_width]] * (2 * d))
    return ChartSpec(
        d=d,
        omega_field=lambda q: np.broadcast_to(J, np.shape(q)[:-1] + J.shape).copy(),
        alpha_field=canonical_one_form(d),
        domain_box=box,
        name="canonical",
    )


def cubic_chart(half_width: float = 3.0) -> ChartSpec:
    """d=1 chart with omega_12 = 1 + (q1)^2 and alpha = (0, q1 + q1^3/3)."""

    def omega(q):
        q = np.asarray(q, dtype=float)
        w12 = 1.0 + q[..., 0] ** 2
        zero = np.zeros_like(w12)
        return np.stack(
            [np.stack([zero, w12], axis=-1), np.stack([-w12, zero], axis=-1)],
            axis=-2,
        )

    def alpha(q):
        q = np.asarray(q, dtype=float)
        a2 = q[..., 0] + q[..., 0] ** 3 / 3.0
        return np.stack([np.zeros_like(a2), a2], axis=-1)

    box = np.array([[-half_width, half_width], [-half_width, half_width]])
    return ChartSpec(d=1, omega_field=omega, alpha_field=alpha, domain_box=box, name="cubic")


def load_chart(source) -> ChartSpec:
    """Load a ChartSpec from a JSON file path or an already-parsed dict."""
    if isinstance(source, (str,)):
        with open(source, encoding="utf-8") as fh:
            cfg = json.load(fh)
    else:
        cfg = dict(source)
    d = int(cfg["d"])
    n = 2 * d
    omega = exprs.compile_matrix(cfg["omega"], n)
    alpha = exprs.compile_vector(cfg["alpha"], n)
    box = np.asarray(cfg["domain"], dtype=float)
    return ChartSpec(
        d=d,
        omega_field=omega,
        alpha_field=alpha,
        domain_box=box,
        name=cfg.get("name", ""),
    )


# ---------------------------------------------------------------------------
# finite differences (central, Richardson-refined: two step sizes, ratio 2)


def richardson_partial(f, q, axis: int, h: float):
    """Fourth-order partial derivative of f along axis at q."""
    q = np.asarray(q, dtype=float)

    def central(step):
        qa, qb = q.copy(), q.copy()
        qa[axis] += step
        qb[axis] -= step
        return (np.asarray(f(qa)) - np.asarray(f(qb))) / (2.0 * step)

    return (4.0 * central(h / 2.0) - central(h)) / 3.0


def check_closedness(chart: ChartSpec, grid_step: float) -> float:
    """Max cyclic-derivative residual of the two-form over a sample lattice."""
    _validate_step(chart, grid_step)
    n = chart.n
    pts = chart.sample_points(per_axis=5 if n > 2 else 9, margin=grid_step)
    worst = 0.0
    for q in pts:
        w = chart.omega(q)
        if np.max(np.abs(w + w.T)) > 1e-12:
            raise InvalidChartError(f"omega not antisymmetric at {q}")
        if abs(np.linalg.det(w)) < 1e-300:
            raise InvalidChartError(f"omega singular at {q}")
        grads = np.stack(
            [richardson_partial(chart.omega, q, i, grid_step) for i in range(n)]
        )  # grads[i] = d_i omega
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    res = abs(grads[i][j, k] + grads[j][k, i] + grads[k][i, j])
                    worst = max(worst, float(res))
    return worst


def check_alpha_potential(chart: ChartSpec, grid_step: float) -> float:
    """Max residual of d_j alpha_k - d_k alpha_j - omega_jk over the lattice."""
    _validate_step(chart, grid_step)
    n = chart.n
    pts = chart.sample_points(per_axis=5 if n > 2 else 9, margin=grid_step)
    worst = 0.0
    for q in pts:
        w = chart.omega(q)
        grads = np.stack(
            [richardson_partial(chart.alpha, q, i, grid_step) for i in range(n)]
        )  # grads[j, k] = d_j alpha_k
        res = np.max(np.abs(grads - grads.T - w))
        worst = max(worst, float(res))
    return worst


def _validate_step(chart: ChartSpec, grid_step: float):
    if not np.isfinite(grid_step) or grid_step <= 0:
        raise InvalidArgumentError("grid_step must be positive and finite")
    extents = chart.domain_box[:, 1] - chart.domain_box[:, 0]
    if grid_step >= np.min(extents) / 8.0:
        raise InvalidArgumentError("grid_step must be smaller than box extent / 8")


# ---------------------------------------------------------------------------
# coordinate maps


@dataclass(frozen=True)
class CoordinateMap:
    """Invertible map qbar -> q with Jacobian and flat-metric pullback."""

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    fd_step: float = field(default=1e-4)

    def jac(self, qbar) -> np.ndarray:
        qbar = np.asarray(qbar, dtype=float)
        if self.jacobian is not None:
            J = np.asarray(self.jacobian(qbar), dtype=float)
        else:
            n = qbar.shape[-1]
            cols = [
                richardson_partial(self.forward, qbar, i, self.fd_step)
                for i in range(n)
            ]
            J = np.stack(cols, axis=-1)
        if abs(np.linalg.det(J)) < 1e-12:
            raise InvalidMapError(f"singular Jacobian at {qbar}")
        return J

    def metric_pullback(self, qbar) -> np.ndarray:
        """Flat metric dq^2 written in the new coordinates: J^T J."""
        J = self.jac(qbar)
        return J.T @ J

    def round_trip_residual(self, box, per_axis: int = 17) -> float:
        box = np.asarray(box, dtype=float)
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        worst = 0.0
        for qbar in pts:
            back = np.asarray(self.inverse(np.asarray(self.forward(qbar))))
            worst = max(worst, float(np.max(np.abs(back - qbar))))
        return worst


def identity_map() -> CoordinateMap:
    eye = lambda q: np.asarray(q, dtype=float)
    return CoordinateMap(
        forward=eye,
        inverse=eye,
        jacobian=lambda q: np.eye(np.asarray(q).shape[-1]),
        name="identity",
    )


def rotation_map(angle: float) -> CoordinateMap:
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return CoordinateMap(
        forward=lambda q: np.asarray(q, dtype=float) @ R.T,
        inverse=lambda q: np.asarray(q, dtype=float) @ R,
        jacobian=lambda q: R,
        name=f"rotation({angle:.4f})",
    )


def polar_map() -> CoordinateMap:
    """qbar = (r, phi) -> q = (r cos phi, r sin phi); valid for r > 0."""

    def forward(qbar):
        qbar = np.asarray(qbar, dtype=float)
        r, phi = qbar[..., 0], qbar[..., 1]
        return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)

    def inverse(q):
        q = np.asarray(q, dtype=float)
        r = np.hypot(q[..., 0], q[..., 1])
        phi = np.mod(np.arctan2(q[..., 1], q[..., 0]), 2.0 * np.pi)
        return np.stack([r, phi], axis=-1)

    def jacobian(qbar):
        r, phi = float(qbar[0]), float(qbar[1])
        c, s = np.cos(phi), np.sin(phi)
        return np.array([[c, -r * s], [s, r * c]])

    return CoordinateMap(forward=forward, inverse=inverse, jacobian=jacobian, name="polar")


def shear_map(k: float = 0.5) -> CoordinateMap:
    """Linear non-orthogonal map; exercises the off-diagonal metric path."""
    M = np.array([[1.0, k], [0.0, 1.0]])
    Minv = np.linalg.inv(M)
    return CoordinateMap(
        forward=lambda q: np.asarray(q, dtype=float) @ M.T,
        inverse=lambda q: np.asarray(q, dtype=float) @ Minv.T,
        jacobian=lambda q: M,
        name=f"shear({k})",
    )
