"""Pinned Brownian-bridge sampling and Monte Carlo kernel estimation.

A kernel value K(q, q') is estimated as

    N_nu(t) * G_nu(q, q'; t) * mean over bridges of exp(i S),

where the bridges run from q' at time 0 to q at time t with diffusion
constant nu per coordinate, G_nu is the pinned-measure total mass
(2 pi nu t)^(-d) exp(-|q - q'|^2 / (2 nu t)) in n = 2d dimensions, and S is
the midpoint (Stratonovich) discretization of the line integral of the
symplectic one-form minus the time integral of the Hamiltonian symbol.

Sampling is reproducible and worker-count independent: sample batches draw
from independent child seeds derived from (master seed, batch index) and
the reduction runs in batch-index order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import InvalidArgumentError
from .phasespace import canonical_one_form

_BATCH = 2000


@dataclass(frozen=True)
class BridgePath:
    """Discretized pinned Wiener path; points[0] and points[-1] are the pins."""

    times: np.ndarray  # (steps+1,)
    points: np.ndarray  # (steps+1, n)
    nu: float


@dataclass(frozen=True)
class ActionSpec:
    """Integrand fields for the phase exp(i S).

    one_form defaults to the canonical symmetric-gauge A(q) = (1/2) J^T q.
    extra_potential, if given, is called as extra_potential(tau, q) and
    enters S with the same minus sign as the Hamiltonian symbol.
    """

    one_form: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hamiltonian_symbol: Optional[Callable[[np.ndarray], np.ndarray]] = None
    extra_potential: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def form(self, d: int) -> Callable[[np.ndarray], np.ndarray]:
        return self.one_form if self.one_form is not None else canonical_one_form(d)


@dataclass(frozen=True)
class KernelEstimate:
    value: complex
    stderr: float
    n_samples: int
    nu: float
    t: float
    endpoints: Tuple[tuple, tuple]
    low_sample_warning: bool = False

    def to_json(self) -> str:
        return json.dumps(
            {
                "re": self.value.real,
                "im": self.value.imag,
                "stderr": self.stderr,
                "n_samples": self.n_samples,
                "nu": self.nu,
                "t": self.t,
                "q": list(self.endpoints[0]),
                "q_prime": list(self.endpoints[1]),
                "low_sample_warning": self.low_sample_warning,
            }
        )


def _check_finite(*args):
    for a in args:
        if not np.all(np.isfinite(np.asarray(a, dtype=float))):
            raise InvalidArgumentError("non-finite input")


def _bridge_batch(rng, nu, t, steps, q_start, q_end, batch):
    """(batch, steps+1, n) bridge paths pinned at q_start -> q_end."""
    n = q_start.shape[0]
    dtau = t / steps
    incs = rng.normal(0.0, np.sqrt(nu * dtau), size=(batch, steps, n))
    walk = np.empty((batch, steps + 1, n))
    walk[:, 0] = 0.0
    np.cumsum(incs, axis=1, out=walk[:, 1:])
    frac = (np.arange(steps + 1) * (1.0 / steps))[None, :, None]
    paths = q_start + walk - frac * (walk[:, -1:, :] - (q_end - q_start))
    paths[:, 0] = q_start
    paths[:, -1] = q_end
    return paths


def sample_bridge(nu, t, steps, q_start, q_end, seed) -> BridgePath:
    """Single pinned bridge; deterministic given seed."""
    q_start = np.asarray(q_start, dtype=float)
    q_end = np.asarray(q_end, dtype=float)
    _check_finite(nu, t, q_start, q_end)
    if steps < 2:
        raise InvalidArgumentError("steps must be >= 2")
    if nu <= 0 or t <= 0:
        raise InvalidArgumentError("nu and t must be positive")
    rng = np.random.default_rng(seed)
    paths = _bridge_batch(rng, nu, t, steps, q_start, q_end, 1)
    return BridgePath(times=np.linspace(0.0, t, steps + 1), points=paths[0], nu=nu)


def _batch_phases(points, times, spec: ActionSpec) -> np.ndarray:
    """exp(i S) for a batch of paths: points (B, steps+1, n)."""
    d = points.shape[-1] // 2
    mids = 0.5 * (points[:, :-1] + points[:, 1:])
    dq = points[:, 1:] - points[:, :-1]
    form = spec.form(d)
    S = np.sum(form(mids) * dq, axis=(1, 2))
    dtau = np.diff(times)
    if spec.hamiltonian_symbol is not None:
        S = S - np.sum(spec.hamiltonian_symbol(mids) * dtau[None, :], axis=1)
    if spec.extra_potential is not None:
        tau_mid = 0.5 * (times[:-1] + times[1:])
        S = S - np.sum(spec.extra_potential(tau_mid[None, :, None], mids) * dtau, axis=1)
    return np.exp(1j * S)


def stratonovich_action(path: BridgePath, spec: ActionSpec) -> complex:
    """Midpoint-discretized phase exp(i S) for one path."""
    if path.points.shape[0] < 2:
        raise InvalidArgumentError("path needs at least 2 points")
    return complex(_batch_phases(path.points[None], path.times, spec)[0])


def default_steps(nu: float, t: float) -> int:
    return max(2, int(round(1000.0 * t * max(1.0, nu / 16.0))))


def mc_kernel(
    d: int,
    nu: float,
    t: float,
    q,
    q_prime,
    spec: ActionSpec,
    n_samples: int,
    steps: Optional[int] = None,
    seed: int = 0,
    workers: int = 1,
) -> KernelEstimate:
    """Monte Carlo estimate of the regularized kernel on flat phase space."""
    q = np.asarray(q, dtype=float)
    q_prime = np.asarray(q_prime, dtype=float)
    _check_finite(nu, t, q, q_prime)
    if nu <= 0 or t <= 0 or n_samples < 1:
        raise InvalidArgumentError("nu, t, n_samples must be positive")
    if q.shape != (2 * d,) or q_prime.shape != (2 * d,):
        raise InvalidArgumentError(f"endpoints must have shape ({2*d},)")
    if steps is None:
        steps = default_steps(nu, t)
    times = np.linspace(0.0, t, steps + 1)

    n_batches = (n_samples + _BATCH - 1) // _BATCH

    def one_batch(i: int):
        count = min(_BATCH, n_samples - i * _BATCH)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        paths = _bridge_batch(rng, nu, t, steps, q_prime, q, count)
        phases = _batch_phases(paths, times, spec)
        return phases.sum(), float(np.sum(np.abs(phases) ** 2)), count

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(one_batch, range(n_batches)))
    else:
        partials = [one_batch(i) for i in range(n_batches)]

    total = complex(0.0)
    total_sq = 0.0
    for s1, s2, _ in partials:  # fixed batch-index order: deterministic
        total += s1
        total_sq += s2
    mean = total / n_samples
    var = max(total_sq / n_samples - abs(mean) ** 2, 0.0)
    var = var * n_samples / max(n_samples - 1, 1)
    stderr_phase = float(np.sqrt(var / n_samples))

    norm = (2.0 * np.pi * np.exp(0.5 * nu * t)) ** d
    mass = (2.0 * np.pi * nu * t) ** (-d) * np.exp(
        -float(np.sum((q - q_prime) ** 2)) / (2.0 * nu * t)
    )
    scale = norm * mass
    return KernelEstimate(
        value=complex(scale * mean),
        stderr=scale * stderr_phase,
        n_samples=n_samples,
        nu=nu,
        t=t,
        endpoints=(tuple(q), tuple(q_prime)),
        low_sample_warning=n_samples < 100,
    )
