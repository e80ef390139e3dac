"""Normalization factors and extrapolation of kernel estimates in the
diffusion constant nu.

The regularized kernel carries an overall factor N_nu(t) = (2 pi
e^{nu t / 2})^d.  Sweeps over nu are extrapolated to nu -> infinity by
fitting both an O(1/nu) and an O(e^{-nu t/2}) correction model (plus a
weighted constant model when statistical errors dominate) and selecting by
residual with a parsimony tie-break.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError

_LOG_LIMIT = 700.0  # exp overflow threshold for float64


@dataclass(frozen=True)
class LogScaledValue:
    """Normalization too large for float64; stored as its natural log."""

    log: float

    def __float__(self):
        return float(np.exp(self.log)) if self.log < _LOG_LIMIT else float("inf")


def normalization(nu: float, t: float, d: int = 1):
    """N_nu(t) = (2 pi e^{nu t / 2})^d; log-scaled on overflow."""
    if t <= 0:
        raise InvalidArgumentError("t must be positive")
    if d < 1:
        raise InvalidArgumentError("d must be a positive integer")
    log_value = d * (np.log(2.0 * np.pi) + 0.5 * nu * t)
    if log_value > _LOG_LIMIT:
        return LogScaledValue(log=float(log_value))
    return float(np.exp(log_value))


def _coerce(estimate):
    """Accept KernelEstimate-like objects or plain complex numbers."""
    value = getattr(estimate, "value", estimate)
    stderr = float(getattr(estimate, "stderr", 0.0))
    return complex(value), stderr


@dataclass(frozen=True)
class NuSweep:
    """Kernel estimates at increasing diffusion constants, fixed (t, q, q')."""

    nus: np.ndarray
    estimates: tuple
    t: float
    q: Optional[np.ndarray] = None
    q_prime: Optional[np.ndarray] = None

    def __post_init__(self):
        nus = np.asarray(self.nus, dtype=float)
        object.__setattr__(self, "nus", nus)
        object.__setattr__(self, "estimates", tuple(self.estimates))
        if len(nus) < 3 or len(nus) != len(self.estimates):
            raise InvalidArgumentError("need >= 3 matched (nu, estimate) pairs")
        if np.any(np.diff(nus) <= 0):
            raise InvalidArgumentError("nus must be strictly increasing")

    @property
    def values(self) -> np.ndarray:
        return np.array([_coerce(e)[0] for e in self.estimates])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([_coerce(e)[1] for e in self.estimates])

    def to_json(self) -> str:
        rows = [
            {"nu": float(nu), "re": v.real, "im": v.imag, "stderr": s}
            for nu, v, s in zip(self.nus, self.values, self.stderrs)
        ]
        return json.dumps({"t": self.t, "rows": rows}, indent=2)


@dataclass(frozen=True)
class ExtrapolationResult:
    value: complex
    model: str
    fit_residual: float
    residuals: dict
    reliable: bool


def _fit(design: np.ndarray, values: np.ndarray, weights: np.ndarray):
    """Weighted least squares on real and imaginary parts; returns
    (constant-term estimate, rms weighted residual, dof-scaled score)."""
    A = design * weights[:, None]
    n, k = design.shape
    out = np.zeros(k, dtype=complex)
    ssq = 0.0
    for part, unit in ((values.real, 1.0), (values.imag, 1j)):
        coef, *_ = np.linalg.lstsq(A, part * weights, rcond=None)
        out = out + unit * coef
        ssq += float(np.sum((design @ coef - part) ** 2 * weights ** 2))
    rms = np.sqrt(ssq / n)
    dof = max(n - k, 1)
    return complex(out[0]), rms, ssq / dof


def extrapolate(sweep: NuSweep) -> ExtrapolationResult:
    """Fit correction models in nu and return the extrapolated constant term.

    Models: K = K_inf + c/nu ("1/nu") and K = K_inf + c e^{-nu t/2}
    ("exponential"); when the sweep carries statistical errors a weighted
    constant model joins the candidates.  With error bars, the constant model
    is selected whenever it is statistically consistent with the data
    (chi^2/dof <= 4): a two-parameter correction model fitted through noisy
    points absorbs the noise into its slope and extrapolates it, so the
    weighted mean is the better estimate unless the data genuinely slope.
    Without error bars, selection picks the smallest dof-scaled residual.
    """
    nus = sweep.nus
    if nus[-1] / nus[0] < 4.0:
        raise InvalidArgumentError("nu range must span at least a factor of 4")
    values = sweep.values
    stderrs = sweep.stderrs
    weighted = bool(np.all(stderrs > 0))
    weights = 1.0 / stderrs if weighted else np.ones_like(nus)

    ones = np.ones_like(nus)
    candidates = {
        "1/nu": np.stack([ones, 1.0 / nus], axis=1),
        "exponential": np.stack([ones, np.exp(-0.5 * nus * sweep.t)], axis=1),
    }
    if weighted:
        candidates["constant"] = ones[:, None]

    fits = {name: _fit(A, values, weights) for name, A in candidates.items()}
    residuals = {name: f[1] for name, f in fits.items()}
    if weighted and fits["constant"][2] <= 4.0:
        best = "constant"
    else:
        decaying = {k: v for k, v in fits.items() if k != "constant"}
        best = min(decaying, key=lambda name: decaying[name][2])

    dist = np.abs(values - values[-1])
    reliable = bool(np.all(np.diff(dist[:-1]) < 0)) if len(nus) > 3 else bool(
        dist[0] >= dist[1]
    )
    return ExtrapolationResult(
        value=fits[best][0],
        model=best,
        fit_residual=residuals[best],
        residuals=residuals,
        reliable=reliable,
    )
