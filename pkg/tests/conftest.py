"""Shared test helpers: closed-form references computed independently."""

import numpy as np
import pytest


def magnetic_kernel(nu: float, t: float, q, qp) -> complex:
    """Closed-form kernel for the d=1 generator with the symmetric gauge
    and h = 0 (magnetic heat kernel), derived by hand:

        K = exp(-coth(s/2) |dq|^2 / 4 + i (x p' - p x') / 2) / (4 pi sinh(s/2)),

    with s = nu * t and dq = q - q'.
    """
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    s = nu * t
    dq = q - qp
    cross = q[0] * qp[1] - q[1] * qp[0]
    amp = 1.0 / (4.0 * np.pi * np.sinh(s / 2.0))
    return amp * np.exp(-np.cosh(s / 2) / np.sinh(s / 2) * (dq @ dq) / 4.0
                        + 0.5j * cross)


def free_overlap(q, qp) -> complex:
    """Gaussian coherent-state overlap, the nu -> infinity limit."""
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    dq = q - qp
    cross = q[0] * qp[1] - q[1] * qp[0]
    return np.exp(-(dq @ dq) / 4.0 + 0.5j * cross)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
