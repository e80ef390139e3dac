"""Numerical kernels for regularized coherent-state propagators.

Subpackages:

- ``phasespace``: symplectic charts, one-forms, and coordinate maps.
- ``stochastic``: Monte Carlo bridge sampling of the kernel.
- ``pde``: grid evolution of the kernel under the magnetic generator.
- ``limits``: normalization factors and large-regulator extrapolation.
- ``oracles``: closed-form coherent-state references for validation.
- ``conversion``: Darboux charts and constraint-to-canonical conversion.
- ``projection``: stochastic gauge averaging and window projectors.
- ``cli``: command-line front end.
"""

from .errors import (
    BoxTooSmallError,
    ChartEvaluationError,
    ConfigError,
    ConversionViolatedError,
    DarbouxInvalidError,
    DegenerateSymplecticError,
    InvalidArgumentError,
    InvalidChartError,
    InvalidMapError,
    PhaseKernelError,
    TruncationTooSmallError,
    UnsupportedSymbolError,
)

__version__ = "0.1.0"

__all__ = [
    "BoxTooSmallError",
    "ChartEvaluationError",
    "ConfigError",
    "ConversionViolatedError",
    "DarbouxInvalidError",
    "DegenerateSymplecticError",
    "InvalidArgumentError",
    "InvalidChartError",
    "InvalidMapError",
    "PhaseKernelError",
    "TruncationTooSmallError",
    "UnsupportedSymbolError",
    "__version__",
]
