"""Exception types shared across the package."""


class PhaseKernelError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(PhaseKernelError, ValueError):
    """A caller-supplied argument is out of range or non-finite."""


class ChartEvaluationError(PhaseKernelError):
    """A chart field could not be evaluated at a sample point."""


class InvalidChartError(PhaseKernelError):
    """A chart violates a structural requirement (antisymmetry, invertibility)."""


class InvalidMapError(PhaseKernelError):
    """A coordinate map is singular or fails its round-trip check."""


class BoxTooSmallError(PhaseKernelError):
    """Evolved field leaks into the boundary band of the grid."""

    def __init__(self, band_norm: float, tolerance: float):
        self.band_norm = band_norm
        self.tolerance = tolerance
        super().__init__(
            f"boundary band magnitude {band_norm:.3e} exceeds "
            f"{tolerance:.3e} of the field maximum; enlarge the box"
        )


class DarbouxInvalidError(PhaseKernelError):
    """A candidate Darboux chart fails one of its defining identities."""

    def __init__(self, residuals: dict):
        self.residuals = residuals
        worst = max(residuals, key=residuals.get)
        super().__init__(
            "Darboux chart rejected; residuals: "
            + ", ".join(f"{k}={v:.3e}" for k, v in residuals.items())
            + f" (worst: {worst})"
        )


class DegenerateSymplecticError(PhaseKernelError):
    """The constraint bracket matrix is singular at a sample point."""


class ConversionViolatedError(PhaseKernelError):
    """A conversion bracket identity fails beyond tolerance."""

    def __init__(self, which: str, residual: float, point):
        self.which = which
        self.residual = residual
        self.point = point
        super().__init__(f"{which} residual {residual:.3e} at {point}")


class TruncationTooSmallError(PhaseKernelError):
    """Fock truncation too small for the requested coherent vectors."""

    def __init__(self, required: int, tail_norm: float):
        self.required = required
        self.tail_norm = tail_norm
        super().__init__(
            f"coherent tail norm {tail_norm:.3e} >= 1e-10; need truncation >= {required}"
        )


class UnsupportedSymbolError(PhaseKernelError):
    """Symbol extraction requested for an unsupported operator class."""


class ConfigError(PhaseKernelError):
    """A run configuration failed validation."""
