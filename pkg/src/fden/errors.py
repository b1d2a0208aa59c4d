"""Exception types shared across the package."""


class FdenError(Exception):
    """Base class for all package-specific errors."""


class ChannelError(FdenError, ValueError):
    """Invalid spin-orbit channel label (kappa = 0, mismatched numbers)."""


class QuantumNumberError(FdenError, ValueError):
    """Quantum numbers outside the admissible range for a channel."""


class SubcriticalityError(FdenError, ValueError):
    """Coupling too strong for the requested channel or state."""


class ConfigError(FdenError, ValueError):
    """Invalid grid, CLI, or run configuration."""


class PotentialError(FdenError, ValueError):
    """A radial potential evaluated to NaN/inf on a grid node."""


class SolverError(FdenError, RuntimeError):
    """Eigensolver failure (non-convergence, empty subspace)."""


class DegenerateBasisError(SolverError):
    """Positive-energy subspace came out empty after filtering."""


class CouplingTooLargeError(FdenError, ValueError):
    """Perturbation coupling outside the regime where the restricted
    operator stays bounded below."""


class ParameterError(FdenError, ValueError):
    """Analytic parameter outside the admissible range of a bound or norm."""


class DomainError(FdenError, ValueError):
    """Requested evaluation point or mass fraction not contained in the grid."""


class ConvergenceError(FdenError, RuntimeError):
    """A truncated sum or quadrature failed its convergence diagnostic."""


class ConsistencyError(FdenError, RuntimeError):
    """An internal cross-check failed; indicates a bug, not bad input."""
