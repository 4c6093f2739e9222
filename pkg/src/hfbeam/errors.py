"""Exception types raised by the hfbeam pipelines."""


class HfbeamError(Exception):
    """Base class for all library errors."""


class NonPositiveSpeed(HfbeamError):
    """Sound speed evaluated to a non-positive value."""


class MomentumUnderflow(HfbeamError):
    """|p| fell below the configured floor; the Hamiltonian cone is singular at p = 0."""


class ZeroGradientPhase(HfbeamError):
    """Initial phase has vanishing gradient at a beam launch point."""


class LostPositivity(HfbeamError):
    """Imaginary part of a phase Hessian lost positive definiteness."""


class StepFailure(HfbeamError):
    """Adaptive ODE integration could not meet the error tolerance."""


class EmptySupport(HfbeamError):
    """Initial amplitude support contains no quadrature nodes."""


class GridTooCoarse(HfbeamError):
    """Spatial grid does not resolve the oscillation scale."""


class OutOfDomain(HfbeamError):
    """A characteristic backtrace left the phase-space grid."""


class SingularGp(HfbeamError):
    """|g_p| too small for a stable Hessian reconstruction."""


class DeltaUnresolved(HfbeamError):
    """Level-set zero crossing thinner than the regularized delta can resolve."""


class CFLViolation(HfbeamError):
    """Time step violates the CFL bound of the reference solver."""


class UnknownPreset(HfbeamError):
    """Requested initial-data preset name is not registered."""


class ConfigError(HfbeamError):
    """Run configuration is invalid or contains unknown keys."""
