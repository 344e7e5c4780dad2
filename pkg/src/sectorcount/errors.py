"""Exception types raised across the package."""


class SectorcountError(Exception):
    """Base class for all errors raised by this package."""


class NonConvexError(SectorcountError):
    """Curvature is not strictly positive somewhere on the sample grid."""


class NonPositiveRadiusError(SectorcountError):
    """Radial profile is not strictly positive somewhere on the sample grid."""


class ConvergenceFailureError(SectorcountError):
    """A root solve failed to converge; usually a tolerance misconfiguration."""


class OutOfChartError(SectorcountError):
    """Requested tangential offset leaves the local graph chart."""


class OriginSingularError(SectorcountError):
    """Dispersion is undefined at the momentum-space origin."""


class SectorTooLongError(SectorcountError):
    """Sector length must stay below a quarter of the curve length."""


class InadmissibleWidthError(SectorcountError):
    """Sector width must lie in [l^2, l] for sector length l."""


class DegenerateRegionError(SectorcountError):
    """The integrand vanishes on the whole region; the check is meaningless."""


class EmptyWindowError(SectorcountError):
    """The separated pair window has measure zero for the given radii."""


class EpsilonTooLargeError(SectorcountError):
    """Separation parameter must stay below a quarter of omega1."""


class TooManyTuplesError(SectorcountError):
    """Projected tuple enumeration exceeds the configured budget."""


class ScaleOrderError(SectorcountError):
    """Two-scale queries need a strictly finer second scale (i < j)."""


class RatioTooSmallError(SectorcountError):
    """Two-scale queries need fine length below a quarter of the coarse one."""


class DegenerateSweepError(SectorcountError):
    """All sweep points produced zero counts; no exponent can be fitted."""


class ConfigError(SectorcountError):
    """Invalid experiment configuration; carries the offending field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
