"""Error types shared by the services, the CLI and the HTTP routers."""


class HeatLabError(Exception):
    """Base class for every error raised on purpose by this package."""

    exit_code = 1


class ConfigError(HeatLabError):
    """A run configuration could not be read or failed validation."""

    exit_code = 2


class DivergenceError(HeatLabError):
    """The discrete solution blew up during time stepping."""

    exit_code = 3

    def __init__(self, t: float, norm: float):
        self.t = t
        self.norm = norm
        super().__init__(f"solution diverged at t={t:.6g} (norm={norm:.3e})")


class KernelRangeError(HeatLabError):
    """Kernel evaluation would leave the double-precision range."""

    exit_code = 4

    def __init__(self, scale: float, limit: float = 700.0):
        self.scale = scale
        self.limit = limit
        super().__init__(
            f"kernel argument sqrt(lambda)*l = {scale:.6g} exceeds {limit:g}"
        )


class DomainError(HeatLabError, ValueError):
    """A time or coordinate lies outside the region where a quantity is defined."""

    exit_code = 2
