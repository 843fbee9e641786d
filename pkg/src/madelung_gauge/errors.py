"""Exception types raised across the package."""


class MadelungError(Exception):
    """Base class for all package errors."""


class AllMasked(MadelungError):
    pass


class ZeroNorm(MadelungError):
    pass


class SingularSystem(MadelungError):
    pass


class UnknownKind(MadelungError):
    pass


class InsufficientSnapshots(MadelungError):
    pass


class ReferenceInvalid(MadelungError):
    pass


class SpinNotOrthogonal(MadelungError):
    pass


class StartInNode(MadelungError):
    pass


class ConfigError(MadelungError):
    """Base for scenario parsing failures (CLI exit code 2)."""


class MissingKey(ConfigError):
    def __init__(self, key):
        super().__init__(f"missing required key {key!r}")
        self.key = key


class UnknownKey(ConfigError):
    def __init__(self, key):
        super().__init__(f"unknown key {key!r}")
        self.key = key


class InvalidValue(ConfigError):
    def __init__(self, key, reason):
        super().__init__(f"invalid value for {key!r}: {reason}")
        self.key = key
        self.reason = reason


class NonStationaryWarning(UserWarning):
    """-dS/dt varies in space, so the energy split is not meaningful."""


class BoundaryDensityWarning(UserWarning):
    """Density reached the box walls; the vanishing-flux assumption is violated."""


class ScenarioError(MadelungError):
    """A module error raised while running a scenario, with the scenario named."""
