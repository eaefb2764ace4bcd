"""Exception and warning types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is out of range or malformed.

    ``field`` names the offending config key (dotted path) when known.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ContractViolation(ValueError):
    """An operation was called with inputs outside its contract."""


class StructuralError(ValueError):
    """The graph structure cannot support the requested operation."""


class ConfigWarning(UserWarning):
    """Non-fatal configuration issue (e.g. an unrooted normal subgraph)."""
