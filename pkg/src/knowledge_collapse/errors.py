class ConfigError(ValueError):
    """Invalid parameter or configuration value.

    ``field`` names the offending setting when known, so front ends can point
    at it.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class UsageError(ValueError):
    """Arguments that are individually valid but cannot be used together."""
