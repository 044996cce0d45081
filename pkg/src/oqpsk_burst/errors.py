class ModemError(Exception):
    """Base class for all modem simulation errors."""


class ConfigError(ModemError, ValueError):
    pass


class AliasingError(ConfigError):
    """Frequency offset exceeds the anti-aliasing limit of the sampled spectrum."""


class NumericError(ModemError, ArithmeticError):
    pass


class EmptyInputError(ModemError, ValueError):
    pass


class TruncatedFrameError(ModemError):
    """The tracked sampling index ran off the end of the buffer."""
