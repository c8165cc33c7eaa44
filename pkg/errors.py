class GapDefectError(ValueError):
    """Base class for every error raised by the gapdefect modules."""


class PotentialError(GapDefectError):
    pass


class PropagationError(GapDefectError):
    pass


class FloquetError(GapDefectError):
    pass


class EvansError(GapDefectError):
    pass


class GapCountError(GapDefectError):
    pass


class DiophantineError(GapDefectError):
    pass


class OracleError(GapDefectError):
    pass


class ConfigError(GapDefectError):
    """Bad flags or config files; the CLI maps this to exit code 2."""
