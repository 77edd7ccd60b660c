"""Exception hierarchy shared across the package."""
from __future__ import annotations



class PilotWaveError(Exception):
    """Base class for all simulator errors."""


class ZeroAmplitude(PilotWaveError):
    """Guidance velocity requested where the wave function vanishes."""


class OutsidePacket(PilotWaveError):
    """Initial transverse position lies outside the incident packet."""


class ConfigError(PilotWaveError):
    """Malformed experiment chain or scenario."""


class NotProduct(PilotWaveError):
    """Two-particle spin state is entangled where a product was required."""


class ParseError(ConfigError):
    """Experiment file is not syntactically valid."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    """Experiment file parses but names an unknown key or an invalid value."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
