from __future__ import annotations

from typing import Any


class RelhypError(Exception):
    """Base class for every error raised by relhyp."""


class InvalidLetter(RelhypError):
    pass


class UnknownGenerator(RelhypError):
    pass


class UnsupportedFamily(RelhypError):
    pass


class UnknownPeripheral(RelhypError):
    pass


class BoundExceeded(RelhypError):
    pass


class WindowTooLarge(RelhypError):
    pass


class WindowTooSmall(RelhypError):
    pass


class CapExceeded(RelhypError):
    pass


class MixedSpecs(RelhypError):
    pass


class NotOnSides(RelhypError):
    pass


class NotTrivialInG(RelhypError):
    pass


class EmptyCovering(RelhypError):
    pass


class UnsupportedPeripheral(RelhypError):
    pass


class MetricMismatch(RelhypError):
    pass


class NotSeparated(RelhypError):
    def __init__(self, message: str, witness: tuple[Any, Any] | None = None):
        super().__init__(message)
        self.witness = witness


class SeparationFailed(RelhypError):
    def __init__(self, message: str, witness: tuple[Any, Any] | None = None):
        super().__init__(message)
        self.witness = witness


class IncompatibleScales(RelhypError):
    pass


class OutOfRange(RelhypError):
    pass


class ConfigParse(RelhypError):
    pass


class SchemaMismatch(RelhypError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
