"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ModelError(ValueError):
    """Base class for all model errors."""


class OutOfRange(ModelError):
    def __init__(self, field: str, value, bound: str):
        self.field = field
        self.value = value
        self.bound = bound
        super().__init__(f"{field}={value!r} violates {bound}")


class NonFinite(ModelError):
    def __init__(self, field: str, value):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r} is not finite")


class DomainError(ModelError):
    pass


class Infeasible(ModelError):
    pass


class Degenerate(ModelError):
    pass


class OutsideSigmaRegion(ModelError):
    pass


class Undefined(ModelError):
    pass


class ConfigError(ModelError):
    """Invalid run configuration; `path` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
