class DevannError(Exception):
    """Base class for all errors raised by devann."""


class ConfigurationError(DevannError, ValueError):
    """Invalid parameters or configuration values."""


class ContractError(DevannError, ValueError):
    """A call violated a documented precondition (arity, evaluation state, ...)."""


class DatasetError(DevannError):
    """The classification dataset could not be loaded."""
