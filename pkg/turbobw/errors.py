# turbobw/errors.py
from typing import Optional


class TurboBWError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(TurboBWError, ValueError):
    """Invalid trellis, channel, receiver or experiment configuration."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class InputError(TurboBWError, ValueError):
    """Invalid data handed to an operation (NaN, wrong shape, bad bits...)."""


class InferenceError(TurboBWError, ArithmeticError):
    """The observations are impossible under the model at time index ``t``."""

    def __init__(self, t: int, message: str = "all edge metrics are -inf"):
        self.t = int(t)
        super().__init__(f"t={self.t}: {message}")
