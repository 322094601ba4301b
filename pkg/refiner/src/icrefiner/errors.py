class RefinerError(Exception):
    """Base class for refiner failures."""


class ConfigError(RefinerError):
    """Invalid configuration or mismatched artifacts."""


class DataError(RefinerError):
    """Malformed or missing archive data."""


class TrainingDiverged(RefinerError):
    """Non-finite loss encountered; loss curves are preserved on the exception."""

    def __init__(self, message: str, curves: dict):
        super().__init__(message)
        self.curves = curves
