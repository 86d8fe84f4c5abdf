"""Input validation shared by configs and estimators."""

from __future__ import annotations

import numpy as np


class ConfigError(ValueError):
    """A configuration value is missing, malformed or inconsistent.

    ``fields`` names every offending key so the CLI can report them.
    """

    def __init__(self, fields, message: str):
        if isinstance(fields, str):
            fields = (fields,)
        self.fields = tuple(fields)
        super().__init__(f"{', '.join(self.fields)}: {message}")


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {value}")
    return int(value)


def check_probability(value, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ConfigError(name, f"must lie in [0, 1], got {value}")
    return value


def check_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise ConfigError(name, f"expected one of {tuple(choices)}, got {value!r}")
    return value


def check_observations(X, n_features: int) -> tuple[np.ndarray, bool]:
    """Coerce one observation or a batch to a float64 2-D array.

    Returns the array and whether the input was a single observation.
    """
    arr = np.asarray(X, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"observations must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[1] != n_features:
        raise ValueError(
            f"observation has {arr.shape[1]} values, policy expects {n_features}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError("observations contain NaN or infinity")
    return arr, single
