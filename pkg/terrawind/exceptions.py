from typing import Sequence, Tuple


class BaseError(Exception):
    pass


class ModuleNotInstalled(BaseError):
    def __init__(self, module: str) -> None:
        message = f'Required module "{module}" is not installed.'
        super().__init__(message)


class UnsupportedMethod(BaseError):
    def __init__(self, method: str, engine: str) -> None:
        message = f'Method "{method}" is not supported by engine {engine}.'
        super().__init__(message)


class InvalidFactor(BaseError):
    def __init__(self, factor: int) -> None:
        message = f"Resampling factor must be an integer >= 2, got {factor}."
        super().__init__(message)


class DimensionNotDivisible(BaseError):
    def __init__(self, rows: int, cols: int, factor: int) -> None:
        message = f"Grid {rows}x{cols} is not divisible by factor {factor}."
        super().__init__(message)


class ShapeMismatch(BaseError):
    def __init__(self, expected: Sequence[int], actual: Sequence[int], what: str = "field") -> None:
        message = f"Shape mismatch for {what}: expected {tuple(expected)}, got {tuple(actual)}."
        super().__init__(message)


class PatchTooLarge(BaseError):
    def __init__(self, patch: int, rows: int, cols: int) -> None:
        message = f"Patch size {patch} does not fit in a {rows}x{cols} grid."
        super().__init__(message)


class InvalidSchedule(BaseError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid noise schedule: {reason}")


class StepOutOfRange(BaseError):
    def __init__(self, t: int, T: int) -> None:
        message = f"Diffusion step {t} is outside [1, {T}]."
        super().__init__(message)


class EmptyDataset(BaseError):
    def __init__(self) -> None:
        super().__init__("Training dataset is empty.")


class TrainingDiverged(BaseError):
    def __init__(self, iteration: int) -> None:
        super().__init__(f"Non-finite parameters after training iteration {iteration}.")


class StationError(BaseError):
    pass


class NoStations(StationError):
    def __init__(self) -> None:
        super().__init__("At least one station observation is required.")


class StationOutOfBounds(StationError):
    def __init__(self, station_id: str, row: int, col: int, shape: Tuple[int, int]) -> None:
        message = f'Station "{station_id}" at ({row}, {col}) is outside grid {shape[0]}x{shape[1]}.'
        super().__init__(message)


class DuplicateStation(StationError):
    def __init__(self, row: int, col: int) -> None:
        message = f"More than one station observes cell ({row}, {col})."
        super().__init__(message)


class ZeroVariance(BaseError):
    def __init__(self, what: str) -> None:
        super().__init__(f"{what} has zero variance; correlation is undefined.")


class InvalidHeight(BaseError):
    def __init__(self, height: float) -> None:
        super().__init__(f"Heights must be positive, got {height}.")


class GridFormatError(BaseError):
    pass


class BadMagic(GridFormatError):
    def __init__(self, found: bytes) -> None:
        super().__init__(f"Not a grid file: bad magic {found!r}.")


class VersionMismatch(GridFormatError):
    def __init__(self, found: int, expected: int) -> None:
        super().__init__(f"Unsupported grid file version {found}, expected {expected}.")


class TruncatedPayload(GridFormatError):
    def __init__(self, expected: int, actual: int) -> None:
        message = f"Grid payload truncated: expected {expected} bytes, got {actual}."
        super().__init__(message)


class CheckpointError(BaseError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid checkpoint: {reason}")


class ConfigError(BaseError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid configuration: {reason}")


class UnknownConfigKey(ConfigError):
    def __init__(self, section: str, key: str) -> None:
        super().__init__(f'unknown key "{key}" in section "{section}"')


class UsageError(BaseError):
    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid usage: {reason}")
