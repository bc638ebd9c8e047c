"""
Exception hierarchy and CLI exit codes
"""

from pathlib import Path
from typing import Optional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4
EXIT_INTERRUPTED = 130  # same as Ctrl+C in a shell


class ExperimentError(Exception):
    """Base class for every error raised by this package"""
    exit_code = EXIT_TRAINING


# --- configuration -----------------------------------------------------------

class ConfigError(ExperimentError, ValueError):
    exit_code = EXIT_CONFIG


# --- data --------------------------------------------------------------------

class DataError(ExperimentError):
    exit_code = EXIT_DATA


class IdxFormatError(DataError, ValueError):
    """Malformed IDX payload"""


class BadMagic(IdxFormatError):
    def __init__(self, found: int, expected: int):
        super().__init__(f'Magic number mismatch: found 0x{found:08x}, expected 0x{expected:08x}')
        self.found = found
        self.expected = expected


class TruncatedFile(IdxFormatError):
    def __init__(self, needed: int, available: int):
        super().__init__(f'IDX payload truncated: header promises {needed} bytes, {available} present')
        self.needed = needed
        self.available = available


class DimensionMismatch(IdxFormatError):
    def __init__(self, found: tuple, expected: tuple):
        super().__init__(f"Image geometry {'x'.join(map(str, found))} not supported "
                         f"(expected {'x'.join(map(str, expected))})")
        self.found = found
        self.expected = expected


class InvalidLabel(IdxFormatError):
    def __init__(self, position: int, value: int, max_label: int):
        super().__init__(f'Label {value} at position {position} outside 0..{max_label}')
        self.position = position
        self.value = value


class CountMismatch(DataError):
    def __init__(self, images: int, labels: int):
        super().__init__(f'Image count {images} does not match label count {labels}')
        self.images = images
        self.labels = labels


class MnistFileMissing(DataError):
    def __init__(self, path: Path):
        super().__init__(f'MNIST file not found: {path}')
        self.path = path


class EmptyBucket(DataError):
    def __init__(self, digit: int):
        super().__init__(f'No source images with label {digit}')
        self.digit = digit


class UnsupportedGeometry(DataError, ValueError):
    pass


class UnevenFolds(DataError, ValueError):
    def __init__(self, folds: int, pair_count: int):
        super().__init__(f'{folds} folds do not divide {pair_count} pairs evenly')
        self.folds = folds
        self.pair_count = pair_count


class DatasetIntegrityError(DataError):
    pass


class IoError(DataError):
    def __init__(self, path: Path, cause: OSError):
        super().__init__(f'I/O error on {path}: {cause}')
        self.path = path
        self.__cause__ = cause


# --- training ----------------------------------------------------------------

class TrainingError(ExperimentError):
    exit_code = EXIT_TRAINING


class ShapeMismatch(TrainingError, ValueError):
    pass


class LengthMismatch(TrainingError, ValueError):
    def __init__(self, left: int, right: int):
        super().__init__(f'Length mismatch: {left} != {right}')


class StaleCache(TrainingError):
    pass


class NonFiniteGradient(TrainingError):
    def __init__(self, name: str, bad_count: int, size: int):
        super().__init__(f'Gradient for {name} has {bad_count}/{size} non-finite entries')
        self.name = name
        self.bad_count = bad_count


class NonFiniteActivation(TrainingError):
    def __init__(self, layer: str):
        super().__init__(f'Non-finite values after layer {layer}')
        self.layer = layer


class IncompatibleCheckpoint(TrainingError):
    pass


class FoldFailed(TrainingError):
    def __init__(self, fold: int, cause: BaseException):
        super().__init__(f'Fold {fold} failed: {cause}')
        self.fold = fold
        self.__cause__ = cause
        # keep the category of the underlying failure for the exit code
        self.exit_code = getattr(cause, 'exit_code', EXIT_TRAINING)


class RunInterrupted(ExperimentError):
    exit_code = EXIT_INTERRUPTED


class WorkerError(ExperimentError):
    """Failure reported back from a worker process, keeping its exit code"""

    def __init__(self, message: str, exit_code: int = EXIT_TRAINING, kind: str = ''):
        super().__init__(message)
        self.exit_code = exit_code
        self.kind = kind

    def __reduce__(self):
        return (WorkerError, (str(self), self.exit_code, self.kind))


def exit_code_for(exc: Optional[BaseException]) -> int:
    """Map an exception to the process exit code"""
    if exc is None:
        return EXIT_OK
    if isinstance(exc, KeyboardInterrupt):
        return EXIT_INTERRUPTED
    return getattr(exc, 'exit_code', EXIT_TRAINING)