"""
MNIST IDX parsing, serialization and label indexing
"""

import gzip
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from .errors import (
    BadMagic, TruncatedFile, DimensionMismatch, InvalidLabel,
    CountMismatch, MnistFileMissing, IoError,
)

# Data format (big endian):
#   u32   magic (0x00000803 images / 0x00000801 labels)
#   u32[] one size per dimension
#   u8[]  row-major payload
IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
GZIP_SIGNATURE = b'\x1f\x8b'

MNIST_SHAPE = (28, 28)
MNIST_TRAIN_COUNT = 60000
MNIST_TEST_COUNT = 10000
DIGIT_MAX = 9


class Partition(Enum):
    TRAIN = "train"
    TEST = "test"


def maybe_decompress(data: bytes) -> bytes:
    """Transparently gunzip payloads that carry the gzip signature"""
    if data[:2] == GZIP_SIGNATURE:
        return gzip.decompress(data)
    return data


def _read_header(data: bytes, magic: int, ndims: int) -> Tuple[int, ...]:
    header_size = 4 * (1 + ndims)
    if len(data) < 4:
        raise TruncatedFile(header_size, len(data))
    found, = struct.unpack('>I', data[:4])
    if found != magic:
        raise BadMagic(found, magic)
    if len(data) < header_size:
        raise TruncatedFile(header_size, len(data))
    return struct.unpack(f'>{ndims}I', data[4:header_size])


def parse_idx_images(data: bytes, shape: Tuple[int, int] = MNIST_SHAPE) -> np.ndarray:
    """Parse an IDX image file into a (count, rows, cols) uint8 array.

    ``shape`` is the only geometry accepted; MNIST files must be 28x28 and
    exported pair datasets 28x56.
    """
    data = maybe_decompress(data)
    count, rows, cols = _read_header(data, IDX_IMAGE_MAGIC, 3)
    if (rows, cols) != tuple(shape):
        raise DimensionMismatch((rows, cols), tuple(shape))

    needed = 16 + count * rows * cols
    if len(data) < needed:
        raise TruncatedFile(needed, len(data))
    if count == 0:
        return np.zeros((0, rows, cols), dtype=np.uint8)

    images = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    return images.reshape(count, rows, cols).copy()


def parse_idx_labels(data: bytes, max_label: int = DIGIT_MAX) -> np.ndarray:
    """Parse an IDX label file into a (count,) uint8 array"""
    data = maybe_decompress(data)
    count, = _read_header(data, IDX_LABEL_MAGIC, 1)

    needed = 8 + count
    if len(data) < needed:
        raise TruncatedFile(needed, len(data))
    if count == 0:
        return np.zeros(0, dtype=np.uint8)

    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=8).copy()
    bad = np.flatnonzero(labels > max_label)
    if bad.size:
        raise InvalidLabel(int(bad[0]), int(labels[bad[0]]), max_label)
    return labels


def serialize_idx_images(images: np.ndarray) -> bytes:
    """Encode a (count, rows, cols) uint8 array as IDX bytes"""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    return struct.pack('>IIII', IDX_IMAGE_MAGIC, count, rows, cols) + images.tobytes()


def serialize_idx_labels(labels: np.ndarray) -> bytes:
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    return struct.pack('>II', IDX_LABEL_MAGIC, labels.shape[0]) + labels.tobytes()


def read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise MnistFileMissing(path)
    try:
        return path.read_bytes()
    except OSError as e:
        raise IoError(path, e)


def write_bytes(path: Path, data: bytes):
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        raise IoError(path, e)


def _read_only(array: np.ndarray) -> np.ndarray:
    if array.flags.writeable:
        array = array.copy()
        array.setflags(write=False)
    return array


@dataclass(frozen=True)
class MnistDataset:
    """Raw MNIST digits of one official partition; pixels stay 8-bit"""
    images: np.ndarray
    labels: np.ndarray
    partition: Partition

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise CountMismatch(self.images.shape[0], self.labels.shape[0])
        if self.images.shape[1:] != MNIST_SHAPE:
            raise DimensionMismatch(tuple(self.images.shape[1:]), MNIST_SHAPE)
        bad = np.flatnonzero((self.labels < 0) | (self.labels > DIGIT_MAX))
        if bad.size:
            raise InvalidLabel(int(bad[0]), int(self.labels[bad[0]]), DIGIT_MAX)
        # read-only, without freezing arrays the caller still holds
        object.__setattr__(self, 'images', _read_only(self.images))
        object.__setattr__(self, 'labels', _read_only(self.labels))

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass(frozen=True)
class LabelIndex:
    """Positions in a MnistDataset grouped by digit label"""
    buckets: Dict[int, np.ndarray] = field(default_factory=dict)

    def bucket(self, digit: int) -> np.ndarray:
        return self.buckets.get(digit, np.empty(0, dtype=np.int64))

    def sizes(self) -> Dict[int, int]:
        return {d: int(self.bucket(d).size) for d in range(DIGIT_MAX + 1)}


def load_dataset(images_path: Union[str, Path], labels_path: Union[str, Path],
                 partition: Partition) -> MnistDataset:
    """Load one MNIST partition from its image and label files (plain or gzipped)"""
    images = parse_idx_images(read_bytes(images_path))
    labels = parse_idx_labels(read_bytes(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(images.shape[0], labels.shape[0])
    # parser output is private; MnistDataset keeps read-only arrays as they are
    images.setflags(write=False)
    labels.setflags(write=False)
    return MnistDataset(images=images, labels=labels, partition=partition)


def build_label_index(dataset: MnistDataset) -> LabelIndex:
    # stable sort keeps ascending positions inside each bucket
    order = np.argsort(dataset.labels, kind='stable')
    counts = np.bincount(dataset.labels, minlength=DIGIT_MAX + 1)
    buckets = {}
    start = 0
    for digit, n in enumerate(counts):
        bucket = order[start:start + n].astype(np.int64)
        bucket.setflags(write=False)
        buckets[digit] = bucket
        start += n
    return LabelIndex(buckets=buckets)
