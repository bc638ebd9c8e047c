"""
File handling utilities and path operations
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import IoError, MnistFileMissing, DimensionMismatch

# Canonical MNIST file names; the '.gz' variants are accepted too
MNIST_FILES = {
    'train_images': 'train-images-idx3-ubyte',
    'train_labels': 'train-labels-idx1-ubyte',
    'test_images': 't10k-images-idx3-ubyte',
    'test_labels': 't10k-labels-idx1-ubyte',
}


@dataclass(frozen=True)
class MnistPaths:
    train_images: Path
    train_labels: Path
    test_images: Path
    test_labels: Path


def _find_one(mnist_dir: Path, name: str) -> Path:
    # some mirrors write 'train-images.idx3-ubyte'
    candidates = [name, name + '.gz', name.replace('-idx', '.idx'), name.replace('-idx', '.idx') + '.gz']
    for candidate in candidates:
        path = mnist_dir / candidate
        if path.is_file():
            return path
    raise MnistFileMissing(mnist_dir / name)


def find_mnist_files(mnist_dir: Union[str, Path]) -> MnistPaths:
    """Locate the four MNIST files in ``mnist_dir``, plain or gzipped"""
    mnist_dir = Path(mnist_dir)
    if not mnist_dir.is_dir():
        raise MnistFileMissing(mnist_dir)
    return MnistPaths(**{key: _find_one(mnist_dir, name) for key, name in MNIST_FILES.items()})


def format_file_size(size_bytes):
    """Convert bytes to human readable format"""
    for unit in ['B', 'KB', 'MB', 'GB']:
        if size_bytes < 1024.0:
            return f"{size_bytes:.1f} {unit}"
        size_bytes /= 1024.0
    return f"{size_bytes:.1f} TB"


def directory_size(path: Path) -> int:
    return sum(p.stat().st_size for p in Path(path).rglob('*') if p.is_file())


def ensure_dir(path: Path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(path, e)
    return path


def write_text(path: Path, text: str):
    try:
        Path(path).write_text(text, encoding='utf-8')
    except OSError as e:
        raise IoError(path, e)


def pgm_name(sample_id: int, pair: Tuple[int, int], label: int) -> str:
    """e.g. 'sample-000042_pair-9-9_label-18.pgm'"""
    return f'sample-{sample_id:06d}_pair-{pair[0]}-{pair[1]}_label-{label}.pgm'


def write_pgm(path: Path, image: np.ndarray):
    """Write an 8-bit grayscale image as binary PGM (P5)"""
    image = np.asarray(image)
    if image.ndim != 2:
        raise DimensionMismatch(tuple(image.shape), (28, 56))
    if image.dtype != np.uint8:
        raise ValueError(f'PGM export needs 8-bit pixels, got {image.dtype}')
    rows, cols = image.shape
    header = f'P5\n{cols} {rows}\n255\n'.encode('ascii')
    try:
        Path(path).write_bytes(header + np.ascontiguousarray(image).tobytes())
    except OSError as e:
        raise IoError(path, e)
