#!/usr/bin/env python3
"""
Generate small synthetic MNIST files in the IDX format.

The writer below packs headers with struct directly instead of going through
lib.idx_format, so parser tests compare against an independent encoder.
Every digit gets a recognizable pattern: a vertical bar whose column and
brightness depend on the label, plus light noise.

Run directly to write tests/mnist_files/ for manual experiments.
"""

import gzip
import struct
import sys
from pathlib import Path

import numpy as np

FILE_NAMES = {
    'train_images': 'train-images-idx3-ubyte',
    'train_labels': 'train-labels-idx1-ubyte',
    'test_images': 't10k-images-idx3-ubyte',
    'test_labels': 't10k-labels-idx1-ubyte',
}


def idx_images_bytes(images: np.ndarray) -> bytes:
    count, rows, cols = images.shape
    return struct.pack('>IIII', 0x803, count, rows, cols) + images.astype(np.uint8).tobytes()


def idx_labels_bytes(labels: np.ndarray) -> bytes:
    return struct.pack('>II', 0x801, len(labels)) + labels.astype(np.uint8).tobytes()


def synthetic_digits(per_digit: int, seed: int):
    """(images, labels) with per_digit samples of each digit, labels interleaved"""
    rng = np.random.default_rng(seed)
    labels = np.tile(np.arange(10, dtype=np.uint8), per_digit)
    images = rng.integers(0, 40, size=(labels.size, 28, 28), dtype=np.uint8)
    for i, digit in enumerate(labels):
        col = 4 + 2 * int(digit)
        images[i, 4:24, col:col + 2] = 120 + 12 * int(digit)
    return images, labels


def write_synthetic_mnist(directory: Path, train_per_digit: int = 30, test_per_digit: int = 10,
                          gzipped: bool = False, seed: int = 0) -> dict:
    """Write the four MNIST files into ``directory``; returns their paths"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    train_images, train_labels = synthetic_digits(train_per_digit, seed)
    test_images, test_labels = synthetic_digits(test_per_digit, seed + 1)
    payloads = {
        'train_images': idx_images_bytes(train_images),
        'train_labels': idx_labels_bytes(train_labels),
        'test_images': idx_images_bytes(test_images),
        'test_labels': idx_labels_bytes(test_labels),
    }

    paths = {}
    for key, data in payloads.items():
        name = FILE_NAMES[key] + ('.gz' if gzipped else '')
        path = directory / name
        path.write_bytes(gzip.compress(data, mtime=0) if gzipped else data)
        paths[key] = path
    return paths


if __name__ == '__main__':
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / 'mnist_files'
    written = write_synthetic_mnist(target)
    for path in written.values():
        print(f"  ✅ {path}")
