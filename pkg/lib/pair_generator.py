"""
Permutation pairs, fold splits and concatenated two-digit samples
"""

import itertools
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import dask
import numpy as np
from dask import delayed
from dask.diagnostics import ProgressBar
from pydantic import ValidationError

from . import __version__
from .errors import (
    DimensionMismatch, EmptyBucket, UnsupportedGeometry, UnevenFolds,
    DatasetIntegrityError, IoError,
)
from .idx_format import (
    MnistDataset, LabelIndex, Partition, MNIST_SHAPE,
    parse_idx_images, parse_idx_labels, serialize_idx_images, serialize_idx_labels,
    read_bytes, write_bytes,
)
from .models import DatasetMeta
from .seeding import make_rng, SPLIT_STREAM

DIGIT_BASE = 10
PAIR_LENGTH = 2
PAIR_SHAPE = (28, 56)
MAX_SUM = 18

IMAGES_FILE = 'images.idx'
LABELS_FILE = 'labels.idx'
MANIFEST_FILE = 'manifest.tsv'
META_FILE = 'meta.json'
MANIFEST_COLUMNS = ['sample_id', 'p1', 'p2', 'r1', 'r2', 'label']

class PermutationPair(NamedTuple):
    """Ordered digit pair; (3, 1) and (1, 3) are different pairs"""
    p1: int
    p2: int

    @property
    def label(self) -> int:
        return self.p1 + self.p2

    def reversed(self) -> 'PermutationPair':
        return PermutationPair(self.p2, self.p1)

    def __str__(self):
        return f'({self.p1},{self.p2})'


def enumerate_pairs(base: int = DIGIT_BASE, length: int = PAIR_LENGTH) -> List[PermutationPair]:
    """All base**length ordered pairs in lexicographic order"""
    if length != PAIR_LENGTH:
        raise UnsupportedGeometry(f'only pairs of length {PAIR_LENGTH} are supported (got {length})')
    if base != DIGIT_BASE:
        raise UnsupportedGeometry(f'only digit base {DIGIT_BASE} is supported (got {base})')
    return [PermutationPair(a, b) for a, b in itertools.product(range(base), repeat=length)]


@dataclass(frozen=True)
class SplitPlan:
    """Partition of all pairs into K disjoint test folds"""
    pairs: Tuple[PermutationPair, ...]
    folds: Tuple[Tuple[PermutationPair, ...], ...]
    seed: int

    def __post_init__(self):
        seen = [p for fold in self.folds for p in fold]
        if len(seen) != len(set(seen)):
            raise DatasetIntegrityError('split folds overlap')
        if set(seen) != set(self.pairs):
            raise DatasetIntegrityError('split folds do not cover every pair')

    @property
    def fold_count(self) -> int:
        return len(self.folds)

    def test_pairs(self, fold: int) -> List[PermutationPair]:
        return list(self.folds[fold])

    def train_pairs(self, fold: int) -> List[PermutationPair]:
        held_out = set(self.folds[fold])
        return [p for p in self.pairs if p not in held_out]

    def fold_of(self, pair: PermutationPair) -> int:
        for k, fold in enumerate(self.folds):
            if pair in fold:
                return k
        raise KeyError(pair)

    def fold_split(self, index: int) -> 'FoldSplit':
        """Train/test pairs of fold ``index`` (0-based); reported fold ids start at 1"""
        if not 0 <= index < self.fold_count:
            raise IndexError(f'fold index {index} outside 0..{self.fold_count - 1}')
        return FoldSplit(index=index, train_pairs=tuple(self.train_pairs(index)),
                         test_pairs=self.folds[index])

    def to_dict(self) -> dict:
        return {
            'seed': self.seed,
            'folds': [{'fold': k + 1, 'test_pairs': [list(p) for p in fold]} for k, fold in enumerate(self.folds)],
        }


@dataclass(frozen=True)
class FoldSplit:
    index: int
    train_pairs: Tuple[PermutationPair, ...]
    test_pairs: Tuple[PermutationPair, ...]

    @property
    def fold_id(self) -> int:
        return self.index + 1


def make_split_plan(pairs: Sequence[PermutationPair], folds: int, seed: int) -> SplitPlan:
    """Randomly assign pairs to K equally sized test folds"""
    pairs = tuple(PermutationPair(*p) for p in pairs)
    if folds < 1 or len(pairs) % folds != 0:
        raise UnevenFolds(folds, len(pairs))

    order = make_rng(seed, SPLIT_STREAM).permutation(len(pairs))
    size = len(pairs) // folds
    fold_sets = tuple(
        tuple(sorted(pairs[i] for i in order[k * size:(k + 1) * size]))
        for k in range(folds)
    )
    return SplitPlan(pairs=pairs, folds=fold_sets, seed=seed)


@dataclass(frozen=True)
class PairSample:
    image: np.ndarray
    label: int
    pair: PermutationPair
    left_index: int
    right_index: int


@dataclass(frozen=True)
class PairDataset:
    """Generated 28x56 samples with sum labels and provenance.

    Samples are stored column-wise; ``sample(i)`` materializes one PairSample.
    """
    images: np.ndarray          # (N, 28, 56) uint8
    labels: np.ndarray          # (N,) uint8, 0..18
    pair_digits: np.ndarray     # (N, 2) uint8
    left_index: np.ndarray      # (N,) int64 into the source partition
    right_index: np.ndarray     # (N,) int64 into the source partition
    source_partition: Partition
    pairs_covered: Tuple[PermutationPair, ...]
    samples_per_pair: int
    seed: int = 0
    fold: Optional[int] = None

    def __post_init__(self):
        n = self.labels.shape[0]
        for name in ('images', 'pair_digits', 'left_index', 'right_index'):
            if getattr(self, name).shape[0] != n:
                raise DatasetIntegrityError(f'{name} holds {getattr(self, name).shape[0]} rows, expected {n}')
        if n and self.images.shape[1:] != PAIR_SHAPE:
            raise DimensionMismatch(tuple(self.images.shape[1:]), PAIR_SHAPE)
        if n != len(self.pairs_covered) * self.samples_per_pair:
            raise DatasetIntegrityError(
                f'{n} samples for {len(self.pairs_covered)} pairs x {self.samples_per_pair}')
        if n:
            codes = self.pair_digits[:, 0].astype(np.int64) * DIGIT_BASE + self.pair_digits[:, 1]
            counts = np.bincount(codes, minlength=DIGIT_BASE ** PAIR_LENGTH)
            expected = np.zeros_like(counts)
            for p in self.pairs_covered:
                expected[p.p1 * DIGIT_BASE + p.p2] = self.samples_per_pair
            if not np.array_equal(counts, expected):
                raise DatasetIntegrityError('samples are not spread evenly over the covered pairs')
            if not np.array_equal(self.labels, self.pair_digits.sum(axis=1)):
                raise DatasetIntegrityError('sample labels differ from the sum of their pair')

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def sample(self, i: int) -> PairSample:
        return PairSample(
            image=self.images[i],
            label=int(self.labels[i]),
            pair=PermutationPair(int(self.pair_digits[i, 0]), int(self.pair_digits[i, 1])),
            left_index=int(self.left_index[i]),
            right_index=int(self.right_index[i]),
        )

    def samples(self) -> Iterator[PairSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def pair_mask(self, pair: PermutationPair) -> np.ndarray:
        return (self.pair_digits[:, 0] == pair.p1) & (self.pair_digits[:, 1] == pair.p2)


def concatenate_images(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Place ``left`` in columns 0-27 and ``right`` in columns 28-55.

    Works on single images and on stacks with a leading sample axis.
    """
    if left.shape[-2:] != MNIST_SHAPE:
        raise DimensionMismatch(tuple(left.shape[-2:]), MNIST_SHAPE)
    if right.shape[-2:] != MNIST_SHAPE:
        raise DimensionMismatch(tuple(right.shape[-2:]), MNIST_SHAPE)
    return np.concatenate([left, right], axis=-1)


def _generate_pair_block(pair: PermutationPair, images: np.ndarray, left_bucket: np.ndarray,
                         right_bucket: np.ndarray, m: int, seed: int):
    rng = make_rng(seed, pair.p1, pair.p2)
    # sampling with replacement: repeated source indices are expected
    left = left_bucket[rng.integers(0, left_bucket.size, size=m)]
    right = right_bucket[rng.integers(0, right_bucket.size, size=m)]
    return concatenate_images(images[left], images[right]), left, right


def generate_pair_dataset(pairs: Iterable[PermutationPair], source: MnistDataset, index: LabelIndex,
                          m: int, seed: int, fold: Optional[int] = None,
                          parallel: bool = True, show_progress: bool = False) -> PairDataset:
    """Generate m samples per pair from ``source``.

    Every pair draws from its own (seed, p1, p2) substream, so the output does
    not depend on how the per-pair blocks are scheduled.
    """
    if m < 1:
        raise ValueError('samples per pair must be positive')
    pairs = sorted({PermutationPair(*p) for p in pairs})
    for digit in sorted({d for p in pairs for d in p}):
        if index.bucket(digit).size == 0:
            raise EmptyBucket(digit)

    # an explicit name keeps dask from hashing the whole source array
    source_images = delayed(source.images, name=f'source-images-{id(source)}')
    block = delayed(_generate_pair_block, pure=False)
    tasks = [
        block(pair, source_images, index.bucket(pair.p1), index.bucket(pair.p2), m, seed)
        for pair in pairs
    ]
    with ProgressBar() if show_progress else nullcontext():
        blocks = dask.compute(*tasks, scheduler='threads' if parallel else 'synchronous')

    n = len(pairs) * m
    if blocks:
        images = np.concatenate([b[0] for b in blocks])
        left = np.concatenate([b[1] for b in blocks]).astype(np.int64)
        right = np.concatenate([b[2] for b in blocks]).astype(np.int64)
    else:
        images = np.zeros((0,) + PAIR_SHAPE, dtype=np.uint8)
        left = np.zeros(0, dtype=np.int64)
        right = np.zeros(0, dtype=np.int64)
    pair_digits = np.repeat(np.array(pairs, dtype=np.uint8).reshape(-1, 2), m, axis=0)

    return PairDataset(
        images=images,
        labels=pair_digits.sum(axis=1, dtype=np.uint8) if n else np.zeros(0, dtype=np.uint8),
        pair_digits=pair_digits,
        left_index=left,
        right_index=right,
        source_partition=source.partition,
        pairs_covered=tuple(pairs),
        samples_per_pair=m,
        seed=seed,
        fold=fold,
    )


@dataclass(frozen=True)
class DatasetStatistics:
    samples: int
    unique_provenance: int
    duplicate_provenance: int
    source_images_used: int


def dataset_statistics(dataset: PairDataset) -> DatasetStatistics:
    """Count distinct (r1, r2) combinations; duplicates are legal"""
    n = len(dataset)
    if n == 0:
        return DatasetStatistics(0, 0, 0, 0)
    combos = np.unique(np.stack([dataset.left_index, dataset.right_index], axis=1), axis=0)
    used = np.unique(np.concatenate([dataset.left_index, dataset.right_index]))
    return DatasetStatistics(
        samples=n,
        unique_provenance=int(combos.shape[0]),
        duplicate_provenance=n - int(combos.shape[0]),
        source_images_used=int(used.size),
    )


def export_dataset(dataset: PairDataset, path: Path) -> DatasetMeta:
    """Write images.idx, labels.idx, manifest.tsv and meta.json into ``path``"""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(path, e)

    write_bytes(path / IMAGES_FILE, serialize_idx_images(dataset.images))
    write_bytes(path / LABELS_FILE, serialize_idx_labels(dataset.labels))

    # one line per sample, columns as MANIFEST_COLUMNS
    lines = [
        f'{i}\t{p[0]}\t{p[1]}\t{r1}\t{r2}\t{y}\n'
        for i, (p, r1, r2, y) in enumerate(zip(dataset.pair_digits.tolist(), dataset.left_index.tolist(),
                                               dataset.right_index.tolist(), dataset.labels.tolist()))
    ]
    try:
        with open(path / MANIFEST_FILE, 'w', encoding='utf-8', newline='') as f:
            f.writelines(lines)
    except OSError as e:
        raise IoError(path / MANIFEST_FILE, e)

    stats = dataset_statistics(dataset)
    meta = DatasetMeta(
        version=__version__,
        seed=dataset.seed,
        samples_per_pair=dataset.samples_per_pair,
        fold=dataset.fold,
        partition=dataset.source_partition.value,
        sample_count=len(dataset),
        pairs=[tuple(p) for p in dataset.pairs_covered],
        manifest_columns=MANIFEST_COLUMNS,
        unique_provenance=stats.unique_provenance,
        duplicate_provenance=stats.duplicate_provenance,
    )
    write_bytes(path / META_FILE, meta.model_dump_json(indent=2).encode('utf-8'))
    return meta


def read_meta(path: Path) -> DatasetMeta:
    meta_path = Path(path) / META_FILE
    if not meta_path.exists():
        raise DatasetIntegrityError(f'{meta_path} is missing')
    try:
        return DatasetMeta.model_validate_json(read_bytes(meta_path))
    except ValidationError as e:
        raise DatasetIntegrityError(f'invalid {META_FILE} in {path}: {e.error_count()} problem(s), '
                                    f'first: {e.errors()[0]["msg"]}')


def import_dataset(path: Path) -> PairDataset:
    """Load a directory written by export_dataset"""
    path = Path(path)
    meta = read_meta(path)
    images = parse_idx_images(read_bytes(path / IMAGES_FILE), shape=PAIR_SHAPE)
    labels = parse_idx_labels(read_bytes(path / LABELS_FILE), max_label=MAX_SUM)

    try:
        text = read_bytes(path / MANIFEST_FILE).decode('utf-8')
        rows = [line.split('\t') for line in text.splitlines() if line.strip()]
        manifest = np.array(rows, dtype=np.int64).reshape(-1, len(MANIFEST_COLUMNS))
    except (UnicodeDecodeError, ValueError) as e:
        raise DatasetIntegrityError(f'malformed manifest in {path}: {e}')

    n = labels.shape[0]
    if images.shape[0] != n or manifest.shape[0] != n or meta.sample_count != n:
        raise DatasetIntegrityError(
            f'{path}: images={images.shape[0]} labels={n} manifest={manifest.shape[0]} '
            f'meta={meta.sample_count}')
    if not np.array_equal(manifest[:, 0], np.arange(n)):
        raise DatasetIntegrityError(f'{path}: manifest sample ids are not 0..{n - 1}')
    if not np.array_equal(manifest[:, 5], labels):
        raise DatasetIntegrityError(f'{path}: manifest labels disagree with {LABELS_FILE}')
    digits = manifest[:, 1:3]
    if digits.size and (digits.min() < 0 or digits.max() >= DIGIT_BASE):
        raise DatasetIntegrityError(f'{path}: manifest digits outside 0..{DIGIT_BASE - 1}')
    if not np.array_equal(digits.sum(axis=1), manifest[:, 5]):
        raise DatasetIntegrityError(f'{path}: manifest rows where p1 + p2 differs from the label')
    if any(not (0 <= d < DIGIT_BASE) for p in meta.pairs for d in p):
        raise DatasetIntegrityError(f'{path}: {META_FILE} lists pairs outside 0..{DIGIT_BASE - 1}')

    return PairDataset(
        images=images,
        labels=labels,
        pair_digits=digits.astype(np.uint8),
        left_index=manifest[:, 3],
        right_index=manifest[:, 4],
        source_partition=Partition(meta.partition),
        pairs_covered=tuple(PermutationPair(*p) for p in meta.pairs),
        samples_per_pair=meta.samples_per_pair,
        seed=meta.seed,
        fold=meta.fold,
    )
