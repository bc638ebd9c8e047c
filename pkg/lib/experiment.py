"""
Cross-validation over permutation splits

Each fold trains a fresh network on samples generated from its training
pairs and MNIST Train, then evaluates on samples generated from its held-out
pairs and MNIST Test.
"""

import json
import time
from dataclasses import dataclass
from datetime import datetime
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from . import __version__, run_control
from .adadelta import AdadeltaState, adadelta_step
from .checkpoint import save_checkpoint
from .errors import (
    ExperimentError, FoldFailed, MnistFileMissing, RunInterrupted, ShapeMismatch, EXIT_INTERRUPTED,
)
from .file_utils import MnistPaths, ensure_dir, write_text
from .idx_format import LabelIndex, MnistDataset, Partition, build_label_index, load_dataset
from .metrics import (
    correct_floor_ceiling, correct_rounding, correct_within_one, mean_squared_error,
    pair_breakdown, sum_breakdown,
)
from .models import CrossValReport, FoldReport, Precision, RunConfig, RunStats, TrainConfig
from .pair_generator import (
    META_FILE, FoldSplit, PairDataset, enumerate_pairs, export_dataset,
    generate_pair_dataset, import_dataset, make_split_plan, read_meta,
)
from .parallel_processor import FoldRunner
from .report_writer import PREDICTIONS_FILE, write_fold_report, write_predictions, write_report
from .rich_console import rich_output
from .run_config import new_run_id, persist_config
from .seeding import DATA_STREAM, DROPOUT_STREAM, INIT_STREAM, SHUFFLE_STREAM, derive_seed, make_rng
from .tensor_nn import Model, default_architecture, init_model, mse_loss

EVAL_BATCH_SIZE = 500
CHECKPOINT_FILE = 'checkpoint.npz'
SPLIT_FILE = 'split.json'
DATASETS_DIR = 'datasets'

_PARTITION_KEY = {Partition.TRAIN: 0, Partition.TEST: 1}


def model_dtype(precision: Precision) -> np.dtype:
    return np.dtype(np.float64 if precision == Precision.FLOAT64 else np.float32)


def assemble_batch(images: np.ndarray, dtype=np.float32) -> np.ndarray:
    """uint8 (B, 28, 56) -> (B, 1, 28, 56) scaled to [0, 1]"""
    dtype = np.dtype(dtype)
    return (images.astype(dtype) / dtype.type(255))[:, np.newaxis]


def iterate_batches(n: int, batch_size: int, rng: Optional[np.random.Generator] = None) -> Iterator[np.ndarray]:
    """Index batches in fixed order, or in a fresh permutation of ``rng``"""
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def evaluate(model: Model, dataset: PairDataset, batch_size: int = EVAL_BATCH_SIZE) -> Tuple[float, np.ndarray]:
    """MSE and per-sample predictions; parameters are not touched"""
    if tuple(dataset.images.shape[1:]) != model.input_shape[1:]:
        raise ShapeMismatch(f'dataset images {dataset.images.shape[1:]} do not match model input {model.input_shape}')
    predictions = np.empty(len(dataset), dtype=model.dtype)
    for idx in iterate_batches(len(dataset), batch_size):
        predictions[idx] = model.predict(assemble_batch(dataset.images[idx], model.dtype))
    return mean_squared_error(predictions, dataset.labels), predictions


class MnistSource:
    """MNIST partitions and label indexes, loaded on first use"""

    def __init__(self, paths: Optional[MnistPaths] = None,
                 train: Optional[MnistDataset] = None, test: Optional[MnistDataset] = None):
        self.paths = paths
        self._loaded: Dict[Partition, Tuple[MnistDataset, LabelIndex]] = {}
        for dataset in (train, test):
            if dataset is not None:
                self._loaded[dataset.partition] = (dataset, build_label_index(dataset))

    def get(self, partition: Partition) -> Tuple[MnistDataset, LabelIndex]:
        if partition not in self._loaded:
            if self.paths is None:
                raise MnistFileMissing(Path(f'<MNIST {partition.value} files: --mnist-dir not given>'))
            if partition == Partition.TRAIN:
                dataset = load_dataset(self.paths.train_images, self.paths.train_labels, partition)
            else:
                dataset = load_dataset(self.paths.test_images, self.paths.test_labels, partition)
            self._loaded[partition] = (dataset, build_label_index(dataset))
        return self._loaded[partition]


@lru_cache(maxsize=2)
def open_mnist(paths: Optional[MnistPaths]) -> MnistSource:
    """One shared source per process"""
    return MnistSource(paths)


def fold_data_seed(data_seed: int, split: FoldSplit, partition: Partition) -> int:
    return derive_seed(data_seed, DATA_STREAM, split.index, _PARTITION_KEY[partition])


def dataset_dir(root: Path, fold_id: int, partition: Partition) -> Path:
    return Path(root) / f'fold-{fold_id}' / partition.value


def _cached_dataset(path: Path, seed: int, config: TrainConfig, fold_id: int,
                    partition: Partition, pairs) -> Optional[PairDataset]:
    if not (path / META_FILE).exists():
        return None
    meta = read_meta(path)
    if not meta.matches(seed, config.samples_per_pair, fold_id, partition.value):
        return None
    if sorted(tuple(p) for p in meta.pairs) != sorted(tuple(p) for p in pairs):
        return None
    return import_dataset(path)


def fold_datasets(split: FoldSplit, source: MnistSource, config: TrainConfig,
                  cache_root: Optional[Path] = None, export: bool = False,
                  show_progress: bool = False) -> Tuple[PairDataset, PairDataset]:
    """Train and test datasets of one fold, reusing matching exports under ``cache_root``"""
    datasets = []
    for partition, pairs in ((Partition.TRAIN, split.train_pairs), (Partition.TEST, split.test_pairs)):
        seed = fold_data_seed(config.data_seed, split, partition)
        path = dataset_dir(cache_root, split.fold_id, partition) if cache_root else None

        dataset = _cached_dataset(path, seed, config, split.fold_id, partition, pairs) if path else None
        if dataset is not None:
            rich_output.print_info(f"Fold {split.fold_id}: reusing {partition.value} dataset from {path}")
        else:
            mnist, index = source.get(partition)
            dataset = generate_pair_dataset(pairs, mnist, index, config.samples_per_pair, seed,
                                            fold=split.fold_id, show_progress=show_progress)
            if export and path:
                export_dataset(dataset, path)
        datasets.append(dataset)
    return datasets[0], datasets[1]


def train_model(model: Model, state: AdadeltaState, dataset: PairDataset, config: TrainConfig,
                shuffle_rng: Optional[np.random.Generator] = None,
                dropout_rng: Optional[np.random.Generator] = None,
                on_epoch: Optional[Callable[[int, float, float], None]] = None,
                description: str = 'Training') -> List[float]:
    """Run config.epochs epochs of minibatch ADADELTA; returns the mean loss per epoch"""
    n = len(dataset)
    targets = dataset.labels.astype(model.dtype)
    batches_per_epoch = -(-n // config.batch_size)
    epoch_losses = []

    with rich_output.progress_or_nothing(config.epochs > 0) as progress:
        task = progress.add_task(description, total=config.epochs * batches_per_epoch) if progress else None
        for epoch in range(1, config.epochs + 1):
            start = time.time()
            total = 0.0
            for idx in iterate_batches(n, config.batch_size, shuffle_rng if config.shuffle else None):
                run_control.check_interrupted()
                predictions = model.forward(assemble_batch(dataset.images[idx], model.dtype),
                                            training=True, rng=dropout_rng)
                loss, grad = mse_loss(predictions, targets[idx])
                adadelta_step(model.params, model.backward(grad), state)
                total += loss * idx.size
                if progress:
                    progress.update(task, advance=1)
            epoch_losses.append(total / n if n else 0.0)
            if on_epoch:
                on_epoch(epoch, epoch_losses[-1], time.time() - start)
    return epoch_losses


def build_fold_report(split: FoldSplit, train_dataset: PairDataset, test_dataset: PairDataset,
                      predictions: np.ndarray, train_mse: float, test_mse: float,
                      config: TrainConfig, epoch_losses: List[float],
                      duration: Optional[float] = None) -> FoldReport:
    labels = test_dataset.labels
    n = len(test_dataset)

    def fraction(mask):
        return int(mask.sum()) / n if n else 0.0

    return FoldReport(
        fold=split.fold_id,
        test_mse=test_mse,
        train_mse=train_mse,
        acc_round=fraction(correct_rounding(predictions, labels)),
        acc_floorceil=fraction(correct_floor_ceiling(predictions, labels)),
        acc_pm1=fraction(correct_within_one(predictions, labels)),
        train_samples=len(train_dataset),
        test_samples=n,
        test_pairs=[tuple(p) for p in split.test_pairs],
        epochs=config.epochs,
        batch_size=config.batch_size,
        epoch_losses=epoch_losses,
        per_pair=pair_breakdown(test_dataset, predictions, split.train_pairs),
        per_sum=sum_breakdown(test_dataset, predictions),
        duration_seconds=duration,
    )


class FoldOutcome(NamedTuple):
    model: Model
    state: AdadeltaState
    report: FoldReport
    test_dataset: PairDataset
    test_predictions: np.ndarray


def run_fold(split: FoldSplit, source: MnistSource, config: TrainConfig,
             datasets: Optional[Tuple[PairDataset, PairDataset]] = None,
             cache_root: Optional[Path] = None, export_datasets: bool = False) -> FoldOutcome:
    """Generate, train from a fresh initialization, evaluate"""
    start = time.time()
    train_dataset, test_dataset = datasets or fold_datasets(split, source, config, cache_root, export_datasets)

    spec = default_architecture(dropout=config.dropout)
    model = init_model(spec, derive_seed(config.init_seed, INIT_STREAM, split.index), model_dtype(config.precision))
    state = AdadeltaState.fresh(model.params, config.optimizer)

    def log_epoch(epoch, loss, seconds):
        rich_output.print_epoch(split.fold_id, epoch, config.epochs, loss, seconds)

    epoch_losses = train_model(
        model, state, train_dataset, config,
        shuffle_rng=make_rng(config.data_seed, SHUFFLE_STREAM, split.index),
        dropout_rng=make_rng(config.init_seed, DROPOUT_STREAM, split.index),
        on_epoch=log_epoch,
        description=f'Fold {split.fold_id}',
    )

    train_mse, _ = evaluate(model, train_dataset)
    test_mse, predictions = evaluate(model, test_dataset)
    report = build_fold_report(split, train_dataset, test_dataset, predictions, train_mse, test_mse,
                               config, epoch_losses, time.time() - start)
    return FoldOutcome(model, state, report, test_dataset, predictions)


def train_fold(split: FoldSplit, mnist_train: MnistDataset, mnist_test: MnistDataset,
               config: TrainConfig) -> Tuple[Model, FoldReport]:
    outcome = run_fold(split, MnistSource(train=mnist_train, test=mnist_test), config)
    return outcome.model, outcome.report


def persist_fold(outcome: FoldOutcome, split: FoldSplit, config: TrainConfig, run_dir: Path) -> Path:
    """checkpoint.npz, predictions.tsv and fold_report.json under fold-<k>/"""
    fold_dir = ensure_dir(Path(run_dir) / f'fold-{split.fold_id}')
    meta = {
        'fold': split.fold_id,
        'test_pairs': [list(p) for p in split.test_pairs],
        'init_seed': config.init_seed,
        'data_seed': config.data_seed,
        'epochs': config.epochs,
        'version': __version__,
    }
    save_checkpoint(fold_dir / CHECKPOINT_FILE, outcome.model, outcome.state, meta)
    write_predictions(outcome.test_dataset, outcome.test_predictions, fold_dir / PREDICTIONS_FILE)
    write_fold_report(outcome.report, fold_dir)
    return fold_dir


@dataclass(frozen=True)
class FoldJob:
    """Everything a (possibly remote) process needs to run and persist one fold"""
    config: TrainConfig
    run_dir: Path
    mnist_paths: Optional[MnistPaths] = None
    cache_root: Optional[Path] = None
    export_datasets: bool = False

    def __call__(self, split: FoldSplit) -> FoldReport:
        outcome = run_fold(split, open_mnist(self.mnist_paths), self.config,
                           cache_root=self.cache_root, export_datasets=self.export_datasets)
        persist_fold(outcome, split, self.config, self.run_dir)
        return outcome.report


def _write_partial(reports: Dict[int, FoldReport], run_id: str, run_dir: Path,
                   config: RunConfig, complete: bool) -> Optional[CrossValReport]:
    if not reports:
        return None
    report = CrossValReport.from_folds([reports[k] for k in sorted(reports)], run_id, __version__, complete)
    write_report(report, run_dir, config.formats)
    return report


def run_cross_validation(config: RunConfig, mnist_paths: Optional[MnistPaths] = None) -> CrossValReport:
    """Run every fold of the split plan and write per-fold and aggregate results.

    A failing fold stops the run: reports of completed folds are still
    written and FoldFailed (or RunInterrupted) is raised.
    """
    train_config = config.train_config()
    run_id = config.run_id or new_run_id()
    run_dir = ensure_dir(Path(config.out) / run_id)
    persist_config(config.model_copy(update={'run_id': run_id}), run_dir)

    plan = make_split_plan(enumerate_pairs(), train_config.folds, train_config.split_seed)
    write_text(run_dir / SPLIT_FILE, json.dumps(plan.to_dict(), indent=2))
    splits = [plan.fold_split(k) for k in range(train_config.folds_to_run)]

    job = FoldJob(
        config=train_config,
        run_dir=run_dir,
        mnist_paths=mnist_paths,
        cache_root=Path(config.out) / DATASETS_DIR,
        export_datasets=config.cache_datasets,
    )
    stats = RunStats(total_folds=len(splits), start_time=datetime.now())
    reports: Dict[int, FoldReport] = {}
    failure: Optional[Tuple[FoldSplit, ExperimentError]] = None

    rich_output.print_info(f"Run {run_id}: {len(splits)} of {plan.fold_count} folds -> {run_dir}")
    for split, result in FoldRunner(config.parallel_folds).run(job, splits):
        if isinstance(result, FoldReport):
            reports[split.fold_id] = result
            stats.add_result('completed')
            rich_output.print_fold_summary(result)
            if run_control.stop_requested() and len(reports) < len(splits):
                stats.add_result('interrupted')
                failure = (split, RunInterrupted('stop requested between folds'))
                break
            continue
        if isinstance(result, RunInterrupted) or result.exit_code == EXIT_INTERRUPTED:
            stats.add_result('interrupted')
        else:
            stats.add_result('failed')
        failure = (split, result)
        break

    stats.end_time = datetime.now()
    report = _write_partial(reports, run_id, run_dir, config, complete=failure is None)
    rich_output.print_final_summary(stats)

    if failure is not None:
        split, error = failure
        if stats.interrupted:
            raise RunInterrupted(f'run {run_id} interrupted after {len(reports)} of {len(splits)} folds; '
                                 f'completed folds kept in {run_dir}')
        raise FoldFailed(split.fold_id, error)
    return report
