"""
Bodies of the generate, crossval, eval and dump-samples commands
"""

import json
from pathlib import Path
from typing import List, Optional, Tuple

from .checkpoint import load_checkpoint, require_input_shape
from .errors import ConfigError
from .experiment import (
    DATASETS_DIR, SPLIT_FILE, MnistSource, dataset_dir, evaluate, fold_data_seed, run_cross_validation,
)
from .file_utils import (
    MnistPaths, directory_size, ensure_dir, find_mnist_files, format_file_size,
    pgm_name, write_pgm, write_text,
)
from .idx_format import Partition
from .metrics import accuracy_floor_ceiling, accuracy_rounding, accuracy_within_one
from .models import CrossValReport, DatasetMeta, EvalReport, RunConfig
from .pair_generator import (
    PermutationPair, enumerate_pairs, export_dataset, generate_pair_dataset,
    import_dataset, make_split_plan,
)
from .report_writer import REPORT_FILES, write_predictions
from .rich_console import rich_output
from .run_config import persist_config

EVAL_PREDICTIONS_FILE = 'eval-predictions.tsv'


def resolve_mnist(config: RunConfig, required: bool = True) -> Optional[MnistPaths]:
    if config.mnist_dir is None:
        if required:
            raise ConfigError('--mnist-dir is required for this command')
        return None
    return find_mnist_files(config.mnist_dir)


def cmd_generate(config: RunConfig) -> List[Tuple[Path, DatasetMeta]]:
    """Export train and test datasets of every fold to <out>/datasets/fold-<k>/"""
    train_config = config.train_config()
    gen = config.gen_config()
    source = MnistSource(resolve_mnist(config))
    root = ensure_dir(Path(config.out) / DATASETS_DIR)
    persist_config(config, root)

    plan = make_split_plan(enumerate_pairs(), train_config.folds, train_config.split_seed)
    write_text(root / SPLIT_FILE, json.dumps(plan.to_dict(), indent=2))

    exported = []
    progress = rich_output.create_batch_progress()
    with progress:
        task_id = progress.add_task("Generating folds...", total=train_config.folds_to_run * 2)
        for k in range(train_config.folds_to_run):
            split = plan.fold_split(k)
            for partition, pairs in ((Partition.TRAIN, split.train_pairs), (Partition.TEST, split.test_pairs)):
                mnist, index = source.get(partition)
                dataset = generate_pair_dataset(pairs, mnist, index, gen.samples_per_pair,
                                                fold_data_seed(gen.seed, split, partition),
                                                fold=split.fold_id)
                path = dataset_dir(root, split.fold_id, partition)
                exported.append((path, export_dataset(dataset, path)))
                progress.update(task_id, advance=1)

    for path, meta in exported:
        rich_output.print_dataset_summary(path, meta, format_file_size(directory_size(path)))
    rich_output.print_success(f"Exported {len(exported)} datasets to {root}")
    return exported


def cmd_crossval(config: RunConfig) -> CrossValReport:
    """Full pipeline; MNIST is only read for folds without cached datasets"""
    mnist_paths = resolve_mnist(config, required=False)
    report = run_cross_validation(config, mnist_paths)
    rich_output.print_crossval_table(report)
    run_dir = Path(config.out) / report.run_id
    rich_output.print_written([run_dir / REPORT_FILES[fmt] for fmt in config.formats])
    return report


def cmd_eval(checkpoint: Path, dataset_path: Path, predictions_path: Optional[Path] = None) -> EvalReport:
    """Evaluate a checkpoint on an exported dataset and write per-sample predictions"""
    model, _, meta = load_checkpoint(checkpoint)
    dataset = import_dataset(dataset_path)
    require_input_shape(model, dataset.images.shape[1:])

    mse, predictions = evaluate(model, dataset)
    predictions_path = Path(predictions_path) if predictions_path else Path(checkpoint).parent / EVAL_PREDICTIONS_FILE
    write_predictions(dataset, predictions, predictions_path)

    report = EvalReport(
        checkpoint=checkpoint,
        dataset=dataset_path,
        samples=len(dataset),
        mse=mse,
        acc_round=accuracy_rounding(predictions, dataset.labels),
        acc_floorceil=accuracy_floor_ceiling(predictions, dataset.labels),
        acc_pm1=accuracy_within_one(predictions, dataset.labels),
        predictions=predictions_path,
    )
    if meta.get('fold') is not None:
        rich_output.print_info(f"Checkpoint of fold {meta['fold']}")
    rich_output.print_eval_metrics(report.samples, report.mse, report.acc_round,
                                   report.acc_floorceil, report.acc_pm1)
    rich_output.print_written([predictions_path])
    return report


def cmd_dump_samples(dataset_path: Path, count: int, out_dir: Path,
                     pair: Optional[Tuple[int, int]] = None) -> List[Path]:
    """Write the first ``count`` samples (optionally of one pair) as PGM files"""
    if count < 0:
        raise ConfigError(f'count must not be negative (got {count})')
    dataset = import_dataset(dataset_path)
    if pair is not None:
        indices = dataset.pair_mask(PermutationPair(*pair)).nonzero()[0][:count]
    else:
        indices = range(min(count, len(dataset)))

    written = []
    if count:
        ensure_dir(out_dir)
    for i in indices:
        sample = dataset.sample(int(i))
        path = Path(out_dir) / pgm_name(int(i), tuple(sample.pair), sample.label)
        write_pgm(path, sample.image)
        written.append(path)

    if count and len(written) < count:
        rich_output.print_warning(f"Only {len(written)} matching samples in {dataset_path}")
    rich_output.print_success(f"Wrote {len(written)} PGM files to {out_dir}")
    return written
