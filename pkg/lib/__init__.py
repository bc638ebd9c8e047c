"""
Digit-pair addition experiment library

MNIST ingestion, pair dataset generation, a numpy CNN regressor with
ADADELTA, and the cross-validation harness around them.
"""

__version__ = "1.0.0"

# Import all public interfaces for easy access
from .errors import ExperimentError, ConfigError, DataError, TrainingError, exit_code_for
from .idx_format import (
    MnistDataset, LabelIndex, Partition, load_dataset, build_label_index,
    parse_idx_images, parse_idx_labels, serialize_idx_images, serialize_idx_labels,
)
from .pair_generator import (
    PermutationPair, SplitPlan, FoldSplit, PairDataset, enumerate_pairs, make_split_plan,
    generate_pair_dataset, concatenate_images, export_dataset, import_dataset, dataset_statistics,
)
from .tensor_nn import (
    Model, ModelSpec, default_architecture, tiny_architecture, init_model,
    conv2d_forward, maxpool_forward, dense_forward, mse_loss,
)
from .adadelta import AdadeltaState, adadelta_step
from .checkpoint import save_checkpoint, load_checkpoint
from .metrics import accuracy_rounding, accuracy_floor_ceiling, accuracy_within_one, round_half_away
from .models import RunConfig, TrainConfig, GenConfig, FoldReport, CrossValReport
from .experiment import train_fold, evaluate, run_cross_validation
from .commands import cmd_generate, cmd_crossval, cmd_eval, cmd_dump_samples

__all__ = [
    '__version__',
    'ExperimentError', 'ConfigError', 'DataError', 'TrainingError', 'exit_code_for',
    'MnistDataset', 'LabelIndex', 'Partition', 'load_dataset', 'build_label_index',
    'parse_idx_images', 'parse_idx_labels', 'serialize_idx_images', 'serialize_idx_labels',
    'PermutationPair', 'SplitPlan', 'FoldSplit', 'PairDataset', 'enumerate_pairs', 'make_split_plan',
    'generate_pair_dataset', 'concatenate_images', 'export_dataset', 'import_dataset', 'dataset_statistics',
    'Model', 'ModelSpec', 'default_architecture', 'tiny_architecture', 'init_model',
    'conv2d_forward', 'maxpool_forward', 'dense_forward', 'mse_loss',
    'AdadeltaState', 'adadelta_step',
    'save_checkpoint', 'load_checkpoint',
    'accuracy_rounding', 'accuracy_floor_ceiling', 'accuracy_within_one', 'round_half_away',
    'RunConfig', 'TrainConfig', 'GenConfig', 'FoldReport', 'CrossValReport',
    'train_fold', 'evaluate', 'run_cross_validation',
    'cmd_generate', 'cmd_crossval', 'cmd_eval', 'cmd_dump_samples',
]
