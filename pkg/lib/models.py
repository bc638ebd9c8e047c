"""
Pydantic models for configuration, reports and dataset metadata
"""

import math
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

PAIR_COUNT = 100


class Profile(str, Enum):
    QUICK = "quick"
    PAPER = "paper"
    CUSTOM = "custom"


class Precision(str, Enum):
    FLOAT32 = "float32"
    FLOAT64 = "float64"


class ReportFormat(str, Enum):
    CSV = "csv"
    MARKDOWN = "markdown"
    JSON = "json"


def _check_folds(v: int) -> int:
    if v < 2:
        raise ValueError('cross-validation needs at least 2 folds')
    if PAIR_COUNT % v != 0:
        raise ValueError(f'folds must divide {PAIR_COUNT} (got {v})')
    return v


class GenConfig(BaseModel):
    """Dataset generation parameters"""
    model_config = ConfigDict(frozen=True)

    samples_per_pair: int = Field(default=1000, ge=1)
    digit_base: Literal[10] = 10
    pair_length: Literal[2] = 2
    seed: int = Field(default=0, ge=0)

    @property
    def pair_count(self) -> int:
        return self.digit_base ** self.pair_length


class AdadeltaConfig(BaseModel):
    """Optimizer hyperparameters; there is deliberately no learning rate"""
    model_config = ConfigDict(frozen=True)

    rho: float = Field(default=0.95, gt=0.0, lt=1.0)
    epsilon: float = Field(default=1e-6, gt=0.0)


class TrainConfig(BaseModel):
    """Per-fold training parameters"""
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=12, ge=0)
    batch_size: int = Field(default=128, ge=1)
    samples_per_pair: int = Field(default=1000, ge=1)
    folds: int = 10
    fold_limit: Optional[int] = Field(default=None, ge=1)
    split_seed: int = Field(default=0, ge=0)
    data_seed: int = Field(default=0, ge=0)
    init_seed: int = Field(default=0, ge=0)
    optimizer: AdadeltaConfig = Field(default_factory=AdadeltaConfig)
    shuffle: bool = True
    dropout: bool = False
    precision: Precision = Precision.FLOAT32

    @field_validator('folds')
    @classmethod
    def validate_folds(cls, v):
        return _check_folds(v)

    @property
    def folds_to_run(self) -> int:
        if self.fold_limit is None:
            return self.folds
        return min(self.folds, self.fold_limit)


class RunConfig(BaseModel):
    """Flat, fully serializable configuration of one CLI invocation"""
    model_config = ConfigDict(extra='forbid')

    mnist_dir: Optional[Path] = None
    out: Path = Path('runs')
    profile: Profile = Profile.PAPER
    run_id: Optional[str] = None
    seed: int = Field(default=20180101, ge=0)
    split_seed: Optional[int] = Field(default=None, ge=0)
    data_seed: Optional[int] = Field(default=None, ge=0)
    init_seed: Optional[int] = Field(default=None, ge=0)
    samples_per_pair: int = Field(default=1000, ge=1)
    folds: int = 10
    fold_limit: Optional[int] = Field(default=None, ge=1)
    epochs: int = Field(default=12, ge=0)
    batch_size: int = Field(default=128, ge=1)
    rho: float = Field(default=0.95, gt=0.0, lt=1.0)
    epsilon: float = Field(default=1e-6, gt=0.0)
    shuffle: bool = True
    dropout: bool = False
    precision: Precision = Precision.FLOAT32
    parallel_folds: int = Field(default=1, ge=1)
    cache_datasets: bool = False
    formats: List[ReportFormat] = Field(
        default_factory=lambda: [ReportFormat.CSV, ReportFormat.MARKDOWN, ReportFormat.JSON])

    @field_validator('folds')
    @classmethod
    def validate_folds(cls, v):
        return _check_folds(v)

    @field_validator('formats', mode='before')
    @classmethod
    def split_formats(cls, v):
        if isinstance(v, str):
            v = [part.strip() for part in v.split(',') if part.strip()]
        return v

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            samples_per_pair=self.samples_per_pair,
            folds=self.folds,
            fold_limit=self.fold_limit,
            split_seed=self.seed if self.split_seed is None else self.split_seed,
            data_seed=self.seed if self.data_seed is None else self.data_seed,
            init_seed=self.seed if self.init_seed is None else self.init_seed,
            optimizer=AdadeltaConfig(rho=self.rho, epsilon=self.epsilon),
            shuffle=self.shuffle,
            dropout=self.dropout,
            precision=self.precision,
        )

    def gen_config(self) -> GenConfig:
        return GenConfig(samples_per_pair=self.samples_per_pair,
                         seed=self.seed if self.data_seed is None else self.data_seed)


class PairBreakdown(BaseModel):
    """Per test pair sample count and correct counts"""
    p1: int = Field(ge=0, le=9)
    p2: int = Field(ge=0, le=9)
    samples: int = Field(ge=0)
    correct_round: int = Field(ge=0)
    correct_floorceil: int = Field(ge=0)
    correct_pm1: int = Field(ge=0)
    mean_prediction: float
    reverse_in_train: bool = False

    @property
    def label(self) -> int:
        return self.p1 + self.p2


class SumBreakdown(BaseModel):
    """Test samples grouped by their sum, across the pairs producing it"""
    label: int = Field(ge=0, le=18)
    pairs: List[Tuple[int, int]]
    samples: int = Field(ge=0)
    correct_round: int = Field(ge=0)
    correct_floorceil: int = Field(ge=0)
    correct_pm1: int = Field(ge=0)
    mean_prediction: float


class FoldReport(BaseModel):
    """Results of training and evaluating one permutation split"""
    fold: int = Field(ge=1)
    test_mse: float = Field(ge=0.0)
    train_mse: float = Field(ge=0.0)
    acc_round: float = Field(ge=0.0, le=1.0)
    acc_floorceil: float = Field(ge=0.0, le=1.0)
    acc_pm1: float = Field(ge=0.0, le=1.0)
    train_samples: int = Field(default=0, ge=0)
    test_samples: int = Field(default=0, ge=0)
    test_pairs: List[Tuple[int, int]] = Field(default_factory=list)
    epochs: int = 0
    batch_size: int = 0
    epoch_losses: List[float] = Field(default_factory=list)
    per_pair: List[PairBreakdown] = Field(default_factory=list)
    per_sum: List[SumBreakdown] = Field(default_factory=list)
    duration_seconds: Optional[float] = None

    @model_validator(mode='after')
    def validate_metrics(self):
        if not (self.acc_round <= self.acc_floorceil <= self.acc_pm1):
            raise ValueError(
                f'metric monotonicity violated: round={self.acc_round} '
                f'floor/ceil={self.acc_floorceil} pm1={self.acc_pm1}')
        if self.per_pair:
            if any(row.samples == 0 for row in self.per_pair):
                raise ValueError('every test pair needs a nonzero sample count')
            total = sum(row.samples for row in self.per_pair)
            if total != self.test_samples:
                raise ValueError(f'per-pair samples {total} != test samples {self.test_samples}')
            for name in ('round', 'floorceil', 'pm1'):
                correct = sum(getattr(row, f'correct_{name}') for row in self.per_pair)
                expected = getattr(self, f'acc_{name}')
                if not math.isclose(correct / total, expected, rel_tol=1e-12, abs_tol=1e-12):
                    raise ValueError(f'per-pair {name} counts disagree with fold accuracy')
        return self


class CrossValReport(BaseModel):
    """Fold reports plus their arithmetic means"""
    run_id: str = ''
    version: str = ''
    folds: List[FoldReport]
    complete: bool = True
    avg_test_mse: float
    avg_train_mse: float
    avg_acc_round: float
    avg_acc_floorceil: float
    avg_acc_pm1: float

    @model_validator(mode='after')
    def validate_averages(self):
        if not self.folds:
            raise ValueError('a cross-validation report needs at least one fold')
        for field in ('test_mse', 'train_mse', 'acc_round', 'acc_floorceil', 'acc_pm1'):
            mean = math.fsum(getattr(f, field) for f in self.folds) / len(self.folds)
            if not math.isclose(mean, getattr(self, f'avg_{field}'), rel_tol=1e-12, abs_tol=1e-15):
                raise ValueError(f'avg_{field} is not the mean of the fold values')
        return self

    @classmethod
    def from_folds(cls, folds: List[FoldReport], run_id: str = '', version: str = '',
                   complete: bool = True) -> 'CrossValReport':
        n = len(folds)

        def mean(field):
            return math.fsum(getattr(f, field) for f in folds) / n if n else 0.0

        return cls(
            run_id=run_id, version=version, folds=folds, complete=complete,
            avg_test_mse=mean('test_mse'), avg_train_mse=mean('train_mse'),
            avg_acc_round=mean('acc_round'), avg_acc_floorceil=mean('acc_floorceil'),
            avg_acc_pm1=mean('acc_pm1'),
        )


class DatasetMeta(BaseModel):
    """Key-value record stored next to an exported pair dataset"""
    version: str
    seed: int
    samples_per_pair: int = Field(ge=1)
    fold: Optional[int] = None
    partition: Literal['train', 'test']
    sample_count: int = Field(ge=0)
    pairs: List[Tuple[int, int]]
    manifest_columns: List[str] = Field(default_factory=list)
    image_rows: int = 28
    image_cols: int = 56
    unique_provenance: int = Field(default=0, ge=0)
    duplicate_provenance: int = Field(default=0, ge=0)

    def matches(self, seed: int, samples_per_pair: int, fold: Optional[int], partition: str) -> bool:
        return (self.seed == seed and self.samples_per_pair == samples_per_pair
                and self.fold == fold and self.partition == partition)


class RunStats(BaseModel):
    """Fold bookkeeping for the final summary"""
    total_folds: int = 0
    completed_folds: int = 0
    failed_folds: int = 0
    interrupted: bool = False
    start_time: Optional[datetime] = None
    end_time: Optional[datetime] = None

    @property
    def duration(self) -> Optional[float]:
        if self.start_time and self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        return None

    def add_result(self, result: str):
        if result == 'completed':
            self.completed_folds += 1
        elif result == 'interrupted':
            self.interrupted = True
        else:
            self.failed_folds += 1


class EvalReport(BaseModel):
    """Metrics of a checkpoint on one exported dataset"""
    checkpoint: Path
    dataset: Path
    samples: int = Field(ge=0)
    mse: float = Field(ge=0.0)
    acc_round: float = Field(ge=0.0, le=1.0)
    acc_floorceil: float = Field(ge=0.0, le=1.0)
    acc_pm1: float = Field(ge=0.0, le=1.0)
    predictions: Optional[Path] = None
