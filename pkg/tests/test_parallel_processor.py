"""
Test fold scheduling and stop requests across worker processes
"""

import threading
import time
from dataclasses import dataclass

import pytest

from lib import run_control
from lib.errors import (
    ExperimentError, TrainingError, WorkerError, exit_code_for, EXIT_INTERRUPTED, EXIT_TRAINING,
)
from lib.models import FoldReport
from lib.pair_generator import enumerate_pairs, make_split_plan
from lib.parallel_processor import FoldRunner


@dataclass(frozen=True)
class ReportJob:
    """Returns a fixed report; fails for the folds listed in ``failing``"""
    failing: tuple = ()

    def __call__(self, split):
        if split.fold_id in self.failing:
            raise TrainingError(f'fold {split.fold_id} broke')
        return FoldReport(fold=split.fold_id, test_mse=1.0, train_mse=0.1,
                          acc_round=0.5, acc_floorceil=0.7, acc_pm1=0.9)


@dataclass(frozen=True)
class WaitForStopJob:
    """Polls the interrupt state like the training loop does"""
    timeout: float = 60.0
    failing: tuple = ()

    def __call__(self, split):
        if split.fold_id in self.failing:
            raise TrainingError(f'fold {split.fold_id} broke')
        deadline = time.monotonic() + self.timeout
        while time.monotonic() < deadline:
            run_control.check_interrupted()
            time.sleep(0.05)
        raise TrainingError('stop request never arrived')


@pytest.fixture
def splits():
    plan = make_split_plan(enumerate_pairs(), 10, seed=0)
    return [plan.fold_split(k) for k in range(3)]


@pytest.fixture(autouse=True)
def clean_run_control():
    run_control.reset()
    yield
    run_control.reset()


class TestSequential:
    """One worker runs folds in-process"""

    def test_order_and_errors(self, splits):
        results = list(FoldRunner(1).run(ReportJob(failing=(2,)), splits))
        assert [s.fold_id for s, _ in results] == [1, 2, 3]
        assert isinstance(results[0][1], FoldReport)
        assert isinstance(results[1][1], TrainingError)
        assert isinstance(results[2][1], FoldReport)


class TestParallel:
    """Process pool with more than one worker"""

    def test_reports_come_back(self, splits):
        results = list(FoldRunner(2).run(ReportJob(), splits))
        assert sorted(s.fold_id for s, _ in results) == [1, 2, 3]
        assert all(isinstance(r, FoldReport) and r.fold == s.fold_id for s, r in results)

    def test_worker_error_keeps_exit_code(self, splits):
        results = dict((s.fold_id, r) for s, r in FoldRunner(2).run(ReportJob(failing=(3,)), splits))
        assert isinstance(results[3], WorkerError)
        assert results[3].exit_code == EXIT_TRAINING
        assert results[3].kind == 'TrainingError'

    def test_parent_flag_reaches_workers(self, splits):
        """A stop requested in the parent alone ends every running fold"""
        timer = threading.Timer(0.5, setattr, args=(run_control, 'interrupted', True))
        start = time.monotonic()
        timer.start()
        try:
            results = list(FoldRunner(2).run(WaitForStopJob(), splits))
        finally:
            timer.cancel()

        assert time.monotonic() - start < 30
        assert len(results) == 3
        for _, result in results:
            assert isinstance(result, ExperimentError)
            assert exit_code_for(result) == EXIT_INTERRUPTED

    def test_closing_early_stops_running_folds(self, splits):
        """Abandoning the results after a failure does not wait for the other folds to finish"""
        start = time.monotonic()
        results = FoldRunner(2).run(WaitForStopJob(failing=(1,)), splits)
        split, first = next(results)
        results.close()

        assert split.fold_id == 1
        assert exit_code_for(first) == EXIT_TRAINING
        assert time.monotonic() - start < 30
