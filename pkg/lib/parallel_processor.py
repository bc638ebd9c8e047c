"""
Fold-level parallelism

Folds are independent, so they can run in separate processes. Every fold
derives its randomness from (seed, fold index) alone, which keeps the results
identical to a sequential run.
"""

import multiprocessing
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from typing import Callable, Iterator, List, Optional, Tuple, Union

from . import run_control
from .errors import ExperimentError, RunInterrupted, WorkerError, EXIT_TRAINING
from .models import FoldReport
from .pair_generator import FoldSplit

FoldJob = Callable[[FoldSplit], FoldReport]
FoldResult = Union[FoldReport, ExperimentError]

# how often the parent looks at its interrupt flag while folds are running
POLL_SECONDS = 0.5


def _init_worker(stop_event):
    """Workers draw no progress bars, handle Ctrl+C like the parent and watch the stop event"""
    from .rich_console import rich_output
    rich_output.quiet = True
    run_control.reset()
    run_control.attach_stop_event(stop_event)
    run_control.setup_signal_handlers()


def _run_in_worker(job: FoldJob, split: FoldSplit) -> FoldReport:
    """Run one fold (static function for multiprocessing)"""
    try:
        return job(split)
    except ExperimentError as e:
        # project exceptions do not all survive pickling; send a flat copy
        raise WorkerError(str(e), e.exit_code, type(e).__name__)


class FoldRunner:
    """Runs fold jobs in-process or on a process pool"""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max(1, max_workers or 1)

    def run(self, job: FoldJob, splits: List[FoldSplit]) -> Iterator[Tuple[FoldSplit, FoldResult]]:
        """Yield (split, report or error) as folds finish.

        Closing the iterator early cancels folds that have not started and
        asks running ones to stop after their current batch.
        """
        if self.max_workers == 1 or len(splits) <= 1:
            for split in splits:
                try:
                    result = job(split)
                except ExperimentError as e:
                    result = e
                yield split, result
            return

        context = multiprocessing.get_context()
        stop_event = context.Event()
        workers = min(self.max_workers, len(splits))
        with ProcessPoolExecutor(max_workers=workers, mp_context=context,
                                 initializer=_init_worker, initargs=(stop_event,)) as executor:
            future_to_split = {executor.submit(_run_in_worker, job, split): split for split in splits}
            pending = set(future_to_split)
            try:
                while pending:
                    done, pending = wait(pending, timeout=POLL_SECONDS, return_when=FIRST_COMPLETED)
                    if run_control.stop_requested():
                        # a signal sent to the parent only
                        stop_event.set()
                        for future in pending:
                            future.cancel()
                    for future in sorted(done, key=lambda f: future_to_split[f].index):
                        yield future_to_split[future], self._result_of(future)
            finally:
                stop_event.set()
                for future in future_to_split:
                    future.cancel()

    @staticmethod
    def _result_of(future) -> FoldResult:
        if future.cancelled():
            return RunInterrupted('fold cancelled before it started')
        try:
            return future.result()
        except ExperimentError as e:
            return e
        except Exception as e:
            return WorkerError(f'{type(e).__name__}: {e}', EXIT_TRAINING, type(e).__name__)
