"""
Cooperative interruption of long runs

The parent process owns the signal handlers. Fold workers additionally watch
a shared stop event, set by the parent when a stop is requested, so a SIGTERM
sent to the parent alone still reaches every running fold.
"""

import signal
import sys

from .errors import RunInterrupted, EXIT_INTERRUPTED

# Global flag polled by the training loop between batches
interrupted = False

# multiprocessing.Event shared with the parent; only set in worker processes
_stop_event = None


def signal_handler(signum, frame):
    """First signal requests a stop after the current batch, a second one exits at once"""
    global interrupted

    if interrupted:
        sys.exit(EXIT_INTERRUPTED)
    interrupted = True
    # late import keeps worker processes free of console setup
    from .rich_console import rich_output
    rich_output.print_interrupted(
        f"Interrupt received (signal {signum}); stopping after the current batch. Press Ctrl+C again to abort.")


def setup_signal_handlers():
    """Set up signal handlers for graceful interruption"""
    signal.signal(signal.SIGINT, signal_handler)   # Ctrl+C
    signal.signal(signal.SIGTERM, signal_handler)  # Termination signal


def attach_stop_event(event):
    global _stop_event
    _stop_event = event


def stop_requested() -> bool:
    return interrupted or (_stop_event is not None and _stop_event.is_set())


def check_interrupted():
    if stop_requested():
        raise RunInterrupted('run interrupted by signal')


def reset():
    global interrupted, _stop_event
    interrupted = False
    _stop_event = None
