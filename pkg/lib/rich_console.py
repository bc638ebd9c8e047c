"""
Rich console output and progress tracking
"""

from contextlib import nullcontext
from pathlib import Path
from typing import List, Optional

from rich.console import Console
from rich.progress import (
    Progress, SpinnerColumn, TextColumn, BarColumn,
    TaskProgressColumn, TimeElapsedColumn, TimeRemainingColumn
)
from rich.table import Table
from rich.panel import Panel
from rich import box

from .models import CrossValReport, FoldReport, RunConfig, RunStats, DatasetMeta

# Global console instance
console = Console()


class RichOutput:
    """Rich console output manager"""

    def __init__(self):
        self.console = console
        # quiet: no progress bars and no per-epoch lines (worker processes)
        self.quiet = False

    def print_header(self, title: str):
        """Print application header"""
        self.console.print(Panel.fit(
            f"[bold blue]{title}[/bold blue]",
            box=box.DOUBLE,
            border_style="blue"
        ))

    def print_config(self, config: RunConfig):
        """Print the effective configuration"""
        table = Table(show_header=True, header_style="bold magenta", box=box.ROUNDED)
        table.add_column("Setting", style="cyan", width=20)
        table.add_column("Value", style="white")

        table.add_row("Profile", config.profile.value)
        table.add_row("MNIST", str(config.mnist_dir) if config.mnist_dir else "[dim]not set[/dim]")
        table.add_row("Output", str(config.out))
        table.add_row("Seed", str(config.seed))
        table.add_row("Samples per pair", str(config.samples_per_pair))
        folds = f"{config.folds}"
        if config.fold_limit and config.fold_limit < config.folds:
            folds += f" (running {config.fold_limit})"
        table.add_row("Folds", folds)
        table.add_row("Epochs / batch", f"{config.epochs} / {config.batch_size}")
        table.add_row("ADADELTA", f"rho={config.rho} eps={config.epsilon}")
        table.add_row("Precision", config.precision.value)
        if config.dropout:
            table.add_row("Dropout", "[yellow]enabled[/yellow]")
        if config.parallel_folds > 1:
            table.add_row("Parallel folds", str(config.parallel_folds))

        self.console.print(Panel(table, title="[bold blue]Configuration[/bold blue]", border_style="blue"))

    def print_dataset_summary(self, path: Path, meta: DatasetMeta, size: Optional[str] = None):
        """Print one exported dataset"""
        unique = f"{meta.unique_provenance} unique, {meta.duplicate_provenance} repeated"
        line = (f"[bold cyan]Fold {meta.fold} {meta.partition}:[/bold cyan] {meta.sample_count} samples "
                f"from {len(meta.pairs)} pairs ({unique})")
        if size:
            line += f" [dim]{size}[/dim]"
        self.console.print(line)
        self.console.print(f"  [dim]{path}[/dim]")

    def print_epoch(self, fold: int, epoch: int, epochs: int, loss: float, seconds: float):
        if self.quiet:
            return
        self.console.print(f"[cyan]Fold {fold}[/cyan] epoch {epoch}/{epochs}: "
                           f"loss [bold]{loss:.4f}[/bold] [dim]({seconds:.1f}s)[/dim]")

    def create_batch_progress(self) -> Progress:
        """Create progress bar for batch processing"""
        progress = Progress(
            SpinnerColumn(),
            TextColumn("[bold blue]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            TimeElapsedColumn(),
            TimeRemainingColumn(),
            console=self.console,
            disable=self.quiet,
        )
        return progress

    def progress_or_nothing(self, enabled: bool = True):
        """A progress bar context, or a no-op context in quiet mode"""
        if self.quiet or not enabled:
            return nullcontext(None)
        return self.create_batch_progress()

    def print_fold_summary(self, report: FoldReport):
        """Print metrics of one finished fold"""
        pairs = ' '.join(f"({a},{b})" for a, b in report.test_pairs)
        self.console.print(
            f"[bold green]✓ Fold {report.fold}[/bold green] test MSE [bold]{report.test_mse:.4f}[/bold] "
            f"train MSE {report.train_mse:.4f} | round {report.acc_round:.1%} "
            f"floor/ceil {report.acc_floorceil:.1%} ±1 {report.acc_pm1:.1%}")
        self.console.print(f"  [dim]test pairs: {pairs}[/dim]")
        missed = [row for row in report.per_pair if row.correct_round == 0]
        if missed:
            names = ' '.join(f"({row.p1},{row.p2})" for row in missed)
            self.print_warning(f"No rounded prediction correct for {names}")

    def print_crossval_table(self, report: CrossValReport):
        """Per-fold metrics plus averages"""
        table = Table(show_header=True, header_style="bold magenta", box=box.ROUNDED)
        table.add_column("Fold", style="cyan", justify="right")
        table.add_column("Test MSE", justify="right")
        table.add_column("Train MSE", justify="right")
        table.add_column("Rounding", justify="right")
        table.add_column("Floor/ceil", justify="right")
        table.add_column("±1", justify="right")

        for fold in report.folds:
            table.add_row(str(fold.fold), f"{fold.test_mse:.4f}", f"{fold.train_mse:.4f}",
                          f"{fold.acc_round:.2%}", f"{fold.acc_floorceil:.2%}", f"{fold.acc_pm1:.2%}")
        table.add_row("[bold]Avg.[/bold]", f"[bold]{report.avg_test_mse:.4f}[/bold]",
                      f"[bold]{report.avg_train_mse:.4f}[/bold]", f"[bold]{report.avg_acc_round:.2%}[/bold]",
                      f"[bold]{report.avg_acc_floorceil:.2%}[/bold]", f"[bold]{report.avg_acc_pm1:.2%}[/bold]")

        self.console.print(Panel(
            table,
            title=f"[bold blue]Cross-validation {report.run_id}[/bold blue]",
            border_style="blue"
        ))

    def print_eval_metrics(self, samples: int, mse: float, acc_round: float, acc_floorceil: float, acc_pm1: float):
        table = Table(show_header=True, header_style="bold magenta", box=box.ROUNDED)
        table.add_column("Metric", style="cyan")
        table.add_column("Value", style="white", justify="right")
        table.add_row("Samples", str(samples))
        table.add_row("MSE", f"{mse:.4f}")
        table.add_row("Rounding", f"{acc_round:.2%}")
        table.add_row("Floor/ceiling", f"{acc_floorceil:.2%}")
        table.add_row("±1", f"{acc_pm1:.2%}")
        self.console.print(Panel(table, title="[bold blue]Evaluation[/bold blue]", border_style="blue"))

    def print_written(self, paths: List[Path]):
        for path in paths:
            self.console.print(f"  [dim]wrote[/dim] {path}")

    def print_success(self, message: str = "Done!"):
        """Print success message"""
        self.console.print(f"[bold green]✓ {message}[/bold green]")

    def print_error(self, message: str, details: Optional[str] = None):
        """Print error message"""
        self.console.print(f"[bold red]✗ {message}[/bold red]")
        if details:
            self.console.print(f"[red]Details: {details}[/red]")

    def print_warning(self, message: str):
        """Print warning message"""
        self.console.print(f"[bold yellow]⚠ {message}[/bold yellow]")

    def print_info(self, message: str):
        """Print info message"""
        if self.quiet:
            return
        self.console.print(f"[bold cyan]ℹ {message}[/bold cyan]")

    def print_interrupted(self, message: str = "Run interrupted"):
        """Print interruption message"""
        self.console.print(f"\n[bold red]⏹ {message}[/bold red]")

    def print_final_summary(self, stats: RunStats):
        """Print fold bookkeeping of a cross-validation run"""
        clean = not stats.interrupted and stats.failed_folds == 0
        status_icon = "✓" if clean else "⏹"
        status_color = "green" if clean else "yellow"
        title = "Run Complete" if not stats.interrupted else "Run Interrupted"

        table = Table(show_header=True, header_style="bold magenta", box=box.ROUNDED)
        table.add_column("Metric", style="cyan")
        table.add_column("Count", style="white", justify="right")

        table.add_row("Folds", str(stats.total_folds))
        table.add_row("Completed", f"[green]{stats.completed_folds}[/green]")
        if stats.failed_folds > 0:
            table.add_row("Failed", f"[red]{stats.failed_folds}[/red]")

        if stats.duration:
            table.add_row("Duration", f"{stats.duration:.1f}s")

        self.console.print(Panel(
            table,
            title=f"[bold {status_color}]{status_icon} {title}[/bold {status_color}]",
            border_style=status_color
        ))


# Global rich output instance
rich_output = RichOutput()
