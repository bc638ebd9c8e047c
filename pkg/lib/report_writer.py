"""
Report files: report.csv / report.md / report.json, fold_report.json and
per-sample predictions
"""

import csv
from pathlib import Path
from typing import Dict, List

import numpy as np

from .errors import IoError
from .models import CrossValReport, FoldReport, ReportFormat
from .pair_generator import PairDataset

REPORT_FIELDS = ['fold', 'test_mse', 'train_mse', 'acc_round', 'acc_floorceil', 'acc_pm1']
PREDICTION_FIELDS = ['sample_id', 'p1', 'p2', 'label', 'prediction']
AVERAGE_ROW = 'avg'

REPORT_FILES = {
    ReportFormat.CSV: 'report.csv',
    ReportFormat.MARKDOWN: 'report.md',
    ReportFormat.JSON: 'report.json',
}
FOLD_REPORT_FILE = 'fold_report.json'
PREDICTIONS_FILE = 'predictions.tsv'


def _open_for_write(path: Path):
    try:
        return open(path, 'w', newline='', encoding='utf-8')
    except OSError as e:
        raise IoError(path, e)


def report_rows(report: CrossValReport) -> List[Dict]:
    """One row per fold followed by the average row"""
    rows = [{field: getattr(fold, field) for field in REPORT_FIELDS} for fold in report.folds]
    rows.append({
        'fold': AVERAGE_ROW,
        'test_mse': report.avg_test_mse,
        'train_mse': report.avg_train_mse,
        'acc_round': report.avg_acc_round,
        'acc_floorceil': report.avg_acc_floorceil,
        'acc_pm1': report.avg_acc_pm1,
    })
    return rows


def write_report_csv(report: CrossValReport, csv_path: Path):
    with _open_for_write(csv_path) as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        writer.writerows(report_rows(report))


def read_report_csv(csv_path: Path) -> List[Dict]:
    """Read report.csv back; numeric columns become floats, fold ids ints"""
    if not csv_path.exists():
        raise FileNotFoundError(f"Report file not found: {csv_path}")

    rows = []
    with open(csv_path, 'r', newline='', encoding='utf-8') as csvfile:
        reader = csv.DictReader(csvfile)
        for row in reader:
            row['fold'] = row['fold'] if row['fold'] == AVERAGE_ROW else int(row['fold'])
            for field in REPORT_FIELDS[1:]:
                row[field] = float(row[field])
            rows.append(row)
    return rows


def render_markdown(report: CrossValReport) -> str:
    """Accuracy table followed by the MSE table"""
    lines = [f'# Cross-validation report {report.run_id}'.rstrip(), '']
    if report.version:
        lines += [f'Code version: {report.version}', '']

    lines += ['## Accuracy', '',
              '| Fold | Rounding | Floor/ceiling | ±1 |',
              '|---:|---:|---:|---:|']
    for fold in report.folds:
        lines.append(f'| {fold.fold} | {fold.acc_round:.2%} | {fold.acc_floorceil:.2%} | {fold.acc_pm1:.2%} |')
    lines.append(f'| Avg. | {report.avg_acc_round:.2%} | {report.avg_acc_floorceil:.2%} | {report.avg_acc_pm1:.2%} |')

    lines += ['', '## Mean squared error', '',
              '| Fold | Test MSE | Train MSE |',
              '|---:|---:|---:|']
    for fold in report.folds:
        lines.append(f'| {fold.fold} | {fold.test_mse:.4f} | {fold.train_mse:.4f} |')
    lines.append(f'| Avg. | {report.avg_test_mse:.4f} | {report.avg_train_mse:.4f} |')
    return '\n'.join(lines) + '\n'


def write_report(report: CrossValReport, out_dir: Path, formats: List[ReportFormat]) -> List[Path]:
    """Write the aggregate report in each requested format"""
    written = []
    for fmt in formats:
        path = Path(out_dir) / REPORT_FILES[fmt]
        if fmt == ReportFormat.CSV:
            write_report_csv(report, path)
        else:
            text = render_markdown(report) if fmt == ReportFormat.MARKDOWN else report.model_dump_json(indent=2)
            with _open_for_write(path) as f:
                f.write(text)
        written.append(path)
    return written


def write_fold_report(report: FoldReport, fold_dir: Path) -> Path:
    path = Path(fold_dir) / FOLD_REPORT_FILE
    with _open_for_write(path) as f:
        f.write(report.model_dump_json(indent=2))
    return path


def read_fold_report(fold_dir: Path) -> FoldReport:
    path = Path(fold_dir) / FOLD_REPORT_FILE
    return FoldReport.model_validate_json(path.read_text(encoding='utf-8'))


def write_predictions(dataset: PairDataset, predictions: np.ndarray, path: Path):
    """Tab separated sample_id, p1, p2, label, prediction with a header row"""
    with _open_for_write(path) as f:
        writer = csv.writer(f, delimiter='\t')
        writer.writerow(PREDICTION_FIELDS)
        for i, ((p1, p2), label, prediction) in enumerate(zip(
                dataset.pair_digits.tolist(), dataset.labels.tolist(), np.asarray(predictions).tolist())):
            writer.writerow([i, p1, p2, label, repr(float(prediction))])
