"""
Report files: metric CSV and the task-by-method comparison table
"""
import csv
import io
import logging
import math
from collections import OrderedDict

from contrastforge.constants import PSNR, REPORT_HEADER, SSIM
from contrastforge.exceptions import DataError, FileFormatError
from contrastforge.metrics import MetricReport, ReportRow
from contrastforge.utils import atomic_write

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

BEST = 'best'


def _rows(reports):
    rows = []
    for report in reports:
        rows.extend(report.rows() if isinstance(report, MetricReport) else [report])
    return rows


def _number(value):
    return repr(float(value))


def report_csv(reports):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(REPORT_HEADER)
    for row in _rows(reports):
        writer.writerow((row.task, row.method, row.metric, _number(row.mean), _number(row.std), row.n))
    return out.getvalue()


def read_report_csv(path):
    rows = []
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != REPORT_HEADER:
            raise FileFormatError(path, "unexpected report header {0}".format(header))
        try:
            for task, method, metric, mean, std, n in reader:
                rows.append(ReportRow(task, method, metric, float(mean), float(std), int(n)))
        except ValueError as e:
            raise FileFormatError(path, "malformed report row", e)
    return rows


def _cell(psnr_row, ssim_row):
    def fmt(row, digits):
        if row is None:
            return '-'
        if math.isinf(row.mean):
            return 'inf'
        return '{0:.{2}f} ± {1:.{2}f}'.format(row.mean, row.std, digits)
    return '{0} | {1}'.format(fmt(psnr_row, 2), fmt(ssim_row, 3))


def report_table(reports):
    """
    Rows are tasks and columns methods, each cell ``PSNR mean ± std | SSIM mean ± std``;
    the last column names the method with the highest mean PSNR.
    """
    rows = _rows(reports)
    if not rows:
        raise DataError("No report rows to tabulate")
    tasks, methods = OrderedDict(), OrderedDict()
    cells = {}
    for row in rows:
        tasks.setdefault(row.task)
        methods.setdefault(row.method)
        cells[(row.task, row.method, row.metric)] = row

    table = [['task'] + list(methods) + [BEST]]
    for task in tasks:
        line = [task]
        best, best_psnr = '-', -math.inf
        for method in methods:
            psnr_row = cells.get((task, method, PSNR))
            line.append(_cell(psnr_row, cells.get((task, method, SSIM))))
            if psnr_row is not None and psnr_row.mean > best_psnr:
                best, best_psnr = method, psnr_row.mean
        line.append(best)
        table.append(line)

    widths = [max(len(line[i]) for line in table) for i in range(len(table[0]))]
    return ''.join('  '.join(text.ljust(width) for text, width in zip(line, widths)).rstrip() + '\n'
                   for line in table)


def emit_report(reports, csv_path=None, table_path=None):
    """
    Writes the CSV and the aligned table; returns the table text
    """
    reports = list(reports)
    table = report_table(reports)
    if csv_path is not None:
        atomic_write(csv_path, report_csv(reports).encode('utf-8'))
    if table_path is not None:
        atomic_write(table_path, table.encode('utf-8'))
    log.info("report with %s rows", len(_rows(reports)))
    return table
