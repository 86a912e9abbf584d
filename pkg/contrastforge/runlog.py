"""
Per-step loss log, written as CSV
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from contrastforge.constants import RUNLOG_HEADER
from contrastforge.exceptions import FileFormatError, UsageError

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())


@dataclass(frozen=True)
class LogRecord:
    epoch: int
    step: int
    loss_name: str
    value: float
    lr: float


@dataclass
class RunLog:
    """
    Append-only; (epoch, step) never goes backwards
    """
    records: list = field(default_factory=list)

    def append(self, epoch, step, loss_name, value, lr):
        if self.records and (epoch, step) < (self.records[-1].epoch, self.records[-1].step):
            raise UsageError("Run log position ({0}, {1}) precedes ({2}, {3})".format(
                epoch, step, self.records[-1].epoch, self.records[-1].step))
        self.records.append(LogRecord(epoch, step, loss_name, float(value), float(lr)))

    def extend(self, other):
        for r in other.records:
            self.append(r.epoch, r.step, r.loss_name, r.value, r.lr)

    def values(self, loss_name):
        return [r.value for r in self.records if r.loss_name == loss_name]

    def __len__(self):
        return len(self.records)

    def write(self, path, append=False):
        path = Path(path)
        write_header = not (append and path.is_file())
        with open(path, 'a' if append else 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            if write_header:
                writer.writerow(RUNLOG_HEADER)
            for r in self.records:
                writer.writerow((r.epoch, r.step, r.loss_name, repr(r.value), repr(r.lr)))

    @classmethod
    def read(cls, path):
        runlog = cls()
        with open(path, newline='') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if tuple(header or ()) != RUNLOG_HEADER:
                raise FileFormatError(path, "unexpected run log header {0}".format(header))
            try:
                for epoch, step, loss_name, value, lr in reader:
                    runlog.append(int(epoch), int(step), loss_name, float(value), float(lr))
            except ValueError as e:
                raise FileFormatError(path, "malformed run log row", e)
        return runlog
