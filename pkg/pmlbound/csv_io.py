"""
CSV input and output.

Workload CSV: m lines of k comma-separated decimals, no header, optional
trailing newline. Lines starting with ``#`` are metadata comments and are
skipped. Result CSVs carry one ``#`` metadata line, a fixed header and
floats written with 17 significant digits so every double round-trips.
"""

import csv
import io
import logging
import math
import sys
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, TextIO

from .errors import WorkloadFormatError
from .workload import Workload

logger = logging.getLogger(__name__)


def parse_workload_text(text: str, metadata: Optional[Dict[str, Any]] = None) -> Workload:
    """
    Parse workload CSV text.

    Raises:
        WorkloadFormatError: On ragged rows, non-numeric or non-finite tokens,
            with the 1-based line and column of the first problem
    """
    rows: List[List[float]] = []
    width: Optional[int] = None
    reader = csv.reader(io.StringIO(text))
    for fields in reader:
        line = reader.line_num
        if not fields or (len(fields) == 1 and not fields[0].strip()):
            continue
        if fields[0].lstrip().startswith('#'):
            continue

        values = []
        for column, token in enumerate(fields, start=1):
            try:
                value = float(token.strip())
            except ValueError:
                raise WorkloadFormatError(f"'{token.strip()}' is not a number", line, column)
            if not math.isfinite(value):
                raise WorkloadFormatError(f"'{token.strip()}' is not finite", line, column)
            values.append(value)

        if width is None:
            width = len(values)
        elif len(values) != width:
            raise WorkloadFormatError(f"expected {width} values, found {len(values)}", line, min(len(values), width) + 1)
        rows.append(values)

    if not rows:
        raise WorkloadFormatError("no workload rows", 1, 1)
    return Workload(rows, metadata=metadata)


def read_workload_csv(path: str) -> Workload:
    """Load a workload from a CSV file."""
    with open(path, 'r', encoding='utf-8', newline='') as handle:
        workload = parse_workload_text(handle.read(), metadata={'family': 'csv', 'source': path})
    logger.info(f"Read workload {workload.m}x{workload.k} from {path}")
    return workload


def format_value(value: Any) -> str:
    """Render one result cell: floats as %.16e, bools as true/false, None as empty."""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return f"{value:.16e}"
    return str(value)


@contextmanager
def open_output(path: Optional[str]) -> Iterator[TextIO]:
    """Yield a text stream for ``path``, or stdout when no path is given."""
    if path is None:
        yield sys.stdout
        return
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        yield handle


def write_workload_csv(workload: Workload, stream: TextIO, metadata_line: Optional[str] = None):
    """Write a workload; entries use %.17g so integer weights stay readable and exact."""
    if metadata_line:
        stream.write(metadata_line + '\n')
    writer = csv.writer(stream, lineterminator='\n')
    for row in workload.entries:
        writer.writerow(f"{value:.17g}" for value in row)


class ResultsWriter:
    """Writes result records under a fixed header."""

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)

    def write(self, stream: TextIO, records: Sequence[Dict[str, Any]], metadata_line: Optional[str] = None):
        if metadata_line:
            stream.write(metadata_line + '\n')
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(self.columns)
        for record in records:
            writer.writerow(format_value(record.get(column)) for column in self.columns)
