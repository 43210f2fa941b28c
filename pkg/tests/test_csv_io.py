"""
Tests for CSV input and output.

Tests:
- Workload CSV parsing and its error positions
- Workload CSV writing
- Result cell formatting and ResultsWriter
"""

import io

import numpy as np
import pytest

from pmlbound.errors import WorkloadFormatError
from pmlbound.csv_io import (
    ResultsWriter,
    format_value,
    open_output,
    parse_workload_text,
    read_workload_csv,
    write_workload_csv,
)
from pmlbound.workload import Workload, make_haar_workload


class TestWorkloadParsing:
    """Test parse_workload_text and read_workload_csv."""

    def test_parses_rows(self):
        """Test a plain matrix with a trailing newline."""
        workload = parse_workload_text("1,0,2\n0.5,-1,3e-2\n")
        assert workload.entries.tolist() == [[1.0, 0.0, 2.0], [0.5, -1.0, 0.03]]

    def test_skips_comments_and_blank_lines(self):
        """Test metadata comments and empty lines are ignored."""
        workload = parse_workload_text("# pmlbound 0.1.0 command=gen\n\n1,0\n0,1")
        assert workload == Workload(np.eye(2))

    @pytest.mark.parametrize("text,line,column", [
        ("1,2\n1,2,3\n", 2, 3),
        ("1,2\n3\n", 2, 2),
        ("1,a\n", 1, 2),
        ("1,2\n# note\nnan,1\n", 3, 1),
        ("1,inf\n", 1, 2),
    ])
    def test_error_positions(self, text, line, column):
        """Test malformed input reports the first bad line and column."""
        with pytest.raises(WorkloadFormatError) as exc_info:
            parse_workload_text(text)
        assert exc_info.value.line == line
        assert exc_info.value.column == column
        assert f"line {line}, column {column}" in exc_info.value.detail

    def test_empty_input(self):
        """Test a file with no rows is rejected."""
        with pytest.raises(WorkloadFormatError):
            parse_workload_text("# only a comment\n")

    def test_read_from_file(self, tmp_path):
        """Test reading a file records its source."""
        path = tmp_path / "w.csv"
        path.write_text("1,1\n1,-1\n")
        workload = read_workload_csv(str(path))
        assert workload == make_haar_workload(2)
        assert workload.metadata['family'] == 'csv'
        assert workload.metadata['source'] == str(path)


class TestWorkloadWriting:
    """Test write_workload_csv."""

    def test_integer_entries_stay_readable(self):
        """Test integer weights are written without exponents."""
        stream = io.StringIO()
        write_workload_csv(make_haar_workload(8), stream, "# header")
        lines = stream.getvalue().splitlines()
        assert lines[0] == "# header"
        assert len(lines) == 9
        assert lines[2] == "1,1,1,1,-1,-1,-1,-1"

    def test_float_entries_are_exact(self):
        """Test non-integer weights survive writing and reading unchanged."""
        original = Workload(np.random.default_rng(4).normal(size=(3, 4)) / 3.0)
        stream = io.StringIO()
        write_workload_csv(original, stream)
        assert parse_workload_text(stream.getvalue()) == original


class TestResultsWriting:
    """Test result formatting."""

    def test_format_value(self):
        """Test each cell type."""
        assert format_value(0.1) == "1.0000000000000001e-01"
        assert format_value(2.0) == "2.0000000000000000e+00"
        assert format_value(True) == "true"
        assert format_value(False) == "false"
        assert format_value(None) == ""
        assert format_value(7) == "7"
        assert format_value("0:4") == "0:4"

    def test_results_writer(self):
        """Test metadata line, header and missing cells."""
        stream = io.StringIO()
        ResultsWriter(['kind', 'value_nats', 'b']).write(stream, [{'kind': 'dp', 'value_nats': 2.0}], "# meta")
        assert stream.getvalue() == "# meta\nkind,value_nats,b\ndp,2.0000000000000000e+00,\n"

    def test_open_output_to_file(self, tmp_path):
        """Test a path opens a file for writing."""
        path = tmp_path / "out.csv"
        with open_output(str(path)) as stream:
            stream.write("x\n")
        assert path.read_text() == "x\n"
