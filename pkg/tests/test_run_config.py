"""
Tests for run configuration.

Tests:
- Grid specs
- RunConfig validation and defaults
- Loading from JSON with flag overrides
- Config hashing
- Environment configuration (Config), including malformed worker counts
"""

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from pmlbound import cli
from pmlbound.bounds import BoundKind
from pmlbound.config import DEFAULT_WORKERS, Config, parse_workers
from pmlbound.errors import UsageError
from pmlbound.run_config import GridSpec, RunConfig, load_run_config

PRESETS = Path(__file__).resolve().parent.parent / "config" / "presets"


class TestGridSpec:
    """Test grid parsing and values."""

    def test_log_grid(self):
        """Test geometric grids hit both endpoints."""
        grid = GridSpec.parse("1e-3:0.125:50:log")
        values = grid.values()
        assert len(values) == 50
        assert values[0] == 1e-3
        assert values[-1] == 0.125
        assert np.all(np.diff(np.log(values)) > 0)

    def test_lin_default(self):
        """Test the scale defaults to linear."""
        grid = GridSpec.parse("0.1:2.2:30")
        assert grid.scale == 'lin'
        assert grid.values()[1] == pytest.approx(0.1 + 2.1 / 29)

    @pytest.mark.parametrize("text", ["1:2", "1:2:1", "2:1:5", "0:1:5:log", "a:1:5", "0:1:5:cubic"])
    def test_invalid_grids(self, text):
        """Test malformed grids raise usage errors."""
        with pytest.raises(UsageError):
            GridSpec.parse(text)


class TestRunConfig:
    """Test RunConfig construction."""

    def test_defaults(self):
        """Test oracle defaults and the default workloads."""
        config = RunConfig(command='certify')
        assert (config.n, config.trials, config.seed) == (2, 10000, 0)
        assert config.workload_source() == 'histogram:8'
        assert config.noise_scale() == 1.0
        assert RunConfig(command='sweep-epsilon').workload_source() == 'haar:8'

    def test_grid_strings_are_parsed(self):
        """Test grids may be given as strings."""
        config = RunConfig(command='sweep-alpha', alpha_grid="0.01:0.1:3:lin")
        assert config.alpha_grid == GridSpec(start=0.01, stop=0.1, points=3, scale='lin')

    def test_kinds_are_enums(self):
        """Test kind names convert to BoundKind."""
        config = RunConfig(command='bound', kinds=['dp', 'trivial'])
        assert config.kinds == [BoundKind.DP, BoundKind.TRIVIAL]

    def test_hash_ignores_output_path(self):
        """Test the config hash depends on content, not on where it is written."""
        a = RunConfig(command='bound', workload='haar:8', out='a.csv')
        b = RunConfig(command='bound', workload='haar:8', out='b.csv')
        c = RunConfig(command='bound', workload='haar:8', seed=1)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()
        assert len(a.config_hash()) == 64


class TestLoadRunConfig:
    """Test load_run_config."""

    def test_flags_override_file(self, tmp_path):
        """Test explicit values win over the file and None does not override."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({'command': 'bound', 'workload': 'haar:8', 'b': 2.0, 'seed': 4}))
        config = load_run_config(str(path), {'b': 0.5, 'seed': None})
        assert config.b == 0.5
        assert config.seed == 4
        assert config.workload == 'haar:8'

    def test_unknown_key(self, tmp_path):
        """Test unknown keys are errors."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({'command': 'bound', 'noise': 1.0}))
        with pytest.raises(UsageError) as exc_info:
            load_run_config(str(path), {})
        assert 'noise' in exc_info.value.detail

    @pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
    def test_unreadable_file(self, tmp_path, content):
        """Test invalid JSON and non-object documents are usage errors."""
        path = tmp_path / "run.json"
        path.write_text(content)
        with pytest.raises(UsageError):
            load_run_config(str(path), {'command': 'bound'})

    def test_missing_file(self, tmp_path):
        """Test a missing config file is a usage error."""
        with pytest.raises(UsageError):
            load_run_config(str(tmp_path / "absent.json"), {'command': 'bound'})

    @pytest.mark.parametrize("overrides", [
        {'command': 'bound', 'b': 0.0},
        {'command': 'bound', 'alpha': -0.1},
        {'command': 'bound', 'n': 0},
        {'command': 'bound', 'tol_rel': 0.5},
        {'command': 'plot'},
    ])
    def test_invalid_values(self, overrides):
        """Test out-of-range values are usage errors."""
        with pytest.raises(UsageError):
            load_run_config(None, overrides)

    def test_presets_load(self):
        """Test the shipped presets are valid run configs."""
        for name in ('fig_alpha_histogram', 'fig_alpha_range', 'fig_alpha_difference', 'fig_epsilon_difference'):
            config = load_run_config(str(PRESETS / f"{name}.json"), {})
            assert config.command in ('sweep-alpha', 'sweep-epsilon')


class TestEnvironmentConfig:
    """Test Config."""

    def test_validate_accepts_defaults(self, monkeypatch):
        """Test a sane environment validates."""
        monkeypatch.setattr(Config, 'WORKERS_SETTING', '4')
        monkeypatch.setattr(Config, 'WORKERS', 4)
        monkeypatch.setattr(Config, 'LOG_LEVEL', 'INFO')
        assert Config.validate() is True

    def test_validate_rejects_zero_workers(self, monkeypatch):
        """Test PMLBOUND_WORKERS must be positive."""
        monkeypatch.setattr(Config, 'WORKERS_SETTING', '0')
        monkeypatch.setattr(Config, 'WORKERS', 0)
        assert Config.validate() is False

    @pytest.mark.parametrize("raw,expected", [("3", 3), (" 12 ", 12), ("0", 0), ("abc", None), ("2.5", None), (None, None)])
    def test_parse_workers(self, raw, expected):
        """Test worker counts parse as integers and anything else as None."""
        assert parse_workers(raw) == expected

    def test_non_integer_workers_are_reported(self, monkeypatch, caplog):
        """Test a non-integer PMLBOUND_WORKERS falls back to the default and fails validation."""
        monkeypatch.setattr(Config, 'WORKERS_SETTING', 'abc')
        monkeypatch.setattr(Config, 'WORKERS', DEFAULT_WORKERS)
        monkeypatch.setattr(Config, 'LOG_LEVEL', 'INFO')
        with caplog.at_level(logging.ERROR, logger='pmlbound.config'):
            assert Config.validate() is False
        assert "PMLBOUND_WORKERS must be an integer, got 'abc'" in caplog.text

    def test_cli_runs_with_non_integer_workers(self, monkeypatch, tmp_path):
        """Test a bad worker setting is logged, not raised, by the command line."""
        monkeypatch.setattr(Config, 'WORKERS_SETTING', 'abc')
        monkeypatch.setattr(Config, 'WORKERS', DEFAULT_WORKERS)
        out = tmp_path / 'bound.csv'
        assert cli.main(['bound', '--workload', 'histogram:4', '--out', str(out)]) == 0
        assert out.exists()

    def test_log_level(self, monkeypatch):
        """Test level names map to logging levels, unknown names to WARNING."""
        monkeypatch.setattr(Config, 'LOG_LEVEL', 'DEBUG')
        assert Config.log_level() == logging.DEBUG
        monkeypatch.setattr(Config, 'LOG_LEVEL', 'CHATTY')
        assert Config.log_level() == logging.WARNING
        assert Config.validate() is False
