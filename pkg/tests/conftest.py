"""Shared fixtures for the masked-regression test suite."""

import sys
from pathlib import Path

import pytest

# Add repo root to path so the package imports without installation
sys.path.insert(0, str(Path(__file__).parent.parent))

from masked_regression import engine  # noqa: E402
from masked_regression.gaussian_math import RngStream  # noqa: E402


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture
def mreg_home(tmp_path):
    """Isolated MREG_HOME for each test."""
    home = tmp_path / ".mreg"
    home.mkdir()

    original_dir = engine.MREG_DIR
    original_runs = engine.RUNS_FILE
    original_output = engine.OUTPUT_DIR

    engine.MREG_DIR = home
    engine.RUNS_FILE = home / "runs.jsonl"
    engine.OUTPUT_DIR = home / "output"

    yield home

    engine.MREG_DIR = original_dir
    engine.RUNS_FILE = original_runs
    engine.OUTPUT_DIR = original_output
