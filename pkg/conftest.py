"""Shared pytest configuration."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

collect_ignore = ["examples"]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance reproduction")


@pytest.fixture(autouse=True)
def log_to_tmp(tmp_path, monkeypatch):
    monkeypatch.setenv("TIPSET_FINALITY_LOG", str(tmp_path / "cli.log"))
