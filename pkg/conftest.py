"""
Shared pytest setup: import the flat modules from the repository root and
keep configuration independent of the caller's environment.
"""

import os
import sys

import pytest

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running compile and property tests")


@pytest.fixture(autouse=True)
def clean_config(monkeypatch):
    """Fresh Config per test, built from NARROWFORGE_* defaults."""
    import config as config_module

    for name in list(os.environ):
        if name.startswith("NARROWFORGE_"):
            monkeypatch.delenv(name, raising=False)
    monkeypatch.setattr(config_module, "DOTENV_AVAILABLE", False)
    config_module.reload_config()
    yield
    config_module.reload_config()
