"""
permin - Shared Test Fixtures
=============================
Systems, observables and a seeded generator used across the suite.
"""

import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
import structlog

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"
sys.path.insert(0, str(PROJECT_ROOT / "src"))

from permin.modules.dynamics import SystemDescriptor  # noqa: E402
from permin.modules.observables import ClosedForm, LocallyConstant  # noqa: E402

ENV_VARS = ("PERMIN_OUT_DIR", "PERMIN_RNG_SEED", "PERMIN_LOG_LEVEL", "PERMIN_LOG_FORMAT",
            "PERMIN_ENUM_BUDGET")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for var in ENV_VARS:
        monkeypatch.delenv(var, raising=False)


@pytest.fixture(autouse=True)
def reset_logging():
    # CliRunner swaps sys.stderr out from under the configured PrintLogger
    yield
    structlog.reset_defaults()


@pytest.fixture
def circle2():
    return SystemDescriptor.circle(2)


@pytest.fixture
def shift2():
    return SystemDescriptor.full_shift(2)


@pytest.fixture
def golden():
    """Golden mean shift: the word 11 is forbidden."""
    return SystemDescriptor.sft([[1, 1], [1, 0]])


@pytest.fixture
def cat():
    return SystemDescriptor.torus_cat([[2, 1], [1, 1]])


@pytest.fixture
def sft_u():
    return LocallyConstant.from_table({"00": 3, "01": 1, "10": 1, "11": 3})


@pytest.fixture
def one():
    return ClosedForm.constant(Fraction(1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def config_dir():
    return CONFIG_DIR
