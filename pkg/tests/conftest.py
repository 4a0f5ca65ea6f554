"""
Shared fixtures: the testing configuration, solver settings and one
perturbation table per session (building it runs the full exact recurrence).
"""

import pytest

from backend.models.domain_models import SolverSettings
from backend.services.perturbation import build_table
from config import TestingConfig


@pytest.fixture(scope='session')
def cfg():
    return TestingConfig


@pytest.fixture(scope='session')
def settings(cfg):
    return SolverSettings.from_config(cfg)


@pytest.fixture(scope='session')
def table(cfg):
    return build_table(order=cfg.PERTURBATION_ORDER, degree=cfg.POLYNOMIAL_DEGREE,
                       crossover=cfg.EXPPOLY_CROSSOVER)
