# Configuration settings for the Grover decoherence perturbation toolkit

import math
import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Base configuration class"""

    # Perturbation table settings
    PERTURBATION_ORDER = int(os.environ.get('GROVER_PT_ORDER') or 39)
    POLYNOMIAL_DEGREE = int(os.environ.get('GROVER_PT_DEGREE') or 40)
    EXPPOLY_CROSSOVER = 10  # closed forms kept up to this order

    # Certified evaluation window
    THETA_WINDOW_MAX = math.pi
    X_WINDOW_MAX = 10.0

    # Solver settings
    NEWTON_TOL = 1e-10
    NEWTON_MAX_ITER = 50
    BISECTION_TOL_X = 1e-6
    SOLVER_THETA_LO = 0.0
    SOLVER_THETA_HI = math.pi / 2
    SCAN_POINTS = 2001

    # Phase sweep schedule
    PHASE_STEP_COARSE = 5.0e-4
    PHASE_STEP_FINE = 5.0e-7
    PHASE_FINE_AT = 3.7e-3
    PHASE_REFINE_BELOW = 0.05

    # Simulation settings
    N_QUBITS = 9
    M_MAX = 17
    TRIALS = int(os.environ.get('GROVER_PT_TRIALS') or 50000)
    SEED = int(os.environ.get('GROVER_PT_SEED') or 20050729)
    TRAJECTORY_BATCH = 2048
    TRAJECTORY_QUBIT_CAP = 20
    EXACT_QUBIT_CAP = 10
    PATTERN_SLOT_CAP = 16  # 2Mn error slots for brute-force enumeration

    # Oracle settings
    QUADRATURE_TOL = 1e-8
    QUADRATURE_MAX_ORDER = 3

    # Runtime settings
    THREADS = int(os.environ.get('GROVER_PT_THREADS') or 1)
    LOG_LEVEL = os.environ.get('GROVER_PT_LOG_LEVEL') or 'INFO'
    OUTPUT_DIR = os.environ.get('GROVER_PT_OUTPUT_DIR') or 'output'


class DevelopmentConfig(Config):
    """Development configuration"""
    LOG_LEVEL = os.environ.get('GROVER_PT_LOG_LEVEL') or 'DEBUG'


class ProductionConfig(Config):
    """Production configuration"""
    THREADS = int(os.environ.get('GROVER_PT_THREADS') or os.cpu_count() or 1)


class TestingConfig(Config):
    """Testing configuration"""
    TRIALS = 2000
    SCAN_POINTS = 801
    TRAJECTORY_BATCH = 512
    OUTPUT_DIR = 'test-output'


# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': Config
}


def get_config(name=None):
    """Return the configuration class selected by name or GROVER_PT_ENV"""
    name = name or os.environ.get('GROVER_PT_ENV') or 'default'
    if name not in config:
        raise KeyError(f"unknown configuration '{name}'; choose from {sorted(config)}")
    return config[name]
