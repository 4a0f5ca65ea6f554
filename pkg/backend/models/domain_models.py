import math
import platform
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional, Tuple

from backend.errors import ContractViolation, MemoryGuardError
from backend.models.exp_poly import ExpPoly
from backend.models.rational_series import TruncatedSeries

TOOL_VERSION = '1.0.0'
SWEEP_SCHEDULES = ('fig2', 'refined', 'uniform')
# alternative names resolved when a sweep is built
SCHEDULE_ALIASES = {'fig2': 'refined'}


@dataclass(frozen=True)
class OrderPair:
    """f_k and g_k at one order, as exact series and (up to the crossover) closed forms"""
    k: int
    f_series: TruncatedSeries
    g_series: TruncatedSeries
    f_closed: Optional[ExpPoly] = None
    g_closed: Optional[ExpPoly] = None

    @property
    def has_closed_form(self) -> bool:
        return self.f_closed is not None


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and search window for the phase-diagram solvers"""
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    bisection_tol_x: float = 1e-6
    theta_window: Tuple[float, float] = (0.0, math.pi / 2)
    scan_points: int = 2001
    x_window_max: float = 10.0

    def __post_init__(self):
        if self.newton_tol <= 0 or self.bisection_tol_x <= 0:
            raise ContractViolation("solver tolerances must be positive")
        if self.newton_max_iter < 1:
            raise ContractViolation("newton_max_iter must be >= 1")
        lo, hi = self.theta_window
        if not 0 <= lo < hi:
            raise ContractViolation(f"invalid theta window {self.theta_window}")
        if self.scan_points < 3:
            raise ContractViolation("scan_points must be >= 3")

    @classmethod
    def from_config(cls, cfg) -> 'SolverSettings':
        return cls(
            newton_tol=cfg.NEWTON_TOL,
            newton_max_iter=cfg.NEWTON_MAX_ITER,
            bisection_tol_x=cfg.BISECTION_TOL_X,
            theta_window=(cfg.SOLVER_THETA_LO, cfg.SOLVER_THETA_HI),
            scan_points=cfg.SCAN_POINTS,
            x_window_max=cfg.X_WINDOW_MAX,
        )


@dataclass(frozen=True)
class PhaseCurvePoint:
    """One point of the critical curve x_c(P_th)"""
    p_th: float
    x_c: float
    theta_at_threshold: float
    saturated: bool = False

    def to_row(self) -> Dict[str, object]:
        return asdict(self)


@dataclass(frozen=True)
class PhaseSweep:
    """
    Decreasing P_th grid for the critical curve.

    'refined' (alias 'fig2') keeps ``coarse_step`` down to ``refine_below`` and then shrinks the
    step as a power of P_th so it reaches ``fine_step`` at ``p_th_end``.
    'uniform' uses ``coarse_step`` throughout.
    """
    p_th_start: float = 1.0
    p_th_end: float = 3.7e-3
    schedule: str = 'refined'
    coarse_step: float = 5e-4
    fine_step: float = 5e-7
    refine_below: float = 0.05

    def __post_init__(self):
        if self.schedule in SCHEDULE_ALIASES:
            object.__setattr__(self, 'schedule', SCHEDULE_ALIASES[self.schedule])
        if not 0 < self.p_th_end < self.p_th_start <= 1:
            raise ContractViolation(
                f"sweep needs 0 < p_th_end < p_th_start <= 1, got {self.p_th_end}, {self.p_th_start}")
        if self.schedule not in SWEEP_SCHEDULES:
            raise ContractViolation(f"unknown schedule '{self.schedule}'")
        if not 0 < self.fine_step <= self.coarse_step:
            raise ContractViolation("need 0 < fine_step <= coarse_step")

    @classmethod
    def from_config(cls, cfg, **overrides) -> 'PhaseSweep':
        params = dict(
            coarse_step=cfg.PHASE_STEP_COARSE,
            fine_step=cfg.PHASE_STEP_FINE,
            p_th_end=cfg.PHASE_FINE_AT,
            refine_below=cfg.PHASE_REFINE_BELOW,
        )
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**params)

    def step_at(self, p_th: float) -> float:
        if self.schedule == 'uniform' or p_th >= self.refine_below or self.p_th_end >= self.refine_below:
            return self.coarse_step
        exponent = math.log(self.fine_step / self.coarse_step) / math.log(self.p_th_end / self.refine_below)
        return max(self.fine_step, self.coarse_step * (p_th / self.refine_below) ** exponent)

    def grid(self) -> List[float]:
        values = []
        index = 0
        p_th = self.p_th_start
        # the coarse stretch is indexed to avoid drift from repeated subtraction
        while p_th > self.p_th_end and (self.schedule == 'uniform' or p_th >= self.refine_below):
            values.append(p_th)
            index += 1
            p_th = self.p_th_start - index * self.coarse_step
        while p_th > self.p_th_end:
            values.append(p_th)
            p_th -= self.step_at(p_th)
        if values[-1] - self.p_th_end > 1e-3 * self.fine_step:
            values.append(self.p_th_end)
        return values


@dataclass(frozen=True)
class SimConfig:
    """Parameters of a noisy Grover run"""
    n: int
    m_max: int
    p: float
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ContractViolation(f"n must be >= 2, got {self.n}")
        if self.m_max < 0:
            raise ContractViolation(f"m_max must be >= 0, got {self.m_max}")
        if not 0.0 <= self.p <= 1.0:
            raise ContractViolation(f"p must lie in [0, 1], got {self.p}")
        if self.trials < 1:
            raise ContractViolation(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2 ** 64:
            raise ContractViolation("seed must be a 64-bit unsigned integer")

    @property
    def dimension(self) -> int:
        return 2 ** self.n

    def guard(self, cap: int, mode: str):
        if self.n > cap:
            raise MemoryGuardError(self.n, cap, mode)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StepProbabilities:
    """Probability of observing |0…0⟩ after M = 0..m_max iterations"""
    values: Tuple[float, ...]
    stderr: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.stderr is not None and len(self.stderr) != len(self.values):
            raise ContractViolation("stderr must match values in length")

    @property
    def m_max(self) -> int:
        return len(self.values) - 1

    def final(self) -> float:
        return self.values[-1]


@dataclass(frozen=True)
class QuadratureSpec:
    """Direct k-fold quadrature request for F_k(Θ)"""
    k: int
    theta: float
    tol: float = 1e-8
    scheme: str = 'nquad'

    def __post_init__(self):
        if self.k not in (1, 2, 3):
            raise ContractViolation(f"direct quadrature supports k = 1..3, got {self.k}")
        if not 0 < self.theta <= math.pi:
            raise ContractViolation(f"theta must lie in (0, π], got {self.theta}")
        if self.tol <= 0:
            raise ContractViolation("tol must be positive")


@dataclass
class RunManifest:
    """Provenance record attached to every emitted artifact"""
    command: str
    parameters: Dict[str, object]
    seeds: List[int] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    tool_version: str = TOOL_VERSION
    python_version: str = field(default_factory=platform.python_version)
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    duration_s: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def __repr__(self):
        return f'<RunManifest {self.command}>'
