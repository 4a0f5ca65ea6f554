"""
Finite-n Grover search with independent phase flips on every qubit before
each R₀.

One Grover iteration is [flips, R₀, W, flips, R₀, W] with W = H^⊗n and R₀
negating the amplitude of |0…0⟩, so the marked item is index 0 and the
oracle is R₀ itself. Qubit i is bit i of the basis index. All states stay
real, so the simulator works in float64 throughout.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Tuple

import numpy as np

from backend.errors import ContractViolation
from backend.models.domain_models import SimConfig, StepProbabilities

logger = logging.getLogger(__name__)

# states per evaluation block, independent of the configured trajectory batch
_BLOCK_AMPLITUDES = 1 << 22


def index_bits(n: int) -> np.ndarray:
    """(2ⁿ, n) 0/1 matrix with bits[a, i] = bit i of a"""
    return ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(np.int64)


def popcounts(n: int) -> np.ndarray:
    return index_bits(n).sum(axis=1)


def walsh_hadamard(states: np.ndarray, n: int) -> np.ndarray:
    """H^⊗n applied along the last axis (length 2ⁿ), normalised"""
    batch_shape = states.shape[:-1]
    # C order so every reshape below is a view into ``out``
    out = np.array(states, dtype=np.float64, order='C', copy=True)
    for qubit in range(n):
        view = out.reshape(batch_shape + (2 ** (n - 1 - qubit), 2, 2 ** qubit))
        upper = view[..., 0, :].copy()
        lower = view[..., 1, :]
        view[..., 0, :] += lower
        view[..., 1, :] = upper - lower
    return out * (2.0 ** (-n / 2))


def flip_signs(flips: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """±1 factors of σ_z on the flipped qubits: (B, n) flags → (B, 2ⁿ) signs"""
    parity = (flips.astype(np.int64) @ bits.T) & 1
    return 1.0 - 2.0 * parity


def evolve_with_flips(flips: np.ndarray, n: int) -> np.ndarray:
    """
    Deterministic evolution for a batch of fixed error placements.

    Args:
        flips: boolean array (B, 2·m_max, n); row 2m is applied before the
            first R₀ of iteration m+1, row 2m+1 before the second
        n: qubit count

    Returns:
        (B, m_max+1) probabilities of |0…0⟩ after 0..m_max iterations
    """
    batch, slots, width = flips.shape
    if width != n or slots % 2:
        raise ContractViolation(f"flip array shape {flips.shape} does not fit n={n}")
    m_max = slots // 2
    bits = index_bits(n)
    dim = 2 ** n
    states = np.full((batch, dim), 2.0 ** (-n / 2))
    probs = np.empty((batch, m_max + 1))
    probs[:, 0] = states[:, 0] ** 2
    for m in range(m_max):
        for half in (0, 1):
            layer = flips[:, 2 * m + half, :]
            if layer.any():
                states *= flip_signs(layer, bits)
            states[:, 0] *= -1.0
            states = walsh_hadamard(states, n)
        probs[:, m + 1] = states[:, 0] ** 2
    return probs


def trajectory_rng(seed: int, trajectory: int) -> np.random.Generator:
    """Generator for trajectory t, a pure function of (seed, t)"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trajectory,)))


def sample_flips(cfg: SimConfig, trajectory: int) -> np.ndarray:
    return trajectory_rng(cfg.seed, trajectory).random((2 * cfg.m_max, cfg.n)) < cfg.p


def run_trajectory(cfg: SimConfig, trajectory_seed: int, cap: int = 20) -> StepProbabilities:
    """One sampled trajectory; identical to trajectory ``trajectory_seed`` of mc_estimate"""
    cfg.guard(cap, 'trajectory')
    flips = sample_flips(cfg, trajectory_seed)[None, ...]
    return StepProbabilities(values=tuple(evolve_with_flips(flips, cfg.n)[0].tolist()))


def _batch_size(cfg: SimConfig, batch: int) -> int:
    return max(1, min(batch, cfg.trials, _BLOCK_AMPLITUDES // cfg.dimension))


def mc_estimate(cfg: SimConfig, batch: int = 2048, threads: int = 1, cap: int = 20) -> StepProbabilities:
    """
    Mean and standard error over ``cfg.trials`` trajectories.

    Trajectory t draws its flips from trajectory_rng(cfg.seed, t), so the
    result does not depend on batch size or thread count.
    """
    if cfg.trials < 2:
        raise ContractViolation(f"mc_estimate needs trials >= 2, got {cfg.trials}")
    cfg.guard(cap, 'trajectory')
    size = _batch_size(cfg, batch)
    starts = range(0, cfg.trials, size)
    started = time.perf_counter()
    logger.info("monte carlo: n=%d m_max=%d p=%g trials=%d seed=%d (batch %d, %d threads)",
                cfg.n, cfg.m_max, cfg.p, cfg.trials, cfg.seed, size, threads)

    def run_block(start):
        stop = min(start + size, cfg.trials)
        flips = np.stack([sample_flips(cfg, t) for t in range(start, stop)])
        return evolve_with_flips(flips, cfg.n)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            blocks = list(executor.map(run_block, starts))
    else:
        blocks = [run_block(start) for start in starts]
    samples = np.concatenate(blocks, axis=0)

    mean = samples.mean(axis=0)
    # population deviation keeps stderr ≤ sqrt(0.25/trials) for values in [0, 1]
    stderr = samples.std(axis=0, ddof=0) / math.sqrt(cfg.trials)
    logger.info("monte carlo finished in %.2fs, final mean %.6f ± %.6f",
                time.perf_counter() - started, mean[-1], stderr[-1])
    return StepProbabilities(values=tuple(mean.tolist()), stderr=tuple(stderr.tolist()))


def dephasing_factors(n: int, p: float) -> np.ndarray:
    """(1−2p)^{popcount(a XOR b)}: the all-qubit dephasing channel as an elementwise mask"""
    counts = popcounts(n)
    index = np.arange(2 ** n)
    return (1.0 - 2.0 * p) ** counts[np.bitwise_xor.outer(index, index)]


def run_exact_channel(cfg: SimConfig, cap: int = 10, keep_states: bool = False):
    """
    Density-matrix evolution with the dephasing channel before each R₀.

    Returns StepProbabilities, or (StepProbabilities, list of ρ after each
    iteration) with ``keep_states``.
    """
    cfg.guard(cap, 'exact')
    n = cfg.n
    dim = cfg.dimension
    mask = dephasing_factors(n, cfg.p)
    rho = np.full((dim, dim), 1.0 / dim)
    values = [float(rho[0, 0])]
    states = []
    for _ in range(cfg.m_max):
        for _half in (0, 1):
            rho = rho * mask
            rho[0, :] *= -1.0
            rho[:, 0] *= -1.0
            rho = walsh_hadamard(rho, n)
            rho = walsh_hadamard(rho.T, n).T
        values.append(float(rho[0, 0]))
        if keep_states:
            states.append(rho.copy())
    result = StepProbabilities(values=tuple(values))
    return (result, states) if keep_states else result


def enumerate_error_patterns(n: int, m_max: int, p: float, slot_cap: int = 16,
                             batch: int = 4096) -> StepProbabilities:
    """
    Weighted sum over all 2^{2·m_max·n} error placements of the deterministic
    success probability, each weighted by p^k(1−p)^{slots−k}.
    """
    slots = 2 * m_max * n
    if slots > slot_cap:
        raise ContractViolation(f"{slots} error slots exceed the enumeration cap {slot_cap}")
    if not 0.0 <= p <= 1.0:
        raise ContractViolation(f"p must lie in [0, 1], got {p}")
    total = np.zeros(m_max + 1)
    patterns = 2 ** slots
    for start in range(0, patterns, batch):
        codes = np.arange(start, min(start + batch, patterns))
        flags = ((codes[:, None] >> np.arange(slots)) & 1).astype(bool)
        k = flags.sum(axis=1)
        weights = p ** k * (1.0 - p) ** (slots - k)
        probs = evolve_with_flips(flags.reshape(len(codes), 2 * m_max, n), n)
        total += weights @ probs
    return StepProbabilities(values=tuple(total.tolist()))


def boyer_angle(n: int) -> float:
    """θ with sin θ = 2^{−n/2}"""
    if n < 2:
        raise ContractViolation(f"n must be >= 2, got {n}")
    return math.asin(2.0 ** (-n / 2))


def noiseless_closed_form(n: int, m):
    """sin²((2M+1)θ); accepts a scalar or an array of M"""
    theta = boyer_angle(n)
    return np.sin((2 * np.asarray(m) + 1) * theta) ** 2


def map_finite_n(m: int, n: int, p: float) -> Tuple[float, float]:
    """(Θ, x) = ((M + ½)·θ, 2Mnp) for a finite register"""
    return (m + 0.5) * boyer_angle(n), 2.0 * m * n * p


def step_thetas(n: int, m_max: int) -> np.ndarray:
    return (np.arange(m_max + 1) + 0.5) * boyer_angle(n)


def subspace_residual(state: np.ndarray, n: int) -> float:
    """Norm of the part of ``state`` outside span{|0…0⟩, uniform over the rest}"""
    rest = state[1:]
    return float(np.linalg.norm(rest - rest.mean()))
