"""
Exact truncated power series in Θ with rational coefficients.

A TruncatedSeries keeps every coefficient from Θ⁰ up to its cap as a
``fractions.Fraction``. Arithmetic never rounds; only ``evaluate`` goes to
floats, and it converts the coefficients once per series.
"""

import json
import logging
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Dict, Iterable, Optional, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from backend.errors import ContractViolation, InvariantViolation

logger = logging.getLogger(__name__)

Scalar = Union[int, Fraction]

TRIG_KINDS = ('cos2_2phi', 'sin2_2phi', 'cos4phi', 'sin4phi')


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise ContractViolation(f"exact coefficient expected, got {type(value).__name__}")


class TruncatedSeries:
    """
    Finite power series Σ c_j Θʲ, j = 0..cap, with exact rational coefficients.

    Instances are immutable. Two series compare equal when their coefficients
    agree up to the smaller of the two caps.
    """

    __slots__ = ('_coeffs', '_floats')

    def __init__(self, coeffs: Iterable, cap: Optional[int] = None):
        values = [_as_fraction(c) for c in coeffs]
        if cap is None:
            cap = len(values) - 1
        if cap < 0:
            raise ContractViolation(f"series cap must be >= 0, got {cap}")
        if len(values) > cap + 1:
            values = values[:cap + 1]
        else:
            values.extend([Fraction(0)] * (cap + 1 - len(values)))
        self._coeffs = tuple(values)
        self._floats = None

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------
    @classmethod
    def zero(cls, cap: int) -> 'TruncatedSeries':
        return cls([], cap)

    @classmethod
    def constant(cls, value: Scalar, cap: int) -> 'TruncatedSeries':
        return cls([value], cap)

    @classmethod
    def monomial(cls, power: int, coeff: Scalar, cap: int) -> 'TruncatedSeries':
        """coeff·Θ^power, dropped entirely when power exceeds cap"""
        coeffs = [Fraction(0)] * (cap + 1)
        if power <= cap:
            coeffs[power] = _as_fraction(coeff)
        return cls(coeffs, cap)

    @classmethod
    def from_mapping(cls, terms: Dict[int, Scalar], cap: int) -> 'TruncatedSeries':
        coeffs = [Fraction(0)] * (cap + 1)
        for power, value in terms.items():
            if power < 0:
                raise ContractViolation(f"negative power {power} in series")
            if power <= cap:
                coeffs[power] += _as_fraction(value)
        return cls(coeffs, cap)

    # ------------------------------------------------------------------
    # accessors
    # ------------------------------------------------------------------
    @property
    def cap(self) -> int:
        return len(self._coeffs) - 1

    @property
    def coeffs(self) -> tuple:
        return self._coeffs

    def __getitem__(self, power: int) -> Fraction:
        if power < 0:
            raise IndexError(power)
        if power > self.cap:
            raise ContractViolation(f"power {power} beyond series cap {self.cap}")
        return self._coeffs[power]

    def __len__(self):
        return len(self._coeffs)

    def __iter__(self):
        return iter(self._coeffs)

    def leading_power(self) -> Optional[int]:
        """Lowest power with a nonzero coefficient, or None for the zero series"""
        for power, value in enumerate(self._coeffs):
            if value:
                return power
        return None

    def is_zero(self) -> bool:
        return self.leading_power() is None

    def nonzero_terms(self) -> Dict[int, Fraction]:
        return {p: c for p, c in enumerate(self._coeffs) if c}

    # ------------------------------------------------------------------
    # algebra
    # ------------------------------------------------------------------
    def _check_same_cap(self, other: 'TruncatedSeries', op: str):
        if not isinstance(other, TruncatedSeries):
            raise ContractViolation(f"cannot {op} series and {type(other).__name__}")
        if other.cap != self.cap:
            raise ContractViolation(f"{op} needs equal caps, got {self.cap} and {other.cap}")

    def __add__(self, other: 'TruncatedSeries') -> 'TruncatedSeries':
        self._check_same_cap(other, 'add')
        return TruncatedSeries([a + b for a, b in zip(self._coeffs, other._coeffs)], self.cap)

    def __sub__(self, other: 'TruncatedSeries') -> 'TruncatedSeries':
        self._check_same_cap(other, 'subtract')
        return TruncatedSeries([a - b for a, b in zip(self._coeffs, other._coeffs)], self.cap)

    def __neg__(self) -> 'TruncatedSeries':
        return TruncatedSeries([-a for a in self._coeffs], self.cap)

    def scale(self, factor: Scalar) -> 'TruncatedSeries':
        factor = _as_fraction(factor)
        return TruncatedSeries([factor * a for a in self._coeffs], self.cap)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            cap = min(self.cap, other.cap)
            out = [Fraction(0)] * (cap + 1)
            right = [(j, b) for j, b in enumerate(other._coeffs[:cap + 1]) if b]
            for i, a in enumerate(self._coeffs[:cap + 1]):
                if not a:
                    continue
                for j, b in right:
                    if i + j > cap:
                        break
                    out[i + j] += a * b
            return TruncatedSeries(out, cap)
        return self.scale(other)

    __rmul__ = scale

    def truncate(self, cap: int) -> 'TruncatedSeries':
        if cap > self.cap:
            raise ContractViolation(f"cannot extend series cap {self.cap} to {cap}")
        return TruncatedSeries(self._coeffs[:cap + 1], cap)

    def shift_down(self, k: int) -> 'TruncatedSeries':
        """Divide by Θᵏ; the dropped low coefficients must be zero"""
        low = [p for p in range(min(k, self.cap + 1)) if self._coeffs[p]]
        if low:
            raise InvariantViolation(f"nonzero coefficient at power {low[0]} below shift {k}")
        return TruncatedSeries(self._coeffs[k:], self.cap - k)

    def derivative(self) -> 'TruncatedSeries':
        if self.cap == 0:
            return TruncatedSeries.zero(0)
        return TruncatedSeries([p * c for p, c in enumerate(self._coeffs)][1:], self.cap - 1)

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        cap = min(self.cap, other.cap)
        return self._coeffs[:cap + 1] == other._coeffs[:cap + 1]

    __hash__ = None

    def __repr__(self):
        shown = ', '.join(f"{p}: {c}" for p, c in self.nonzero_terms().items())
        return f"TruncatedSeries(cap={self.cap}, {{{shown}}})"

    # ------------------------------------------------------------------
    # float evaluation
    # ------------------------------------------------------------------
    def to_floats(self) -> np.ndarray:
        if self._floats is None:
            floats = np.array([float(c) for c in self._coeffs], dtype=np.float64)
            floats.setflags(write=False)
            self._floats = floats
        return self._floats

    def evaluate(self, theta):
        return npoly.polyval(theta, self.to_floats())

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            'cap': self.cap,
            'coeffs': [f"{c.numerator}/{c.denominator}" for c in self._coeffs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'TruncatedSeries':
        return cls([Fraction(text) for text in data['coeffs']], int(data['cap']))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> 'TruncatedSeries':
        return cls.from_dict(json.loads(text))


@lru_cache(maxsize=None)
def factorials(upto: int) -> tuple:
    """(0!, 1!, ..., upto!) as Python ints"""
    out = [1]
    for n in range(1, upto + 1):
        out.append(out[-1] * n)
    return tuple(out)


def series_arith(a: TruncatedSeries, b, op: str) -> TruncatedSeries:
    """
    Dispatch one of add / sub / mul / scale on exact series.

    Args:
        a: left operand
        b: right operand; a series, or a rational for 'scale'
        op: 'add', 'sub', 'mul' or 'scale'

    Returns:
        The exact result, truncated at the operands' cap (min cap for 'mul').
    """
    if op == 'add':
        return a + b
    if op == 'sub':
        return a - b
    if op == 'mul':
        if not isinstance(b, TruncatedSeries):
            raise ContractViolation("'mul' needs two series; use 'scale' for rationals")
        return a * b
    if op == 'scale':
        return a.scale(b)
    raise ContractViolation(f"unknown series operation '{op}'")


def series_convolve(a: TruncatedSeries, w: TruncatedSeries, cap: int) -> TruncatedSeries:
    """
    Series of ∫₀^Θ a(Θ−φ)·w(φ) dφ up to Θ^cap.

    Each pair (i, j) contributes a_i·w_j·i!·j!/(i+j+1)! at power i+j+1. The
    sum is done on factorial-scaled coefficients (a_i·i!, w_j·j!) so the
    inner loop is a plain Cauchy product with a one-step shift.
    """
    if cap < 1:
        raise ContractViolation(f"convolution cap must be >= 1, got {cap}")
    if a.cap < cap - 1 or w.cap < cap - 1:
        raise ContractViolation(
            f"convolution to cap {cap} needs operand caps >= {cap - 1}, got {a.cap} and {w.cap}")
    fact = factorials(cap)
    scaled_a = [(i, a[i] * fact[i]) for i in range(cap) if a[i]]
    scaled_w = [(j, w[j] * fact[j]) for j in range(cap) if w[j]]
    out = [Fraction(0)] * (cap + 1)
    for i, ai in scaled_a:
        for j, wj in scaled_w:
            n = i + j + 1
            if n > cap:
                break
            out[n] += ai * wj
    return TruncatedSeries([c / fact[n] if c else c for n, c in enumerate(out)], cap)


@lru_cache(maxsize=64)
def taylor_trig(kind: str, cap: int) -> TruncatedSeries:
    """
    Exact Taylor series about 0 of cos²2φ, sin²2φ, cos4φ or sin4φ.

    cos4φ = Σ (−1)ᵐ 4²ᵐ/(2m)! φ²ᵐ and the squares follow from
    cos²2φ = (1 + cos4φ)/2, sin²2φ = (1 − cos4φ)/2.
    """
    if cap < 0:
        raise ContractViolation(f"series cap must be >= 0, got {cap}")
    fact = factorials(cap)
    cos4 = [Fraction(0)] * (cap + 1)
    sin4 = [Fraction(0)] * (cap + 1)
    for power in range(cap + 1):
        sign = -1 if (power // 2) % 2 else 1
        term = Fraction(sign * 4 ** power, fact[power])
        if power % 2 == 0:
            cos4[power] = term
        else:
            sin4[power] = term
    if kind == 'cos4phi':
        return TruncatedSeries(cos4, cap)
    if kind == 'sin4phi':
        return TruncatedSeries(sin4, cap)
    half = Fraction(1, 2)
    if kind == 'cos2_2phi':
        coeffs = [half * c for c in cos4]
        coeffs[0] += half
        return TruncatedSeries(coeffs, cap)
    if kind == 'sin2_2phi':
        coeffs = [-half * c for c in cos4]
        coeffs[0] += half
        return TruncatedSeries(coeffs, cap)
    raise ContractViolation(f"unknown trig kind '{kind}', expected one of {TRIG_KINDS}")


def series_eval(a: TruncatedSeries, theta):
    """Horner evaluation of the float image of ``a``; accepts scalars or arrays"""
    return a.evaluate(theta)


