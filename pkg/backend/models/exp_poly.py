"""
Exact closed forms in the basis Θᵃ·e^{iωΘ}, ω ∈ {−4, 0, +4}.

Closed forms of f_k, g_k and F_k = f_k/Θᵏ are sums of such terms with
Gaussian-rational coefficients. Division by Θᵏ is never stored: callers pass
the divisor exponent to the evaluation helpers instead.
"""

import cmath
import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Dict, Iterator, Mapping, Tuple

from backend.errors import ContractViolation, InvariantViolation
from backend.models.rational_series import TruncatedSeries, factorials

logger = logging.getLogger(__name__)

FREQUENCIES = (-4, 0, 4)

Key = Tuple[int, int]  # (frequency ω, power a)


@dataclass(frozen=True)
class GaussianRational:
    """Exact complex number with rational real and imaginary parts"""
    real: Fraction = Fraction(0)
    imag: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, 'real', Fraction(self.real))
        object.__setattr__(self, 'imag', Fraction(self.imag))

    @classmethod
    def coerce(cls, value) -> 'GaussianRational':
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, float):
            raise ContractViolation("float given where an exact coefficient is required")
        return cls(Fraction(value), Fraction(0))

    def __bool__(self):
        return bool(self.real) or bool(self.imag)

    def __add__(self, other):
        other = GaussianRational.coerce(other)
        return GaussianRational(self.real + other.real, self.imag + other.imag)

    __radd__ = __add__

    def __sub__(self, other):
        other = GaussianRational.coerce(other)
        return GaussianRational(self.real - other.real, self.imag - other.imag)

    def __neg__(self):
        return GaussianRational(-self.real, -self.imag)

    def __mul__(self, other):
        other = GaussianRational.coerce(other)
        return GaussianRational(self.real * other.real - self.imag * other.imag,
                                self.real * other.imag + self.imag * other.real)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = GaussianRational.coerce(other)
        norm = other.real * other.real + other.imag * other.imag
        if not norm:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return self * GaussianRational(other.real / norm, -other.imag / norm)

    def __pow__(self, exponent: int):
        if exponent < 0:
            return GaussianRational(1) / (self ** -exponent)
        result = GaussianRational(1)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def conjugate(self) -> 'GaussianRational':
        return GaussianRational(self.real, -self.imag)

    def __complex__(self):
        return complex(float(self.real), float(self.imag))

    def __str__(self):
        if not self.imag:
            return str(self.real)
        return f"({self.real}{'+' if self.imag >= 0 else '-'}{abs(self.imag)}i)"


def _fraction_text(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


class ExpPoly:
    """
    Immutable sum Σ c_{ω,a} Θᵃ e^{iωΘ} representing a real-valued function.

    Zero-valued terms are never stored. The reality invariant (coefficient at
    (−ω, a) is the conjugate of the one at (ω, a)) is checked by
    ``check_real`` and after every convolution.
    """

    __slots__ = ('_terms',)

    def __init__(self, terms: Mapping[Key, object] = None):
        cleaned = {}
        for (omega, power), value in (terms or {}).items():
            if omega not in FREQUENCIES:
                raise ContractViolation(f"frequency {omega} outside {FREQUENCIES}")
            if power < 0:
                raise ContractViolation(f"negative power {power} in closed form")
            value = GaussianRational.coerce(value)
            if value:
                cleaned[(omega, power)] = value
        self._terms = dict(sorted(cleaned.items()))

    # ------------------------------------------------------------------
    # construction helpers
    # ------------------------------------------------------------------
    @classmethod
    def from_trig(cls, trig_terms: Mapping[int, Tuple[object, object, object]]) -> 'ExpPoly':
        """
        Build from {power: (const, cos4Θ coefficient, sin4Θ coefficient)}.

        c·cos4Θ = (c/2)(e^{4iΘ} + e^{−4iΘ}) and s·sin4Θ = (s/2i)(e^{4iΘ} − e^{−4iΘ}).
        """
        terms: Dict[Key, GaussianRational] = {}
        for power, (const, cos_c, sin_c) in trig_terms.items():
            const, cos_c, sin_c = Fraction(const), Fraction(cos_c), Fraction(sin_c)
            terms[(0, power)] = GaussianRational(const)
            terms[(4, power)] = GaussianRational(cos_c / 2, -sin_c / 2)
            terms[(-4, power)] = GaussianRational(cos_c / 2, sin_c / 2)
        return cls(terms)

    @classmethod
    def monomial(cls, power: int, coeff=1) -> 'ExpPoly':
        return cls({(0, power): coeff})

    # ------------------------------------------------------------------
    # accessors
    # ------------------------------------------------------------------
    @property
    def terms(self) -> Dict[Key, GaussianRational]:
        return dict(self._terms)

    def items(self) -> Iterator[Tuple[Key, GaussianRational]]:
        return iter(self._terms.items())

    def __len__(self):
        return len(self._terms)

    def coefficient(self, omega: int, power: int) -> GaussianRational:
        return self._terms.get((omega, power), GaussianRational())

    def check_real(self) -> 'ExpPoly':
        for (omega, power), value in self._terms.items():
            mirror = self.coefficient(-omega, power)
            if mirror != value.conjugate():
                raise InvariantViolation(
                    f"conjugate symmetry broken at (ω={omega}, a={power}): {value} vs {mirror}")
        return self

    def trig_form(self) -> Dict[int, Tuple[Fraction, Fraction, Fraction]]:
        """{power: (const, cos4Θ coefficient, sin4Θ coefficient)} for a real closed form"""
        self.check_real()
        out = {}
        for power in sorted({p for _, p in self._terms}):
            const = self.coefficient(0, power)
            plus = self.coefficient(4, power)
            # c e^{4iΘ} + c̄ e^{−4iΘ} = 2Re(c) cos4Θ − 2Im(c) sin4Θ
            out[power] = (const.real, 2 * plus.real, -2 * plus.imag)
        return out

    # ------------------------------------------------------------------
    # algebra
    # ------------------------------------------------------------------
    def __add__(self, other: 'ExpPoly') -> 'ExpPoly':
        terms = dict(self._terms)
        for key, value in other._terms.items():
            terms[key] = terms.get(key, GaussianRational()) + value
        return ExpPoly(terms)

    def __sub__(self, other: 'ExpPoly') -> 'ExpPoly':
        return self + other.scale(-1)

    def scale(self, factor) -> 'ExpPoly':
        factor = GaussianRational.coerce(factor)
        return ExpPoly({key: value * factor for key, value in self._terms.items()})

    def __eq__(self, other):
        if not isinstance(other, ExpPoly):
            return NotImplemented
        return self._terms == other._terms

    __hash__ = None

    def __repr__(self):
        shown = ', '.join(f"(ω={w}, a={a}): {c}" for (w, a), c in self._terms.items())
        return f"ExpPoly({shown})"

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------
    def to_list(self) -> list:
        return [
            {'omega': omega, 'power': power,
             're': _fraction_text(value.real), 'im': _fraction_text(value.imag)}
            for (omega, power), value in self._terms.items()
        ]

    @classmethod
    def from_list(cls, rows: list) -> 'ExpPoly':
        return cls({
            (int(row['omega']), int(row['power'])): GaussianRational(Fraction(row['re']), Fraction(row['im']))
            for row in rows
        })

    def to_json(self) -> str:
        return json.dumps(self.to_list())

    @classmethod
    def from_json(cls, text: str) -> 'ExpPoly':
        return cls.from_list(json.loads(text))


def ep_trig(kind: str) -> ExpPoly:
    """Closed forms of cos²2φ, sin²2φ, cos4φ and sin4φ"""
    half = Fraction(1, 2)
    if kind == 'cos2_2phi':
        return ExpPoly.from_trig({0: (half, half, 0)})
    if kind == 'sin2_2phi':
        return ExpPoly.from_trig({0: (half, -half, 0)})
    if kind == 'cos4phi':
        return ExpPoly.from_trig({0: (0, 1, 0)})
    if kind == 'sin4phi':
        return ExpPoly.from_trig({0: (0, 0, 1)})
    raise ContractViolation(f"unknown trig kind '{kind}'")


def _convolve_terms(omega_a: int, p: int, omega_w: int, q: int) -> Dict[Key, GaussianRational]:
    """
    ∫₀^Θ (Θ−φ)^p e^{iω_a(Θ−φ)} · φ^q e^{iω_w φ} dφ for unit coefficients.

    Equal frequencies give the beta integral p!q!/(p+q+1)! Θ^{p+q+1}. Otherwise,
    with λ = i(ω_w − ω_a), (Θ−φ)^p is expanded binomially and each
    ∫₀^Θ φᴺ e^{λφ} dφ = e^{λΘ} Σ_j (−1)ʲ N!/(N−j)! Θ^{N−j} λ^{−j−1} − (−1)ᴺ N! λ^{−N−1}.
    """
    fact = factorials(p + q + 1)
    if omega_a == omega_w:
        return {(omega_a, p + q + 1): GaussianRational(Fraction(fact[p] * fact[q], fact[p + q + 1]))}

    inv_lambda = GaussianRational(1) / GaussianRational(0, omega_w - omega_a)
    inv_powers = [GaussianRational(1)]
    for _ in range(p + q + 2):
        inv_powers.append(inv_powers[-1] * inv_lambda)

    out: Dict[Key, GaussianRational] = {}

    def accumulate(key, value):
        out[key] = out.get(key, GaussianRational()) + value

    for m in range(p + 1):
        outer = Fraction(comb(p, m) * (-1) ** m)
        n_pow = q + m
        for j in range(n_pow + 1):
            weight = outer * Fraction((-1) ** j * (fact[n_pow] // fact[n_pow - j]))
            accumulate((omega_w, p - m + n_pow - j), inv_powers[j + 1] * weight)
        boundary = outer * Fraction((-1) ** n_pow * fact[n_pow])
        accumulate((omega_a, p - m), -(inv_powers[n_pow + 1] * boundary))
    return out


def ep_convolve(a: ExpPoly, w: ExpPoly) -> ExpPoly:
    """Exact closed form of ∫₀^Θ a(Θ−φ)·w(φ) dφ"""
    terms: Dict[Key, GaussianRational] = {}
    for (omega_a, p), coeff_a in a.items():
        for (omega_w, q), coeff_w in w.items():
            product = coeff_a * coeff_w
            for key, value in _convolve_terms(omega_a, p, omega_w, q).items():
                terms[key] = terms.get(key, GaussianRational()) + product * value
    return ExpPoly(terms).check_real()


def ep_to_series(a: ExpPoly, cap: int) -> TruncatedSeries:
    """
    Exact Taylor expansion about 0, truncated at Θ^cap.

    Θᵃe^{iωΘ} = Σ_m (iω)ᵐ/m! Θ^{a+m}; the imaginary parts must cancel.
    """
    if cap < 0:
        raise ContractViolation(f"series cap must be >= 0, got {cap}")
    acc = [GaussianRational()] * (cap + 1)
    for (omega, power), coeff in a.items():
        step = GaussianRational(0, omega)
        term = coeff
        for m in range(cap - power + 1):
            if m:
                term = term * step / m
            if not term:
                break
            acc[power + m] = acc[power + m] + term
    leftover = [p for p, value in enumerate(acc) if value.imag]
    if leftover:
        raise InvariantViolation(f"imaginary Taylor coefficient at power {leftover[0]}")
    return TruncatedSeries([value.real for value in acc], cap)


def ep_eval_naive(a: ExpPoly, theta: float, divisor: int = 0) -> float:
    """
    Direct float evaluation of a(Θ)/Θ^divisor, term by term.

    No cancellation protection: near Θ = 0 the individual terms of a
    divided closed form are huge and of opposite sign, and the float sum
    loses every significant digit.
    """
    if theta == 0:
        if any(power < divisor for (_, power), _ in a.items()):
            raise ContractViolation("closed form has negative powers of Θ at Θ = 0")
    total = 0j
    for (omega, power), coeff in a.items():
        total += complex(coeff) * theta ** (power - divisor) * cmath.exp(1j * omega * theta)
    return total.real


def ep_at_quarter_period(a: ExpPoly, divisor: int = 0) -> Dict[int, Fraction]:
    """
    Exact value of a(Θ)/Θ^divisor at Θ = π/4 as a Laurent polynomial in π/4.

    At Θ = π/4 every e^{±4iΘ} equals −1. Returns {exponent of (π/4): coefficient}
    with zero coefficients dropped; a lone exponent 0 means the value is rational.
    """
    acc: Dict[int, GaussianRational] = {}
    for (omega, power), coeff in a.items():
        sign = 1 if omega == 0 else -1
        exponent = power - divisor
        acc[exponent] = acc.get(exponent, GaussianRational()) + coeff * sign
    out = {}
    for exponent, value in sorted(acc.items()):
        if value.imag:
            raise InvariantViolation(f"imaginary quarter-period coefficient at exponent {exponent}")
        if value.real:
            out[exponent] = value.real
    return out


def laurent_to_float(laurent: Mapping[int, Fraction], base: float = math.pi / 4) -> float:
    return sum(float(c) * base ** e for e, c in laurent.items())
