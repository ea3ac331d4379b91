"""Self-contained special functions used by the closed-form solution families.

Everything here is a plain power series (plus one Lanczos approximation),
deliberately restricted to the argument windows the solution formulas
actually visit.  Outside those windows the functions raise instead of
silently degrading:

* gamma_fn       Lanczos (g=7, 9 coefficients), reflection for z < 0.5.
* kummer_1f1     confluent hypergeometric 1F1(a; b; z), direct series.
* bessel_i       modified Bessel I_v(z), ascending series, 0 <= z <= 30.
* bessel_k       K_v(z) through the quotient (pi/2)(I_-v - I_v)/sin(v pi),
                 non-integer v only.
* airy_ai/airy_bi (and *_prime) Maclaurin series of y'' = x y, |x| <= 15.

The series are evaluated with np.float64 term recurrences; SeriesControl
bounds the number of terms and the relative tail size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for the power series in this module."""

    rel_tol: float = 1e-15
    max_terms: int = 400


_DEFAULT = SeriesControl()

# Lanczos g=7, n=9 coefficient set; relative error below 1e-12 on the
# window this package uses.
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gamma_fn(z: float) -> float:
    """Gamma function for real non-pole arguments."""
    z = float(z)
    if z <= 0.0 and z == int(z):
        raise DomainError(f"gamma_fn pole at non-positive integer {z}")
    if z < 0.5:
        # reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        return math.pi / (math.sin(math.pi * z) * gamma_fn(1.0 - z))
    z -= 1.0
    acc = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        acc += _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_2PI * t ** (z + 0.5) * math.exp(-t) * acc


def kummer_1f1(a: float, b: float, z: float, control: SeriesControl = _DEFAULT) -> float:
    """Confluent hypergeometric 1F1(a; b; z) by its defining series."""
    if b <= 0.0 and b == int(b):
        raise DomainError(f"kummer_1f1 undefined at non-positive integer b={b}")
    term = 1.0
    total = 1.0
    for n in range(control.max_terms):
        term *= (a + n) * z / ((b + n) * (n + 1))
        total += term
        if abs(term) <= control.rel_tol * max(1.0, abs(total)) and n > 2:
            return total
    raise ConvergenceError(f"kummer_1f1({a},{b},{z}) did not converge in {control.max_terms} terms")


def bessel_i(v: float, z: float, control: SeriesControl = _DEFAULT) -> float:
    """Modified Bessel I_v(z) for z in [0, 30], real order v (non-pole)."""
    z = float(z)
    if z < 0.0:
        raise DomainError("bessel_i requires z >= 0")
    if z > 30.0:
        raise DomainError(f"bessel_i series window is z <= 30, got z={z}")
    if z == 0.0:
        if v == 0.0:
            return 1.0
        if v > 0.0:
            return 0.0
        raise DomainError("bessel_i diverges at z=0 for negative order")
    half = 0.5 * z
    # leading factor (z/2)^v / Gamma(v+1); later terms via recurrence
    term = half**v / gamma_fn(v + 1.0)
    total = term
    q = half * half
    for n in range(1, control.max_terms):
        term *= q / (n * (v + n))
        total += term
        if abs(term) <= control.rel_tol * abs(total) and n > 2:
            return total
    raise ConvergenceError(f"bessel_i({v},{z}) did not converge in {control.max_terms} terms")


def bessel_k(v: float, z: float, control: SeriesControl = _DEFAULT) -> float:
    """Macdonald function K_v(z) = (pi/2)(I_-v(z) - I_v(z))/sin(v pi).

    Non-integer v only; the quotient form has a removable singularity at
    integer orders that this implementation does not resolve.
    """
    if abs(v - round(v)) <= 1e-8:
        raise DomainError(f"bessel_k requires non-integer order, got v={v}")
    return 0.5 * math.pi * (bessel_i(-v, z, control) - bessel_i(v, z, control)) / math.sin(v * math.pi)


# Airy initial values from Gamma(1/3), Gamma(2/3)
_AI0 = 3.0 ** (-2.0 / 3.0) / gamma_fn(2.0 / 3.0)
_AIP0 = -(3.0 ** (-1.0 / 3.0)) / gamma_fn(1.0 / 3.0)
_BI0 = 3.0 ** (-1.0 / 6.0) / gamma_fn(2.0 / 3.0)
_BIP0 = 3.0 ** (1.0 / 6.0) / gamma_fn(1.0 / 3.0)

_AIRY_WINDOW = 15.0


def _airy_basis(x: float, control: SeriesControl):
    """Values and first derivatives of the series basis f, g of y'' = x y.

    f has (y(0), y'(0)) = (1, 0), g has (0, 1); coefficients follow
    a_{n+3} = a_n / ((n+2)(n+3)).
    """
    if abs(x) > _AIRY_WINDOW:
        raise DomainError(f"airy series window is |x| <= {_AIRY_WINDOW}, got {x}")
    x3 = x * x * x
    # f: terms x^{3k}, g: terms x^{3k+1}
    tf, tg = 1.0, x
    f, g = tf, tg
    fp, gp = 0.0, 1.0  # derivative accumulators; term-by-term derivative
    for k in range(1, control.max_terms):
        n = 3 * (k - 1)
        tf *= x3 / ((n + 2) * (n + 3))
        tg *= x3 / ((n + 3) * (n + 4))
        f += tf
        g += tg
        # d/dx of x^{3k} term = 3k x^{3k-1}; recompute from value terms
        if x != 0.0:
            tfp = tf * (3 * k) / x
            tgp = tg * (3 * k + 1) / x
        else:
            tfp = tgp = 0.0
        fp += tfp
        gp += tgp
        if abs(tf) + abs(tg) <= control.rel_tol * (abs(f) + abs(g) + 1e-300) and k > 3:
            return f, g, fp, gp
    raise ConvergenceError(f"airy series did not converge at x={x}")


def airy_ai(x: float, control: SeriesControl = _DEFAULT) -> float:
    f, g, _, _ = _airy_basis(float(x), control)
    return _AI0 * f + _AIP0 * g


def airy_bi(x: float, control: SeriesControl = _DEFAULT) -> float:
    f, g, _, _ = _airy_basis(float(x), control)
    return _BI0 * f + _BIP0 * g


def airy_ai_prime(x: float, control: SeriesControl = _DEFAULT) -> float:
    _, _, fp, gp = _airy_basis(float(x), control)
    return _AI0 * fp + _AIP0 * gp


def airy_bi_prime(x: float, control: SeriesControl = _DEFAULT) -> float:
    _, _, fp, gp = _airy_basis(float(x), control)
    return _BI0 * fp + _BIP0 * gp
