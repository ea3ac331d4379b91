"""Finite mixtures of terms c * x^k * exp(t*x) with exact calculus.

Scale functions of the two closed-form process families are finite
exponential mixtures on the positive half line, and every integral that
appears in the occupation-band and step constructions is a convolution of
such mixtures with fixed or moving endpoints.  Carrying the mixtures
symbolically keeps those constructions quadrature-free: convolution,
integration and differentiation all land back inside the class, so closed
forms stay accurate to roundoff instead of to a mesh width.

Terms are (coef, power, rate) triples representing coef * x**power *
exp(rate*x).  Powers are small non-negative integers (confluent roots and
the driftless Brownian case produce power 1; repeated convolutions can push
powers a little higher).  Rates closer than _CONFLUENT_TOL are treated as
equal during convolution to avoid dividing by a vanishing rate gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_CONFLUENT_TOL = 1e-9
_MERGE_TOL = 1e-12


def _merge(terms):
    """Combine terms sharing (power, rate); drop exact-zero coefficients."""
    out = []
    for c, k, t in terms:
        if c == 0.0:
            continue
        for i, (c2, k2, t2) in enumerate(out):
            if k == k2 and abs(t - t2) <= _MERGE_TOL * (1.0 + abs(t)):
                out[i] = (c2 + c, k2, t2)
                break
        else:
            out.append((c, k, t))
    return tuple((c, k, t) for c, k, t in out if c != 0.0)


class ExpMix:
    """Immutable mixture sum_i c_i * x^k_i * exp(t_i x)."""

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        self.terms = _merge(terms)

    @classmethod
    def constant(cls, value):
        return cls([(float(value), 0, 0.0)])

    @classmethod
    def exponential(cls, coef, rate):
        return cls([(float(coef), 0, float(rate))])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, k, t in self.terms:
            v = c * np.exp(t * x)
            if k:
                v = v * x**k
            out = out + v
        return out if out.shape else float(out)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ExpMix.constant(other)
        return ExpMix(self.terms + other.terms)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = ExpMix.constant(other)
        return self + other.scale(-1.0)

    def scale(self, a):
        return ExpMix([(c * a, k, t) for c, k, t in self.terms])

    def __mul__(self, other):
        """Pointwise product; stays a mixture."""
        if isinstance(other, (int, float)):
            return self.scale(other)
        terms = []
        for c1, k1, t1 in self.terms:
            for c2, k2, t2 in other.terms:
                terms.append((c1 * c2, k1 + k2, t1 + t2))
        return ExpMix(terms)

    __rmul__ = __mul__

    def mul_exp(self, rate):
        """Multiply by exp(rate*x): shifts every rate."""
        return ExpMix([(c, k, t + rate) for c, k, t in self.terms])

    def shift(self, s):
        """Return g with g(x) = f(x - s)."""
        terms = []
        for c, k, t in self.terms:
            base = c * math.exp(-t * s)
            for j in range(k + 1):
                terms.append((base * math.comb(k, j) * (-s) ** (k - j), j, t))
        return ExpMix(terms)

    def derivative(self):
        terms = []
        for c, k, t in self.terms:
            if t != 0.0:
                terms.append((c * t, k, t))
            if k:
                terms.append((c * k, k - 1, t))
        return ExpMix(terms)

    def antiderivative(self):
        """An antiderivative (constant of integration unspecified)."""
        terms = []
        for c, k, t in self.terms:
            terms.extend(_anti_term(c, k, t))
        return ExpMix(terms)

    def integral(self, lo, x_is_upper=True):
        """Mixture G with G(x) = integral_lo^x of self, as a function of x."""
        F = self.antiderivative()
        G = F - float(F(lo))
        return G if x_is_upper else G.scale(-1.0)

    def definite_integral(self, lo, hi):
        F = self.antiderivative()
        return float(F(hi)) - float(F(lo))

    def convolve_from(self, lo, g):
        """h(x) = integral_lo^x self(x-y) g(y) dy, valid for x >= lo."""
        terms = []
        for cf, kf, tf in self.terms:
            for cg, kg, tg in g.terms:
                lam = tg - tf
                for j in range(kf + 1):
                    c0 = cf * cg * math.comb(kf, j) * (-1.0) ** (kf - j)
                    p = kf - j + kg
                    # integral_lo^x y^p e^{lam y} dy, then times x^j e^{tf x}
                    anti = _anti_term(1.0, p, lam)
                    const = sum(c * lo**k * math.exp(t * lo) for c, k, t in anti)
                    for ca, ka, ta in anti:
                        terms.append((c0 * ca, j + ka, tf + ta))
                    terms.append((-c0 * const, j, tf))
        return ExpMix(terms)

    def convolve_fixed(self, lo, hi, g):
        """k(x) = integral_lo^hi self(x-y) g(y) dy, valid for x >= hi."""
        terms = []
        for cf, kf, tf in self.terms:
            for cg, kg, tg in g.terms:
                lam = tg - tf
                for j in range(kf + 1):
                    c0 = cf * cg * math.comb(kf, j) * (-1.0) ** (kf - j)
                    p = kf - j + kg
                    anti = _anti_term(1.0, p, lam)
                    val = sum(
                        c * (hi**k * math.exp(t * hi) - lo**k * math.exp(t * lo))
                        for c, k, t in anti
                    )
                    terms.append((c0 * val, j, tf))
        return ExpMix(terms)


def _anti_term(c, k, t):
    """Antiderivative terms of c x^k e^{tx}."""
    if abs(t) <= _CONFLUENT_TOL:
        return [(c / (k + 1), k + 1, 0.0)]
    out = []
    coef = c / t
    j = k
    while j >= 0:
        out.append((coef, j, t))
        coef *= -j / t
        j -= 1
    return out


@dataclass(frozen=True)
class PiecewiseExpMix:
    """Piecewise mixture: constant left_value below starts[0], piece i on
    [starts[i], starts[i+1]), last piece extends to +infinity."""

    left_value: float
    starts: tuple
    pieces: tuple

    def __post_init__(self):
        if len(self.starts) != len(self.pieces) or not self.starts:
            raise ValueError("starts and pieces must be equal-length and non-empty")
        if any(b > a for a, b in zip(self.starts[1:], self.starts[:-1])):
            raise ValueError("starts must be ascending")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.starts), x, side="right")
        out = np.full_like(x, self.left_value)
        for i, piece in enumerate(self.pieces):
            m = idx == i + 1
            if np.any(m):
                out[m] = piece(x[m])
        return out if out.shape else float(out)

    def last_piece(self):
        return self.starts[-1], self.pieces[-1]

    def with_tail(self, start, mix):
        """Replace the function on [start, inf) by mix; start must be >= all starts."""
        if start < self.starts[-1]:
            raise ValueError("tail start precedes existing breakpoints")
        if start == self.starts[-1]:
            return PiecewiseExpMix(self.left_value, self.starts[:-1] + (start,), self.pieces[:-1] + (mix,))
        return PiecewiseExpMix(self.left_value, self.starts + (start,), self.pieces + (mix,))

    def shift(self, s):
        """g(x) = f(x - s)."""
        return PiecewiseExpMix(
            self.left_value,
            tuple(b + s for b in self.starts),
            tuple(p.shift(s) for p in self.pieces),
        )

    def derivative(self):
        return PiecewiseExpMix(0.0, self.starts, tuple(p.derivative() for p in self.pieces))

    def definite_integral(self, lo, hi, extra_rate=0.0):
        """integral_lo^hi f(y) e^{extra_rate*y} dy, exact per piece."""
        if hi < lo:
            return -self.definite_integral(hi, lo, extra_rate)
        total = 0.0
        edges = [lo] + [b for b in self.starts if lo < b < hi] + [hi]
        for a, b in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (a + b)
            if mid < self.starts[0]:
                seg = ExpMix.constant(self.left_value)
            else:
                i = int(np.searchsorted(np.asarray(self.starts), mid, side="right")) - 1
                seg = self.pieces[i]
            total += seg.mul_exp(extra_rate).definite_integral(a, b)
        return total
