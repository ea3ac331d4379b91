"""Analytic omega-scale families: band rates, linear bankruptcy rates,
exponential rates, and step rates.

These are independent oracles for the generic Volterra route and features in
their own right.  Everything here is built from finite exponential mixtures
(expmix) or from the hand-rolled special functions (special_fn), so values
are exact up to roundoff — no mesh enters.

The recurring construction is "extend below a cut": given a function known
as a mixture, append the correction

    F_new(x) = F(x) + coef * int_s^x W^(r)(x-z) F(z) dz,   x >= s,

which is again a mixture on [s, oo).  Band composites, the one-sided band
function, and the step recursion are all instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import classical_scale as cs
from .errors import ConfigError, DomainError
from .expmix import ExpMix, PiecewiseExpMix
from .levy_model import BrownianDrift, CramerLundberg, phi_inverse
from .special_fn import (
    airy_ai,
    airy_ai_prime,
    airy_bi,
    airy_bi_prime,
    bessel_i,
    bessel_k,
    gamma_fn,
    kummer_1f1,
)

_BESSEL_WINDOW = 30.0
_INTEGER_TOL = 1e-8


def _extend_below_cut(pw: PiecewiseExpMix, kernel: ExpMix, start: float,
                      coef: float) -> PiecewiseExpMix:
    """Append coef * int_start^x kernel(x-z) pw(z) dz to pw, for x >= start.

    Valid when pw has no breakpoints above start (the integrand then sees a
    single mixture piece); a start below the last breakpoint is clamped up,
    which is exact whenever pw vanishes left of that breakpoint.
    """
    last_start, last = pw.last_piece()
    s = max(start, last_start)
    tail = last + kernel.convolve_from(s, last).scale(coef)
    return pw.with_tail(s, tail)


# ---------------------------------------------------------------------------
# band rates: omega = p + q on an interval


@dataclass(frozen=True)
class BandScale:
    """The three building blocks for a rate that steps up at level a.

    w and z switch from the level-p to the corrected level-(p+q) branch at
    a; h is the exponentially weighted accumulation used by the one-sided
    upward problem (only the a=0 case appears there).
    """

    model: object
    p: float
    q: float
    a: float
    _w: PiecewiseExpMix = field(init=False, repr=False)
    _z: PiecewiseExpMix = field(init=False, repr=False)

    def __post_init__(self):
        if self.a < 0.0 or self.p < 0.0 or self.p + self.q < 0.0:
            raise ConfigError("band rates need a >= 0, p >= 0, p + q >= 0")
        object.__setattr__(self, "_w", band_w_mix(self.model, self.p, self.q, self.a))
        object.__setattr__(self, "_z", band_z_mix(self.model, self.p, self.q, self.a))

    def w(self, x):
        return self._w(x)

    def z(self, x):
        return self._z(x)

    def h(self, x):
        return band_h(self.model, self.p, self.q, x)


def band_w_mix(model, p: float, q: float, a: float) -> PiecewiseExpMix:
    """Piecewise mixture equal to W^(p) below a, corrected branch above."""
    if a <= 0.0:
        return PiecewiseExpMix(0.0, (0.0,), (cs.w_mix(model, p + q),))
    base = PiecewiseExpMix(0.0, (0.0,), (cs.w_mix(model, p),))
    return _extend_below_cut(base, cs.w_mix(model, p + q), a, q)


def band_z_mix(model, p: float, q: float, a: float) -> PiecewiseExpMix:
    if a <= 0.0:
        return PiecewiseExpMix(1.0, (0.0,), (cs.z_mix(model, p + q),))
    base = PiecewiseExpMix(1.0, (0.0,), (cs.z_mix(model, p),))
    return _extend_below_cut(base, cs.w_mix(model, p + q), a, q)


def band_w_via_subtraction(model, p: float, q: float, a: float) -> ExpMix:
    """Alternative route, valid for x >= a: start from the level-(p+q)
    function and subtract the convolution over the dead initial interval."""
    wpq = cs.w_mix(model, p + q)
    return wpq - wpq.convolve_fixed(0.0, a, cs.w_mix(model, p)).scale(q)


def band_z_via_subtraction(model, p: float, q: float, a: float) -> ExpMix:
    wpq = cs.w_mix(model, p + q)
    return cs.z_mix(model, p + q) - wpq.convolve_fixed(0.0, a, cs.z_mix(model, p)).scale(q)


def band_w(model, p: float, q: float, a: float, x) -> float:
    return band_w_mix(model, p, q, a)(x)


def band_z(model, p: float, q: float, a: float, x) -> float:
    return band_z_mix(model, p, q, a)(x)


def band_h_mix(model, p: float, q: float) -> ExpMix:
    """Exponentially weighted accumulation of W^(p+q), for x >= 0."""
    root = phi_inverse(model, p)
    inner = cs.w_mix(model, p + q).mul_exp(-root).integral(0.0)
    return (ExpMix.constant(1.0) + inner.scale(q)).mul_exp(root)


def band_h(model, p: float, q: float, x) -> float:
    x = np.asarray(x, dtype=float)
    root = phi_inverse(model, p)
    mix = band_h_mix(model, p, q)
    out = np.where(x < 0.0, np.exp(root * x), mix(np.maximum(x, 0.0)))
    return out if out.shape else float(out)


def band_w_composite_mix(model, p, q, a, b) -> PiecewiseExpMix:
    """Full scale function for omega = p + q on (a, b), p elsewhere."""
    if b <= a:
        raise ConfigError("band needs a < b")
    return _extend_below_cut(band_w_mix(model, p, q, a), cs.w_mix(model, p), b, -q)


def band_z_composite_mix(model, p, q, a, b) -> PiecewiseExpMix:
    if b <= a:
        raise ConfigError("band needs a < b")
    return _extend_below_cut(band_z_mix(model, p, q, a), cs.w_mix(model, p), b, -q)


def band_composites(model, p: float, q: float, a: float, b: float, x):
    """(w, z) of the on/off band rate at x."""
    return (
        band_w_composite_mix(model, p, q, a, b)(x),
        band_z_composite_mix(model, p, q, a, b)(x),
    )


def band_h_composite_mix(model, p, q, b, a: float = 0.0) -> PiecewiseExpMix:
    """One-sided upward function for omega = p + q on (a, b), p elsewhere."""
    if a <= 0.0:
        base = PiecewiseExpMix(1.0, (0.0,), (band_h_mix(model, p, q),))
    else:
        root = phi_inverse(model, p)
        base = PiecewiseExpMix(1.0, (0.0,), (ExpMix.constant(1.0).mul_exp(root),))
        base = _extend_below_cut(base, cs.w_mix(model, p + q), a, q)
    return _extend_below_cut(base, cs.w_mix(model, p), b, -q)


def band_two_arg_mix(model, p, q, b, y, a: float = 0.0) -> PiecewiseExpMix:
    """Two-argument scale function of the (a, b) band, as a function of x.

    Translating by y turns the band into (max(a-y,0)-shifted) form; for
    y >= b the band lies entirely below the start and the classical
    function remains.
    """
    pw = band_w_mix(model, p, q, max(a - y, 0.0)).shift(y)
    return _extend_below_cut(pw, cs.w_mix(model, p), b, -q)


def band_theta_density(model, p, q, b, x: float, y: float,
                       a: float = 0.0) -> float:
    """Barrier-free occupation density of the (a, b) band rate, exactly."""
    root = phi_inverse(model, p)
    pwy = band_w_mix(model, p, q, max(a - y, 0.0)).shift(y)
    num = math.exp(-root * y) + q * pwy.definite_integral(a, b, extra_rate=-root)
    from .levy_model import psi_prime

    hw = band_h_composite_mix(model, p, q, b, a)
    den = psi_prime(model, root) + q * hw.definite_integral(a, b, extra_rate=-root)
    wxy = _extend_below_cut(pwy, cs.w_mix(model, p), b, -q)
    return float(num / den * hw(x) - wxy(x))


# ---------------------------------------------------------------------------
# linear bankruptcy rate on [-d, 0] (Brownian surplus)


class OmegaModelSolution:
    """Bankruptcy functional for a Brownian surplus with linear penalty rate.

    The two-argument scale function relative to the lower level -d solves,
    after the substitution z = x + d, an Airy equation on [0, d] with
    g(0) = 0, g'(0) = 2/sigma^2; above 0 it continues as an affine function
    of the classical ruin factor 1 - e^{-2 mu x / sigma^2}.
    """

    def __init__(self, gamma0: float, gamma1: float, d: float, mu: float,
                 sigma: float):
        if mu <= 0.0 or sigma <= 0.0 or d <= 0.0:
            raise ConfigError("needs mu, sigma, d > 0")
        if gamma0 < 0.0 or gamma1 < 0.0:
            raise ConfigError("penalty rates must be >= 0")
        self.gamma0, self.gamma1, self.d = gamma0, gamma1, d
        self.mu, self.sigma = mu, sigma
        s2 = sigma * sigma
        disc = math.sqrt(mu * mu + 2.0 * gamma0 * s2)
        self.rho1 = (mu + disc) / s2
        self.rho2 = (-mu + disc) / s2
        self.rho_bar = self.rho1 + self.rho2

        if gamma1 == 0.0:
            # rate is flat gamma0 on [-d, 0]: the Airy combination collapses
            self._g_mix = cs.w_mix(BrownianDrift(mu=mu, sigma=sigma), gamma0)
            self._gp_mix = self._g_mix.derivative()
            self.m1 = self.m2 = math.nan
            self.kappa = 0.0
            self.shift0 = math.inf
        else:
            self.kappa = (2.0 * gamma1 / s2) ** (1.0 / 3.0)
            self.shift0 = s2 * self.rho_bar**2 / (8.0 * gamma1)
            t0 = self.kappa * self.shift0
            td = self.kappa * (d + self.shift0)
            if td > 15.0:
                raise DomainError(
                    "Airy argument outside the series window; "
                    "use the generic solver for these parameters"
                )
            a0, b0 = airy_ai(t0), airy_bi(t0)
            a0p, b0p = airy_ai_prime(t0), airy_bi_prime(t0)
            wron = a0 * b0p - b0 * a0p
            scale = 2.0 / (s2 * self.kappa * wron)
            self.m1 = -b0 * scale
            self.m2 = a0 * scale
            self._g_mix = None
            self._gp_mix = None

        self.g_at_d = self.g(d)
        self.g_prime_at_d = self.g_prime(d)
        self._tail = s2 / (2.0 * mu) * self.g_prime_at_d
        self.c_inv = 1.0 / (self.g_at_d + self._tail)

    def g(self, z: float) -> float:
        """Two-argument scale value at surplus z - d, for z in [0, d]."""
        if self._g_mix is not None:
            return float(self._g_mix(max(z, 0.0))) if z >= 0.0 else 0.0
        if z < 0.0:
            return 0.0
        t = self.kappa * (z + self.shift0)
        damp = math.exp(-self.mu * z / self.sigma**2)
        return damp * (self.m1 * airy_ai(t) + self.m2 * airy_bi(t))

    def g_prime(self, z: float) -> float:
        if self._gp_mix is not None:
            return float(self._gp_mix(max(z, 0.0)))
        t = self.kappa * (z + self.shift0)
        damp = math.exp(-self.mu * z / self.sigma**2)
        core = self.m1 * airy_ai(t) + self.m2 * airy_bi(t)
        core_p = self.m1 * airy_ai_prime(t) + self.m2 * airy_bi_prime(t)
        return damp * (self.kappa * core_p - self.mu / self.sigma**2 * core)

    def w_two_arg(self, x: float) -> float:
        """Scale function relative to the absorbing level -d."""
        if x < -self.d:
            return 0.0
        if x <= 0.0:
            return self.g(x + self.d)
        decay = 1.0 - math.exp(-2.0 * self.mu * x / self.sigma**2)
        return self.g_at_d + decay * self._tail

    def varphi(self, x: float) -> float:
        """Bankruptcy probability from surplus x."""
        return 1.0 - self.c_inv * self.w_two_arg(x)

    def varphi_tail(self, x: float) -> float:
        """Positive-surplus form: proportional to the classical ruin factor."""
        if x < 0.0:
            raise DomainError("tail form only holds for x >= 0")
        return (
            math.exp(-2.0 * self.mu * x / self.sigma**2)
            * self._tail
            / (self.g_at_d + self._tail)
        )


def omega_model_bankruptcy(gamma0, gamma1, d, mu, sigma, x) -> float:
    return OmegaModelSolution(gamma0, gamma1, d, mu, sigma).varphi(x)


# ---------------------------------------------------------------------------
# exponentially decaying rate (self-similar exit laws)


@dataclass(frozen=True)
class SelfSimilarBM:
    """Bessel-product forms for a Brownian motion with drift under the rate
    varrho * e^{-xi x}."""

    varrho: float
    xi: float
    mu: float
    sigma: float

    def __post_init__(self):
        if self.varrho < 0.0 or self.xi <= 0.0 or self.mu <= 0.0 or self.sigma <= 0.0:
            raise ConfigError("needs varrho >= 0 and xi, mu, sigma > 0")
        if abs(self.alpha - round(self.alpha)) < _INTEGER_TOL:
            raise DomainError("index R/xi must not be an integer")
        if self.beta > _BESSEL_WINDOW:
            raise DomainError("Bessel argument outside the series window")

    @property
    def big_d(self) -> float:
        return 0.5 * self.sigma**2

    @property
    def big_r(self) -> float:
        return 2.0 * self.mu / self.sigma**2

    @property
    def alpha(self) -> float:
        return self.big_r / self.xi

    @property
    def beta(self) -> float:
        return 2.0 * math.sqrt(self.varrho) / (self.xi * math.sqrt(self.big_d))

    def _gamma_pair(self) -> float:
        return gamma_fn(1.0 + self.alpha) * gamma_fn(1.0 - self.alpha)

    def _model(self) -> BrownianDrift:
        return BrownianDrift(mu=self.mu, sigma=self.sigma)

    def w(self, x: float) -> float:
        a, b = self.alpha, self.beta
        if self.varrho == 0.0:
            return float(cs.w_q(self._model(), 0.0, x))
        z = b * math.exp(-self.xi * x / 2.0)
        pref = self._gamma_pair() / (self.big_d * self.big_r)
        return pref * math.exp(-self.big_r * x / 2.0) * (
            bessel_i(a, b) * bessel_i(-a, z) - bessel_i(-a, b) * bessel_i(a, z)
        )

    def z(self, x: float) -> float:
        a, b = self.alpha, self.beta
        if self.varrho == 0.0:
            return 1.0
        zz = b * math.exp(-self.xi * x / 2.0)
        pref = math.sqrt(self.varrho) * self._gamma_pair() / (
            self.big_r * math.sqrt(self.big_d)
        )
        return pref * math.exp(-self.big_r * x / 2.0) * (
            bessel_i(a - 1.0, b) * bessel_i(-a, zz)
            - bessel_i(1.0 - a, b) * bessel_i(a, zz)
        )

    def w_two_arg(self, x: float, y: float) -> float:
        a, b = self.alpha, self.beta
        if self.varrho == 0.0:
            return float(cs.w_q(self._model(), 0.0, x - y))
        zy = b * math.exp(-self.xi * y / 2.0)
        zx = b * math.exp(-self.xi * x / 2.0)
        pref = self._gamma_pair() / (self.big_d * self.big_r)
        return pref * math.exp(-self.big_r * x / 2.0) * math.exp(
            self.xi * a * y / 2.0
        ) * (
            bessel_i(a, zy) * bessel_i(-a, zx) - bessel_i(-a, zy) * bessel_i(a, zx)
        )

    def perpetual(self, x: float) -> float:
        """Full discounted mass of the perpetual exponential functional."""
        a = self.alpha
        z = self.beta * math.exp(-self.xi * x / 2.0)
        if z == 0.0:
            return 1.0
        return 2.0 / gamma_fn(a) * (z / 2.0) ** a * bessel_k(a, z)


def selfsim_w_bm(varrho, xi, mu, sigma, x) -> float:
    return SelfSimilarBM(varrho, xi, mu, sigma).w(x)


def selfsim_z_bm(varrho, xi, mu, sigma, x) -> float:
    return SelfSimilarBM(varrho, xi, mu, sigma).z(x)


def perpetual_exponential_functional(varrho, xi, mu, sigma, x) -> float:
    return SelfSimilarBM(varrho, xi, mu, sigma).perpetual(x)


@dataclass(frozen=True)
class SelfSimilarCL:
    """Kummer-product forms for the compound-Poisson-with-drift model under
    the rate varrho * e^{-xi x}."""

    varrho: float
    xi: float
    mu: float
    vartheta: float
    rho: float

    def __post_init__(self):
        if self.varrho < 0.0 or self.xi <= 0.0:
            raise ConfigError("needs varrho >= 0 and xi > 0")
        CramerLundberg(mu=self.mu, vartheta=self.vartheta, rho=self.rho)
        for name, val in (("rho", self.rho), ("varsigma", self.varsigma)):
            ratio = val / self.xi
            if abs(ratio - round(ratio)) < _INTEGER_TOL:
                raise DomainError(f"{name} must not be an integer multiple of xi")

    @property
    def varsigma(self) -> float:
        return self.rho - self.vartheta / self.mu

    def w(self, x: float) -> float:
        vs, rho, mu, xi = self.varsigma, self.rho, self.mu, self.xi
        zp = self.varrho / (mu * xi)
        zn = -zp * math.exp(-xi * x)
        t1 = rho / (vs * mu) * kummer_1f1((xi + rho) / xi, (xi + vs) / xi, zp) \
            * kummer_1f1((xi - rho) / xi, (xi - vs) / xi, zn)
        t2 = (vs - rho) / (vs * mu) * math.exp(-vs * x) \
            * kummer_1f1((xi + rho - vs) / xi, (xi - vs) / xi, zp) \
            * kummer_1f1((xi + vs - rho) / xi, (xi + vs) / xi, zn)
        return t1 + t2

    def z(self, x: float) -> float:
        vs, rho, mu, xi = self.varsigma, self.rho, self.mu, self.xi
        if self.varrho == 0.0:
            return 1.0
        zp = self.varrho / (mu * xi)
        zn = -zp * math.exp(-xi * x)
        t1 = kummer_1f1(rho / xi, vs / xi, zp) \
            * kummer_1f1((xi - rho) / xi, (xi - vs) / xi, zn)
        t2 = (vs - rho) * self.varrho / (vs * mu * (xi - vs)) * math.exp(-vs * x) \
            * kummer_1f1((xi + rho - vs) / xi, (2.0 * xi - vs) / xi, zp) \
            * kummer_1f1((xi + vs - rho) / xi, (xi + vs) / xi, zn)
        return t1 + t2


def selfsim_w_cl(varrho, xi, mu, vartheta, rho, x) -> float:
    return SelfSimilarCL(varrho, xi, mu, vartheta, rho).w(x)


def selfsim_z_cl(varrho, xi, mu, vartheta, rho, x) -> float:
    return SelfSimilarCL(varrho, xi, mu, vartheta, rho).z(x)


# ---------------------------------------------------------------------------
# step rates


def step_w_mix(model, levels, thresholds, y: float = 0.0) -> PiecewiseExpMix:
    """Two-argument scale function of a right-continuous step rate, as a
    piecewise mixture in the first argument."""
    levels = [float(v) for v in levels]
    thresholds = [float(v) for v in thresholds]
    if len(levels) != len(thresholds) + 1:
        raise ConfigError("need one more level than thresholds")
    if any(v < 0.0 for v in levels):
        raise ConfigError("levels must be >= 0")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError("thresholds must be strictly increasing")
    pw = PiecewiseExpMix(0.0, (y,), (cs.w_mix(model, levels[0]).shift(y),))
    for prev, nxt, cut in zip(levels, levels[1:], thresholds):
        pw = _extend_below_cut(pw, cs.w_mix(model, nxt), cut, nxt - prev)
    return pw


def step_z_mix(model, levels, thresholds, y: float = 0.0) -> PiecewiseExpMix:
    levels = [float(v) for v in levels]
    thresholds = [float(v) for v in thresholds]
    if len(levels) != len(thresholds) + 1:
        raise ConfigError("need one more level than thresholds")
    pw = PiecewiseExpMix(1.0, (y,), (cs.z_mix(model, levels[0]).shift(y),))
    for prev, nxt, cut in zip(levels, levels[1:], thresholds):
        pw = _extend_below_cut(pw, cs.w_mix(model, nxt), cut, nxt - prev)
    return pw


def step_w(model, levels, thresholds, x, y: float = 0.0):
    return step_w_mix(model, levels, thresholds, y)(x)


def step_z(model, levels, thresholds, x, y: float = 0.0):
    return step_z_mix(model, levels, thresholds, y)(x)
