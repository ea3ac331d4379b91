"""Process models: Laplace exponents and their right inverse.

Two closed-form families of spectrally negative Levy processes are
supported, plus a tabulated fallback for externally supplied scale data.

* BrownianDrift(mu, sigma): X_t = mu t + sigma B_t,
  psi(theta) = sigma^2 theta^2 / 2 + mu theta.
* CramerLundberg(mu, vartheta, rho): upward drift mu minus a compound
  Poisson sum of exponential(rho) jumps arriving at rate vartheta,
  psi(theta) = mu theta (theta + varsigma) / (theta + rho),
  varsigma = rho - vartheta / mu.
* Tabulated: numeric scale-function and phi tables, no analytic psi.

phi_inverse solves psi(s) = q with a bracketed Newton iteration
(doubling upper bracket, bisection fallback) to residual
|psi(phi) - q| <= 1e-12 * max(1, q).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConvergenceError, DomainError, UnsupportedModelError

_PHI_RESIDUAL = 1e-12


@dataclass(frozen=True)
class BrownianDrift:
    """Linear drift plus Brownian motion; sigma is the volatility (not variance)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma < 0.0:
            raise DomainError("sigma must be >= 0")
        if self.sigma == 0.0 and self.mu <= 0.0:
            raise DomainError("degenerate model: sigma=0 requires mu > 0")


@dataclass(frozen=True)
class CramerLundberg:
    """Drift mu minus compound Poisson(vartheta) exponential(rho) losses."""

    mu: float
    vartheta: float
    rho: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise DomainError("mu must be > 0")
        if self.vartheta < 0.0:
            raise DomainError("vartheta must be >= 0")
        if self.rho <= 0.0:
            raise DomainError("rho must be > 0")

    @property
    def varsigma(self) -> float:
        return self.rho - self.vartheta / self.mu


@dataclass(frozen=True)
class Tabulated:
    """Externally supplied scale table and phi table (see classical_scale)."""

    scale_table: "object"
    phi_grid: np.ndarray
    phi_values: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.phi_grid, dtype=float)
        p = np.asarray(self.phi_values, dtype=float)
        if q.ndim != 1 or q.shape != p.shape or q.size < 2:
            raise DomainError("phi table needs matching 1-D arrays of length >= 2")
        if np.any(np.diff(q) <= 0) or np.any(np.diff(p) < 0):
            raise DomainError("phi table must be strictly increasing in q, non-decreasing in phi")
        object.__setattr__(self, "phi_grid", q)
        object.__setattr__(self, "phi_values", p)


LevyModel = Union[BrownianDrift, CramerLundberg, Tabulated]


def psi(model: LevyModel, theta):
    """Laplace exponent psi(theta) = log E[exp(theta X_1)] for theta >= 0."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise DomainError("psi requires theta >= 0")
    if isinstance(model, BrownianDrift):
        out = 0.5 * model.sigma**2 * theta**2 + model.mu * theta
    elif isinstance(model, CramerLundberg):
        out = model.mu * theta * (theta + model.varsigma) / (theta + model.rho)
    else:
        raise UnsupportedModelError("tabulated models carry no analytic Laplace exponent")
    return out if out.shape else float(out)


def psi_prime(model: LevyModel, theta):
    theta = np.asarray(theta, dtype=float)
    if isinstance(model, BrownianDrift):
        out = model.sigma**2 * theta + model.mu
    elif isinstance(model, CramerLundberg):
        r, s = model.rho, model.varsigma
        out = model.mu * (theta**2 + 2 * r * theta + r * s) / (theta + r) ** 2
    else:
        raise UnsupportedModelError("tabulated models carry no analytic Laplace exponent")
    return out if out.shape else float(out)


def _phi_zero(model) -> float:
    """Largest root of psi(s) = 0 (equals 0 when the drift is non-negative)."""
    if isinstance(model, BrownianDrift):
        if model.mu >= 0.0 or model.sigma == 0.0:
            return 0.0
        return -2.0 * model.mu / model.sigma**2
    if model.varsigma >= 0.0:
        return 0.0
    return -model.varsigma


def phi_inverse(model: LevyModel, q: float) -> float:
    """Right inverse Phi(q) = sup{s >= 0 : psi(s) <= q} for q >= 0."""
    if isinstance(model, Tabulated):
        if q < model.phi_grid[0] - 1e-12 or q > model.phi_grid[-1] + 1e-12:
            raise DomainError(f"q={q} outside tabulated phi range")
        return float(np.interp(q, model.phi_grid, model.phi_values))
    q = float(q)
    if q < 0.0:
        raise DomainError("phi_inverse requires q >= 0")
    if q == 0.0:
        return _phi_zero(model)
    lo = 0.0
    hi = max(1.0, _phi_zero(model))
    for _ in range(200):
        if psi(model, hi) > q:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ConvergenceError("phi_inverse bracket expansion failed")
    s = hi
    tol = _PHI_RESIDUAL * max(1.0, q)
    for _ in range(200):
        f = psi(model, s) - q
        if abs(f) <= tol:
            return s
        if f > 0.0:
            hi = s
        else:
            lo = s
        fp = psi_prime(model, s)
        step = f / fp if fp > 0 else np.inf
        s_new = s - step
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        s = s_new
    raise ConvergenceError(f"phi_inverse failed to reach residual {tol} for q={q}")


def phi_prime(model: LevyModel, q: float) -> float:
    """Derivative of Phi at q, i.e. 1 / psi'(Phi(q))."""
    s = phi_inverse(model, q)
    d = psi_prime(model, s)
    if d <= 0.0:
        raise DomainError(f"Phi not differentiable at q={q} (psi'(Phi(q)) = {d})")
    return 1.0 / d
