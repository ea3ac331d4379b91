"""Classical q-scale functions W^(q), Z^(q) for the closed-form families.

W^(q) is the increasing function vanishing on (-inf, 0) whose Laplace
transform is 1/(psi(theta) - q) above Phi(q); Z^(q)(x) = 1 + q * int_0^x W^(q).

* BrownianDrift: W^(q)(x) = 2 (e^{r2 x} - e^{-r1 x}) / (sigma^2 rbar) where
  -r1 <= 0 <= r2 are the roots of psi(s) = q and rbar = r1 + r2.  Special
  branches: q = 0 gives (1 - e^{-2 mu x / sigma^2}) / mu, and mu = q = 0
  degenerates to 2x / sigma^2.  W^(q)(0) = 0.
* CramerLundberg: partial fractions of (theta + rho) / (mu (theta-s1)(theta-s2))
  give a two-exponential form with atom W^(q)(0) = 1/mu; roots closer than
  1e-9 switch to the confluent x e^{s x} branch.
* Tabulated: linear interpolation in a user-supplied table, valid only at
  the q the table was built for.

The mixture builders (w_mix / z_mix) expose the closed forms as ExpMix
objects for exact convolution work elsewhere in the package.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, UnsupportedModelError
from .expmix import ExpMix
from .levy_model import BrownianDrift, CramerLundberg, Tabulated

_CONFLUENT_ROOT_TOL = 1e-9


@dataclass(frozen=True)
class ScaleTable:
    """Uniform-grid samples of (W^(q), Z^(q), W^(q)') at a fixed q."""

    q: float
    x: np.ndarray
    w: np.ndarray
    z: np.ndarray
    wprime: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ConfigError("scale table needs a 1-D grid of length >= 2")
        if abs(x[0]) > 1e-12:
            raise ConfigError("scale table grid must start at 0")
        d = np.diff(x)
        if np.any(d <= 0) or np.ptp(d) > 1e-9 * max(d.max(), 1e-300):
            raise ConfigError("scale table grid must be uniform and increasing")
        w = np.asarray(self.w, dtype=float)
        if np.any(np.diff(w) < -1e-12):
            raise ConfigError("scale table w column must be non-decreasing")
        z = np.asarray(self.z, dtype=float)
        if abs(z[0] - 1.0) > 1e-9:
            raise ConfigError("scale table must have z(0) = 1")
        wp = np.asarray(self.wprime, dtype=float)
        for name, col in (("w", w), ("z", z), ("wprime", wp)):
            if col.shape != x.shape:
                raise ConfigError(f"scale table column {name} has mismatched length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "wprime", wp)


def _bm_roots(model: BrownianDrift, q: float):
    """(r1, r2) with psi(-r1) = psi(r2) = q, r2 = Phi(q) when mu >= 0."""
    s2 = model.sigma**2
    disc = math.sqrt(model.mu**2 + 2.0 * q * s2)
    return (model.mu + disc) / s2, (-model.mu + disc) / s2


def w_mix(model, q: float) -> ExpMix:
    """W^(q) on [0, inf) as an exponential mixture (value at 0 is the atom)."""
    if q < 0.0:
        raise DomainError("q must be >= 0")
    if isinstance(model, BrownianDrift):
        if model.sigma == 0.0:
            return ExpMix.exponential(1.0 / model.mu, q / model.mu)
        s2 = model.sigma**2
        if q == 0.0 and model.mu == 0.0:
            return ExpMix([(2.0 / s2, 1, 0.0)])
        r1, r2 = _bm_roots(model, q)
        a = 2.0 / (s2 * (r1 + r2))
        return ExpMix([(a, 0, r2), (-a, 0, -r1)])
    if isinstance(model, CramerLundberg):
        mu, rho = model.mu, model.rho
        b = model.varsigma - q / mu
        disc = b * b + 4.0 * q * rho / mu
        rt = math.sqrt(max(disc, 0.0))
        s1 = 0.5 * (-b + rt)
        s2_ = 0.5 * (-b - rt)
        if abs(s1 - s2_) < _CONFLUENT_ROOT_TOL:
            s = 0.5 * (s1 + s2_)
            # (theta+rho)/(theta-s)^2 -> e^{sx} + (s+rho) x e^{sx}
            return ExpMix([(1.0 / mu, 0, s), ((s + rho) / mu, 1, s)])
        a1 = (s1 + rho) / (s1 - s2_)
        a2 = (s2_ + rho) / (s2_ - s1)
        return ExpMix([(a1 / mu, 0, s1), (a2 / mu, 0, s2_)])
    raise UnsupportedModelError("tabulated models have no closed-form scale function")


def z_mix(model, q: float) -> ExpMix:
    """Z^(q) on [0, inf) as a mixture: 1 + q * int_0^x W^(q)."""
    if q == 0.0:
        return ExpMix.constant(1.0)
    return ExpMix.constant(1.0) + w_mix(model, q).integral(0.0).scale(q)


def w_atom(model, q: float = 0.0) -> float:
    """Right limit W^(q)(0+): 0 for Brownian paths, 1/mu otherwise."""
    if isinstance(model, BrownianDrift):
        return 0.0 if model.sigma > 0.0 else 1.0 / model.mu
    if isinstance(model, CramerLundberg):
        return 1.0 / model.mu
    return float(model.scale_table.w[0])


def _tab_eval(table: ScaleTable, col: np.ndarray, x):
    x = np.asarray(x, dtype=float)
    if np.any(x > table.x[-1] + 1e-12):
        raise DomainError("evaluation beyond tabulated range")
    return np.interp(x, table.x, col)


def _check_q(model: Tabulated, q: float):
    if abs(q - model.scale_table.q) > 1e-12:
        raise UnsupportedModelError(
            f"tabulated model only supports q={model.scale_table.q}, got q={q}"
        )


def w_q(model, q: float, x):
    """W^(q)(x); vanishes for x < 0."""
    x = np.asarray(x, dtype=float)
    neg = x < 0.0
    if isinstance(model, Tabulated):
        _check_q(model, q)
        out = _tab_eval(model.scale_table, model.scale_table.w, np.where(neg, 0.0, x))
    else:
        out = w_mix(model, q)(np.where(neg, 0.0, x))
    out = np.where(neg, 0.0, out)
    return out if out.shape else float(out)


def z_q(model, q: float, x):
    """Z^(q)(x); equals 1 for x <= 0."""
    x = np.asarray(x, dtype=float)
    neg = x < 0.0
    if isinstance(model, Tabulated):
        _check_q(model, q)
        out = _tab_eval(model.scale_table, model.scale_table.z, np.where(neg, 0.0, x))
    else:
        out = z_mix(model, q)(np.where(neg, 0.0, x))
    out = np.where(neg, 1.0, out)
    return out if out.shape else float(out)


def w_q_prime(model, q: float, x):
    """Right derivative of W^(q); defined on [0, inf)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise DomainError("w_q_prime requires x >= 0")
    if isinstance(model, Tabulated):
        _check_q(model, q)
        out = _tab_eval(model.scale_table, model.scale_table.wprime, x)
    else:
        out = w_mix(model, q).derivative()(x)
    out = np.asarray(out)
    return out if out.shape else float(out)


def build_scale_table(model, q: float, x_max: float, h: float) -> ScaleTable:
    """Sample the closed forms onto a uniform grid."""
    n = int(round(x_max / h))
    x = np.arange(n + 1) * h
    return ScaleTable(
        q=q,
        x=x,
        w=np.asarray(w_q(model, q, x)),
        z=np.asarray(z_q(model, q, x)),
        wprime=np.asarray(w_q_prime(model, q, x)),
        meta={"model": repr(model), "h": h, "x_max": x_max},
    )


def load_scale_table(path: str, q: float) -> ScaleTable:
    """Read a CSV with header x,w,z,wprime into a ScaleTable."""
    rows = _read_csv(path, ("x", "w", "z", "wprime"))
    return ScaleTable(q=q, x=rows[0], w=rows[1], z=rows[2], wprime=rows[3], meta={"source": path})


def load_phi_table(path: str):
    """Read a CSV with header q,phi; returns (q_grid, phi_values)."""
    rows = _read_csv(path, ("q", "phi"))
    return rows[0], rows[1]


def _read_csv(path: str, expected_header):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header] != list(expected_header):
                raise ConfigError(f"{path}: expected header {','.join(expected_header)}")
            cols = [[] for _ in expected_header]
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(expected_header):
                    raise ConfigError(f"{path}:{line_no}: wrong field count")
                for c, v in zip(cols, row):
                    c.append(float(v))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from exc
    return [np.asarray(c, dtype=float) for c in cols]
