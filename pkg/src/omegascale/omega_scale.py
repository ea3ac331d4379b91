"""Scale functions under a state-dependent killing rate omega.

For a locally bounded rate function omega >= 0, the omega-scale functions
are the unique locally bounded solutions of

    w(x) = W(x) + int_0^x W(x - y) omega(y) w(y) dy,
    z(x) = 1    + int_0^x W(x - y) omega(y) z(y) dy,

where W is the classical 0-scale function.  A shift identity lets any
constant delta be split off: replacing the kernel by W^(delta), the forcing
by W^(delta) (resp. Z^(delta)) and the weight by omega - delta leaves the
solution unchanged.  Builders here shift by delta = inf omega over the
window, which keeps the Volterra weight small and the forward scheme well
conditioned; with constant omega the weight vanishes and the solver returns
the classical scale function exactly.

The one-sided-up function h solves the same equation with forcing
e^{Phi(phi) x} and delta pinned to the floor value phi = omega(x) for
x <= 0, which must exist for h to be meaningful.

Two-argument variants w(x, y) translate the rate: w(. + y, y) is the scale
function of omega(. + y).  Panels of many y-columns share one forward
recurrence (see volterra.solve_multi); columns with y >= 0 are pinned to
W^(delta)(0) at their start node and their start-cell quadrature weight is
corrected, which matters for kernels with an atom at 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import classical_scale as cs
from .errors import ConfigError, ConvergenceError, DomainError
from .expmix import ExpMix
from .levy_model import Tabulated, phi_inverse
from .volterra import (
    Grid,
    VolterraProblem,
    VolterraSolution,
    richardson_order,
    solve,
    solve_multi,
)

_PANEL_CAP = 400


# ---------------------------------------------------------------------------
# omega specifications


class OmegaSpec:
    """Base interface: a non-negative, locally bounded killing rate."""

    def rate(self, x):
        raise NotImplementedError

    def rate_right(self, x):
        """Right limit, used at quadrature nodes sitting on discontinuities."""
        return self.rate(x)

    def rate_left(self, x):
        """Left limit at x; differs from rate(x) only at discontinuities."""
        return self.rate(x)

    def breakpoints(self) -> tuple:
        return ()

    @property
    def floor(self) -> Optional[float]:
        """phi with omega(x) = phi for all x <= 0, when that constant exists."""
        return None

    @property
    def ceiling(self) -> Optional[tuple]:
        """(q, upsilon) with omega(x) = q for all x >= upsilon, when defined."""
        return None

    def _one_sided_values(self, lo: float, hi: float) -> np.ndarray:
        pts = [lo, hi] + [b for b in self.breakpoints() if lo < b < hi]
        arr = np.asarray(pts, dtype=float)
        inner = arr[(arr > lo) & (arr < hi)]
        vals = [np.asarray(self.rate(arr)), np.asarray(self.rate_right(arr[arr < hi])),
                np.asarray(self.rate_left(inner)), np.asarray(self.rate_left(np.asarray([hi])))]
        return np.concatenate([np.atleast_1d(v) for v in vals])

    def inf_on(self, lo: float, hi: float) -> float:
        """Exact infimum over [lo, hi] (rates are piecewise monotone)."""
        return float(np.min(self._one_sided_values(lo, hi)))

    def sup_on(self, lo: float, hi: float) -> float:
        """Exact supremum over [lo, hi]."""
        return float(np.max(self._one_sided_values(lo, hi)))

    def cumulative(self, v):
        """Signed integral of the rate from 0 to v, exact."""
        raise NotImplementedError


def _step_cumulative(thresholds, levels, v):
    v = np.asarray(v, dtype=float)
    lv = np.asarray(levels, dtype=float)
    if len(thresholds) == 0:
        out = lv[0] * v
        return out if out.shape else float(out)
    th = np.asarray(thresholds, dtype=float)
    ref = min(th[0], float(np.min(v)), 0.0) - 1.0
    knots = np.concatenate(([ref], th))
    seg = np.concatenate(([0.0], np.cumsum(lv[:-1] * np.diff(knots))))

    def accum(u):
        j = np.clip(np.searchsorted(knots, u, side="right") - 1, 0, len(lv) - 1)
        return seg[j] + lv[j] * (u - knots[j])

    out = accum(v) - accum(np.asarray(0.0))
    return out if out.shape else float(out)


@dataclass(frozen=True)
class ConstantOmega(OmegaSpec):
    q: float

    def __post_init__(self):
        if self.q < 0.0:
            raise ConfigError("constant rate must be >= 0")

    def rate(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, self.q)
        return out if out.shape else float(out)

    @property
    def floor(self):
        return self.q

    @property
    def ceiling(self):
        return (self.q, 0.0)

    def cumulative(self, v):
        v = np.asarray(v, dtype=float)
        out = self.q * v
        return out if out.shape else float(out)


@dataclass(frozen=True)
class BandOmega(OmegaSpec):
    """p everywhere, p + q on the open band (a, b)."""

    p: float
    q: float
    a: float
    b: float

    def __post_init__(self):
        if self.p < 0.0 or self.p + self.q < 0.0:
            raise ConfigError("band rates must stay >= 0")
        if not 0.0 <= self.a < self.b:
            raise ConfigError("band requires 0 <= a < b")

    def rate(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x > self.a) & (x < self.b), self.p + self.q, self.p)
        return out if out.shape else float(out)

    def rate_right(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x >= self.a) & (x < self.b), self.p + self.q, self.p)
        return out if out.shape else float(out)

    def rate_left(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x > self.a) & (x <= self.b), self.p + self.q, self.p)
        return out if out.shape else float(out)

    def breakpoints(self):
        return (self.a, self.b)

    @property
    def floor(self):
        return self.p

    @property
    def ceiling(self):
        return (self.p, self.b)

    def cumulative(self, v):
        v = np.asarray(v, dtype=float)
        out = self.p * v + self.q * (np.clip(v, self.a, self.b) - self.a)
        return out if out.shape else float(out)


@dataclass(frozen=True)
class LinearBandOmega(OmegaSpec):
    """gamma0 + gamma1 (x + d) on [-d, 0], zero elsewhere."""

    gamma0: float
    gamma1: float
    d: float

    def __post_init__(self):
        if self.gamma0 < 0.0 or self.gamma1 < 0.0 or self.d <= 0.0:
            raise ConfigError("linear band requires gamma0, gamma1 >= 0 and d > 0")

    def rate(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= -self.d) & (x <= 0.0)
        out = np.where(inside, self.gamma0 + self.gamma1 * (x + self.d), 0.0)
        return out if out.shape else float(out)

    def rate_right(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= -self.d) & (x < 0.0)
        out = np.where(inside, self.gamma0 + self.gamma1 * (x + self.d), 0.0)
        return out if out.shape else float(out)

    def rate_left(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > -self.d) & (x <= 0.0)
        out = np.where(inside, self.gamma0 + self.gamma1 * (x + self.d), 0.0)
        return out if out.shape else float(out)

    def breakpoints(self):
        return (-self.d, 0.0)

    @property
    def ceiling(self):
        return (0.0, 0.0)

    def cumulative(self, v):
        v = np.asarray(v, dtype=float)

        def anti(u):
            return self.gamma0 * u + 0.5 * self.gamma1 * (u + self.d) ** 2

        out = anti(np.clip(v, -self.d, 0.0)) - anti(0.0)
        return out if out.shape else float(out)


@dataclass(frozen=True)
class ExponentialOmega(OmegaSpec):
    """varrho * exp(-xi x); unbounded to the left, decaying to the right."""

    varrho: float
    xi: float

    def __post_init__(self):
        if self.varrho < 0.0 or self.xi <= 0.0:
            raise ConfigError("exponential rate requires varrho >= 0 and xi > 0")

    def rate(self, x):
        x = np.asarray(x, dtype=float)
        out = self.varrho * np.exp(-self.xi * x)
        return out if out.shape else float(out)

    def cumulative(self, v):
        v = np.asarray(v, dtype=float)
        out = self.varrho * (1.0 - np.exp(-self.xi * v)) / self.xi
        return out if out.shape else float(out)


@dataclass(frozen=True)
class StepOmega(OmegaSpec):
    """levels (p_0 ... p_n) switching at thresholds (x_1 ... x_n), right-continuous."""

    levels: tuple
    thresholds: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        object.__setattr__(self, "thresholds", tuple(float(v) for v in self.thresholds))
        if len(self.levels) != len(self.thresholds) + 1:
            raise ConfigError("need one more level than thresholds")
        if any(v < 0.0 for v in self.levels):
            raise ConfigError("step levels must be >= 0")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigError("thresholds must be strictly increasing")

    def rate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.thresholds), x, side="left")
        out = np.asarray(self.levels, dtype=float)[idx]
        return out if out.shape else float(out)

    def rate_right(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.thresholds), x, side="right")
        out = np.asarray(self.levels, dtype=float)[idx]
        return out if out.shape else float(out)

    def breakpoints(self):
        return self.thresholds

    @property
    def floor(self):
        if not self.thresholds or self.thresholds[0] >= 0.0:
            return self.levels[0]
        return None

    @property
    def ceiling(self):
        if not self.thresholds:
            return (self.levels[0], 0.0)
        return (self.levels[-1], self.thresholds[-1])

    def cumulative(self, v):
        return _step_cumulative(self.thresholds, self.levels, v)


@dataclass(frozen=True)
class TableOmega(OmegaSpec):
    """Right-continuous step interpolation of sampled rate values."""

    x: tuple
    values: tuple
    floor_value: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.x) != len(self.values) or not self.x:
            raise ConfigError("rate table needs matching non-empty x and values")
        if any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise ConfigError("rate table grid must be strictly increasing")
        if any(v < 0.0 for v in self.values):
            raise ConfigError("rate table values must be >= 0")

    def rate(self, x):
        xq = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(np.asarray(self.x), xq, side="right") - 1, 0, len(self.x) - 1)
        out = np.asarray(self.values, dtype=float)[idx]
        return out if out.shape else float(out)

    def rate_left(self, x):
        xq = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(np.asarray(self.x), xq, side="left") - 1, 0, len(self.x) - 1)
        out = np.asarray(self.values, dtype=float)[idx]
        return out if out.shape else float(out)

    def breakpoints(self):
        return self.x

    @property
    def floor(self):
        if self.floor_value is not None:
            return self.floor_value
        if self.x[0] >= 0.0:
            return self.values[0]
        return None

    @property
    def ceiling(self):
        return (self.values[-1], self.x[-1])

    def cumulative(self, v):
        return _step_cumulative(self.x[1:], self.values, v)


# ---------------------------------------------------------------------------
# result containers


@dataclass(frozen=True)
class OmegaScaleTable:
    """Grid values of the omega-scale functions, with interpolation rules.

    w vanishes and z equals 1 left of the origin; h extends as
    e^{Phi(phi) x}.  Derivative columns are filled by `derivatives`.
    """

    x: np.ndarray
    w: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    w_prime: Optional[np.ndarray] = None
    z_prime: Optional[np.ndarray] = None
    delta: float = 0.0
    phi_floor: Optional[float] = None
    phi_of_floor: Optional[float] = None
    provenance: dict = field(default_factory=dict)

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    def _eval(self, col, xq, left_value=None, left_fn=None):
        if col is None:
            raise DomainError("requested column was not built")
        xq = np.asarray(xq, dtype=float)
        if np.any(xq > self.x[-1] + 1e-9):
            raise DomainError("evaluation beyond table window")
        out = np.interp(np.clip(xq, 0.0, self.x[-1]), self.x, col)
        neg = xq < 0.0
        if np.any(neg):
            fill = left_fn(xq) if left_fn is not None else left_value
            out = np.where(neg, fill, out)
        return out if out.shape else float(out)

    def w_omega(self, xq):
        return self._eval(self.w, xq, left_value=0.0)

    def z_omega(self, xq):
        return self._eval(self.z, xq, left_value=1.0)

    def h_omega(self, xq):
        if self.phi_of_floor is None:
            return self._eval(self.h, xq, left_value=1.0)
        return self._eval(self.h, xq, left_fn=lambda t: np.exp(self.phi_of_floor * t))

    def w_omega_prime(self, xq):
        return self._eval(self.w_prime, xq, left_value=0.0)

    def z_omega_prime(self, xq):
        return self._eval(self.z_prime, xq, left_value=0.0)

    def to_csv(self, path: str):
        import csv as _csv

        cols = ("w_omega", "z_omega", "h_omega", "w_prime", "z_prime")
        data = (self.w, self.z, self.h, self.w_prime, self.z_prime)
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh, lineterminator="\n")
            writer.writerow(("x",) + cols)
            for i, xv in enumerate(self.x):
                row = [f"{xv:.17g}"]
                for col in data:
                    row.append("" if col is None else f"{col[i]:.17g}")
                writer.writerow(row)


@dataclass(frozen=True)
class TwoArgScale:
    """w(x, y) and z(x, y) along x for a fixed translation y."""

    y: float
    t: np.ndarray  # offsets x - y
    w_values: np.ndarray
    z_values: np.ndarray
    delta: float = 0.0

    def w(self, xq):
        xq = np.asarray(xq, dtype=float)
        t = xq - self.y
        if np.any(t > self.t[-1] + 1e-9):
            raise DomainError("evaluation beyond two-argument window")
        out = np.interp(np.clip(t, 0.0, self.t[-1]), self.t, self.w_values)
        out = np.where(t < 0.0, 0.0, out)
        return out if out.shape else float(out)

    def z(self, xq):
        xq = np.asarray(xq, dtype=float)
        t = xq - self.y
        if np.any(t > self.t[-1] + 1e-9):
            raise DomainError("evaluation beyond two-argument window")
        out = np.interp(np.clip(t, 0.0, self.t[-1]), self.t, self.z_values)
        out = np.where(t < 0.0, 1.0, out)
        return out if out.shape else float(out)


@dataclass(frozen=True)
class TwoArgPanel:
    """Matrix of w(x_i, y_j) on shared x-nodes for many translations y_j."""

    x: np.ndarray
    ys: np.ndarray
    w_matrix: np.ndarray  # shape (len(x), len(ys))
    delta: float = 0.0

    def column(self, j) -> np.ndarray:
        return self.w_matrix[:, j]

    def row_at(self, xq) -> np.ndarray:
        """Interpolated row w(xq, y_j) for all j."""
        xq = float(xq)
        if xq > self.x[-1] + 1e-9:
            raise DomainError("evaluation beyond panel window")
        if xq <= self.x[0]:
            return self.w_matrix[0].copy()
        i = int(np.searchsorted(self.x, xq, side="right")) - 1
        i = min(i, self.x.size - 2)
        lam = (xq - self.x[i]) / (self.x[i + 1] - self.x[i])
        return (1.0 - lam) * self.w_matrix[i] + lam * self.w_matrix[i + 1]


@dataclass(frozen=True)
class LimitConstants:
    """Large-barrier limits used by the one-sided-down identities."""

    w_inv_limit: float
    z_over_w_limit: float
    c_used: float
    converged: bool


# ---------------------------------------------------------------------------
# kernels and forcings


def _mix_callable(mix: ExpMix, left_value: float = 0.0):
    def f(u):
        u = np.asarray(u, dtype=float)
        out = np.where(u < 0.0, left_value, mix(np.maximum(u, 0.0)))
        return out if out.shape else float(out)

    return f


def _kernel_parts(model, delta: float):
    """(kernel callable, kernel at 0+, W forcing, Z forcing) for W^(delta)."""
    if isinstance(model, Tabulated):
        table = model.scale_table
        if abs(delta - table.q) > 1e-12:
            raise ConfigError(
                f"tabulated model provides W^({table.q}) only; "
                f"requested shift delta={delta}"
            )
        def kw(u):
            u = np.asarray(u, dtype=float)
            out = np.where(u < 0.0, 0.0, np.interp(np.clip(u, 0.0, table.x[-1]), table.x, table.w))
            if np.any(u > table.x[-1] + 1e-9):
                raise DomainError("tabulated scale function window exceeded")
            return out if out.shape else float(out)

        def kz(u):
            u = np.asarray(u, dtype=float)
            out = np.where(u < 0.0, 1.0, np.interp(np.clip(u, 0.0, table.x[-1]), table.x, table.z))
            return out if out.shape else float(out)

        return kw, float(table.w[0]), kw, kz
    wm = cs.w_mix(model, delta)
    zm = cs.z_mix(model, delta)
    return (
        _mix_callable(wm, 0.0),
        float(wm(0.0)),
        _mix_callable(wm, 0.0),
        _mix_callable(zm, 1.0),
    )


def _pick_delta(model, omega, lo, hi, delta=None):
    if isinstance(model, Tabulated):
        forced = model.scale_table.q
        if delta is not None and abs(delta - forced) > 1e-12:
            raise ConfigError("tabulated models must shift by the table's own q")
        return forced
    if delta is not None:
        return float(delta)
    return omega.inf_on(lo, hi)


# ---------------------------------------------------------------------------
# builders


def build_w_omega(model, omega: OmegaSpec, grid: Grid, delta=None) -> OmegaScaleTable:
    """Solve for w and z on [0, x_max]."""
    d = _pick_delta(model, omega, 0.0, grid.x_max, delta)
    kernel, k0, fw, fz = _kernel_parts(model, d)
    problem = VolterraProblem(
        kernel=kernel,
        kernel_at_zero=k0,
        forcing=fw,
        weight=lambda x: omega.rate_right(x) - d,
        weight_left=lambda x: omega.rate_left(x) - d,
        grid=grid,
        breakpoints=tuple(omega.breakpoints()),
    )
    x = grid.nodes(problem.breakpoints)
    forcing = np.column_stack([np.asarray(fw(x), dtype=float), np.asarray(fz(x), dtype=float)])
    H = solve_multi(problem, forcing)
    return OmegaScaleTable(
        x=x,
        w=H[:, 0],
        z=H[:, 1],
        delta=d,
        phi_floor=omega.floor,
        provenance={"model": repr(model), "omega": repr(omega), "h": grid.h, "delta": d},
    )


def convergence_order(model, omega: OmegaSpec, grid: Grid, delta=None) -> float:
    """Observed self-convergence order of the w solve at h, h/2, h/4."""
    d = _pick_delta(model, omega, 0.0, grid.x_max, delta)
    kernel, k0, fw, _ = _kernel_parts(model, d)
    problem = VolterraProblem(
        kernel=kernel,
        kernel_at_zero=k0,
        forcing=fw,
        weight=lambda x: omega.rate_right(x) - d,
        weight_left=lambda x: omega.rate_left(x) - d,
        grid=grid,
        breakpoints=tuple(omega.breakpoints()),
    )
    return richardson_order(problem)


def build_h_omega(model, omega: OmegaSpec, grid: Grid) -> OmegaScaleTable:
    """Solve for the one-sided-up function h; omega must have a floor."""
    phi_val = omega.floor
    if phi_val is None:
        raise DomainError("one-sided-up scale function needs a constant rate on x <= 0")
    d = _pick_delta(model, omega, 0.0, grid.x_max, phi_val)
    kernel, k0, _, _ = _kernel_parts(model, d)
    root = phi_inverse(model, phi_val)
    problem = VolterraProblem(
        kernel=kernel,
        kernel_at_zero=k0,
        forcing=lambda x: np.exp(root * np.asarray(x, dtype=float)),
        weight=lambda x: omega.rate_right(x) - d,
        weight_left=lambda x: omega.rate_left(x) - d,
        grid=grid,
        breakpoints=tuple(omega.breakpoints()),
    )
    sol = solve(problem)
    return OmegaScaleTable(
        x=sol.x,
        h=sol.values,
        delta=d,
        phi_floor=phi_val,
        phi_of_floor=root,
        provenance={"model": repr(model), "omega": repr(omega), "h": grid.h, "delta": d},
    )


def _untranslate(omega: OmegaSpec, y: float):
    """Map offsets t back to x = t + y, snapping roundoff onto breakpoints.

    The one-sided rate limits must land exactly on a jump point to pick
    the correct side; t + y can drift a few ulps past it.
    """
    obps = np.asarray(omega.breakpoints(), dtype=float)

    def back(t):
        x = np.asarray(t, dtype=float) + y
        if obps.size:
            i = np.clip(np.searchsorted(obps, x) - 1, 0, obps.size - 1)
            lo, hi = obps[i], obps[np.minimum(i + 1, obps.size - 1)]
            near = np.where(np.abs(hi - x) < np.abs(x - lo), hi, lo)
            x = np.where(np.abs(x - near) < 1e-12, near, x)
        return x

    return back


def build_two_arg(model, omega: OmegaSpec, y: float, grid: Grid) -> TwoArgScale:
    """Solve for w(. , y) and z(. , y) on offsets t = x - y in [0, x_max]."""
    d = _pick_delta(model, omega, y, y + grid.x_max)
    kernel, k0, fw, fz = _kernel_parts(model, d)
    bps = tuple(b - y for b in omega.breakpoints())
    back = _untranslate(omega, y)
    problem = VolterraProblem(
        kernel=kernel,
        kernel_at_zero=k0,
        forcing=fw,
        weight=lambda t: omega.rate_right(back(t)) - d,
        weight_left=lambda t: omega.rate_left(back(t)) - d,
        grid=grid,
        breakpoints=bps,
    )
    t = grid.nodes(bps)
    forcing = np.column_stack([np.asarray(fw(t), dtype=float), np.asarray(fz(t), dtype=float)])
    H = solve_multi(problem, forcing)
    return TwoArgScale(y=y, t=t, w_values=H[:, 0], z_values=H[:, 1], delta=d)


def two_arg_panel(model, omega: OmegaSpec, grid: Grid, ys,
                  max_columns: int = _PANEL_CAP) -> TwoArgPanel:
    """w(x_i, y_j) for many y_j from one shared forward recurrence.

    Columns with y_j >= 0 are snapped to grid nodes.  Columns with
    y_j < 0 require omega to have a floor (the rate below 0 must equal the
    shift so the recurrence can start integrating at 0).
    """
    ys = np.asarray(ys, dtype=float)
    if ys.size > max_columns:
        raise ConfigError(f"panel of {ys.size} columns exceeds cap {max_columns}")
    has_negative = bool(np.any(ys < 0.0))
    if has_negative:
        if omega.floor is None:
            raise DomainError("panel columns with y < 0 need a rate floor on x <= 0")
        d = _pick_delta(model, omega, 0.0, grid.x_max, omega.floor)
    else:
        d = _pick_delta(model, omega, 0.0, grid.x_max)
    kernel, k0, fw, _ = _kernel_parts(model, d)
    bps = tuple(omega.breakpoints())
    x = grid.nodes(bps)
    wl = omega.rate_left(x) - d

    ys = ys.copy()
    start_idx = np.full(ys.size, -1, dtype=int)
    for j, yj in enumerate(ys):
        if yj >= 0.0:
            i = int(np.argmin(np.abs(x - yj)))
            ys[j] = x[i]
            start_idx[j] = i

    forcing = np.empty((x.size, ys.size))
    for j, yj in enumerate(ys):
        forcing[:, j] = fw(x - yj)

    # Start-cell corrections for columns beginning at an interior node: the
    # shared trapezoid weight counts the dead cell left of the start, so
    # remove that half-cell contribution of the (known) start value k0.
    # The start node caps a cell from the right, hence the left limit of w.
    overrides = []
    diffs = np.diff(x)
    for j, i0 in enumerate(start_idx):
        if i0 >= 1:
            over = 0.5 * diffs[i0 - 1] * wl[i0] * k0
            if over != 0.0:
                rows = np.arange(i0 + 1, x.size)
                forcing[rows, j] -= over * kernel(x[rows] - x[i0])
        if i0 >= 0:
            overrides.append((i0, j, k0))

    problem = VolterraProblem(
        kernel=kernel,
        kernel_at_zero=k0,
        forcing=fw,
        weight=lambda t: omega.rate_right(t) - d,
        weight_left=lambda t: omega.rate_left(t) - d,
        grid=grid,
        breakpoints=bps,
    )
    H = solve_multi(problem, forcing, start_overrides=overrides)
    # columns never reach below their start: clear roundoff left of y_j
    for j, i0 in enumerate(start_idx):
        if i0 > 0:
            H[:i0, j] = 0.0
    return TwoArgPanel(x=x, ys=ys, w_matrix=H, delta=d)


# ---------------------------------------------------------------------------
# derivatives and limits


def _diff_nonuniform(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order first derivative on a possibly non-uniform grid."""
    n = x.size
    if n < 3:
        raise DomainError("need at least 3 nodes to differentiate")
    d = np.diff(x)
    out = np.empty_like(f)
    dl, dr = d[:-1], d[1:]
    out[1:-1] = (
        f[2:] * dl**2 - f[:-2] * dr**2 + f[1:-1] * (dr**2 - dl**2)
    ) / (dl * dr * (dl + dr))
    d0, d1 = d[0], d[1]
    out[0] = (
        -f[0] * (2 * d0 + d1) / (d0 * (d0 + d1))
        + f[1] * (d0 + d1) / (d0 * d1)
        - f[2] * d0 / (d1 * (d0 + d1))
    )
    dm1, dm2 = d[-1], d[-2]
    out[-1] = (
        f[-1] * (2 * dm1 + dm2) / (dm1 * (dm1 + dm2))
        - f[-2] * (dm1 + dm2) / (dm1 * dm2)
        + f[-3] * dm1 / (dm2 * (dm1 + dm2))
    )
    return out


def derivatives(table: OmegaScaleTable) -> OmegaScaleTable:
    """Return a copy with finite-difference derivative columns filled."""
    wp = _diff_nonuniform(table.x, table.w) if table.w is not None else None
    zp = _diff_nonuniform(table.x, table.z) if table.z is not None else None
    return replace(table, w_prime=wp, z_prime=zp)


def derivative_via_convolution(model, omega: OmegaSpec, table: OmegaScaleTable,
                               x: float, which: str = "z", n_quad: int = 4000) -> float:
    """Independent derivative route: Stieltjes convolution with W(dy).

    d/dx z(x) = W(0) omega(x) z(x) + int_0^x omega(x-y) z(x-y) W'(y) dy,
    and for w the same expression plus W'(x).  Used to cross-check the
    finite-difference columns.
    """
    if which not in ("w", "z"):
        raise ConfigError("which must be 'w' or 'z'")
    fn = table.w_omega if which == "w" else table.z_omega
    pts = [0.0, x] + [x - b for b in omega.breakpoints() if 0.0 < x - b < x]
    y = np.union1d(np.linspace(0.0, x, n_quad + 1), np.asarray(pts))
    wprime = np.asarray(cs.w_q_prime(model, 0.0, y))
    vals = np.asarray(omega.rate(x - y)) * np.asarray(fn(x - y)) * wprime
    out = float(np.trapezoid(vals, y))
    out += cs.w_atom(model, 0.0) * float(omega.rate(x)) * float(fn(x))
    if which == "w":
        out += float(cs.w_q_prime(model, 0.0, x))
    return out


def limit_constants(model, omega: OmegaSpec, h: float = 1e-3, c_start: float = 4.0,
                    c_cap: float = 64.0, tol: float = 1e-6) -> LimitConstants:
    """Limits 1/w(c) and z(c)/w(c) as c grows, by window doubling.

    Both sequences are monotone non-increasing; convergence is declared
    when one doubling changes them by less than tol (relative, with an
    absolute floor of 1e-8 for limits collapsing to zero).  The step
    coarsens on the largest windows to keep each solve bounded; the limit
    constants lose nothing, their error is set by the tail truncation.
    """
    c = c_start
    prev = None
    while c <= c_cap:
        h_eff = max(h, c / 12000.0)
        table = build_w_omega(model, omega, Grid(c, h_eff))
        wc = float(table.w[-1])
        zc = float(table.z[-1])
        cur = (1.0 / wc, zc / wc)
        if prev is not None:
            ok = all(
                abs(a - b) <= tol * max(1.0, abs(b)) or abs(a) < 1e-8
                for a, b in zip(cur, prev)
            )
            if ok:
                return LimitConstants(cur[0], cur[1], c, True)
        prev = cur
        c *= 2.0
    return LimitConstants(prev[0], prev[1], c / 2.0, False)
