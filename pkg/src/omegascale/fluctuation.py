"""Exit, reflection and resolvent functionals built from omega-scale tables.

Every quantity here is a ratio or difference of the solutions produced in
omega_scale; the functions accept a model + rate specification and solve on
an internally chosen window.  All are expectations of the multiplicative
functional exp(-int_0^T omega(X_t) dt) for various horizons T:

  exit_a / exit_b          two-sided exit from [lower, c]
  one_sided_down           no upper barrier (large-c limits)
  one_sided_up             no lower barrier (needs a rate floor on x <= 0)
  reflected_up             process reflected at its infimum, exit above c
  reflected_dual           dual process reflected at c, exit below 0
  resolvent_*              occupation densities with the same killing
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import classical_scale as cs
from .errors import ConvergenceError, DomainError
from .levy_model import Tabulated, phi_inverse, psi_prime
from .omega_scale import (
    OmegaSpec,
    build_h_omega,
    build_two_arg,
    build_w_omega,
    limit_constants,
    two_arg_panel,
)
from .volterra import Grid

_DEFAULT_H = 1e-3


def _window(model, omega, c, h):
    return build_w_omega(model, omega, Grid(c, h))


def exit_a(model, omega: OmegaSpec, x: float, c: float, lower: float = 0.0,
           h: float = _DEFAULT_H) -> float:
    """Reach c before passing below `lower`, discounted along the path."""
    if c <= lower:
        raise DomainError("upper barrier must exceed the lower one")
    if x > c:
        raise DomainError("need x <= c")
    if x < lower:
        return 0.0
    if lower == 0.0:
        table = _window(model, omega, c, h)
        return float(table.w_omega(x) / table.w_omega(c))
    two = build_two_arg(model, omega, lower, Grid(c - lower, h))
    return float(two.w(x) / two.w(c))


def exit_b(model, omega: OmegaSpec, x: float, c: float, lower: float = 0.0,
           h: float = _DEFAULT_H) -> float:
    """Pass below `lower` before reaching c, discounted along the path."""
    if c <= lower:
        raise DomainError("upper barrier must exceed the lower one")
    if x > c:
        raise DomainError("need x <= c")
    if x < lower:
        return 1.0
    if lower == 0.0:
        table = _window(model, omega, c, h)
        wz = table.w_omega(x) * table.z_omega(c) / table.w_omega(c)
        return float(table.z_omega(x) - wz)
    two = build_two_arg(model, omega, lower, Grid(c - lower, h))
    return float(two.z(x) - two.w(x) * two.z(c) / two.w(c))


@dataclass(frozen=True)
class OneSidedDown:
    survive: float   # never passes below 0, full discounted mass
    ruin: float      # passes below 0 in finite time, discounted to that moment
    c_used: float


def one_sided_down(model, omega: OmegaSpec, x: float, h: float = _DEFAULT_H,
                   tol: float = 1e-6) -> OneSidedDown:
    """Limits of the two-sided identities as the upper barrier grows."""
    if x < 0.0:
        raise DomainError("start point must be >= 0")
    lim = limit_constants(model, omega, h=h, tol=tol)
    if not lim.converged:
        raise ConvergenceError(
            f"barrier limits did not settle by c = {lim.c_used}"
        )
    table = build_w_omega(model, omega, Grid(max(x, 1.0), h))
    wx = float(table.w_omega(x))
    zx = float(table.z_omega(x))
    return OneSidedDown(
        survive=lim.w_inv_limit * wx,
        ruin=zx - lim.z_over_w_limit * wx,
        c_used=lim.c_used,
    )


def one_sided_up(model, omega: OmegaSpec, x: float, c: float,
                 h: float = _DEFAULT_H) -> float:
    """Reach level c (no lower barrier), discounted along the path."""
    if x > c:
        raise DomainError("need x <= c")
    if omega.floor is None:
        raise DomainError("one-sided upward passage needs a rate floor on x <= 0")
    if c <= 0.0:
        root = phi_inverse(model, omega.floor)
        return float(np.exp(root * (x - c)))
    table = build_h_omega(model, omega, Grid(c, h))
    return float(table.h_omega(x) / table.h_omega(c))


def reflected_up(model, omega: OmegaSpec, x: float, c: float,
                 h: float = _DEFAULT_H) -> float:
    """Process reflected at its running infimum, first passage above c."""
    if not 0.0 <= x <= c:
        raise DomainError("need 0 <= x <= c")
    table = _window(model, omega, c, h)
    return float(table.z_omega(x) / table.z_omega(c))


def reflected_dual(model, omega: OmegaSpec, x: float, c: float,
                   h: float = _DEFAULT_H) -> float:
    """Dual process reflected at c from above, first passage below 0.

    The killing rate seen by the reflected coordinate y is omega(c - y);
    the identity uses the derivative ratio of the plain omega-scale
    functions at the barrier.
    """
    if not 0.0 <= x <= c:
        raise DomainError("need 0 <= x <= c")
    h_eff = c / max(1.0, round(c / h))
    table = _window(model, omega, c + h_eff, h_eff)
    zc_p = float(table.z_omega(c + h_eff) - table.z_omega(c - h_eff))
    wc_p = float(table.w_omega(c + h_eff) - table.w_omega(c - h_eff))
    return float(table.z_omega(c - x) - zc_p / wc_p * table.w_omega(c - x))


# ---------------------------------------------------------------------------
# resolvents


@dataclass(frozen=True)
class ResolventDensity:
    """Occupation density on a y-grid, plus an optional point mass."""

    y: np.ndarray
    values: np.ndarray
    atom: Optional[tuple] = None  # (location, mass)

    def __call__(self, yq):
        yq = np.asarray(yq, dtype=float)
        if np.any(yq < self.y[0] - 1e-9) or np.any(yq > self.y[-1] + 1e-9):
            raise DomainError("evaluation outside the resolvent grid")
        out = np.interp(yq, self.y, self.values)
        return out if out.shape else float(out)

    def mass(self) -> float:
        total = float(np.trapezoid(self.values, self.y))
        if self.atom is not None:
            total += self.atom[1]
        return total


def _default_ys(lo: float, hi: float, omega: OmegaSpec, n: int) -> np.ndarray:
    base = np.linspace(lo, hi, n)
    bps = [b for b in omega.breakpoints() if lo < b < hi]
    return np.union1d(base, np.asarray(bps, dtype=float)) if bps else base


def resolvent_u(model, omega: OmegaSpec, x: float, c: float, ys=None,
                h: float = _DEFAULT_H, n_y: int = 201,
                max_columns: int = 400) -> ResolventDensity:
    """Occupation density before exiting [0, c], killed along the path."""
    if not 0.0 <= x <= c:
        raise DomainError("need 0 <= x <= c")
    ys = _default_ys(0.0, c, omega, n_y) if ys is None else np.asarray(ys, dtype=float)
    panel = two_arg_panel(model, omega, Grid(c, h), ys, max_columns=max_columns)
    table = build_w_omega(model, omega, Grid(c, h))
    ratio = float(table.w_omega(x) / table.w_omega(c))
    vals = ratio * panel.row_at(c) - panel.row_at(x)
    return ResolventDensity(y=panel.ys, values=vals)


def resolvent_l(model, omega: OmegaSpec, x: float, c: float, ys=None,
                h: float = _DEFAULT_H, n_y: int = 201,
                max_columns: int = 400) -> ResolventDensity:
    """Occupation density of the infimum-reflected process below c."""
    if not 0.0 <= x <= c:
        raise DomainError("need 0 <= x <= c")
    ys = _default_ys(0.0, c, omega, n_y) if ys is None else np.asarray(ys, dtype=float)
    panel = two_arg_panel(model, omega, Grid(c, h), ys, max_columns=max_columns)
    table = build_w_omega(model, omega, Grid(c, h))
    ratio = float(table.z_omega(x) / table.z_omega(c))
    vals = ratio * panel.row_at(c) - panel.row_at(x)
    return ResolventDensity(y=panel.ys, values=vals)


def resolvent_l_hat(model, omega: OmegaSpec, x: float, c: float, ys=None,
                    h: float = _DEFAULT_H, n_y: int = 201,
                    max_columns: int = 400) -> ResolventDensity:
    """Occupation density of the dual process reflected at c, plus its atom
    at the barrier floor y = 0."""
    if not 0.0 <= x <= c:
        raise DomainError("need 0 <= x <= c")
    ys = _default_ys(0.0, c, omega, n_y) if ys is None else np.asarray(ys, dtype=float)
    if np.any(ys < 0.0) or np.any(ys > c):
        raise DomainError("dual resolvent grid must sit inside [0, c]")
    # first-argument derivatives at the barrier come from a central
    # difference, so the window reaches one step past c and the step is
    # snapped to divide c exactly
    h_eff = c / max(1.0, round(c / h))
    grid = Grid(c + h_eff, h_eff)
    # columns are the mirrored points c - y
    panel = two_arg_panel(model, omega, grid, c - ys, max_columns=max_columns)
    table = build_w_omega(model, omega, grid)
    wc_p = float(table.w_omega(c + h_eff) - table.w_omega(c - h_eff)) / (2.0 * h_eff)
    w_cx = float(table.w_omega(c - x))
    slope = (panel.row_at(c + h_eff) - panel.row_at(c - h_eff)) / (2.0 * h_eff)
    # columns starting inside the stencil: difference from the known start
    # value instead of reaching below the start
    near = panel.ys > c - h_eff - 1e-12
    if np.any(near):
        w0 = cs.w_atom(model, 0.0)
        hi = panel.row_at(c + h_eff)
        slope = np.where(near, (hi - w0) / (c + h_eff - panel.ys), slope)
    vals = (w_cx / wc_p) * slope - panel.row_at(c - x)
    atom_mass = w_cx * cs.w_atom(model, 0.0) / wc_p
    ys_out = c - panel.ys
    order = np.argsort(ys_out)
    return ResolventDensity(
        y=ys_out[order],
        values=vals[order],
        atom=(0.0, atom_mass) if atom_mass != 0.0 else None,
    )


def resolvent_xi(model, omega: OmegaSpec, x: float, c: float, ys=None,
                 h: float = _DEFAULT_H, n_y: int = 201, y_min: float = None,
                 max_columns: int = 400) -> ResolventDensity:
    """Occupation density below the one-sided upper barrier c.

    The state space is unbounded below, so the grid extends to y_min < 0;
    omega must have a floor for both the h-function and the negative-y
    columns to make sense.
    """
    if x > c:
        raise DomainError("need x <= c")
    if omega.floor is None:
        raise DomainError("one-sided resolvent needs a rate floor on x <= 0")
    if y_min is None:
        y_min = -2.0
    ys = (
        _default_ys(y_min, c, omega, n_y)
        if ys is None
        else np.asarray(ys, dtype=float)
    )
    panel = two_arg_panel(model, omega, Grid(c, h), ys, max_columns=max_columns)
    htab = build_h_omega(model, omega, Grid(c, h))
    ratio = float(htab.h_omega(x) / htab.h_omega(c))
    if x >= 0.0:
        row = panel.row_at(x)
    else:
        # below the origin the two-argument function is the classical
        # W^(phi)(x - y), zero unless the column starts even lower
        wm = cs.w_mix(model, omega.floor)
        row = np.where(panel.ys <= x, wm(np.maximum(x - panel.ys, 0.0)), 0.0)
    vals = ratio * panel.row_at(c) - row
    return ResolventDensity(y=panel.ys, values=vals)


def _trapezoid_with_jumps(x: np.ndarray, f_right: np.ndarray,
                          f_left: np.ndarray) -> float:
    """Trapezoid rule using one-sided values at the cell ends.

    Integrands below carry rate factors that jump at grid nodes; using the
    right limit at each left cell end and the left limit at each right cell
    end keeps the rule second order on every smooth piece.
    """
    d = np.diff(x)
    return float(np.sum(0.5 * d * (f_right[:-1] + f_left[1:])))


def resolvent_theta(model, omega: OmegaSpec, x: float, ys=None,
                    h: float = _DEFAULT_H, n_y: int = 201, y_min: float = -2.0,
                    max_columns: int = 400) -> ResolventDensity:
    """Barrier-free occupation density of the killed process.

    Needs both a rate floor (phi on x <= 0) and a ceiling (q from some
    level upsilon on): outside [0, upsilon] the killing is constant and the
    renewal integrals truncate.
    """
    if x < 0.0:
        raise DomainError("start point must be >= 0")
    phi_val = omega.floor
    ceil = omega.ceiling
    if phi_val is None or ceil is None:
        raise DomainError("barrier-free resolvent needs constant rate tails")
    q, upsilon = ceil
    upsilon = max(upsilon, 0.0)
    if isinstance(model, Tabulated):
        from .errors import UnsupportedModelError

        raise UnsupportedModelError(
            "barrier-free resolvent needs closed-form scale functions"
        )
    root_q = phi_inverse(model, q)
    root_phi = phi_inverse(model, phi_val)
    x_max = max(x, upsilon) + 1e-9
    if ys is None:
        ys = _default_ys(y_min, x_max, omega, n_y)
    else:
        ys = np.asarray(ys, dtype=float)
        if ys.size:
            x_max = max(x_max, float(np.max(ys)) + 1e-9)
    panel = two_arg_panel(model, omega, Grid(x_max, h), ys, max_columns=max_columns)
    htab = build_h_omega(model, omega, Grid(x_max, h))

    # denominator: limit of e^{-Phi(q) c} H(c) over the h-scale
    if abs(q - phi_val) <= 1e-12:
        ratio = psi_prime(model, root_phi)
    else:
        ratio = (q - phi_val) / (root_q - root_phi)
    xs = htab.x
    g_right = np.exp(-root_q * xs) * (np.asarray(omega.rate_right(xs)) - q) * htab.h
    g_left = np.exp(-root_q * xs) * (np.asarray(omega.rate_left(xs)) - q) * htab.h
    denom = ratio + _trapezoid_with_jumps(xs, g_right, g_left)

    # numerators, one per output point y
    wm_phi = cs.w_mix(model, phi_val)
    n_vals = np.empty(panel.ys.size)
    px = panel.x
    for j, yj in enumerate(panel.ys):
        total = np.exp(-root_q * yj)
        if yj < 0.0:
            # exact segment z in [y, 0]: the two-argument function is the
            # classical W^(phi)(z - y) there
            seg = wm_phi.mul_exp(-root_q).definite_integral(0.0, -yj)
            total += (phi_val - q) * np.exp(-root_q * yj) * seg
        col = panel.w_matrix[:, j]
        fr = np.exp(-root_q * px) * (np.asarray(omega.rate_right(px)) - q) * col
        fl = np.exp(-root_q * px) * (np.asarray(omega.rate_left(px)) - q) * col
        lo = max(yj, 0.0)
        mask = px >= lo - 1e-12
        n_vals[j] = total + _trapezoid_with_jumps(px[mask], fr[mask], fl[mask])

    hx = float(htab.h_omega(x))
    vals = (n_vals / denom) * hx - panel.row_at(x)
    return ResolventDensity(y=panel.ys, values=vals)
