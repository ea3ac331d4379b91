"""Forward product-trapezoid solver for second-kind Volterra equations.

The equations solved here all have renewal form

    H(x) = h(x) + int_0^x K(x - y) w(y) H(y) dy,        x >= 0,

with a kernel K that vanishes on the negatives and may carry a jump at 0
(K(0) below always means the right limit K(0+)).  On grid nodes
0 = x_0 < x_1 < ... < x_n the trapezoid rule turns the integral into a
lower-triangular system solved by forward substitution; the diagonal entry
is treated semi-implicitly so a kernel atom at 0 stays stable:

    H_i = [ h(x_i) + sum_{j<i} c_j K(x_i - x_j) w(x_j) H_j ]
          / [ 1 - c_i K(0) w(x_i) ],

where c_j are the (possibly non-uniform) trapezoid weights.  A guard
requires the denominator to stay above 0.5; tighten the grid if it trips.

Grid nodes are the uniform lattice of step h augmented with every supplied
breakpoint of the weight function, so discontinuities of w sit exactly on
nodes.  Each cell integrates its own smooth piece: the left endpoint uses
the right limit of w, the right endpoint (including the diagonal) its left
limit, which keeps the rule second order across discontinuities.

`solve_multi` runs the same recurrence for many forcing columns at once
(shared kernel and weight), which is what resolvent panels build on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, GuardViolationError, NonFiniteError

_DENOM_GUARD = 0.5


@dataclass(frozen=True)
class Grid:
    """Uniform lattice on [0, x_max] with step h, plus snapped breakpoints."""

    x_max: float
    h: float

    def __post_init__(self):
        if not (self.x_max > 0.0 and 0.0 < self.h <= self.x_max):
            raise DomainError("grid requires 0 < h <= x_max")

    def nodes(self, breakpoints=()) -> np.ndarray:
        n = int(math.ceil(self.x_max / self.h - 1e-9))
        base = np.arange(n + 1) * self.h
        if base[-1] < self.x_max:
            base = np.append(base, self.x_max)
        extra = [b for b in breakpoints if 0.0 < b < base[-1]]
        if not extra:
            return base
        x = np.union1d(base, np.asarray(extra, dtype=float))
        # drop near-duplicates created by breakpoints landing on lattice nodes
        keep = np.append(True, np.diff(x) > 1e-12 * max(1.0, self.x_max))
        return x[keep]

    def refined(self, factor: int) -> "Grid":
        return Grid(self.x_max, self.h / factor)


@dataclass(frozen=True)
class VolterraProblem:
    """One renewal equation: kernel, forcing, weight and grid.

    weight supplies right limits at its discontinuities; weight_left the
    left limits (defaults to weight for continuous rates).
    """

    kernel: Callable[[np.ndarray], np.ndarray]
    kernel_at_zero: float
    forcing: Callable[[np.ndarray], np.ndarray]
    weight: Callable[[np.ndarray], np.ndarray]
    grid: Grid
    breakpoints: tuple = ()
    left: Optional[Callable[[np.ndarray], np.ndarray]] = None  # H(x) for x < 0
    weight_left: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class VolterraSolution:
    """Grid solution with linear interpolation and a left-extension rule."""

    x: np.ndarray
    values: np.ndarray
    left: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    def __call__(self, xq):
        xq = np.asarray(xq, dtype=float)
        if np.any(xq > self.x[-1] + 1e-9):
            raise DomainError("evaluation beyond solved window")
        out = np.interp(np.clip(xq, self.x[0], self.x[-1]), self.x, self.values)
        neg = xq < self.x[0]
        if np.any(neg):
            if self.left is None:
                raise DomainError("no left extension defined for x < 0")
            out = np.where(neg, self.left(xq), out)
        return out if out.shape else float(out)


def _cell_coeffs(x: np.ndarray, w_right: np.ndarray, w_left: np.ndarray):
    """Per-node quadrature coefficients from per-cell trapezoid endpoints.

    Node j receives 0.5 d_j w_right(x_j) from the cell on its right and
    0.5 d_{j-1} w_left(x_j) from the cell on its left; the diagonal entry
    of row i is the left-cell share at node i.
    """
    d = np.diff(x)
    g = np.zeros_like(x)
    g[:-1] += 0.5 * d * w_right[:-1]
    g[1:] += 0.5 * d * w_left[1:]
    diag = 0.5 * d * w_left[1:]
    return g, diag


def _forward(x, kernel, k0, f, w_right, w_left):
    """Run the recurrence; f may be (n,) or (n, m)."""
    n = x.size
    g, diag = _cell_coeffs(x, w_right, w_left)
    H = np.array(f, dtype=float, copy=True)
    denom = 1.0 - k0 * diag
    if np.any(denom <= _DENOM_GUARD):
        raise GuardViolationError(
            "diagonal guard violated: shrink the grid step (1 - c K(0) w <= 0.5)"
        )
    for i in range(1, n):
        kv = kernel(x[i] - x[:i])
        s = (kv * g[:i]) @ H[:i]
        H[i] = (f[i] + s) / denom[i - 1]
    if not np.all(np.isfinite(H)):
        raise NonFiniteError("volterra solve produced non-finite values")
    return H


def _weights_on(problem: VolterraProblem, x: np.ndarray):
    wr = np.asarray(problem.weight(x), dtype=float)
    wl = (
        np.asarray(problem.weight_left(x), dtype=float)
        if problem.weight_left is not None
        else wr
    )
    return wr, wl


def solve(problem: VolterraProblem) -> VolterraSolution:
    """Solve the renewal equation on the problem grid."""
    x = problem.grid.nodes(problem.breakpoints)
    f = np.asarray(problem.forcing(x), dtype=float)
    wr, wl = _weights_on(problem, x)
    H = _forward(x, problem.kernel, problem.kernel_at_zero, f, wr, wl)
    return VolterraSolution(x=x, values=H, left=problem.left, meta={"h": problem.grid.h})


def solve_shifted(problem: VolterraProblem, y0: float) -> VolterraSolution:
    """Solve with the weight translated by y0: w(y0 + t) on the t-grid.

    The returned solution is indexed by t = x - y0; breakpoints of the
    weight are shifted accordingly so they stay on nodes.
    """
    wl = problem.weight_left
    shifted = VolterraProblem(
        kernel=problem.kernel,
        kernel_at_zero=problem.kernel_at_zero,
        forcing=problem.forcing,
        weight=lambda t: problem.weight(np.asarray(t, dtype=float) + y0),
        grid=problem.grid,
        breakpoints=tuple(b - y0 for b in problem.breakpoints),
        left=problem.left,
        weight_left=(
            None if wl is None
            else (lambda t: wl(np.asarray(t, dtype=float) + y0))
        ),
    )
    return solve(shifted)


def solve_multi(problem: VolterraProblem, forcing_matrix: np.ndarray,
                start_overrides=None) -> np.ndarray:
    """Shared-kernel solve for many forcing columns at once.

    forcing_matrix has shape (n_nodes, n_columns) sampled on
    problem.grid.nodes(problem.breakpoints).  start_overrides, when given,
    is a list of (node_index, column_index, value) triples: the solution is
    pinned to `value` at that node for that column before later rows use
    it.  Columns whose forcing begins part-way down the grid (two-argument
    scale columns) use this to keep the start-node value exact.
    """
    x = problem.grid.nodes(problem.breakpoints)
    f = np.asarray(forcing_matrix, dtype=float)
    if f.shape[0] != x.size:
        raise DomainError("forcing matrix rows must match grid nodes")
    wr, wl = _weights_on(problem, x)
    g, diag = _cell_coeffs(x, wr, wl)
    k0 = problem.kernel_at_zero
    denom = 1.0 - k0 * diag
    if np.any(denom <= _DENOM_GUARD):
        raise GuardViolationError(
            "diagonal guard violated: shrink the grid step (1 - c K(0) w <= 0.5)"
        )
    overrides = {}
    if start_overrides:
        for i, j, v in start_overrides:
            overrides.setdefault(i, []).append((j, v))
    H = f.copy()
    for j, v in overrides.get(0, ()):
        H[0, j] = v
    for i in range(1, x.size):
        kv = problem.kernel(x[i] - x[:i])
        coef = kv * g[:i]
        H[i] = (f[i] + coef @ H[:i]) / denom[i - 1]
        for j, v in overrides.get(i, ()):
            H[i, j] = v
    if not np.all(np.isfinite(H)):
        raise NonFiniteError("volterra multi-solve produced non-finite values")
    return H


def richardson_order(problem: VolterraProblem) -> float:
    """Observed self-convergence order from solves at h, h/2 and h/4.

    Errors are measured against the h/4 solution on the h-grid nodes and
    the order reported as log2(e_h / e_{h/2}); for an exact order p this
    evaluates to log2(2^p + 1).  Returns inf when the coarse error is
    already zero (e.g. a weight that vanishes identically).
    """
    sols = []
    for factor in (1, 2, 4):
        p = VolterraProblem(
            kernel=problem.kernel,
            kernel_at_zero=problem.kernel_at_zero,
            forcing=problem.forcing,
            weight=problem.weight,
            grid=problem.grid.refined(factor),
            breakpoints=problem.breakpoints,
            left=problem.left,
            weight_left=problem.weight_left,
        )
        sols.append(solve(p))
    coarse = sols[0]
    e = []
    for s in sols[:2]:
        idx = np.searchsorted(sols[2].x, coarse.x)
        idx = np.clip(idx, 0, sols[2].x.size - 1)
        if np.any(np.abs(sols[2].x[idx] - coarse.x) > 1e-9):
            raise DomainError("refined grids do not nest on the coarse nodes")
        vals = np.interp(coarse.x, s.x, s.values)
        e.append(np.max(np.abs(vals - sols[2].values[idx])))
    if e[0] == 0.0 or e[1] == 0.0:
        return math.inf
    return math.log2(e[0] / e[1])
