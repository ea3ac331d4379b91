"""Monte Carlo checks for the omega-killed exit quantities.

Two path engines:

* Brownian paths advance on a fixed step dt (lockstep over all paths, dead
  paths compacted away).  Barrier crossings inside a step are recovered with
  the standard bridge-crossing probability, and the killing integral uses
  the trapezoid rule along the sampled skeleton, so estimates carry an O(dt)
  bias on top of the statistical error.
* Compound-Poisson-with-drift paths are sampled exactly: between jumps the
  path is a line, so first passages, undershoots and the killing integral
  along each segment are all closed-form.  No discretisation bias.

Both support two estimators of E[exp(-int omega(X_t) dt); T < horizon]:

* exponential_weight: carry the accumulated factor as a path weight.
* poisson_thinning: kill the path with the exact per-segment survival
  probability and count survivors (the marked-Poisson construction with the
  marks integrated out).

Estimates are deterministic for a fixed seed: a single counter-based
generator drives all draws, contributions are recorded per original path
index, and reductions use numpy's pairwise summation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnsupportedModelError
from .levy_model import BrownianDrift, CramerLundberg
from .omega_scale import LinearBandOmega, OmegaSpec

_WEIGHT_FLOOR = 1e-12
_SAFE_UPPER = 6.0
_ESTIMATORS = ("exponential_weight", "poisson_thinning")


@dataclass(frozen=True)
class SimConfig:
    model: object
    omega: OmegaSpec
    dt: float = 1e-3
    n_paths: int = 100_000
    seed: int = 1
    horizon_cap: float = 1e3
    estimator: str = "exponential_weight"

    def __post_init__(self):
        if self.dt <= 0.0 or self.n_paths <= 0 or self.horizon_cap <= 0.0:
            raise ConfigError("need dt > 0, n_paths > 0, horizon_cap > 0")
        if self.estimator not in _ESTIMATORS:
            raise ConfigError(f"estimator must be one of {_ESTIMATORS}")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_effective: int
    elapsed: float
    truncated_fraction: float

    @property
    def flagged(self) -> bool:
        return self.truncated_fraction > 0.01


def _rng(cfg: SimConfig) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=cfg.seed))


def _check_thinning_window(cfg: SimConfig, lo: float, hi: float):
    if cfg.estimator == "poisson_thinning":
        bound = cfg.omega.sup_on(lo, hi)
        if not math.isfinite(bound):
            raise ConfigError(
                "thinning estimator needs a bounded rate on the reachable window"
            )


def _estimate(contrib: np.ndarray, truncated: int, t0: float) -> MCEstimate:
    n = contrib.size
    mean = float(np.sum(contrib) / n)
    var = float(np.sum((contrib - mean) ** 2)) / max(n - 1, 1)
    return MCEstimate(
        mean=mean,
        stderr=math.sqrt(var / n),
        n_effective=n - truncated,
        elapsed=time.perf_counter() - t0,
        truncated_fraction=truncated / n,
    )


def _bridge_cross_prob(a, b, level, var_dt, upper: bool):
    """Crossing probability of `level` for a Brownian bridge from a to b,
    both endpoints on the non-crossing side."""
    if upper:
        g = np.clip(level - a, 0.0, None) * np.clip(level - b, 0.0, None)
    else:
        g = np.clip(a - level, 0.0, None) * np.clip(b - level, 0.0, None)
    return np.exp(-2.0 * g / var_dt)


# ---------------------------------------------------------------------------
# Brownian engine


def _bm_two_sided(cfg: SimConfig, x: float, c: float, z: float):
    """Drive Brownian paths until they leave (z, c); returns the upper-exit
    and lower-exit contribution arrays plus the count of horizon-capped
    paths.  Contributions are the surviving discount weight at the exit."""
    model = cfg.model
    mu, sigma = model.mu, model.sigma
    if sigma <= 0.0:
        raise ConfigError("Brownian engine needs sigma > 0")
    rng = _rng(cfg)
    thinning = cfg.estimator == "poisson_thinning"
    n = cfg.n_paths
    pos = np.full(n, float(x))
    wt = np.ones(n)
    idx = np.arange(n)
    up = np.zeros(n)
    lo_arr = np.zeros(n)
    dt = cfg.dt
    var_dt = sigma * sigma * dt
    sdt = sigma * math.sqrt(dt)
    drift = mu * dt
    rate = cfg.omega.rate
    n_steps = int(math.ceil(cfg.horizon_cap / dt))

    for _ in range(n_steps):
        if idx.size == 0:
            break
        m = idx.size
        new = pos + drift + sdt * rng.standard_normal(m)
        acc = 0.5 * dt * (np.asarray(rate(pos)) + np.asarray(rate(new)))
        if thinning:
            dead = rng.random(m) >= np.exp(-acc)
        else:
            wt = wt * np.exp(-acc)
            dead = wt < _WEIGHT_FLOOR

        hit_up = new >= c
        hit_lo = new <= z
        interior = ~(hit_up | hit_lo)
        pu = _bridge_cross_prob(pos, new, c, var_dt, upper=True)
        pl = _bridge_cross_prob(pos, new, z, var_dt, upper=False)
        hit_up |= interior & (rng.random(m) < pu)
        hit_lo |= interior & ~hit_up & (rng.random(m) < pl)

        resolve_up = hit_up & ~dead
        resolve_lo = hit_lo & ~dead
        up[idx[resolve_up]] = 1.0 if thinning else wt[resolve_up]
        lo_arr[idx[resolve_lo]] = 1.0 if thinning else wt[resolve_lo]

        keep = ~(dead | hit_up | hit_lo)
        pos, wt, idx = new[keep], wt[keep], idx[keep]
    return up, lo_arr, idx.size


def _bm_one_sided_up(cfg: SimConfig, x: float, c: float):
    """No lower barrier: the rate floor drives the weight to zero on deep
    excursions, so the weight floor (or the horizon) terminates paths."""
    model = cfg.model
    mu, sigma = model.mu, model.sigma
    if sigma <= 0.0:
        raise ConfigError("Brownian engine needs sigma > 0")
    rng = _rng(cfg)
    thinning = cfg.estimator == "poisson_thinning"
    n = cfg.n_paths
    pos = np.full(n, float(x))
    wt = np.ones(n)
    idx = np.arange(n)
    out = np.zeros(n)
    dt = cfg.dt
    var_dt = sigma * sigma * dt
    sdt = sigma * math.sqrt(dt)
    rate = cfg.omega.rate
    n_steps = int(math.ceil(cfg.horizon_cap / dt))
    for _ in range(n_steps):
        if idx.size == 0:
            break
        m = idx.size
        new = pos + mu * dt + sdt * rng.standard_normal(m)
        acc = 0.5 * dt * (np.asarray(rate(pos)) + np.asarray(rate(new)))
        if thinning:
            dead = rng.random(m) >= np.exp(-acc)
        else:
            wt = wt * np.exp(-acc)
            dead = wt < _WEIGHT_FLOOR
        hit = new >= c
        pu = _bridge_cross_prob(pos, new, c, var_dt, upper=True)
        hit |= ~hit & (rng.random(m) < pu)
        resolve = hit & ~dead
        out[idx[resolve]] = 1.0 if thinning else wt[resolve]
        keep = ~(dead | hit)
        pos, wt, idx = new[keep], wt[keep], idx[keep]
    return out, idx.size


def _bm_reflected(cfg: SimConfig, x: float, c: float, dual: bool):
    """Skorokhod recursion for the reflected coordinate."""
    model = cfg.model
    mu, sigma = model.mu, model.sigma
    if sigma <= 0.0:
        raise ConfigError("Brownian engine needs sigma > 0")
    rng = _rng(cfg)
    thinning = cfg.estimator == "poisson_thinning"
    n = cfg.n_paths
    pos = np.full(n, float(x))
    wt = np.ones(n)
    idx = np.arange(n)
    out = np.zeros(n)
    dt = cfg.dt
    var_dt = sigma * sigma * dt
    sdt = sigma * math.sqrt(dt)
    rate = cfg.omega.rate
    n_steps = int(math.ceil(cfg.horizon_cap / dt))
    for _ in range(n_steps):
        if idx.size == 0:
            break
        m = idx.size
        raw = pos + mu * dt + sdt * rng.standard_normal(m)
        # Sample the running extremum of the free bridge and push by the
        # overshoot past the reflecting barrier: endpoint-only clipping
        # misses intra-step excursions and biases the passage time.
        lu = np.log1p(-rng.random(m))
        disc = np.sqrt((raw - pos) ** 2 - 2.0 * var_dt * lu)
        if dual:
            mx = 0.5 * (pos + raw + disc)
            new = raw - np.maximum(mx - c, 0.0)
            hit = new <= 0.0
            pb = _bridge_cross_prob(pos, raw, 0.0, var_dt, upper=False)
        else:
            mn = 0.5 * (pos + raw - disc)
            new = raw - np.minimum(mn, 0.0)
            hit = new >= c
            pb = _bridge_cross_prob(pos, raw, c, var_dt, upper=True)
        hit |= ~hit & (rng.random(m) < pb)
        acc = 0.5 * dt * (np.asarray(rate(pos)) + np.asarray(rate(new)))
        if thinning:
            dead = rng.random(m) >= np.exp(-acc)
        else:
            wt = wt * np.exp(-acc)
            dead = wt < _WEIGHT_FLOOR
        resolve = hit & ~dead
        out[idx[resolve]] = 1.0 if thinning else wt[resolve]
        keep = ~(dead | hit)
        pos, wt, idx = new[keep], wt[keep], idx[keep]
    return out, idx.size


# ---------------------------------------------------------------------------
# compound-Poisson-with-drift engine (exact paths)


def _drift_increment(omega: OmegaSpec, start, end, mu: float):
    """Exact killing integral along a linear traverse from start to end."""
    return (omega.cumulative(end) - omega.cumulative(start)) / mu


def _cl_two_sided(cfg: SimConfig, x: float, c: float, z: float):
    """Jump rounds: drift up to min(c, next jump time), then an exponential
    jump down.  The lower level can only be crossed by a jump (the drift is
    upward), so undershoots are exact."""
    mu, lam, rho = cfg.model.mu, cfg.model.vartheta, cfg.model.rho
    rng = _rng(cfg)
    thinning = cfg.estimator == "poisson_thinning"
    omega = cfg.omega
    n = cfg.n_paths
    pos = np.full(n, float(x))
    wt = np.ones(n)
    tel = np.zeros(n)
    idx = np.arange(n)
    up = np.zeros(n)
    lo_arr = np.zeros(n)
    truncated = 0
    while idx.size:
        m = idx.size
        e = rng.exponential(1.0 / lam, m) if lam > 0 else np.full(m, np.inf)
        t_reach = (c - pos) / mu
        reach = e >= t_reach
        seg_end = np.where(reach, c, pos + mu * e)
        acc = _drift_increment(omega, pos, seg_end, mu)
        if thinning:
            dead = rng.random(m) >= np.exp(-acc)
        else:
            wt = wt * np.exp(-acc)
            dead = wt < _WEIGHT_FLOOR
        resolve_up = reach & ~dead
        up[idx[resolve_up]] = 1.0 if thinning else wt[resolve_up]

        jumps = rng.exponential(1.0 / rho, m)
        new = seg_end - jumps
        hit_lo = ~reach & ~dead & (new < z)
        lo_arr[idx[hit_lo]] = 1.0 if thinning else wt[hit_lo]

        tel = tel + np.minimum(e, t_reach)
        over = tel >= cfg.horizon_cap
        keep = ~(dead | reach | hit_lo | over)
        truncated += int(np.sum(over & ~(dead | reach | hit_lo)))
        pos, wt, tel, idx = new[keep], wt[keep], tel[keep], idx[keep]
    return up, lo_arr, truncated


def _cl_reflected(cfg: SimConfig, x: float, c: float, dual: bool):
    mu, lam, rho = cfg.model.mu, cfg.model.vartheta, cfg.model.rho
    rng = _rng(cfg)
    thinning = cfg.estimator == "poisson_thinning"
    omega = cfg.omega
    n = cfg.n_paths
    pos = np.full(n, float(x))
    wt = np.ones(n)
    tel = np.zeros(n)
    idx = np.arange(n)
    out = np.zeros(n)
    rate_at_c = float(omega.rate(c))
    truncated = 0
    while idx.size:
        m = idx.size
        e = rng.exponential(1.0 / lam, m) if lam > 0 else np.full(m, np.inf)
        t_reach = (c - pos) / mu
        if dual:
            # drift up, pin at the barrier until the jump, then fall
            drift_end = np.where(e >= t_reach, c, pos + mu * e)
            acc = _drift_increment(omega, pos, drift_end, mu)
            pinned = np.clip(e - t_reach, 0.0, None)
            if rate_at_c > 0.0:
                acc = acc + rate_at_c * pinned
            if thinning:
                dead = rng.random(m) >= np.exp(-acc)
            else:
                wt = wt * np.exp(-acc)
                dead = wt < _WEIGHT_FLOOR
            jumps = rng.exponential(1.0 / rho, m)
            new = drift_end - jumps
            crossed = ~dead & (new < 0.0)
            out[idx[crossed]] = 1.0 if thinning else wt[crossed]
            tel = tel + np.where(np.isfinite(e), e, cfg.horizon_cap)
        else:
            # infimum reflection: downward jumps are truncated at zero
            reach = e >= t_reach
            seg_end = np.where(reach, c, pos + mu * e)
            acc = _drift_increment(omega, pos, seg_end, mu)
            if thinning:
                dead = rng.random(m) >= np.exp(-acc)
            else:
                wt = wt * np.exp(-acc)
                dead = wt < _WEIGHT_FLOOR
            crossed = reach & ~dead
            out[idx[crossed]] = 1.0 if thinning else wt[crossed]
            jumps = rng.exponential(1.0 / rho, m)
            new = np.maximum(seg_end - jumps, 0.0)
            tel = tel + np.minimum(e, t_reach)
        over = tel >= cfg.horizon_cap
        keep = ~(dead | crossed | over)
        truncated += int(np.sum(over & ~(dead | crossed)))
        pos, wt, tel, idx = new[keep], wt[keep], tel[keep], idx[keep]
    return out, truncated


# ---------------------------------------------------------------------------
# public entry points


def _dispatch_engine(cfg: SimConfig):
    if isinstance(cfg.model, BrownianDrift):
        return "bm"
    if isinstance(cfg.model, CramerLundberg):
        return "cl"
    raise UnsupportedModelError("path simulation needs an explicit model")


def simulate_exit(cfg: SimConfig, x: float, c: float, z: float = 0.0):
    """Joint estimates of the discounted two-sided exit quantities
    (reach c first, pass below z first) from the same paths."""
    if not z <= x <= c:
        raise ConfigError("need z <= x <= c")
    _check_thinning_window(cfg, z, c)
    t0 = time.perf_counter()
    if _dispatch_engine(cfg) == "bm":
        up, lo, trunc = _bm_two_sided(cfg, x, c, z)
    else:
        up, lo, trunc = _cl_two_sided(cfg, x, c, z)
    return _estimate(up, trunc, t0), _estimate(lo, trunc, t0)


def simulate_one_sided_up(cfg: SimConfig, x: float, c: float) -> MCEstimate:
    """Discounted first passage above c with no lower barrier."""
    if x > c:
        raise ConfigError("need x <= c")
    if cfg.omega.floor is None or cfg.omega.floor <= 0.0:
        raise ConfigError(
            "one-sided upward simulation needs a positive rate floor, "
            "otherwise deep excursions never resolve"
        )
    _check_thinning_window(cfg, -np.inf, c)
    t0 = time.perf_counter()
    if _dispatch_engine(cfg) == "bm":
        out, trunc = _bm_one_sided_up(cfg, x, c)
    else:
        out, _, trunc = _cl_two_sided(cfg, x, c, -np.inf)
    return _estimate(out, trunc, t0)


def simulate_reflected(cfg: SimConfig, x: float, c: float,
                       dual: bool = False) -> MCEstimate:
    """Discounted passage of the reflected coordinate.

    dual=False: reflection at the running infimum, stop on reaching c;
    x is the starting level.
    dual=True: reflection at c from above, stop on passing below zero;
    x is the starting distance below the barrier, so the path begins
    at level c - x.
    """
    if not 0.0 <= x <= c:
        raise ConfigError("need 0 <= x <= c")
    _check_thinning_window(cfg, 0.0, c)
    start = c - x if dual else x
    t0 = time.perf_counter()
    if _dispatch_engine(cfg) == "bm":
        out, trunc = _bm_reflected(cfg, start, c, dual)
    else:
        out, trunc = _cl_reflected(cfg, start, c, dual)
    return _estimate(out, trunc, t0)


def simulate_bankruptcy(cfg: SimConfig, gamma0: float, gamma1: float,
                        d: float, x: float) -> MCEstimate:
    """Probability that a linear-rate clock rings (or the level -d is hit)
    before the Brownian surplus escapes upward.

    Escape is declared at a high safe cut where the remaining risk is
    negligible; such paths count as survivors, not as truncations.
    """
    if not isinstance(cfg.model, BrownianDrift):
        raise UnsupportedModelError("the bankruptcy model is Brownian")
    if x < -d:
        raise ConfigError("start below the absorbing level")
    omega = LinearBandOmega(gamma0=gamma0, gamma1=gamma1, d=d)
    cfg = SimConfig(
        model=cfg.model, omega=omega, dt=cfg.dt, n_paths=cfg.n_paths,
        seed=cfg.seed, horizon_cap=cfg.horizon_cap, estimator=cfg.estimator,
    )
    _check_thinning_window(cfg, -d, _SAFE_UPPER)
    t0 = time.perf_counter()
    cut = max(_SAFE_UPPER, x + 1.0)
    survive, _, trunc = _bm_two_sided(cfg, x, cut, -d)
    est = _estimate(survive, trunc, t0)
    return MCEstimate(
        mean=1.0 - est.mean,
        stderr=est.stderr,
        n_effective=est.n_effective,
        elapsed=est.elapsed,
        truncated_fraction=est.truncated_fraction,
    )
