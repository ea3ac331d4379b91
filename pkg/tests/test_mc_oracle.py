"""Path-simulation oracle: determinism, exactness limits, concordance."""

import numpy as np
import pytest

import omegascale.classical_scale as cs
from omegascale import (
    BrownianDrift,
    ConstantOmega,
    ExponentialOmega,
    MCEstimate,
    SimConfig,
    simulate_bankruptcy,
    simulate_exit,
    simulate_one_sided_up,
    simulate_reflected,
)
from omegascale.closed_forms import OmegaModelSolution
from omegascale.errors import ConfigError, UnsupportedModelError

X, C = 0.8, 1.6


def fields(est: MCEstimate):
    return (est.mean, est.stderr, est.n_effective, est.truncated_fraction)


def test_deterministic_by_seed(cl, band):
    cfg = SimConfig(model=cl, omega=band, n_paths=2000, seed=5)
    a_up, a_lo = simulate_exit(cfg, X, C)
    b_up, b_lo = simulate_exit(cfg, X, C)
    assert fields(a_up) == fields(b_up)
    assert fields(a_lo) == fields(b_lo)
    c_up, _ = simulate_exit(SimConfig(model=cl, omega=band, n_paths=2000, seed=6), X, C)
    assert c_up.mean != a_up.mean


def test_zero_rate_exits_are_complementary(bm, cl):
    om = ConstantOmega(q=0.0)
    for model, n in ((cl, 4000), (bm, 1500)):
        for estimator in ("exponential_weight", "poisson_thinning"):
            cfg = SimConfig(model=model, omega=om, n_paths=n, seed=3,
                            dt=2e-3, estimator=estimator)
            up, lo = simulate_exit(cfg, X, C)
            assert up.mean + lo.mean == 1.0
            assert up.truncated_fraction == 0.0


def test_zero_rate_matches_classical_probability(cl):
    om = ConstantOmega(q=0.0)
    cfg = SimConfig(model=cl, omega=om, n_paths=20000, seed=4)
    up, _ = simulate_exit(cfg, X, C)
    ref = float(np.asarray(cs.w_q(cl, 0.0, X)) / np.asarray(cs.w_q(cl, 0.0, C)))
    assert abs(up.mean - ref) <= 4.0 * up.stderr


def test_estimators_agree(cl, band):
    a = simulate_exit(SimConfig(model=cl, omega=band, n_paths=20000, seed=2,
                                estimator="exponential_weight"), X, C)[0]
    b = simulate_exit(SimConfig(model=cl, omega=band, n_paths=20000, seed=9,
                                estimator="poisson_thinning"), X, C)[0]
    joint = np.hypot(a.stderr, b.stderr)
    assert abs(a.mean - b.mean) <= 4.0 * joint
    assert b.stderr > a.stderr  # thinning discards the integrated-out mass


def test_exit_concordance_constant_rate(cl):
    q = 0.5
    om = ConstantOmega(q=q)
    cfg = SimConfig(model=cl, omega=om, n_paths=20000, seed=11)
    up, lo = simulate_exit(cfg, X, C)
    wa = float(np.asarray(cs.w_q(cl, q, X)) / np.asarray(cs.w_q(cl, q, C)))
    wb = float(
        np.asarray(cs.z_q(cl, q, X))
        - np.asarray(cs.w_q(cl, q, X))
        * np.asarray(cs.z_q(cl, q, C))
        / np.asarray(cs.w_q(cl, q, C))
    )
    assert abs(up.mean - wa) <= 4.0 * up.stderr
    assert abs(lo.mean - wb) <= 4.0 * lo.stderr


def test_one_sided_up_concordance(cl, band):
    from omegascale import one_sided_up

    cfg = SimConfig(model=cl, omega=band, n_paths=20000, seed=7)
    est = simulate_one_sided_up(cfg, 0.9, C)
    ref = one_sided_up(cl, band, 0.9, C, h=2e-3)
    assert abs(est.mean - ref) <= 4.0 * est.stderr


def test_reflected_zero_rate_is_certain(bm, cl):
    om = ConstantOmega(q=0.0)
    est = simulate_reflected(SimConfig(model=cl, omega=om, n_paths=1500, seed=8),
                             0.7, C, dual=False)
    assert est.mean == 1.0
    est = simulate_reflected(SimConfig(model=cl, omega=om, n_paths=1500, seed=8),
                             0.7, C, dual=True)
    assert est.mean == 1.0
    est = simulate_reflected(SimConfig(model=bm, omega=om, n_paths=400, seed=8,
                                       dt=2e-3), 0.7, C, dual=False)
    assert est.mean == 1.0


def test_truncation_flags_estimate(cl, band):
    cfg = SimConfig(model=cl, omega=band, n_paths=1000, seed=1, horizon_cap=0.05)
    up, lo = simulate_exit(cfg, X, C)
    assert up.truncated_fraction > 0.01
    assert up.flagged
    assert up.n_effective < 1000


def test_bankruptcy_concordance():
    model = BrownianDrift(mu=1.0, sigma=1.0)
    ref = OmegaModelSolution(0.2, 0.5, 1.0, 1.0, 1.0).varphi(0.5)
    cfg = SimConfig(model=model, omega=ConstantOmega(q=0.0), n_paths=4000,
                    seed=3, dt=2e-3)
    est = simulate_bankruptcy(cfg, 0.2, 0.5, 1.0, 0.5)
    assert abs(est.mean - ref) <= 4.0 * est.stderr
    assert est.stderr > 0.0


def test_validation_errors(bm, cl, band):
    with pytest.raises(ConfigError):
        SimConfig(model=cl, omega=band, dt=-1.0)
    with pytest.raises(ConfigError):
        SimConfig(model=cl, omega=band, estimator="importance")
    cfg = SimConfig(model=cl, omega=band, n_paths=100)
    with pytest.raises(ConfigError):
        simulate_exit(cfg, 2.0, 1.0)
    with pytest.raises(ConfigError):
        simulate_reflected(cfg, -0.1, 1.0)
    with pytest.raises(ConfigError):
        simulate_one_sided_up(
            SimConfig(model=cl, omega=ConstantOmega(q=0.0), n_paths=100), 0.5, 1.0
        )
    with pytest.raises(ConfigError):
        simulate_one_sided_up(
            SimConfig(model=cl, omega=ExponentialOmega(varrho=0.7, xi=1.0),
                      n_paths=100), 0.5, 1.0
        )
    with pytest.raises(UnsupportedModelError):
        simulate_bankruptcy(cfg, 0.2, 0.5, 1.0, 0.5)
    with pytest.raises(ConfigError):
        simulate_bankruptcy(
            SimConfig(model=bm, omega=band, n_paths=100), 0.2, 0.5, 1.0, -2.0
        )


def test_tabulated_model_rejected(band):
    from omegascale.classical_scale import ScaleTable
    from omegascale.levy_model import Tabulated

    xs = np.linspace(0.0, 2.0, 21)
    table = ScaleTable(q=0.5, x=xs, w=np.exp(xs), z=np.cosh(xs), wprime=np.exp(xs))
    model = Tabulated(table, phi_grid=np.array([0.0, 1.0]),
                      phi_values=np.array([0.0, 1.0]))
    with pytest.raises(UnsupportedModelError):
        simulate_exit(SimConfig(model=model, omega=band, n_paths=10), 0.5, 1.0)
