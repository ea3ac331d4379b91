"""Generic omega-scale solves against closed forms and structural properties."""

import numpy as np
import pytest

import omegascale.classical_scale as cs
import omegascale.closed_forms as cf
from omegascale import (
    BandOmega,
    ConstantOmega,
    ExponentialOmega,
    Grid,
    StepOmega,
    TableOmega,
    build_h_omega,
    build_two_arg,
    build_w_omega,
    convergence_order,
    derivative_via_convolution,
    derivatives,
    limit_constants,
    one_sided_down,
    phi_inverse,
    two_arg_panel,
)
from omegascale.errors import ConfigError, DomainError

H = 2e-3
P, Q, A, B = 0.3, 1.0, 0.5, 1.2


def max_rel(got, ref, floor=1e-9):
    got, ref = np.asarray(got), np.asarray(ref)
    return float(np.max(np.abs(got - ref) / np.maximum(np.abs(ref), floor)))


def test_constant_rate_reduces_to_classical(bm, cl):
    # the shift absorbs a constant rate exactly: the quadrature weight
    # vanishes and the solve returns the closed form to the last bit
    for model in (bm, cl):
        table = build_w_omega(model, ConstantOmega(q=0.7), Grid(2.0, H))
        assert np.max(np.abs(table.w - np.asarray(cs.w_q(model, 0.7, table.x)))) < 1e-13
        assert np.max(np.abs(table.z - np.asarray(cs.z_q(model, 0.7, table.x)))) < 1e-13
        assert table.delta == 0.7


def test_zero_rate_gives_w_and_one(bm):
    table = build_w_omega(bm, ConstantOmega(q=0.0), Grid(1.0, H))
    assert np.allclose(table.w, np.asarray(cs.w_q(bm, 0.0, table.x)), atol=1e-14)
    assert np.allclose(table.z, 1.0, atol=1e-14)


def test_band_rate_matches_composite_forms(bm, cl, band):
    for model in (bm, cl):
        wmix = cf.band_w_composite_mix(model, P, Q, A, B)
        zmix = cf.band_z_composite_mix(model, P, Q, A, B)
        table = build_w_omega(model, band, Grid(2.5, H))
        assert max_rel(table.w, wmix(table.x)) < 2e-6
        assert max_rel(table.z, zmix(table.x)) < 2e-6


def test_h_function_matches_composite(bm, cl, band):
    for model in (bm, cl):
        hmix = cf.band_h_composite_mix(model, P, Q, B, a=A)
        table = build_h_omega(model, band, Grid(2.5, H))
        assert max_rel(table.h, hmix(table.x)) < 2e-6


def test_h_constant_rate_is_exponential(bm):
    table = build_h_omega(bm, ConstantOmega(q=0.8), Grid(2.0, H))
    root = phi_inverse(bm, 0.8)
    assert np.max(np.abs(table.h - np.exp(root * table.x))) < 1e-12
    # left extension continues the same exponential
    assert table.h_omega(-0.5) == pytest.approx(np.exp(-0.5 * root), rel=1e-12)


def test_two_arg_matches_closed_form(bm, cl, band):
    for model in (bm, cl):
        for y in (0.7, -0.6):
            two = build_two_arg(model, band, y, Grid(2.0, H))
            mix = cf.band_two_arg_mix(model, P, Q, B, y, a=A)
            xs = y + np.linspace(0.0, 2.0, 41)
            assert max_rel(two.w(xs), mix(xs), floor=1e-7) < 5e-6


def test_two_arg_constant_rate_translates(bm):
    two = build_two_arg(bm, ConstantOmega(q=0.5), 0.4, Grid(1.5, H))
    xs = 0.4 + np.linspace(0.0, 1.5, 31)
    assert np.max(np.abs(np.asarray(two.w(xs)) - np.asarray(cs.w_q(bm, 0.5, xs - 0.4)))) < 1e-13
    assert two.w(0.1) == 0.0
    assert two.z(0.1) == 1.0


def test_panel_matches_column_solves(cl, band):
    grid = Grid(2.0, H)
    ys = np.array([0.0, 0.25, 0.8, 1.3])
    panel = two_arg_panel(cl, band, grid, ys)
    for j, y in enumerate(panel.ys):
        two = build_two_arg(cl, band, float(y), Grid(2.0 - float(y), H)) if y > 0 \
            else build_two_arg(cl, band, float(y), grid)
        mask = panel.x >= y - 1e-12
        ref = np.asarray(two.w(panel.x[mask]))
        assert np.max(np.abs(panel.w_matrix[mask, j] - ref)) < 5e-6


def test_panel_snaps_columns_to_nodes(bm, band):
    panel = two_arg_panel(bm, band, Grid(1.0, H), np.array([0.1234567]))
    assert panel.ys[0] in panel.x
    assert abs(panel.ys[0] - 0.1234567) <= H


def test_panel_column_cap(bm, band):
    with pytest.raises(ConfigError):
        two_arg_panel(bm, band, Grid(1.0, H), np.zeros(500), max_columns=100)


def test_monotone_in_rate(bm, cl):
    rng = np.random.default_rng(7)
    grid = Grid(1.5, 5e-3)
    for model in (bm, cl):
        for _ in range(10):
            base = rng.uniform(0.0, 1.5, 3)
            bump = rng.uniform(0.0, 1.0, 3)
            thresholds = np.sort(rng.uniform(0.1, 1.4, 2))
            lo = StepOmega(levels=tuple(base), thresholds=tuple(thresholds))
            hi = StepOmega(levels=tuple(base + bump), thresholds=tuple(thresholds))
            shared = min(lo.inf_on(0.0, 1.5), hi.inf_on(0.0, 1.5))
            t_lo = build_w_omega(model, lo, grid, delta=shared)
            t_hi = build_w_omega(model, hi, grid, delta=shared)
            assert np.all(t_hi.w - t_lo.w >= -1e-12)
            assert np.all(t_hi.z - t_lo.z >= -1e-12)


def test_w_dominates_classical(bm, band):
    table = build_w_omega(bm, band, Grid(2.0, H))
    assert np.all(table.w >= np.asarray(cs.w_q(bm, 0.0, table.x)) - 1e-12)
    assert np.all(np.diff(table.w) >= -1e-12)
    assert np.all(table.z >= 1.0 - 1e-12)
    assert np.all(np.diff(table.z) >= -1e-12)


def test_defining_equation_residual(bm, band):
    # plug the solution back into its renewal equation with an independent
    # dense trapezoid; one-sided rate limits around the band edges
    table = build_w_omega(bm, band, Grid(2.0, 1e-3))
    wmix = cs.w_mix(bm, table.delta)
    x_chk = np.array([0.3, 0.8, 1.5, 2.0])
    for xv in x_chk:
        y = np.union1d(np.linspace(0.0, xv, 4001), [b for b in (A, B) if b < xv])
        vals = np.asarray(table.w_omega(y)) * np.asarray(wmix(xv - y))
        fr = (np.asarray(band.rate_right(y)) - table.delta) * vals
        fl = (np.asarray(band.rate_left(y)) - table.delta) * vals
        integral = float(np.sum(0.5 * np.diff(y) * (fr[:-1] + fl[1:])))
        residual = float(table.w_omega(xv)) - float(wmix(xv)) - integral
        assert abs(residual) < 1e-4


def test_shift_invariance(bm, band):
    # building with delta = 0 and delta = inf omega must agree
    t0 = build_w_omega(bm, band, Grid(2.0, 1e-3), delta=0.0)
    t1 = build_w_omega(bm, band, Grid(2.0, 1e-3))
    assert t1.delta == pytest.approx(P)
    assert np.max(np.abs(t0.w - t1.w)) < 5e-6
    assert np.max(np.abs(t0.z - t1.z)) < 5e-6


def test_derivative_columns(bm, band):
    table = derivatives(build_w_omega(bm, ConstantOmega(q=0.5), Grid(2.0, 1e-3)))
    ref = np.asarray(cs.w_q_prime(bm, 0.5, table.x))
    assert np.max(np.abs(table.w_prime - ref)) < 1e-4
    flat = derivatives(build_w_omega(bm, ConstantOmega(q=0.0), Grid(1.0, 1e-3)))
    assert np.max(np.abs(flat.z_prime)) < 1e-12
    # independent quadrature route for the band rate
    tb = derivatives(build_w_omega(bm, band, Grid(2.0, 1e-3)))
    for xv in (0.8, 1.5):
        conv = derivative_via_convolution(bm, band, tb, xv, which="z")
        fd = float(tb.z_omega_prime(xv))
        assert abs(conv - fd) < 5e-4


def test_convergence_order(bm, cl, band):
    smooth = ExponentialOmega(varrho=0.7, xi=1.0)
    assert convergence_order(bm, smooth, Grid(1.5, 4e-3)) > 1.8
    assert convergence_order(cl, band, Grid(1.5, 4e-3)) > 0.9


def test_limit_constants_examples(bm):
    # vanishing rate: 1/W(inf) equals the drift
    lim0 = limit_constants(bm, ConstantOmega(q=0.0))
    assert lim0.converged
    assert lim0.w_inv_limit == pytest.approx(bm.mu, abs=1e-6)
    # constant positive rate: both limits settle, the first near zero
    q = 0.5
    limq = limit_constants(bm, ConstantOmega(q=q))
    assert limq.converged
    assert limq.w_inv_limit < 1e-8
    assert limq.z_over_w_limit == pytest.approx(q / phi_inverse(bm, q), rel=1e-6)
    # integrable rate with upward drift: survival keeps positive mass
    lime = limit_constants(bm, ExponentialOmega(varrho=0.7, xi=1.0))
    assert lime.converged
    assert lime.w_inv_limit > 0.1


def test_one_sided_down_classical_values(bm):
    res = one_sided_down(bm, ConstantOmega(q=0.0), 0.8)
    assert res.survive == pytest.approx(1.0 - np.exp(-0.8), abs=1e-6)
    assert res.ruin == pytest.approx(np.exp(-0.8), abs=1e-6)
    q = 0.5
    rq = one_sided_down(bm, ConstantOmega(q=q), 0.8)
    ref = float(cs.z_q(bm, q, 0.8)) - q / phi_inverse(bm, q) * float(cs.w_q(bm, q, 0.8))
    assert rq.ruin == pytest.approx(ref, abs=1e-6)
    assert rq.survive < 1e-8


def test_table_window_and_extensions(bm, band):
    table = build_w_omega(bm, band, Grid(1.0, H))
    assert table.w_omega(-1.0) == 0.0
    assert table.z_omega(-1.0) == 1.0
    with pytest.raises(DomainError):
        table.w_omega(1.5)
    with pytest.raises(DomainError):
        table.h_omega(0.5)  # h column was not built


def test_omega_spec_semantics():
    band = BandOmega(p=0.3, q=1.0, a=0.5, b=1.2)
    assert band.rate(0.4) == 0.3 and band.rate(0.6) == 1.3
    assert band.rate_right(0.5) == 1.3 and band.rate_left(0.5) == 0.3
    assert band.rate_right(1.2) == 0.3 and band.rate_left(1.2) == 1.3
    assert band.floor == 0.3 and band.ceiling == (0.3, 1.2)
    assert band.cumulative(2.0) == pytest.approx(0.3 * 2.0 + 1.0 * 0.7)
    step = StepOmega(levels=(0.2, 0.8, 0.4), thresholds=(0.5, 1.0))
    assert step.rate(0.4) == 0.2 and step.rate(0.7) == 0.8 and step.rate(1.5) == 0.4
    assert step.floor == 0.2 and step.ceiling == (0.4, 1.0)
    assert step.cumulative(1.2) == pytest.approx(0.2 * 0.5 + 0.8 * 0.5 + 0.4 * 0.2)
    tab = TableOmega(x=(0.0, 1.0), values=(0.5, 1.5), floor_value=0.5)
    assert tab.rate(0.5) == 0.5 and tab.rate(1.1) == 1.5
    assert tab.floor == 0.5
    with pytest.raises(ConfigError):
        BandOmega(p=0.3, q=1.0, a=1.2, b=0.5)
    with pytest.raises(ConfigError):
        ConstantOmega(q=-1.0)


def test_inf_sup_on_window(band):
    assert band.inf_on(0.0, 2.0) == pytest.approx(0.3)
    assert band.sup_on(0.0, 2.0) == pytest.approx(1.3)
    assert band.inf_on(0.6, 1.1) == pytest.approx(1.3)
