"""Classical q-scale functions against their defining Laplace transform."""

import numpy as np
import pytest

import omegascale.classical_scale as cs
from omegascale import (
    BrownianDrift,
    CramerLundberg,
    Tabulated,
    build_scale_table,
    load_phi_table,
    load_scale_table,
    phi_inverse,
    psi,
    w_atom,
    w_q,
    w_q_prime,
    z_q,
)
from omegascale.errors import ConfigError, DomainError, UnsupportedModelError


def laplace_transform(model, q, theta, x_cut=200.0, n=400001):
    """Dense quadrature of int_0^inf e^{-theta x} W^(q)(x) dx."""
    x = np.linspace(0.0, x_cut, n)
    vals = np.exp(-theta * x) * np.asarray(w_q(model, q, x))
    return np.trapezoid(vals, x)


@pytest.mark.parametrize("q", [0.0, 0.5, 6.0])
def test_w_laplace_transform_bm(bm, q):
    for theta in (phi_inverse(bm, q) + 0.5, phi_inverse(bm, q) + 2.0):
        ref = 1.0 / (psi(bm, theta) - q)
        assert abs(laplace_transform(bm, q, theta) - ref) < 1e-8


@pytest.mark.parametrize("q", [0.0, 0.5, 6.0])
def test_w_laplace_transform_cl(cl, q):
    for theta in (phi_inverse(cl, q) + 0.5, phi_inverse(cl, q) + 2.0):
        ref = 1.0 / (psi(cl, theta) - q)
        assert abs(laplace_transform(cl, q, theta) - ref) < 1e-8


def test_z_is_one_plus_q_times_integral(bm, cl):
    for model in (bm, cl):
        for q in (0.5, 3.0):
            x = np.linspace(0.0, 2.0, 20001)
            w = np.asarray(w_q(model, q, x))
            z_ref = 1.0 + q * np.concatenate(
                ([0.0], np.cumsum(0.5 * np.diff(x) * (w[1:] + w[:-1])))
            )
            assert np.max(np.abs(np.asarray(z_q(model, q, x)) - z_ref)) < 1e-7


def test_boundary_values(bm, cl):
    assert w_q(bm, 1.0, 0.0) == 0.0
    assert abs(w_q(cl, 1.0, 0.0) - 1.0 / cl.mu) < 1e-15
    assert z_q(bm, 1.0, 0.0) == 1.0
    assert z_q(cl, 1.0, 0.0) == 1.0
    assert w_q(bm, 1.0, -0.5) == 0.0
    assert z_q(bm, 1.0, -0.5) == 1.0


def test_w_atom_values(bm, cl):
    assert w_atom(bm, 0.0) == 0.0
    assert w_atom(cl, 0.0) == pytest.approx(1.0 / cl.mu)
    assert w_atom(BrownianDrift(mu=2.0, sigma=0.0), 0.0) == pytest.approx(0.5)


def test_w_prime_matches_finite_difference(bm, cl):
    eps = 1e-6
    for model in (bm, cl):
        for q in (0.5, 4.0):
            for x in (0.3, 1.1, 2.0):
                fd = (w_q(model, q, x + eps) - w_q(model, q, x - eps)) / (2 * eps)
                assert abs(w_q_prime(model, q, x) - fd) < 1e-7
    with pytest.raises(DomainError):
        w_q_prime(bm, 0.5, -0.1)


def test_confluent_cl_branch():
    # parameters tuned so the two partial-fraction roots coincide
    model = CramerLundberg(mu=1.0, vartheta=1.0, rho=1.0)
    b = model.varsigma
    q_star = -b * b * model.mu / (4.0 * model.rho) if b < 0 else 0.0
    # nudge q to the exact double-root location: varsigma=0 puts it at q=0+
    x = np.linspace(0.0, 2.0, 5)
    w0 = np.asarray(w_q(model, q_star, x))
    w_eps = np.asarray(w_q(model, q_star + 1e-12, x))
    assert np.max(np.abs(w0 - w_eps)) < 1e-6


def test_driftless_bm_linear():
    model = BrownianDrift(mu=0.0, sigma=2.0)
    x = np.linspace(0.0, 3.0, 7)
    assert np.allclose(w_q(model, 0.0, x), 2.0 * x / model.sigma**2, rtol=1e-14)


def test_degenerate_pure_drift():
    model = BrownianDrift(mu=2.0, sigma=0.0)
    # pure drift: W^(q)(x) = e^{q x / mu} / mu
    x = np.linspace(0.0, 2.0, 5)
    assert np.allclose(w_q(model, 0.8, x), np.exp(0.8 * x / 2.0) / 2.0, rtol=1e-13)


def test_scale_table_round_trip(tmp_path, bm):
    table = build_scale_table(bm, 0.5, 2.0, 0.01)
    path = tmp_path / "scale.csv"
    with open(path, "w") as fh:
        fh.write("x,w,z,wprime\n")
        for row in zip(table.x, table.w, table.z, table.wprime):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    loaded = load_scale_table(str(path), q=0.5)
    assert np.allclose(loaded.w, table.w, rtol=1e-15)
    assert np.allclose(loaded.z, table.z, rtol=1e-15)
    x = np.linspace(0.0, 2.0, 41)
    model = Tabulated(
        scale_table=loaded,
        phi_grid=np.array([0.0, 0.5, 1.0]),
        phi_values=np.array([phi_inverse(bm, v) for v in (0.0, 0.5, 1.0)]),
    )
    assert np.max(np.abs(np.asarray(w_q(model, 0.5, x)) - np.asarray(w_q(bm, 0.5, x)))) < 1e-5
    with pytest.raises(UnsupportedModelError):
        w_q(model, 0.7, 1.0)
    with pytest.raises(DomainError):
        w_q(model, 0.5, 3.0)


def test_phi_table_round_trip(tmp_path, bm):
    path = tmp_path / "phi.csv"
    qs = np.linspace(0.0, 2.0, 21)
    with open(path, "w") as fh:
        fh.write("q,phi\n")
        for q in qs:
            fh.write(f"{q:.17g},{phi_inverse(bm, q):.17g}\n")
    grid, values = load_phi_table(str(path))
    assert np.allclose(grid, qs)
    assert abs(np.interp(0.5, grid, values) - phi_inverse(bm, 0.5)) < 1e-4


def test_load_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,w,z\n0,0,1\n")
    with pytest.raises(ConfigError):
        load_scale_table(str(path), q=0.5)


def test_scale_table_validation():
    x = np.linspace(0.0, 1.0, 11)
    good = dict(q=0.5, x=x, w=x.copy(), z=1.0 + x, wprime=np.ones_like(x))
    cs.ScaleTable(**good)
    with pytest.raises(ConfigError):
        cs.ScaleTable(**{**good, "x": x + 0.5})
    with pytest.raises(ConfigError):
        cs.ScaleTable(**{**good, "w": -x})
    with pytest.raises(ConfigError):
        cs.ScaleTable(**{**good, "z": x.copy()})
    with pytest.raises(ConfigError):
        cs.ScaleTable(**{**good, "x": x**2})
