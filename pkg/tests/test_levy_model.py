"""Laplace exponents and their right inverse."""

import numpy as np
import pytest

from omegascale import (
    BrownianDrift,
    CramerLundberg,
    Tabulated,
    phi_inverse,
    phi_prime,
    psi,
    psi_prime,
)
from omegascale.classical_scale import ScaleTable
from omegascale.errors import DomainError, UnsupportedModelError


def test_psi_brownian_formula(bm):
    th = np.linspace(0.0, 5.0, 11)
    assert np.allclose(psi(bm, th), 0.5 * bm.sigma**2 * th**2 + bm.mu * th, rtol=1e-15)


def test_psi_cl_formula(cl):
    th = np.linspace(0.0, 5.0, 11)
    ref = cl.mu * th * (th + cl.varsigma) / (th + cl.rho)
    assert np.allclose(psi(cl, th), ref, rtol=1e-15)


def test_psi_prime_matches_finite_difference(bm, cl):
    eps = 1e-6
    for model in (bm, cl):
        for th in (0.1, 1.0, 4.0):
            fd = (psi(model, th + eps) - psi(model, th - eps)) / (2.0 * eps)
            assert abs(psi_prime(model, th) - fd) < 1e-7


def test_psi_convexity(bm, cl):
    for model in (bm, cl):
        s = np.linspace(0.0, 8.0, 33)
        mid = psi(model, 0.5 * (s[:-1] + s[1:]))
        assert np.all(mid <= 0.5 * (psi(model, s[:-1]) + psi(model, s[1:])) + 1e-12)


def test_phi_inverse_residual_100_random(bm, cl):
    rng = np.random.default_rng(42)
    qs = rng.uniform(0.0, 100.0, 100) + 1e-12
    for model in (bm, cl):
        for q in qs:
            s = phi_inverse(model, float(q))
            assert abs(psi(model, s) - q) <= 1e-12 * max(1.0, q)


def test_phi_inverse_monotone(bm, cl):
    qs = np.linspace(0.0, 20.0, 41)
    for model in (bm, cl):
        vals = [phi_inverse(model, float(q)) for q in qs]
        assert np.all(np.diff(vals) >= 0.0)


def test_phi_at_zero(bm, cl):
    # non-negative drift: largest root of psi is the origin
    assert phi_inverse(bm, 0.0) == 0.0
    assert phi_inverse(cl, 0.0) == 0.0
    # negative effective drift: strictly positive root
    heavy = CramerLundberg(mu=1.0, vartheta=2.0, rho=1.5)
    root = phi_inverse(heavy, 0.0)
    assert root > 0.0
    assert abs(psi(heavy, root)) < 1e-12
    sinking = BrownianDrift(mu=-0.5, sigma=1.0)
    assert abs(phi_inverse(sinking, 0.0) - 1.0) < 1e-12


def test_phi_prime_is_inverse_derivative(bm, cl):
    eps = 1e-6
    for model in (bm, cl):
        for q in (0.3, 2.0, 9.0):
            fd = (phi_inverse(model, q + eps) - phi_inverse(model, q - eps)) / (2 * eps)
            assert abs(phi_prime(model, q) - fd) < 1e-6


def test_domain_validation():
    with pytest.raises(DomainError):
        BrownianDrift(mu=1.0, sigma=-1.0)
    with pytest.raises(DomainError):
        BrownianDrift(mu=-1.0, sigma=0.0)
    with pytest.raises(DomainError):
        CramerLundberg(mu=0.0, vartheta=1.0, rho=1.0)
    with pytest.raises(DomainError):
        psi(BrownianDrift(mu=1.0, sigma=1.0), -0.1)
    with pytest.raises(DomainError):
        phi_inverse(BrownianDrift(mu=1.0, sigma=1.0), -0.1)


def _toy_tabulated():
    table = ScaleTable(
        q=0.5,
        x=np.array([0.0, 1.0, 2.0]),
        w=np.array([0.0, 0.5, 1.0]),
        z=np.array([1.0, 1.2, 1.5]),
        wprime=np.array([0.5, 0.5, 0.5]),
        meta={},
    )
    return Tabulated(
        scale_table=table,
        phi_grid=np.array([0.0, 1.0, 2.0]),
        phi_values=np.array([0.0, 0.6, 1.0]),
    )


def test_tabulated_phi_interpolation_and_limits():
    model = _toy_tabulated()
    assert phi_inverse(model, 0.5) == pytest.approx(0.3)
    with pytest.raises(DomainError):
        phi_inverse(model, 3.0)
    with pytest.raises(UnsupportedModelError):
        psi(model, 1.0)
    with pytest.raises(UnsupportedModelError):
        psi_prime(model, 1.0)


def test_tabulated_validates_tables():
    table = _toy_tabulated().scale_table
    with pytest.raises(DomainError):
        Tabulated(
            scale_table=table,
            phi_grid=np.array([0.0, 1.0, 0.5]),
            phi_values=np.array([0.0, 0.5, 1.0]),
        )
    with pytest.raises(DomainError):
        Tabulated(
            scale_table=table,
            phi_grid=np.array([0.0, 1.0]),
            phi_values=np.array([0.0, 0.5, 1.0]),
        )
