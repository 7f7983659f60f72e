import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosekinetic.collision import apply_L, dense_L
from bosekinetic.core import ConfigurationError, ModelParams, build_grid, inner_product
from bosekinetic.spectral import (DiscretizationError, build_kernel_basis, check_nonpositive,
                                  estimate_gap, fit_nu_bounds, k_singular_values,
                                  kernel_moments, kernel_residuals, nu_growth_exponent,
                                  operator_report, project, rayleigh_quotient,
                                  self_adjointness_defect, spectral_report, write_report)


def test_basis_orthonormal(small_basis):
    g = small_basis.grid
    V = small_basis.vectors
    G = np.real([[inner_product(u, v, g) for v in V] for u in V])
    assert np.allclose(G, np.eye(2), atol=1e-12)


def test_basis_directions(small_basis):
    g = small_basis.grid
    ok = g.a != 0
    ratio = small_basis.chi_x[ok] / (g.a * (1 + g.P))[ok]
    assert np.allclose(ratio, ratio[0])
    assert small_basis.kappa > 0


def test_kappa_definition(small_basis):
    g = small_basis.grid
    k = np.real(inner_product(g.a * small_basis.chi_2, small_basis.chi_x, g))
    assert small_basis.kappa == pytest.approx(k)


def test_degenerate_grid_rejected():
    g = build_grid(ModelParams(n_axial=1, n_radial=20))
    with pytest.raises(ConfigurationError):
        build_kernel_basis(g)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_projection_idempotent_and_orthogonal(small_basis, seed):
    g = small_basis.grid
    h = np.random.default_rng(seed).normal(size=(3, g.size))
    par, perp = project(h, small_basis)
    par2, perp2 = project(par, small_basis)
    assert np.allclose(par2, par) and np.allclose(perp2, 0, atol=1e-12)
    hx, h2 = kernel_moments(perp, small_basis)
    assert np.allclose(hx, 0, atol=1e-12) and np.allclose(h2, 0, atol=1e-12)
    assert np.allclose(par + perp, h)


def test_kernel_is_annihilated(small_tables, small_basis):
    lx, l2 = kernel_residuals(small_tables, small_basis)
    assert max(lx, l2) < 1e-10


def test_operator_checks(small_tables, small_basis):
    assert self_adjointness_defect(small_tables) < 1e-12
    rel = check_nonpositive(dense_L(small_tables), small_tables.grid)
    assert rel > -1e-10
    rep = operator_report(small_tables, small_basis)
    assert rep["passed"] and set(rep["checks"]) >= {"kernel", "self_adjoint", "nonpositive"}


def test_indefinite_operator_detected(small_tables):
    L = dense_L(small_tables) + 5.0 * np.eye(small_tables.grid.size)
    with pytest.raises(DiscretizationError):
        check_nonpositive(L, small_tables.grid)


def test_gap_positive_and_rayleigh_bound(small_tables, small_basis):
    c = estimate_gap(small_tables, small_basis)
    assert c > 0
    L = dense_L(small_tables)
    rng = np.random.default_rng(0)
    for _ in range(20):
        _, perp = project(rng.normal(size=small_tables.grid.size), small_basis)
        assert rayleigh_quotient(perp.real, L, small_tables.grid) >= c * (1 - 1e-9)


def test_nu_bounds_and_exponent(small_tables):
    nu0, nu1 = fit_nu_bounds(small_tables.grid, small_tables)
    assert 0 < nu0 <= nu1
    g = small_tables.grid
    synthetic = 2.0 * (1 + g.pabs) ** 3
    assert nu_growth_exponent(g, synthetic) == pytest.approx(3.0)
    with pytest.raises(DiscretizationError):
        fit_nu_bounds(g, type("T", (), {"nu": -small_tables.nu})())


def test_k_singular_values_finite(small_tables):
    s = k_singular_values(small_tables)
    assert np.all(np.isfinite(s)) and s[0] > 0 and np.all(np.diff(s) <= 1e-12)


def test_report_round_trip(tmp_path, small_tables, small_basis):
    rep = spectral_report(small_tables, small_basis)
    path = tmp_path / "r.json"
    write_report(rep, path)
    back = json.loads(path.read_text())
    assert back["c_hat"] == pytest.approx(rep["c_hat"])
    assert set(back) >= {"c_hat", "nu0_hat", "nu1_hat", "kappa", "grid"}


def test_kernel_vector_gives_zero_rayleigh(small_tables, small_basis):
    Lchi = apply_L(small_basis.chi_2, small_tables)
    assert np.abs(Lchi).max() < 1e-10 * np.abs(small_tables.nu).max()
