import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosekinetic.core import (ConfigurationError, KineticField, ModelParams, WaveField,
                              admissible_area, build_grid, collocation_size, hermitian_part,
                              inner_product, mirror_hermitian, norms, planckian,
                              real_to_modes, real_to_physical, to_modes, to_physical,
                              wavenumbers)


def test_default_energy_shift():
    p = ModelParams(g=2.0, n0=0.05)
    assert p.e0 == pytest.approx(0.1)
    assert p.shift == pytest.approx(0.1)
    assert p.lam == pytest.approx(p.gamma**2)
    assert p.zeta == pytest.approx(p.c_zeta * p.gamma)


@pytest.mark.parametrize("kw", [
    dict(gamma=0.0), dict(gamma=1.0), dict(g=-1.0), dict(n0=0.0), dict(c_zeta=0.0),
    dict(Lambda_cut=0.5),  # needs Lambda > 2 sqrt(g n0)
    dict(p_max=1.2),  # needs p_max^2 > 2 Lambda^2
    dict(n_axial=0),
])
def test_parameter_validation(kw):
    with pytest.raises(ConfigurationError):
        ModelParams(**kw)


def test_lattice_needs_odd_axial_resolution():
    with pytest.raises(ConfigurationError):
        build_grid(ModelParams(n_axial=24))
    build_grid(ModelParams(n_axial=24, lattice=False))


def test_planckian_is_bose_occupation():
    e = np.array([0.1, 1.0, 5.0])
    assert np.allclose(planckian(e), 1.0 / np.expm1(e))


def test_grid_nodes_admissible(small_grid):
    g = small_grid
    p = g.params
    assert np.all(g.u >= 0)
    assert np.all(g.p2 >= 2 * p.Lambda_cut**2 - 1e-12)
    assert np.all(g.p2 <= p.p_max**2 + 1e-12)
    assert np.all(g.weights > 0)
    assert np.allclose(g.weight_fn, g.P / (1 + g.P))
    assert g.index[g.ia, g.iu].tolist() == list(range(g.size))


def test_grid_is_axially_symmetric(small_grid):
    g = small_grid
    pairs = {(round(a, 12), round(u, 12)) for a, u in zip(g.a, g.u)}
    assert all((round(-a, 12), round(u, 12)) in pairs for a, u in pairs)


def test_midpoint_weight_sum_approximates_area():
    p = ModelParams(n_axial=200, n_radial=200, lattice=False)
    g = build_grid(p)
    exact = math.pi * admissible_area(p.Lambda_cut, p.p_max)
    assert abs(g.weights.sum() - exact) / exact < 1e-3


def test_lattice_weight_sum_converges():
    exact = math.pi * admissible_area(1.0, 3.0)
    errs = [abs(build_grid(ModelParams(n_axial=na)).weights.sum() - exact) / exact
            for na in (25, 51)]
    assert errs[1] < 0.05 and errs[1] < errs[0]


def test_mass_constant(small_grid):
    g = small_grid
    assert g.M0 == pytest.approx(np.sum(g.weights * g.P) + g.params.n0)
    assert g.U_ext == pytest.approx(g.params.g * (g.params.n0 - 2 * g.M0))


def test_collocation_size_dealiases():
    for K in range(0, 8):
        M = collocation_size(K)
        assert M % 2 == 0 and M >= 1.5 * (2 * K + 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(0, 10_000))
def test_fourier_round_trip(K, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=2 * K + 1) + 1j * rng.normal(size=2 * K + 1)
    M = collocation_size(K)
    assert np.allclose(to_modes(to_physical(c, M), K), c)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5), st.integers(0, 10_000))
def test_real_transforms_keep_hermitian_symmetry(K, seed):
    rng = np.random.default_rng(seed)
    M = collocation_size(K)
    vals = rng.normal(size=(M, 3))
    modes = real_to_modes(vals, K)
    assert np.array_equal(modes[::-1], np.conj(modes))
    back = real_to_physical(modes, M)
    assert np.allclose(to_modes(back, K), modes)


def test_physical_samples_of_single_mode():
    K, M = 2, 8
    c = np.zeros(2 * K + 1, complex)
    c[K + 1] = 1.0
    x = 2 * np.pi * np.arange(M) / M
    assert np.allclose(to_physical(c, M), np.exp(1j * x))
    with pytest.raises(ValueError):
        to_physical(c, 4)


def test_mirror_and_hermitian_part():
    pos = np.array([1 + 2j, 3 - 1j, 0.5j])
    full = mirror_hermitian(pos)
    assert full[2] == 1.0 and full[0] == -0.5j and full[1] == 3 + 1j
    m = np.random.default_rng(0).normal(size=(5, 4)) + 1j
    h = hermitian_part(m)
    assert np.allclose(h[::-1], np.conj(h))
    assert np.allclose(hermitian_part(h), h)


def test_inner_product_is_weighted(small_grid):
    g = small_grid
    f = np.ones(g.size)
    assert inner_product(f, f, g) == pytest.approx(np.sum(g.weights * g.weight_fn))
    with pytest.raises(ValueError):
        inner_product(np.ones(3), np.ones(3), g)


def test_wave_norms_parseval():
    K = 3
    c = np.zeros(2 * K + 1, complex)
    c[K + 2] = 1.0
    n = norms(WaveField(c))
    assert n.l2 == pytest.approx(math.sqrt(2 * math.pi))
    assert n.dx_l2 == pytest.approx(2 * math.sqrt(2 * math.pi))
    assert n.h1 == pytest.approx(n.l2 + n.dx_l2)
    assert wavenumbers(K).tolist() == [-3, -2, -1, 0, 1, 2, 3]


def test_kinetic_norms(small_grid):
    g = small_grid
    f = KineticField.zeros(2, g.size)
    f.modes[2] = 1.0
    nr = norms(f, g, nu=np.full(g.size, 4.0))
    base = math.sqrt(2 * math.pi * np.sum(g.weights * g.weight_fn))
    assert nr.l2 == pytest.approx(base)
    assert nr.dx_l2 == 0.0
    assert nr.nu_half == pytest.approx(2 * base)
    assert nr.nu_minus_half == pytest.approx(base / 2)
    assert f.is_hermitian()
    with pytest.raises(ValueError):
        norms(f)
