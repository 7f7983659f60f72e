import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from bosekinetic.collision import dense_L
from bosekinetic.core import KineticField, WaveField, mirror_hermitian
from bosekinetic.kinetic import (apriori_norm_report, assemble_kinetic_rhs, condensate_density,
                                 linear_rhs, moment_ode_residual, run_linear_kinetic,
                                 step_kinetic, transport_factor, write_norms_csv,
                                 write_snapshots_csv)


def _random_field(grid, K, seed, scale=0.1):
    rng = np.random.default_rng(seed)
    pos = scale * (rng.normal(size=(K + 1, grid.size)) + 1j * rng.normal(size=(K + 1, grid.size)))
    pos[0] = pos[0].real
    return KineticField(mirror_hermitian(pos / (1 + grid.p2)))


def _exact_linear(h0, tables, params, T):
    """Dense matrix exponential of -i k p_x + g gamma n0 L for each mode."""
    L = dense_L(tables)
    K = h0.n_modes
    out = np.empty_like(h0.modes)
    gg = params.g * params.gamma * params.n0
    for j, k in enumerate(range(-K, K + 1)):
        A = -1j * k * np.diag(tables.grid.a) + gg * L
        out[j] = expm(T * A) @ h0.modes[j]
    return out


def test_zero_state_has_zero_rhs(small_tables, small_params):
    K = small_params.n_modes
    s = KineticField.zeros(K, small_tables.grid.size)
    phi = WaveField(np.zeros(2 * K + 1, complex))
    assert np.all(assemble_kinetic_rhs(s, phi, 0.0, small_params, small_tables).modes == 0)


def test_kernel_state_only_grows_by_zeta(small_tables, small_basis, small_params):
    K = small_params.n_modes
    s = KineticField.zeros(K, small_tables.grid.size)
    s.modes[K] = small_basis.chi_2
    phi = WaveField(np.zeros(2 * K + 1, complex))
    rhs = assemble_kinetic_rhs(s, phi, 0.0, small_params, small_tables, include_Q=False)
    assert np.allclose(rhs.modes, small_params.zeta * s.modes, atol=1e-12)
    assert rhs.is_hermitian()


def test_rhs_rejects_truncation_mismatch(small_tables, small_params):
    s = KineticField.zeros(3, small_tables.grid.size)
    with pytest.raises(ValueError):
        assemble_kinetic_rhs(s, WaveField(np.zeros(5, complex)), 0.0, small_params, small_tables)


def test_condensate_density_of_uniform_state(small_params):
    phi = WaveField(np.zeros(7, complex))
    assert np.allclose(condensate_density(phi, small_params, 16), small_params.n0)


def test_free_transport_is_exact(small_grid):
    K = 3
    s = _random_field(small_grid, K, 0)
    zero = lambda t, m: np.zeros_like(m)
    out = step_kinetic(s, zero, 0.0, 0.7, small_grid.a)
    assert np.allclose(out.modes[K:], transport_factor(K, small_grid.a, 0.7) * s.modes[K:])
    assert np.allclose(np.abs(out.modes), np.abs(s.modes))


def test_pure_relaxation_imex_matches_trapezoid(small_grid):
    K, lam, dt = 0, 2.0, 0.1
    s = KineticField(np.ones((1, small_grid.size), complex))
    loss = lambda t, m: -lam * m
    out = step_kinetic(s, loss, 0.0, dt, 0 * small_grid.a, scheme="imex", implicit_rate=lam)
    assert np.allclose(out.modes, (1 - lam * dt / 2) / (1 + lam * dt / 2))
    with pytest.raises(ValueError):
        step_kinetic(s, loss, 0.0, dt, small_grid.a, scheme="rk4")
    with pytest.raises(ValueError):
        step_kinetic(s, loss, 0.0, 0.0, small_grid.a)


@pytest.mark.parametrize("scheme", ["midpoint", "imex"])
def test_linear_run_second_order(small_tables, small_params, scheme):
    h0 = _random_field(small_tables.grid, small_params.n_modes, 1)
    T = 2.0
    exact = _exact_linear(h0, small_tables, small_params, T)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        tr = run_linear_kinetic(h0, small_tables, small_params, T, dt, scheme=scheme)
        errs.append(np.abs(tr.modes[-1] - exact).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8), errs


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_linear_run_keeps_hermitian_symmetry(small_tables, small_params, seed):
    h0 = _random_field(small_tables.grid, small_params.n_modes, seed)
    tr = run_linear_kinetic(h0, small_tables, small_params, 0.5, 0.1)
    assert np.array_equal(tr.modes[-1][::-1], np.conj(tr.modes[-1]))


def test_moment_residual_second_order(small_tables, small_basis, small_params):
    h0 = _random_field(small_tables.grid, small_params.n_modes, 2)
    G = lambda t: 0.1 * np.cos(t) * h0.modes
    res = []
    for dt in (0.02, 0.01, 0.005):
        tr = run_linear_kinetic(h0, small_tables, small_params, 1.0, dt, G=G)
        r = moment_ode_residual(tr, small_basis, small_tables, small_params)
        res.append(r["max"] / r["scale"])
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.8), res


def test_moment_residual_zero_mode_conserved(small_tables, small_basis, small_params):
    """At k = 0 with no source the kernel moments are constant in time."""
    K = small_params.n_modes
    h0 = _random_field(small_tables.grid, K, 3)
    h0.modes[:K] = 0
    h0.modes[K + 1:] = 0
    tr = run_linear_kinetic(h0, small_tables, small_params, 1.0, 0.05)
    r = moment_ode_residual(tr, small_basis, small_tables, small_params)
    assert r["max"] < 1e-12 * max(r["scale"], 1.0)


def test_moment_residual_input_checks(small_tables, small_basis, small_params):
    h0 = _random_field(small_tables.grid, small_params.n_modes, 4)
    tr = run_linear_kinetic(h0, small_tables, small_params, 0.1, 0.1)
    with pytest.raises(ValueError):
        moment_ode_residual(tr, small_basis, small_tables, small_params)
    tr = run_linear_kinetic(h0, small_tables, small_params, 3.0, 0.5)
    with pytest.warns(RuntimeWarning):
        moment_ode_residual(tr, small_basis, small_tables, small_params)


def test_apriori_report(small_tables, small_basis, small_params):
    K = small_params.n_modes
    zero = KineticField.zeros(K, small_tables.grid.size)
    rep = apriori_norm_report(run_linear_kinetic(zero, small_tables, small_params, 1.0, 0.1),
                              small_basis, small_tables, small_params)
    assert rep["l2"]["lhs"] == 0.0 and rep["l2"]["ratio"] == 0.0
    h0 = _random_field(small_tables.grid, K, 5)
    tr = run_linear_kinetic(h0, small_tables, small_params, 5.0, 0.05,
                            G=lambda t: 0.1 * h0.modes)
    rep = apriori_norm_report(tr, small_basis, small_tables, small_params)
    for name in ("l2", "dx"):
        assert 0 < rep[name]["ratio"] < 10


def test_linear_rhs_without_source(small_tables, small_params):
    h = _random_field(small_tables.grid, small_params.n_modes, 6).modes
    out = linear_rhs(small_tables, small_params)(0.0, h)
    gg = small_params.g * small_params.gamma * small_params.n0
    assert np.allclose(out, gg * h @ dense_L(small_tables).T)


def test_csv_exports(tmp_path, small_tables, small_params):
    h0 = _random_field(small_tables.grid, small_params.n_modes, 7)
    tr = run_linear_kinetic(h0, small_tables, small_params, 0.2, 0.1)
    write_snapshots_csv(tmp_path / "s.csv", tr)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    n = small_tables.grid.size * (2 * small_params.n_modes + 1) * tr.times.size
    assert lines[0] == "t,k,node,re,im" and len(lines) == n + 1
    write_norms_csv(tmp_path / "n.csv", tr.times, {"l2": [1.0, 2.0, 3.0]})
    assert (tmp_path / "n.csv").read_text().splitlines()[1].startswith("0.0,l2,1.0")
