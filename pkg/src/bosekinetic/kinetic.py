"""Time integration of the kinetic perturbation and the norm/moment diagnostics.

Fields are stacks of x-Fourier modes k = -K..K over the momentum nodes
(numpy sign convention, h(x) = sum h_k e^{ikx}), so transport appears as
d_t h_k + i k p_x h_k.  Collision terms are applied pointwise in x on a
collocation grid and transformed back.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .collision import CollisionTables, apply_Q
from .core import (KineticField, WaveField, collocation_size, mirror_hermitian,
                   real_to_modes, real_to_physical, to_physical, wavenumbers)
from .spectral import KernelBasis, project


@dataclass
class KineticRHS:
    modes: np.ndarray

    def is_hermitian(self) -> bool:
        return bool(np.array_equal(self.modes[::-1], np.conj(self.modes)))


def condensate_density(phi: WaveField, params, n_points: int) -> np.ndarray:
    """n_c = |sqrt(n0) + gamma phi|^2 on the collocation grid."""
    vals = to_physical(phi.coeffs, n_points)
    return np.abs(math.sqrt(params.n0) + params.gamma * vals) ** 2


def collision_fields(R_values, tables: CollisionTables, with_Q: bool = True):
    """L R and Q(R, R)/P at each collocation point; R_values has shape (M, n_nodes)."""
    LR = (tables.L @ R_values.T).T
    if not with_Q:
        return LR, None
    Q = apply_Q(R_values.T, R_values.T, tables).T / tables.grid.P
    return LR, Q


def assemble_kinetic_rhs(s: KineticField, phi: WaveField, t: float, params, tables: CollisionTables,
                         n_points: int | None = None, q_field: KineticField | None = None,
                         include_Q: bool = True) -> KineticRHS:
    """g gamma n_c (L s + gamma e^{-zeta t} Q(s, s)/P) + zeta s, without transport.

    ``q_field`` replaces s inside the quadratic term (frozen iterate).
    """
    K = s.n_modes
    if phi.n_modes != K:
        raise ValueError("wave and kinetic truncations differ")
    M = n_points or collocation_size(K)
    n_c = condensate_density(phi, params, M)[:, None]
    S = real_to_physical(s.modes, M)
    LS = (tables.L @ S.T).T
    vals = LS
    if include_Q:
        Sq = S if q_field is None else real_to_physical(q_field.modes, M)
        Q = apply_Q(Sq.T, Sq.T, tables).T / tables.grid.P
        vals = LS + params.gamma * math.exp(-params.zeta * t) * Q
    vals = params.g * params.gamma * n_c * vals + params.zeta * S
    return KineticRHS(real_to_modes(vals, K))


def transport_factor(n_modes: int, a: np.ndarray, tau: float) -> np.ndarray:
    """exp(-i k p_x tau) for k = 0..K (the negative modes follow by symmetry)."""
    k = np.arange(n_modes + 1)[:, None]
    return np.exp(-1j * k * a[None, :] * tau)


def step_kinetic(s: KineticField, rhs: Callable[[float, np.ndarray], np.ndarray], t: float, dt: float,
                 a: np.ndarray, scheme: str = "midpoint", implicit_rate=None) -> KineticField:
    """Advance the mode stack by one step; transport is integrated exactly.

    ``rhs(t, modes)`` returns the non-transport right side as a mode stack.
    ``midpoint``: explicit exponential midpoint (conserves every linear
    invariant of the right side exactly).  ``imex``: the diagonal loss
    ``implicit_rate`` is removed from the explicit part and treated by the
    trapezoidal rule.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    K = s.n_modes
    h = s.modes[K:]
    T_half = transport_factor(K, a, 0.5 * dt)

    def F(tt, pos):
        return rhs(tt, mirror_hermitian(pos))[K:]

    if scheme == "midpoint":
        half = T_half * (h + 0.5 * dt * F(t, h))
        new = T_half * T_half * h + dt * T_half * F(t + 0.5 * dt, half)
    elif scheme == "imex":
        lam = np.asarray(implicit_rate if implicit_rate is not None else 0.0)

        def G(tt, pos):
            return F(tt, pos) + lam * pos

        half = T_half * (h + 0.5 * dt * G(t, h)) / (1.0 + 0.5 * lam * dt)
        new = (T_half * T_half * (1.0 - 0.5 * lam * dt) * h
               + dt * T_half * G(t + 0.5 * dt, half)) / (1.0 + 0.5 * lam * dt)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return KineticField(mirror_hermitian(new))


# --- linear problem with a source --------------------------------------------

def linear_rhs(tables: CollisionTables, params, G: Callable[[float], np.ndarray] | None = None):
    """Right side g gamma (n0 L h + gamma G) of the linearized kinetic problem."""
    gg = params.g * params.gamma

    def rhs(t, modes):
        out = gg * params.n0 * (tables.L @ modes.T).T
        if G is not None:
            out = out + gg * params.gamma * G(t)
        return out
    return rhs


@dataclass
class KineticTrajectory:
    times: np.ndarray
    modes: np.ndarray  # (n_times, 2K+1, n_nodes)
    sources: np.ndarray | None = None


def run_linear_kinetic(h0: KineticField, tables: CollisionTables, params, T: float, dt: float,
                       G: Callable[[float], np.ndarray] | None = None, scheme: str = "midpoint",
                       sample_every: int = 1) -> KineticTrajectory:
    rhs = linear_rhs(tables, params, G)
    n = int(round(T / dt))
    a = tables.grid.a
    lam = params.g * params.gamma * params.n0 * tables.nu
    h, t = h0, 0.0
    times, snaps, srcs = [0.0], [h0.modes.copy()], [G(0.0) if G else None]
    for i in range(1, n + 1):
        h = step_kinetic(h, rhs, t, dt, a, scheme=scheme, implicit_rate=lam)
        t = i * dt
        if i % sample_every == 0:
            times.append(t)
            snaps.append(h.modes.copy())
            srcs.append(G(t) if G else None)
    src = np.array(srcs) if G else None
    return KineticTrajectory(np.array(times), np.array(snaps), src)


# --- moment relations --------------------------------------------------------

def _ip(h, v, grid):
    """Weighted momentum inner product along the last axis, v real."""
    return np.sum(grid.weights * grid.weight_fn * h * v, axis=-1)


def nonhydro_moments(modes, basis: KernelBasis):
    """h_{k p_x chi_2} and h_{k p_x chi_x}: moments against the non-kernel parts of p_x chi."""
    g = basis.grid
    v2 = g.a * basis.chi_2 - basis.kappa * basis.chi_x
    vx = g.a * basis.chi_x - basis.kappa * basis.chi_2
    return _ip(modes, v2, g), _ip(modes, vx, g)


def moment_ode_residual(traj: KineticTrajectory, basis: KernelBasis, tables: CollisionTables,
                        params) -> dict:
    """Residuals of the hydrodynamic moment equations along a sampled linear run.

    With h = sum h_k e^{ikx} the relations read
    d_t h_k2 + i k (kappa h_kx + h_{k p_x chi_2}) = (c_k, chi_2) + g gamma^2 (G_k, chi_2)
    and the same with the roles of chi_x and chi_2 exchanged, where
    c_k = g gamma n0 L h_k.  Time derivatives are central differences.
    """
    g = basis.grid
    t = traj.times
    if t.size < 3:
        raise ValueError("need at least three samples")
    dts = np.diff(t)
    if not np.allclose(dts, dts[0]):
        raise ValueError("central differences need uniform sampling")
    dt = dts[0]
    H = traj.modes
    K = (H.shape[1] - 1) // 2
    if dt * K * np.abs(g.a).max() > 0.5:
        warnings.warn("sampling too coarse to resolve transport phases; residuals are unreliable",
                      RuntimeWarning, stacklevel=2)
    k = wavenumbers(K)[None, :]
    h2 = _ip(H, basis.chi_2, g)
    hx = _ip(H, basis.chi_x, g)
    n2, nx = nonhydro_moments(H, basis)
    gg = params.g * params.gamma
    LH = np.einsum("ij,tkj->tki", tables.L.toarray(), H) if g.size <= 5000 else None
    c2 = gg * params.n0 * _ip(LH, basis.chi_2, g)
    cx = gg * params.n0 * _ip(LH, basis.chi_x, g)
    if traj.sources is not None:
        c2 = c2 + gg * params.gamma * _ip(traj.sources, basis.chi_2, g)
        cx = cx + gg * params.gamma * _ip(traj.sources, basis.chi_x, g)
    d2 = (h2[2:] - h2[:-2]) / (2 * dt)
    dx = (hx[2:] - hx[:-2]) / (2 * dt)
    mid = slice(1, -1)
    r2 = d2 + 1j * k * (basis.kappa * hx[mid] + n2[mid]) - c2[mid]
    rx = dx + 1j * k * (basis.kappa * h2[mid] + nx[mid]) - cx[mid]
    scale = max(np.abs(h2).max(), np.abs(hx).max(), 1e-300)
    return {"times": t[mid], "res_2": r2, "res_x": rx,
            "max": float(max(np.abs(r2).max(), np.abs(rx).max())), "scale": float(scale)}


# --- a priori norms ------------------------------------------------------------

def _sq(modes, grid, density=1.0):
    """Squared P/(1+P)-weighted norm over [0, 2 pi] x momenta (Parseval)."""
    return 2.0 * math.pi * np.sum(grid.weights * grid.weight_fn * density * np.abs(modes) ** 2,
                                  axis=(-2, -1))


def _time_l2(times, values_sq):
    return math.sqrt(float(np.trapezoid(values_sq, times)))


def apriori_norm_report(traj: KineticTrajectory, basis: KernelBasis, tables: CollisionTables,
                        params) -> dict:
    """Both sides of the L2 and d/dx a-priori inequalities for a linear run."""
    g = tables.grid
    nu = tables.nu
    gam = params.gamma
    t = traj.times
    K = (traj.modes.shape[1] - 1) // 2
    k = wavenumbers(K)[None, :, None]
    out = {}
    for name, H, G in (("l2", traj.modes, traj.sources),
                       ("dx", 1j * k * traj.modes, None if traj.sources is None
                        else 1j * k * traj.sources)):
        par, perp = project(H, basis)
        lhs = (math.sqrt(float(_sq(H[-1], g)))
               + math.sqrt(gam) * (_time_l2(t, _sq(perp, g, nu)) + _time_l2(t, _sq(par, g))))
        rhs = math.sqrt(float(_sq(H[0], g)))
        if G is not None:
            gpar, gperp = project(G, basis)
            rhs += gam**1.5 * (_time_l2(t, _sq(gperp, g, 1.0 / nu)) + _time_l2(t, _sq(gpar, g)))
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        out[name] = {"lhs": lhs, "rhs": rhs, "ratio": ratio}
    return out


# --- output --------------------------------------------------------------------

def write_snapshots_csv(path, traj: KineticTrajectory) -> None:
    K = (traj.modes.shape[1] - 1) // 2
    ks = wavenumbers(K)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "k", "node", "re", "im"])
        for t, m in zip(traj.times, traj.modes):
            for k, row in zip(ks, m):
                for j, v in enumerate(row):
                    w.writerow([repr(float(t)), int(k), j, repr(float(v.real)), repr(float(v.imag))])


def write_norms_csv(path, times, series: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "norm", "value"])
        for name, vals in series.items():
            for t, v in zip(times, vals):
                w.writerow([repr(float(t)), name, repr(float(v))])
