"""Kernel basis of L, hydrodynamic projection and empirical operator constants."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .collision import CollisionTables, dense_K, dense_L
from .core import ConfigurationError, MomentumGrid, inner_product


class DiscretizationError(RuntimeError):
    """A property that must hold for any consistent discretization failed."""


@dataclass(frozen=True, eq=False)
class KernelBasis:
    grid: MomentumGrid
    chi_x: np.ndarray
    chi_2: np.ndarray
    kappa: float

    @property
    def vectors(self) -> np.ndarray:
        return np.stack([self.chi_x, self.chi_2])


def _normalize(v, grid):
    n2 = float(np.real(inner_product(v, v, grid)))
    if not n2 > 0.0 or not np.isfinite(n2):
        raise ConfigurationError("kernel direction vanishes on this grid")
    return v / np.sqrt(n2)


def build_kernel_basis(grid: MomentumGrid) -> KernelBasis:
    """Orthonormal p_x(1+P) and (|p|^2 + g n0)(1+P) in the P/(1+P) metric."""
    if np.all(grid.a == 0.0):
        raise ConfigurationError("degenerate grid: no axial momentum")
    chi_x = _normalize(grid.a * (1.0 + grid.P), grid)
    chi_2 = (grid.p2 + grid.params.shift) * (1.0 + grid.P)
    chi_2 = _normalize(chi_2, grid)
    # parity makes this a no-op on symmetric grids
    chi_2 = _normalize(chi_2 - np.real(inner_product(chi_2, chi_x, grid)) * chi_x, grid)
    kappa = float(np.real(inner_product(grid.a * chi_2, chi_x, grid)))
    return KernelBasis(grid=grid, chi_x=chi_x, chi_2=chi_2, kappa=kappa)


def kernel_moments(h, basis: KernelBasis):
    """(h, chi_x) and (h, chi_2) along the last axis."""
    g = basis.grid
    return inner_product(h, basis.chi_x, g), inner_product(h, basis.chi_2, g)


def project(h, basis: KernelBasis):
    """Split h into its kernel part and the orthogonal remainder."""
    h = np.asarray(h)
    hx, h2 = kernel_moments(h, basis)
    h_par = (np.asarray(hx)[..., None] * basis.chi_x
             + np.asarray(h2)[..., None] * basis.chi_2)
    return h_par, h - h_par


def _metric(grid):
    return grid.weights * grid.weight_fn


def _complement(basis: KernelBasis) -> np.ndarray:
    """Columns spanning the weighted-orthogonal complement of the kernel."""
    m = _metric(basis.grid)
    V = basis.vectors.T * m[:, None]  # constraints V^T z = 0
    return sla.null_space(V.T)


def quadratic_forms(L: np.ndarray, grid: MomentumGrid):
    """Symmetric matrices of -(Lh, h) and ((1+|p|)^3 h, h)."""
    m = _metric(grid)
    A = -(m[:, None] * L)
    A = 0.5 * (A + A.T)
    B = np.diag(m * (1.0 + grid.pabs) ** 3)
    return A, B


def check_nonpositive(L: np.ndarray, grid: MomentumGrid, tol: float = 1e-10) -> float:
    """Smallest eigenvalue of -(L., .) relative to its largest; raises if negative."""
    A, _ = quadratic_forms(L, grid)
    m = np.sqrt(_metric(grid))
    ev = np.linalg.eigvalsh(A / m[:, None] / m[None, :])
    rel = ev[0] / ev[-1]
    if rel < -tol:
        raise DiscretizationError(f"-(Lh,h) is indefinite (relative eigenvalue {rel:.3e})")
    return float(rel)


def estimate_gap(tables: CollisionTables, basis: KernelBasis, grid: MomentumGrid | None = None,
                 tol: float = 1e-10) -> float:
    """Smallest -(Lh,h)/((1+|p|)^3 h, h) over h orthogonal to the kernel."""
    grid = grid or tables.grid
    L = dense_L(tables)
    A, B = quadratic_forms(L, grid)
    Z = _complement(basis)
    Ar = Z.T @ A @ Z
    Br = Z.T @ B @ Z
    ev = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Br + Br.T), eigvals_only=True)
    scale = np.abs(ev).max()
    if ev[0] < -tol * scale:
        raise DiscretizationError(f"-(Lh,h) is indefinite on the complement ({ev[0]:.3e})")
    return float(ev[0])


def rayleigh_quotient(h, L: np.ndarray, grid: MomentumGrid) -> float:
    """-(Lh,h)/((1+|p|)^3 h, h) for a single real h."""
    A, B = quadratic_forms(L, grid)
    return float(h @ A @ h / (h @ B @ h))


def fit_nu_bounds(grid: MomentumGrid, tables: CollisionTables | None = None):
    """Extreme values of nu / (1+|p|)^3 over the nodes."""
    nu = tables.nu if tables is not None else grid.nu_values
    if nu is None:
        raise ValueError("collision frequency not computed")
    if np.any(nu <= 0.0):
        raise DiscretizationError("collision frequency must be positive")
    r = nu / (1.0 + grid.pabs) ** 3
    return float(r.min()), float(r.max())


def nu_growth_exponent(grid: MomentumGrid, nu: np.ndarray, outer: float = 0.5) -> float:
    """Least-squares slope of log nu against log(1+|p|) for |p| >= outer * p_max."""
    sel = grid.pabs >= outer * grid.params.p_max
    if sel.sum() < 3:
        raise ValueError("too few nodes in the outer region")
    return float(np.polyfit(np.log1p(grid.pabs[sel]), np.log(nu[sel]), 1)[0])


def k_singular_values(tables: CollisionTables) -> np.ndarray:
    """Singular values of K in the orthonormal basis of the weighted metric."""
    m = np.sqrt(_metric(tables.grid))
    K = dense_K(tables)
    return np.linalg.svd(m[:, None] * K / m[None, :], compute_uv=False)


def spectral_report(tables: CollisionTables, basis: KernelBasis) -> dict:
    grid = tables.grid
    nu0, nu1 = fit_nu_bounds(grid, tables)
    p = grid.params
    return {
        "c_hat": estimate_gap(tables, basis),
        "nu0_hat": nu0,
        "nu1_hat": nu1,
        "kappa": basis.kappa,
        "grid": {"n_nodes": grid.size, "n_axial": p.n_axial, "n_radial": grid.u_centers.size,
                 "p_max": p.p_max, "Lambda_cut": p.Lambda_cut, "lattice": p.lattice},
    }


def write_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)


def weighted_norm(v, grid: MomentumGrid) -> float:
    return float(np.sqrt(np.real(inner_product(v, v, grid))))


def self_adjointness_defect(tables: CollisionTables) -> float:
    """max |(Lf,h) - (f,Lh)| relative to max |(Lf,h)| over node pairs (dense)."""
    A = _metric(tables.grid)[:, None] * dense_L(tables)
    return float(np.abs(A - A.T).max() / np.abs(A).max())


def kernel_residuals(tables: CollisionTables, basis: KernelBasis):
    """Weighted norms of L chi_x and L chi_2 (both chi normalized)."""
    g = tables.grid
    return (weighted_norm(tables.L @ basis.chi_x, g), weighted_norm(tables.L @ basis.chi_2, g))


def operator_report(tables: CollisionTables, basis: KernelBasis, dense_limit: int = 2500) -> dict:
    """Structural checks of the discrete operators with pass/fail flags."""
    grid = tables.grid
    rep = spectral_report(tables, basis)
    lx, l2 = kernel_residuals(tables, basis)
    rep["kernel_residual"] = {"chi_x": lx, "chi_2": l2}
    checks = {"kernel": max(lx, l2) < 1e-3,
              "nu_positive": rep["nu0_hat"] > 0.0,
              "gap_positive": rep["c_hat"] > 0.0}
    if grid.size <= dense_limit:
        rep["asymmetry"] = self_adjointness_defect(tables)
        rep["min_relative_eigenvalue"] = check_nonpositive(dense_L(tables), grid)
        checks["self_adjoint"] = rep["asymmetry"] < 1e-8
        checks["nonpositive"] = rep["min_relative_eigenvalue"] >= -1e-10
    rep["nu_exponent"] = nu_growth_exponent(grid, tables.nu)
    rep["checks"] = checks
    rep["passed"] = all(checks.values())
    return rep
