"""Brute-force reference for manifold integrals with a mollified energy delta.

The axial delta is kept exact; the energy delta is replaced by a unit-mass
Gaussian of width sigma and the remaining three variables are integrated on a
fine tensor mesh that does not use the momentum grid.  Along the energy
variable the mesh is laid out in units of sigma around the resonance, which
keeps the cost per output momentum independent of sigma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ModelParams, planckian


@dataclass(frozen=True)
class OracleMesh:
    n_a: int = 400
    n_u: int = 400
    n_sigma: int = 48
    width: float = 6.0  # Gaussian support in units of sigma

    def energy_offsets(self):
        t = -self.width + (np.arange(self.n_sigma) + 0.5) * (2 * self.width / self.n_sigma)
        wt = np.exp(-0.5 * t**2) / math.sqrt(2.0 * math.pi) * (2 * self.width / self.n_sigma)
        return t, wt


def _inside(params: ModelParams, a, u):
    p2 = a**2 + u
    return (u >= 0.0) & (p2 >= 2.0 * params.Lambda_cut**2) & (p2 <= params.p_max**2)


def _P(params, a, u):
    return planckian(a**2 + u + params.e0)


def _outer_mesh(params, mesh):
    pm = params.p_max
    da = 2 * pm / mesh.n_a
    du = pm**2 / mesh.n_u
    a = -pm + (np.arange(mesh.n_a) + 0.5) * da
    u = (np.arange(mesh.n_u) + 0.5) * du
    A, U = np.meshgrid(a, u, indexing="ij")
    keep = _inside(params, A, U)
    return A[keep], U[keep], da * du


def role1_integral(params: ModelParams, a, u, integrand, sigma, mesh=OracleMesh()):
    """pi^2 * int da2 du2 du3 delta_sigma(|p|^2 - |p2|^2 - |p3|^2 - g n0) F(p2, p3).

    ``integrand(a2, u2, a3, u3)`` returns F on flattened arrays.
    """
    a2, u2, cell = _outer_mesh(params, mesh)
    a3 = a - a2
    # resonance: u3* solves the sharp energy balance
    u3_star = u - u2 + 2.0 * a2 * a3 - params.shift
    t, wt = mesh.energy_offsets()
    total = 0.0
    for tk, wk in zip(t, wt):
        u3 = u3_star + sigma * tk
        ok = _inside(params, a3, u3)
        if ok.any():
            total += wk * np.sum(integrand(a2[ok], u2[ok], a3[ok], u3[ok]))
    return math.pi**2 * cell * total


def role2_integral(params: ModelParams, a, u, integrand, sigma, mesh=OracleMesh()):
    """pi^2 * int da3 du3 du1 delta_sigma(|p1|^2 - |p|^2 - |p3|^2 - g n0) F(p1, p3)."""
    a3, u3, cell = _outer_mesh(params, mesh)
    a1 = a + a3
    u1_star = u + u3 - 2.0 * a * a3 + params.shift
    t, wt = mesh.energy_offsets()
    total = 0.0
    for tk, wk in zip(t, wt):
        u1 = u1_star + sigma * tk
        ok = _inside(params, a1, u1)
        if ok.any():
            total += wk * np.sum(integrand(a1[ok], u1[ok], a3[ok], u3[ok]))
    return math.pi**2 * cell * total


def oracle_nu(params: ModelParams, a, u, sigma, mesh=OracleMesh()):
    """Collision frequency at momentum (a, u)."""
    def gain(a2, u2, a3, u3):
        return 1.0 + _P(params, a2, u2) + _P(params, a3, u3)

    def loss(a1, u1, a3, u3):
        return _P(params, a3, u3) - _P(params, a1, u1)

    return (role1_integral(params, a, u, gain, sigma, mesh)
            + 2.0 * role2_integral(params, a, u, loss, sigma, mesh))


def oracle_K(params: ModelParams, a, u, h, sigma, mesh=OracleMesh()):
    """Three-term gain operator applied to a smooth function ``h(a, u)``."""
    P = float(_P(params, a, u))

    def t1(a2, u2, a3, u3):
        return (_P(params, a3, u3) - P) * _P(params, a2, u2) * h(a2, u2)

    def t2(a1, u1, a3, u3):
        return (1.0 + P + _P(params, a3, u3)) * _P(params, a1, u1) * h(a1, u1)

    def t3(a1, u1, a3, u3):
        return (_P(params, a1, u1) - P) * _P(params, a3, u3) * h(a3, u3)

    s = (role1_integral(params, a, u, t1, sigma, mesh)
         + role2_integral(params, a, u, t2, sigma, mesh)
         + role2_integral(params, a, u, t3, sigma, mesh))
    return 2.0 / P * s


def gaussian_bump(a0, u0, width):
    """Smooth test function centred at (a0, u0) in the (a, u) plane."""
    def h(a, u):
        return np.exp(-((a - a0) ** 2 + (u - u0) ** 2) / (2.0 * width**2))
    return h


def sigma_sequence(sigma0: float, n: int):
    return [sigma0 / 2**k for k in range(n)]
