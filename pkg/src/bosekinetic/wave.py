"""Pseudo-spectral exponential integrators for the condensate equation.

Fourier coefficients c_n of a field on [0, 2 pi] evolve as
dc_n/dt = -i n^2 c_n + W_n, with W assembled pointwise on a collocation
grid (3/2 rule) and transformed back.  The dispersive factor is integrated
exactly; W is treated by the exponential midpoint rule.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (ModelParams, WaveField, collocation_size, h1_sq, to_modes,
                   to_physical, wavenumbers)


@dataclass
class WaveSources:
    """Coefficients of the linear wave problem d_t phi - i phi'' = S1 phi + S2 conj(phi) + U.

    ``S1`` and ``U`` map a time to samples on the collocation grid of size
    ``n_points``; ``S2`` is a constant.
    """

    S1: Callable[[float], np.ndarray]
    S2: complex
    U: Callable[[float], np.ndarray]
    n_points: int

    @classmethod
    def constant(cls, S1, S2, U, n_points):
        S1 = np.broadcast_to(np.asarray(S1, dtype=complex), (n_points,)).copy()
        U = np.broadcast_to(np.asarray(U, dtype=complex), (n_points,)).copy()
        return cls(lambda t: S1, complex(S2), lambda t: U, n_points)

    @classmethod
    def from_samples(cls, times, S1, S2, U):
        """Piecewise-linear interpolation in time of sampled coefficient fields."""
        times = np.asarray(times, dtype=float)
        S1 = np.asarray(S1, dtype=complex)
        U = np.asarray(U, dtype=complex)

        def interp(data):
            def f(t):
                j = int(np.clip(np.searchsorted(times, t) - 1, 0, times.size - 2))
                th = (t - times[j]) / (times[j + 1] - times[j])
                return (1.0 - th) * data[j] + th * data[j + 1]
            return f

        return cls(interp(S1), complex(S2), interp(U), S1.shape[1])

    def W(self, t, phi_values):
        return self.S1(t) * phi_values + self.S2 * np.conj(phi_values) + self.U(t)


def dispersion(n_modes: int, tau: float) -> np.ndarray:
    n = wavenumbers(n_modes)
    return np.exp(-1j * n**2 * tau)


def exponential_midpoint(coeffs, W_modes, t: float, dt: float):
    """c(t+dt) = E(dt) c + dt E(dt/2) W(t+dt/2, c_half), c_half from an exponential Euler predictor.

    ``W_modes(t, c)`` returns the Fourier coefficients of the non-dispersive
    right side.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    K = (coeffs.size - 1) // 2
    E_half = dispersion(K, 0.5 * dt)
    c_half = E_half * (coeffs + 0.5 * dt * W_modes(t, coeffs))
    return E_half * E_half * coeffs + dt * E_half * W_modes(t + 0.5 * dt, c_half)


def step_wave(phi: WaveField, sources: WaveSources, t: float, dt: float) -> WaveField:
    """One exponential-midpoint step of the linear wave problem."""
    K = phi.n_modes

    def W(tt, c):
        return to_modes(sources.W(tt, to_physical(c, sources.n_points)), K)

    return WaveField(exponential_midpoint(np.asarray(phi.coeffs, dtype=complex), W, t, dt))


# --- Duhamel fixed point ------------------------------------------------------

class ContractionError(RuntimeError):
    """The fixed-point map failed to contract on the requested window."""


@dataclass
class LinearWaveResult:
    times: np.ndarray
    coeffs: np.ndarray  # (n_times, 2N+1)
    factors: list = field(default_factory=list)
    iterations: int = 0
    windows: int = 1

    def h1_norms(self) -> np.ndarray:
        return np.sqrt([h1_sq(c) for c in self.coeffs])


def _duhamel_map(c0, W_modes, dt):
    """Exponential trapezoid rule for c_n(t) = e^{-in^2 t} c_n(0) + int e^{in^2(s-t)} W_n(s) ds."""
    K = (c0.size - 1) // 2
    E = dispersion(K, dt)
    out = np.empty_like(W_modes)
    out[0] = c0
    for m in range(W_modes.shape[0] - 1):
        out[m + 1] = E * out[m] + 0.5 * dt * (E * W_modes[m] + W_modes[m + 1])
    return out


def sup_h1(coeffs) -> float:
    return max(math.sqrt(h1_sq(c)) for c in coeffs) if len(coeffs) else 0.0


def _iterate_window(c0, sources, times, tol, max_iter):
    M = sources.n_points
    K = (c0.size - 1) // 2
    dt = times[1] - times[0]
    # free evolution starts the iteration
    cur = _duhamel_map(c0, np.zeros((times.size, c0.size), dtype=complex), dt)
    factors, prev_diff = [], None
    for it in range(1, max_iter + 1):
        vals = to_physical(cur.T, M, axis=0).T
        W = np.stack([to_modes(sources.W(t, v), K) for t, v in zip(times, vals)])
        new = _duhamel_map(c0, W, dt)
        diff = sup_h1(new - cur)
        if prev_diff is not None and prev_diff > 0:
            factors.append(diff / prev_diff)
        cur = new
        if diff <= tol:
            return cur, factors, it
        if factors and factors[-1] >= 1.0:
            raise ContractionError(f"contraction factor {factors[-1]:.3g} >= 1")
        prev_diff = diff
    raise ContractionError("no convergence within the iteration limit")


def solve_linear_wave(phi_i: WaveField, sources: WaveSources, T: float, dt: float,
                      tol: float = 1e-12, max_iter: int = 60, max_depth: int = 6) -> LinearWaveResult:
    """Fixed-point iteration of the Duhamel map with frozen sources.

    On failure to contract the window is halved and the halves are solved
    in sequence; after ``max_depth`` halvings a ContractionError is raised.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    n_steps = max(1, int(round(T / dt)))

    def solve(c0, t0, t1, n, depth):
        times = np.linspace(t0, t1, n + 1)
        try:
            c, f, it = _iterate_window(c0, sources, times, tol, max_iter)
            return times, c, f, it, 1
        except ContractionError:
            if depth >= max_depth or n < 2:
                raise
            h = n // 2
            tm = times[h]
            ta, ca, fa, ia, wa = solve(c0, t0, tm, h, depth + 1)
            tb, cb, fb, ib, wb = solve(ca[-1], tm, t1, n - h, depth + 1)
            return (np.concatenate([ta, tb[1:]]), np.concatenate([ca, cb[1:]]),
                    fa + fb, max(ia, ib), wa + wb)

    times, c, f, it, w = solve(np.asarray(phi_i.coeffs, dtype=complex), 0.0, T, n_steps, 0)
    return LinearWaveResult(times=times, coeffs=c, factors=f, iterations=it, windows=w)


def multiplier_h1_sq(values) -> float:
    """Squared H1 norm of a function given by collocation samples."""
    values = np.asarray(values)
    M = values.shape[0]
    full = np.fft.fft(values) / M
    n = np.fft.fftfreq(M, 1.0 / M)
    return 2.0 * math.pi * float(np.sum((1 + n**2) * np.abs(full) ** 2))


def linear_wave_bound(result: LinearWaveResult, sources: WaveSources) -> np.ndarray:
    """Right side of the H1 a-priori bound along the trajectory times."""
    t = result.times
    U2 = np.array([multiplier_h1_sq(sources.U(s)) for s in t])
    S2 = np.array([multiplier_h1_sq(sources.S1(s)) + multiplier_h1_sq(
        np.full(sources.n_points, sources.S2)) for s in t])
    iU = np.concatenate([[0.0], np.cumsum(0.5 * (U2[1:] + U2[:-1]) * np.diff(t))])
    iS = np.concatenate([[0.0], np.cumsum(0.5 * (S2[1:] + S2[:-1]) * np.diff(t))])
    return (2.0 * h1_sq(result.coeffs[0]) + 6.0 * t * iU) * np.exp(6.0 * t * iS)


# --- full condensate equation ------------------------------------------------

def psi_multiplier(psi_values, D, f_integral, params: ModelParams, M0: float, u_ext=None):
    """Pointwise factor D/2 - i(g|psi|^2 + U_ext + 2 g int f dp)."""
    if u_ext is None:
        u_ext = params.g * (params.n0 - 2.0 * M0)
    return 0.5 * D - 1j * (params.g * np.abs(psi_values) ** 2 + u_ext
                           + 2.0 * params.g * f_integral)


def step_full_psi(psi: WaveField, D, f_integral, t: float, dt: float, params: ModelParams,
                  M0: float, u_ext=None) -> WaveField:
    """Exponential-midpoint step of the full condensate equation.

    ``D`` and ``f_integral`` (the momentum integral of f) are collocation
    samples held fixed over the step.
    """
    D = np.asarray(D)
    M, K = D.shape[0], psi.n_modes

    def W(tt, c):
        vals = to_physical(c, M)
        return to_modes(vals * psi_multiplier(vals, D, f_integral, params, M0, u_ext), K)

    return WaveField(exponential_midpoint(np.asarray(psi.coeffs, dtype=complex), W, t, dt))


# --- output ------------------------------------------------------------------

def write_trajectory_csv(path, times, coeffs) -> None:
    coeffs = np.asarray(coeffs)
    n = wavenumbers((coeffs.shape[1] - 1) // 2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "n", "re", "im"])
        for t, c in zip(times, coeffs):
            for k, v in zip(n, c):
                w.writerow([repr(float(t)), int(k), repr(float(v.real)), repr(float(v.imag))])


def write_trajectory_json(path, times, coeffs) -> None:
    rows = []
    for t, c in zip(times, np.asarray(coeffs)):
        wf = WaveField(np.asarray(c))
        h1 = math.sqrt(h1_sq(c))
        rows.append({"t": float(t), "l2": math.sqrt(2 * math.pi * float(np.sum(np.abs(c) ** 2))),
                     "h1_sq": h1 ** 2, "n_modes": wf.n_modes})
    with open(path, "w") as fh:
        json.dump({"samples": rows}, fh, indent=2)
