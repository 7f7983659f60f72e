"""Coupled condensate/excitation evolution: initial data, direct co-stepping,
Picard windows and the diagnostic suite.

State variables are the scaled condensate deviation phi (psi = sqrt(n0) +
gamma phi) and s = e^{zeta t} R, where f = P (1 + gamma R).  Both are
stored as x-Fourier coefficients; nonlinear terms are formed on a uniform
collocation grid.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .collision import CollisionTables, apply_Q, cached_tables
from .core import (ConfigurationError, KineticField, ModelParams, MomentumGrid, WaveField,
                   build_grid, collocation_size, inner_product, mirror_hermitian, norms,
                   real_to_modes, real_to_physical, to_modes, to_physical, wavenumbers)
from .kinetic import assemble_kinetic_rhs, step_kinetic
from .spectral import KernelBasis, build_kernel_basis, project
from .wave import ContractionError, WaveSources, dispersion, solve_linear_wave


class SimulationAborted(RuntimeError):
    """A monitored invariant failed; ``series`` holds the diagnostics up to the failure."""

    def __init__(self, message, series=None):
        super().__init__(message)
        self.series = series


@dataclass(eq=False)
class Model:
    params: ModelParams
    grid: MomentumGrid
    tables: CollisionTables
    basis: KernelBasis
    n_points: int
    n_fine: int

    @classmethod
    def build(cls, params: ModelParams, cache_dir=None) -> "Model":
        grid = build_grid(params)
        tables = cached_tables(grid, cache_dir)
        K = params.n_modes
        return cls(params, grid, tables, build_kernel_basis(grid), collocation_size(K),
                   max(32, 8 * K + 8))

    @property
    def n_modes(self) -> int:
        return self.params.n_modes

    @property
    def M0(self) -> float:
        return self.grid.M0

    def default_dt(self) -> float:
        """Resolve the explicit collision terms and the fastest transport phase."""
        p = self.params
        stiff = p.g * p.gamma * p.n0 * float(self.tables.nu.max())
        return min(0.1 / stiff, 1.0 / max(1, self.n_modes) / p.p_max)


# --- coupled right side --------------------------------------------------------

@dataclass
class CouplingFields:
    """Pointwise fields on a collocation grid for one state."""

    psi: np.ndarray
    dev: np.ndarray  # |psi|^2 - n0
    S: np.ndarray  # (M, n_nodes)
    LS: np.ndarray
    QS: np.ndarray  # Q(s, s), not divided by P
    m_P: np.ndarray  # int P R dp
    D: np.ndarray
    A: np.ndarray

    @property
    def n_c(self):
        return self.psi.real**2 + self.psi.imag**2


def coupling_fields(model: Model, t: float, phi, s_modes, n_points: int | None = None,
                    q_modes=None) -> CouplingFields:
    p, g = model.params, model.grid
    gam = p.gamma
    M = n_points or model.n_points
    Phi = to_physical(np.asarray(phi), M)
    dev = gam * (2.0 * math.sqrt(p.n0) * Phi.real + gam * np.abs(Phi) ** 2)
    psi = math.sqrt(p.n0) + gam * Phi
    S = real_to_physical(s_modes, M)
    LS = (model.tables.L @ S.T).T
    Sq = S if q_modes is None else real_to_physical(q_modes, M)
    QS = apply_Q(Sq.T, Sq.T, model.tables).T
    e = math.exp(-p.zeta * t)
    WP = g.weights * g.P
    m_P = e * (S @ WP)
    D = p.g * gam**2 * (e * (LS @ WP) + gam * e * e * (QS @ g.weights))
    A = p.g * (dev + 2.0 * gam * m_P)
    return CouplingFields(psi, dev, S, LS, QS, m_P, D, A)


def coupled_rhs(model: Model, t: float, phi, s_modes):
    """Non-dispersive, non-transport right sides (wave coefficients, kinetic modes)."""
    p = model.params
    K = model.n_modes
    f = coupling_fields(model, t, phi, s_modes)
    W = -f.psi * (0.5 * f.D + 1j * f.A) / p.gamma
    kin = (p.g * p.gamma * (p.n0 + f.dev)[:, None]
           * (f.LS + p.gamma * math.exp(-p.zeta * t) * f.QS / model.grid.P)
           + p.zeta * f.S)
    return to_modes(W, K), real_to_modes(kin, K)


def step_direct(model: Model, t: float, phi, s_modes, dt: float):
    """Exponential midpoint step of the coupled system; dispersion and transport exact."""
    K = model.n_modes
    Eh = dispersion(K, 0.5 * dt)
    Th = np.exp(-0.5j * dt * wavenumbers(K)[:, None] * model.grid.a[None, :])
    W0, F0 = coupled_rhs(model, t, phi, s_modes)
    phi_h = Eh * (phi + 0.5 * dt * W0)
    s_h = Th * (s_modes + 0.5 * dt * F0)
    W1, F1 = coupled_rhs(model, t + 0.5 * dt, phi_h, s_h)
    phi_n = Eh * Eh * phi + dt * Eh * W1
    s_n = Th * Th * s_modes + dt * Th * F1
    return phi_n, mirror_hermitian(s_n[K:])


# --- initial data -------------------------------------------------------------

def prepare_initial_data(raw_R: KineticField, raw_Phi: WaveField, params: ModelParams,
                         basis: KernelBasis):
    """Enforce zero axial-momentum and energy moments of R and the mass balance.

    The k = 0 mode of R loses its kernel components; the real part of the
    zero mode of phi is then solved for so that the total mass equals that
    of the equilibrium.  Returns (R_i, Phi_i, corrections).
    """
    grid = basis.grid
    K = raw_R.n_modes
    modes = np.array(raw_R.modes, dtype=complex)
    r0 = modes[K]
    hx = complex(inner_product(r0, basis.chi_x, grid))
    h2 = complex(inner_product(r0, basis.chi_2, grid))
    modes[K] = r0 - hx * basis.chi_x - h2 * basis.chi_2
    R_i = KineticField(mirror_hermitian(modes[K:]))

    c = np.array(raw_Phi.coeffs, dtype=complex)
    N = raw_Phi.n_modes
    gam, n0 = params.gamma, params.n0
    m = float(np.sum(grid.weights * grid.P * R_i.modes[K].real))
    rest = float(np.sum(np.abs(c) ** 2) - abs(c[N]) ** 2)
    y = c[N].imag
    target = n0 - gam * m - gam**2 * rest - gam**2 * y**2  # required (sqrt(n0) + gam x)^2
    if target <= 0.0:
        raise ConfigurationError("mass balance cannot be met: condensate density would be negative")
    x = (target - n0) / (gam * (math.sqrt(target) + math.sqrt(n0)))
    shift = x - c[N].real
    c[N] = complex(x, y)
    return R_i, WaveField(c), {"chi_x": hx, "chi_2": h2, "phi0_shift": shift}


def initial_moments(R: KineticField, Phi: WaveField, params: ModelParams, grid: MomentumGrid):
    """The two kinetic moments and the mass-balance integral of prepared data."""
    K = R.n_modes
    r0 = R.modes[K].real
    WP = grid.weights * grid.P
    mx = 2 * math.pi * float(np.sum(WP * grid.a * r0))
    m2 = 2 * math.pi * float(np.sum(WP * (grid.p2 + params.shift) * r0))
    c = np.array(Phi.coeffs, dtype=complex)
    c[Phi.n_modes] += math.sqrt(params.n0) / params.gamma
    bal = 2 * math.pi * (params.gamma**2 * float(np.sum(np.abs(c) ** 2)) - params.n0
                         + params.gamma * float(np.sum(WP * r0)))
    return mx, m2, bal


def random_initial_data(model: Model, amp_R: float, amp_Phi: float, seed: int = 0,
                        max_mode: int = 1):
    """Smooth random perturbations with norms amp_R (||R|| + ||d_x R||) and amp_Phi (H1)."""
    rng = np.random.default_rng(seed)
    g = model.grid
    K = model.n_modes
    if max_mode > K:
        raise ConfigurationError("max_mode exceeds the mode truncation")
    scale = 1.0 + g.p2
    profiles = np.stack([np.ones(g.size), g.a, g.p2, g.a * g.p2, g.a**2]) / scale
    pos = np.zeros((K + 1, g.size), dtype=complex)
    for k in range(max_mode + 1):
        coef = rng.normal(size=profiles.shape[0]) + (1j * rng.normal(size=profiles.shape[0]) if k else 0)
        pos[k] = coef @ profiles
    R = KineticField(mirror_hermitian(pos))
    nr = norms(R, g)
    if nr.h1 > 0:
        R = KineticField(R.modes * (amp_R / nr.h1))
    c = np.zeros(2 * K + 1, dtype=complex)
    for n in range(-max_mode, max_mode + 1):
        c[n + K] = rng.normal() + 1j * rng.normal()
    ph = norms(WaveField(c)).h1
    return R, WaveField(c * (amp_Phi / ph) if ph > 0 else c)


def composite_norm(phi: WaveField, R: KineticField, grid: MomentumGrid) -> float:
    return norms(phi).h1 + norms(R, grid).h1


# --- diagnostics ----------------------------------------------------------------

DIAGNOSTIC_COLUMNS = ("t", "mass", "mass_drift", "moment_x", "moment_2", "alpha", "E_k",
                      "E_i", "E_pot", "D_norm", "s_l2", "s_dx", "s_nu_perp", "R_l2", "R_dx",
                      "R_sum", "phi_h1", "min_f")


@dataclass
class DiagnosticsSeries:
    rows: list = field(default_factory=list)
    zeta_hat: float | None = None

    def append(self, row: dict) -> None:
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DIAGNOSTIC_COLUMNS)
            for r in self.rows:
                w.writerow([repr(float(r[c])) for c in DIAGNOSTIC_COLUMNS])

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(self[c])) for c in DIAGNOSTIC_COLUMNS) if self.rows else True


def psi_coefficients(phi, params: ModelParams):
    c = params.gamma * np.array(phi, dtype=complex)
    c[(c.size - 1) // 2] += math.sqrt(params.n0)
    return c


def diagnostics(model: Model, t: float, phi, s_modes, mass0: float | None = None) -> dict:
    p, g = model.params, model.grid
    K = model.n_modes
    e = math.exp(-p.zeta * t)
    pc = psi_coefficients(phi, p)
    n = wavenumbers(K)
    mass_psi = 2 * math.pi * float(np.sum(np.abs(pc) ** 2))
    r0 = e * s_modes[K].real
    WP = g.weights * g.P
    mass = mass_psi + 2 * math.pi * (float(np.sum(WP)) + p.gamma * float(np.sum(WP * r0)))
    Mf = model.n_fine
    psi_f = to_physical(pc, Mf)
    dens = np.abs(psi_f) ** 2
    Phi_f = to_physical(np.asarray(phi), Mf)
    dev = p.gamma * (2 * math.sqrt(p.n0) * Phi_f.real + p.gamma * np.abs(Phi_f) ** 2)
    E_k = 2 * math.pi * float(np.sum(n**2 * np.abs(pc) ** 2))
    avg = 2 * math.pi / Mf
    E_dev = 0.5 * p.g * avg * float(np.sum(dev**2))
    E_i = 0.5 * p.g * avg * float(np.sum(dens**2))
    f = coupling_fields(model, t, phi, s_modes)
    min_f = float(np.min(g.P[None, :] * (1.0 + p.gamma * e * f.S)))
    S = KineticField(np.asarray(s_modes))
    ns = norms(S, g)
    _, perp = project(S.modes, model.basis)
    nperp = norms(perp, g, model.tables.nu)
    return {
        "t": t, "mass": mass,
        "mass_drift": 0.0 if mass0 is None else (mass - mass0) / mass0,
        "moment_x": 2 * math.pi * float(np.sum(WP * g.a * r0)),
        "moment_2": 2 * math.pi * float(np.sum(WP * (g.p2 + p.shift) * r0)),
        "alpha": E_k + E_dev, "E_k": E_k, "E_i": E_i, "E_pot": g.U_ext * mass_psi,
        "D_norm": math.sqrt(2 * math.pi * float(np.mean(f.D**2))),
        "s_l2": ns.l2, "s_dx": ns.dx_l2, "s_nu_perp": nperp.nu_half,
        "R_l2": e * ns.l2, "R_dx": e * ns.dx_l2, "R_sum": e * ns.h1,
        "phi_h1": norms(WaveField(np.asarray(phi))).h1, "min_f": min_f,
    }


@dataclass
class Trajectory:
    times: np.ndarray
    phi: np.ndarray  # (n_times, 2K+1)
    s: np.ndarray  # (n_times, 2K+1, n_nodes)

    def at(self, t: float):
        """Piecewise-linear interpolation in time."""
        tt = self.times
        j = int(np.clip(np.searchsorted(tt, t) - 1, 0, tt.size - 2))
        th = (t - tt[j]) / (tt[j + 1] - tt[j])
        return ((1 - th) * self.phi[j] + th * self.phi[j + 1],
                (1 - th) * self.s[j] + th * self.s[j + 1])


@dataclass
class SimulationState:
    t: float
    s: KineticField
    phi: WaveField
    diagnostics: DiagnosticsSeries
    params: ModelParams

    @property
    def psi(self) -> WaveField:
        return WaveField(psi_coefficients(self.phi.coeffs, self.params))


@dataclass
class SimulationResult:
    state: SimulationState
    series: DiagnosticsSeries
    flags: dict
    trajectory: Trajectory | None = None
    picard: list = field(default_factory=list)


# --- Picard windows -------------------------------------------------------------

@dataclass
class PicardReport:
    factors: list
    diffs: list
    iterations: int
    windows: list
    converged: bool = True

    def as_dict(self):
        return {"factors": [float(f) for f in self.factors], "diffs": [float(d) for d in self.diffs],
                "iterations": self.iterations, "windows": [list(w) for w in self.windows],
                "converged": self.converged}


def wave_coefficients(model: Model, t: float, phi, s_modes):
    """S1 and U of the linear wave problem with frozen (phi, s), on the collocation grid."""
    p = model.params
    f = coupling_fields(model, t, phi, s_modes)
    Phi = to_physical(np.asarray(phi), model.n_points)
    gam, rn = p.gamma, math.sqrt(p.n0)
    S1 = -1j * p.g * p.n0 - 0.5 * f.D - 2j * p.g * gam * f.m_P
    U = (-0.5 * rn * f.D / gam - 2j * p.g * rn * f.m_P
         - 1j * rn * p.g * gam * (2 * np.abs(Phi) ** 2 + Phi**2)
         - 1j * p.g * gam**2 * Phi * np.abs(Phi) ** 2)
    return S1, U


def picard_distance(model: Model, times, dphi, ds) -> float:
    """sup ||d phi||_H1 + sup ||d s||_{2,2,H1} + sqrt(gamma) (int ||nu^1/2 d s||^2_{H1} dt)^1/2."""
    g, nu = model.grid, model.tables.nu
    a = max(norms(WaveField(c)).h1 for c in dphi)
    reps = [norms(m, g, nu) for m in ds]
    b = max(r.h1 for r in reps)
    c2 = np.array([(r.nu_half + r.nu_half_dx) ** 2 for r in reps])
    c = math.sqrt(float(np.trapezoid(c2, times))) if len(times) > 1 else 0.0
    return a + b + math.sqrt(model.params.gamma) * c


def _picard_window(model: Model, phi_i, s_i, t0: float, n: int, dt: float, tol: float,
                   max_iter: int):
    p = model.params
    K, N = model.n_modes, model.grid.size
    times = t0 + dt * np.arange(n + 1)
    cur = Trajectory(times, np.zeros((n + 1, 2 * K + 1), complex),
                     np.zeros((n + 1, 2 * K + 1, N), complex))
    factors, diffs = [], []
    for it in range(1, max_iter + 1):
        S1, U = zip(*(wave_coefficients(model, t, cur.phi[j], cur.s[j]) for j, t in enumerate(times)))
        src = WaveSources.from_samples(times - t0, np.array(S1), -1j * p.g * p.n0, np.array(U))
        wave = solve_linear_wave(WaveField(np.asarray(phi_i)), src, n * dt, dt, tol=1e-3 * tol)
        phi_new = wave.coeffs

        def rhs(t, modes, cur=cur):
            ph, sq = cur.at(t)
            return assemble_kinetic_rhs(KineticField(modes), WaveField(ph), t, p, model.tables,
                                        n_points=model.n_points, q_field=KineticField(sq)).modes

        s_new = np.empty_like(cur.s)
        s_new[0] = s_i
        h = KineticField(np.asarray(s_i))
        for j in range(n):
            h = step_kinetic(h, rhs, times[j], dt, model.grid.a)
            s_new[j + 1] = h.modes
        d = picard_distance(model, times, phi_new - cur.phi, s_new - cur.s)
        scale = max(1.0, picard_distance(model, times, phi_new, s_new))
        if diffs and diffs[-1] > 0:
            factors.append(d / diffs[-1])
        diffs.append(d)
        cur = Trajectory(times, phi_new, s_new)
        if d <= tol * scale:
            return cur, factors, diffs, it
        if len(factors) >= 2 and factors[-1] >= 1.0:
            raise ContractionError(f"contraction factor {factors[-1]:.3g} >= 1")
    raise ContractionError("Picard iteration did not converge")


def picard_solve(model: Model, phi_i, s_i, T: float, dt: float, t0: float = 0.0,
                 tol: float = 1e-10, max_iter: int = 40, max_depth: int = 4):
    """Alternating linear wave / linear kinetic solves on [t0, t0 + T].

    Windows that fail to contract are halved; returns (Trajectory, PicardReport).
    """
    p = model.params
    if T > 1.0 / (10 * p.g * p.n0) * (1 + 1e-12):
        warnings.warn("window exceeds 1/(10 g n0)", RuntimeWarning, stacklevel=2)
    n = max(1, int(round(T / dt)))
    dt = T / n

    def solve(phi0, s0, ta, m, depth):
        try:
            tr, f, d, it = _picard_window(model, phi0, s0, ta, m, dt, tol, max_iter)
            return tr, f, d, it, [(ta, ta + m * dt)]
        except ContractionError:
            if depth >= max_depth or m < 2:
                raise ContractionError(
                    f"no contraction on [{ta:.4g}, {ta + m * dt:.4g}] with gamma={p.gamma}, "
                    f"g={p.g}, n0={p.n0}, dt={dt:.3g}") from None
            h = m // 2
            ta_, fa, da, ia, wa = solve(phi0, s0, ta, h, depth + 1)
            tb_, fb, db, ib, wb = solve(ta_.phi[-1], ta_.s[-1], ta + h * dt, m - h, depth + 1)
            tr = Trajectory(np.concatenate([ta_.times, tb_.times[1:]]),
                            np.concatenate([ta_.phi, tb_.phi[1:]]),
                            np.concatenate([ta_.s, tb_.s[1:]]))
            return tr, fa + fb, da + db, max(ia, ib), wa + wb

    tr, f, d, it, w = solve(np.asarray(phi_i, complex), np.asarray(s_i, complex), t0, n, 0)
    return tr, PicardReport(f, d, it, w)


# --- simulation ----------------------------------------------------------------

def simulate(model: Model, R_i: KineticField, Phi_i: WaveField, T_final: float,
             dt: float | None = None, mode: str = "direct", sample_every: int = 1,
             mass_tol: float = 1e-6, eta: float = 0.1, store: bool = False,
             picard_tol: float = 1e-10, window: float | None = None) -> SimulationResult:
    """Advance prepared data to T_final recording diagnostics every ``sample_every`` steps."""
    p = model.params
    dt = dt or model.default_dt()
    n_steps = max(1, int(round(T_final / dt)))
    dt = T_final / n_steps
    flags = {"small_data": True, "mass": True, "positivity": True, "finite": True}
    size = composite_norm(Phi_i, R_i, model.grid)
    if size > eta:
        flags["small_data"] = False
        warnings.warn(f"initial data norm {size:.3g} exceeds the small-data threshold {eta}",
                      RuntimeWarning, stacklevel=2)
    phi = np.array(Phi_i.coeffs, dtype=complex)
    s = np.array(R_i.modes, dtype=complex)
    series = DiagnosticsSeries()
    d0 = diagnostics(model, 0.0, phi, s)
    mass0 = d0["mass"]
    d0["mass_drift"] = 0.0
    series.append(d0)
    keep_t, keep_phi, keep_s = [0.0], [phi.copy()], [s.copy()]
    reports = []

    def record(i, t, phi, s):
        d = diagnostics(model, t, phi, s, mass0)
        series.append(d)
        if store:
            keep_t.append(t)
            keep_phi.append(phi.copy())
            keep_s.append(s.copy())
        if not all(np.isfinite(v) for v in d.values()):
            flags["finite"] = False
            raise SimulationAborted(f"non-finite diagnostics at t={t:.4g}", series)
        if abs(d["mass_drift"]) > mass_tol:
            flags["mass"] = False
            raise SimulationAborted(f"mass drift {d['mass_drift']:.3e} at t={t:.4g}", series)
        if d["min_f"] <= 0.0:
            flags["positivity"] = False
            raise SimulationAborted(f"distribution lost positivity at t={t:.4g}", series)

    if mode == "direct":
        for i in range(1, n_steps + 1):
            phi, s = step_direct(model, (i - 1) * dt, phi, s, dt)
            if i % sample_every == 0 or i == n_steps:
                record(i, i * dt, phi, s)
    elif mode == "picard-windows":
        T0 = window or 1.0 / (10 * p.g * p.n0)
        per = max(1, int(round(T0 / dt)))
        i = 0
        while i < n_steps:
            m = min(per, n_steps - i)
            tr, rep = picard_solve(model, phi, s, m * dt, dt, t0=i * dt, tol=picard_tol)
            reports.append(rep)
            for j in range(1, tr.times.size):
                step = i + j
                if step % sample_every == 0 or step == n_steps:
                    record(step, tr.times[j], tr.phi[j], tr.s[j])
            phi, s = tr.phi[-1], tr.s[-1]
            i += m
    else:
        raise ConfigurationError(f"unknown mode {mode!r}")
    state = SimulationState(n_steps * dt, KineticField(s), WaveField(phi), series, p)
    traj = Trajectory(np.array(keep_t), np.array(keep_phi), np.array(keep_s)) if store else None
    return SimulationResult(state, series, flags, traj, reports)


# --- energy identities ------------------------------------------------------------

def _spectral_dx(values):
    M = values.shape[0]
    k = np.fft.fftfreq(M, 1.0 / M)
    return np.fft.ifft(1j * k * np.fft.fft(values))


def energy_terms(model: Model, t: float, phi, s_modes) -> dict:
    """alpha, the balanced energy and both assembled right sides at one time."""
    p, g = model.params, model.grid
    Mf = model.n_fine
    avg = 2 * math.pi / Mf
    f = coupling_fields(model, t, phi, s_modes, n_points=Mf)
    pc = psi_coefficients(phi, p)
    K = model.n_modes
    n = wavenumbers(K)
    psi = f.psi
    psi_x = to_physical(1j * n * pc, Mf)
    psi_xx = to_physical(-(n**2) * pc, Mf)
    dens = np.abs(psi) ** 2
    D, A, m_P = f.D, f.A, f.m_P
    m_Px = _spectral_dx(m_P).real
    D_x = _spectral_dx(D).real
    dens_x = 2 * np.real(np.conj(psi) * psi_x)
    alpha = avg * float(np.sum(np.abs(psi_x) ** 2 + 0.5 * p.g * f.dev**2))
    rhs_alpha = avg * float(np.real(np.sum(
        2j * p.g * p.gamma * (np.conj(psi) * psi_x - psi * np.conj(psi_x)) * m_Px
        + 2 * p.g * p.gamma * dens * D * m_P
        - 0.5 * dens_x * D_x
        - np.abs(psi_x) ** 2 * D
        - dens * A * D)))
    # balance of the condensate energy with the external potential
    psi_t = 1j * psi_xx - psi * (0.5 * D + 1j * A)
    F = float(np.sum(g.weights * g.P)) + p.gamma * m_P
    energy = avg * float(np.sum(np.abs(psi_x) ** 2 + 0.5 * p.g * dens**2 + g.U_ext * dens))
    rhs_energy = avg * float(np.real(np.sum(
        0.5j * D * (psi * np.conj(psi_t) - np.conj(psi) * psi_t)
        - 2 * p.g * F * 2 * np.real(np.conj(psi) * psi_t))))
    return {"alpha": alpha, "rhs_alpha": rhs_alpha, "energy": energy, "rhs_energy": rhs_energy}


def energy_identity_check(model: Model, traj: Trajectory) -> dict:
    """Central-difference time derivatives of alpha and the condensate energy vs their right sides."""
    t = traj.times
    if t.size < 3:
        raise ValueError("need at least three samples")
    dts = np.diff(t)
    if not np.allclose(dts, dts[0]):
        raise ValueError("uniform sampling required")
    dt = dts[0]
    terms = [energy_terms(model, ti, ph, s) for ti, ph, s in zip(t, traj.phi, traj.s)]
    alpha = np.array([e["alpha"] for e in terms])
    energy = np.array([e["energy"] for e in terms])
    ra = np.array([e["rhs_alpha"] for e in terms])[1:-1]
    re = np.array([e["rhs_energy"] for e in terms])[1:-1]
    da = (alpha[2:] - alpha[:-2]) / (2 * dt)
    de = (energy[2:] - energy[:-2]) / (2 * dt)
    return {"times": t[1:-1], "alpha": alpha, "dalpha": da, "rhs_alpha": ra,
            "res_alpha": da - ra, "denergy": de, "rhs_energy": re, "res_energy": de - re,
            "max_alpha": float(np.abs(da - ra).max()), "max_energy": float(np.abs(de - re).max())}


# --- decay fits --------------------------------------------------------------------

@dataclass
class DecayFit:
    zeta_hat: float
    prefactor: float
    r2: float
    window: tuple


def decay_fit(times, values, window: tuple | None = None, floor: float | None = None) -> DecayFit:
    """Least-squares fit of log(values) = log(C) - zeta t over a window.

    The window is cut where the series stops decreasing or falls below the
    noise floor (default 1e-12 times the initial value).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = np.ones(t.size, bool) if window is None else (t >= window[0]) & (t <= window[1])
    t, v = t[sel], v[sel]
    floor = 1e-12 * abs(v[0]) if floor is None else floor
    stop = t.size
    for j in range(1, t.size):
        if v[j] <= floor or v[j] > v[j - 1]:
            stop = j
            break
    t, v = t[:stop], v[:stop]
    if t.size < 3:
        raise ValueError("too few monotone samples for a decay fit")
    y = np.log(v)
    slope, icpt = np.polyfit(t, y, 1)
    fit = slope * t + icpt
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss if ss > 0 else 1.0
    return DecayFit(-float(slope), math.exp(icpt), r2, (float(t[0]), float(t[-1])))


def alpha_limit(alpha) -> float:
    """Average of the last 10% of samples."""
    a = np.asarray(alpha)
    return float(a[-max(1, a.size // 10):].mean())
