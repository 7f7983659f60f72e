"""Model parameters, the truncated cylindrical momentum grid, fields and norms.

Momenta are cylindrically symmetric, p = (p_x, p_r), and every momentum
function is stored on nodes (a, u) with a = p_x and u = p_r**2.  In these
coordinates the measure is dp = pi da du.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class ConfigurationError(ValueError):
    """Raised for inadmissible parameters or grids."""


@dataclass(frozen=True)
class ModelParams:
    g: float = 1.0
    n0: float = 0.1
    gamma: float = 0.05
    c_zeta: float = 0.5
    Lambda_cut: float = 1.0
    p_max: float = 3.0
    e0: float | None = None
    n_axial: int = 25
    n_radial: int = 20
    n_modes: int = 4
    lattice: bool = True

    def __post_init__(self):
        if self.e0 is None:
            object.__setattr__(self, "e0", self.g * self.n0)
        if self.g <= 0 or self.n0 <= 0:
            raise ConfigurationError("g and n0 must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if self.c_zeta <= 0:
            raise ConfigurationError("c_zeta must be positive")
        if self.Lambda_cut <= 2.0 * math.sqrt(self.g * self.n0):
            raise ConfigurationError("need Lambda_cut > 2 sqrt(g n0)")
        if self.p_max**2 <= 2.0 * self.Lambda_cut**2:
            raise ConfigurationError("need p_max**2 > 2 Lambda_cut**2")
        if self.n_axial < 1 or self.n_radial < 1 or self.n_modes < 0:
            raise ConfigurationError("grid sizes must be positive")

    @property
    def lam(self) -> float:
        return self.gamma**2

    @property
    def zeta(self) -> float:
        return self.c_zeta * self.gamma

    @property
    def shift(self) -> float:
        """Energy shift g n0 carried by the resonance manifold."""
        return self.g * self.n0

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def planckian(energy):
    """1/(e^E - 1), evaluated without cancellation for small E."""
    with np.errstate(over="ignore"):  # huge E gives exactly 0
        return 1.0 / np.expm1(energy)


@dataclass(frozen=True, eq=False)
class MomentumGrid:
    params: ModelParams
    a_centers: np.ndarray
    u_centers: np.ndarray
    da: float
    du: float
    index: np.ndarray  # (n_axial, n_radial) node number or -1 outside A
    a: np.ndarray
    u: np.ndarray
    ia: np.ndarray
    iu: np.ndarray
    weights: np.ndarray
    P: np.ndarray
    weight_fn: np.ndarray
    nu_values: np.ndarray | None = field(default=None)

    @property
    def size(self) -> int:
        return self.a.size

    @property
    def p2(self) -> np.ndarray:
        return self.a**2 + self.u

    @property
    def pabs(self) -> np.ndarray:
        return np.sqrt(self.p2)

    @property
    def energy(self) -> np.ndarray:
        return self.p2 + self.params.e0

    @property
    def M0(self) -> float:
        """Total mass constant: integral of P plus n0."""
        return float(np.sum(self.weights * self.P) + self.params.n0)

    @property
    def U_ext(self) -> float:
        return self.params.g * (self.params.n0 - 2.0 * self.M0)

    def integrate(self, values, axis=-1):
        return np.tensordot(values, self.weights, axes=([axis], [0]))

    def admissible(self, a, u):
        p2 = a**2 + u
        lam2 = 2.0 * self.params.Lambda_cut**2
        return (u >= 0.0) & (p2 >= lam2) & (p2 <= self.params.p_max**2)


def _radial_lattice(params: ModelParams, da: float):
    """Radial spacing and offset putting every manifold partner on a node.

    With a = i da and u = c + j du, the solved u1 = u2 + u3 - 2 a2 a3 + g n0 is
    again a node when du divides 2 da^2 and c + g n0 is a multiple of du.
    """
    target = params.p_max**2 / params.n_radial
    m = max(1, round(2.0 * da**2 / target))
    du = 2.0 * da**2 / m
    c = (-params.shift) % du
    if du - c < 1e-12 * du:
        c = 0.0
    n = int(math.floor((params.p_max**2 - c) / du)) + 1
    return du, c + du * np.arange(n)


def build_grid(params: ModelParams) -> MomentumGrid:
    """Tensor grid on (a, u) clipped to the admissible set by node membership.

    Without ``lattice`` this is the plain midpoint rule.  With ``lattice`` the
    axial nodes are i da (odd ``n_axial``) and the radial nodes form the
    lattice of ``_radial_lattice``; cells hanging below u = 0 are trimmed.
    """
    pm = params.p_max
    na, nr = params.n_axial, params.n_radial
    da = 2.0 * pm / na
    a_c = -pm + (np.arange(na) + 0.5) * da
    if na % 2 == 1:
        a_c = (np.arange(na) - na // 2) * da
    if params.lattice:
        if na % 2 == 0:
            raise ConfigurationError("lattice grids need an odd axial resolution")
        du, u_c = _radial_lattice(params, da)
    else:
        du = pm**2 / nr
        u_c = (np.arange(nr) + 0.5) * du
    A, U = np.meshgrid(a_c, u_c, indexing="ij")
    p2 = A**2 + U
    inside = (p2 >= 2.0 * params.Lambda_cut**2) & (p2 <= pm**2)
    if not inside.any():
        raise ConfigurationError("admissible momentum set contains no grid node")
    index = np.full(A.shape, -1, dtype=np.int64)
    ia, iu = np.nonzero(inside)
    index[ia, iu] = np.arange(ia.size)
    a = a_c[ia]
    u = u_c[iu]
    energy = a**2 + u + params.e0
    height = np.minimum(u + 0.5 * du, du)
    weights = math.pi * da * height
    return MomentumGrid(
        params=params, a_centers=a_c, u_centers=u_c, da=da, du=du, index=index,
        a=a, u=u, ia=ia, iu=iu, weights=weights, P=planckian(energy),
        weight_fn=np.exp(-energy),
    )


def admissible_area(Lambda_cut: float, p_max: float) -> float:
    """Area of {2 Lambda^2 <= a^2 + u <= p_max^2, u >= 0} in the (a, u) plane."""
    outer = 4.0 / 3.0 * p_max**3
    r = math.sqrt(2.0) * Lambda_cut
    inner = 4.0 / 3.0 * r**3
    return outer - inner


def inner_product(f, h, grid: MomentumGrid):
    """Weighted product sum W * P/(1+P) * f * conj(h) over the grid."""
    f = np.asarray(f)
    h = np.asarray(h)
    if f.shape[-1] != grid.size or h.shape[-1] != grid.size:
        raise ValueError("momentum function length does not match the grid")
    return np.sum(grid.weights * grid.weight_fn * f * np.conj(h), axis=-1)


# --- x-Fourier helpers -------------------------------------------------------

def wavenumbers(n_modes: int) -> np.ndarray:
    return np.arange(-n_modes, n_modes + 1)


def collocation_size(n_modes: int) -> int:
    """Physical grid size from the 3/2 rule applied to 2n+1 modes."""
    m = math.ceil(3 * (2 * n_modes + 1) / 2)
    return m + (m % 2)


def to_physical(coeffs, n_points: int, axis: int = 0):
    """Coefficients c_k, k = -K..K, to samples at x_j = 2 pi j / n_points."""
    coeffs = np.moveaxis(np.asarray(coeffs), axis, 0)
    K = (coeffs.shape[0] - 1) // 2
    if n_points <= 2 * K:
        raise ValueError("collocation grid too small for the mode count")
    full = np.zeros((n_points,) + coeffs.shape[1:], dtype=complex)
    full[: K + 1] = coeffs[K:]
    if K:
        full[-K:] = coeffs[:K]
    vals = np.fft.ifft(full, axis=0) * n_points
    return np.moveaxis(vals, 0, axis)


def to_modes(values, n_modes: int, axis: int = 0):
    """Samples on the uniform x grid to truncated coefficients c_k, k = -K..K."""
    values = np.moveaxis(np.asarray(values), axis, 0)
    n_points = values.shape[0]
    full = np.fft.fft(values, axis=0) / n_points
    K = n_modes
    out = np.concatenate([full[n_points - K:], full[: K + 1]], axis=0) if K else full[:1]
    return np.moveaxis(out, 0, axis)


def real_to_physical(modes, n_points: int):
    """Hermitian mode stack (leading axis k = -K..K) to real samples."""
    modes = np.asarray(modes)
    K = (modes.shape[0] - 1) // 2
    if n_points <= 2 * K:
        raise ValueError("collocation grid too small for the mode count")
    half = np.zeros((n_points // 2 + 1,) + modes.shape[1:], dtype=complex)
    half[: K + 1] = modes[K:]
    return np.fft.irfft(half, n=n_points, axis=0) * n_points


def real_to_modes(values, n_modes: int):
    """Real samples to an exactly Hermitian mode stack k = -K..K."""
    values = np.asarray(values)
    n_points = values.shape[0]
    half = np.fft.rfft(values, axis=0)[: n_modes + 1] / n_points
    return mirror_hermitian(half)


def mirror_hermitian(nonneg):
    """Stack k = 0..K extended to k = -K..K with c_{-k} = conj(c_k), c_0 real."""
    nonneg = np.array(nonneg, dtype=complex)
    nonneg[0] = nonneg[0].real
    return np.concatenate([np.conj(nonneg[:0:-1]), nonneg], axis=0)


@dataclass
class WaveField:
    """x-Fourier coefficients c_n, n = -N..N, of a function on [0, 2 pi]."""

    coeffs: np.ndarray

    @classmethod
    def zeros(cls, n_modes: int) -> "WaveField":
        return cls(np.zeros(2 * n_modes + 1, dtype=complex))

    @property
    def n_modes(self) -> int:
        return (self.coeffs.size - 1) // 2

    def physical(self, n_points: int | None = None) -> np.ndarray:
        return to_physical(self.coeffs, n_points or collocation_size(self.n_modes))

    def copy(self) -> "WaveField":
        return WaveField(self.coeffs.copy())


@dataclass
class KineticField:
    """Stack of x-Fourier modes, shape (2K+1, n_nodes), mode index k = -K..K."""

    modes: np.ndarray

    @classmethod
    def zeros(cls, n_modes: int, n_nodes: int) -> "KineticField":
        return cls(np.zeros((2 * n_modes + 1, n_nodes), dtype=complex))

    @property
    def n_modes(self) -> int:
        return (self.modes.shape[0] - 1) // 2

    def mode(self, k: int) -> np.ndarray:
        return self.modes[k + self.n_modes]

    def is_hermitian(self, atol=0.0) -> bool:
        return bool(np.allclose(self.modes[::-1], np.conj(self.modes), rtol=0.0, atol=atol))

    def copy(self) -> "KineticField":
        return KineticField(self.modes.copy())


def hermitian_part(modes: np.ndarray) -> np.ndarray:
    """Project a mode stack (leading axis k = -K..K) onto real-in-x functions."""
    return 0.5 * (modes + np.conj(modes[::-1]))


# --- norms -------------------------------------------------------------------

@dataclass
class NormReport:
    l2: float
    dx_l2: float
    h1: float
    nu_half: float | None = None
    nu_half_dx: float | None = None
    nu_minus_half: float | None = None
    growth: float | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def _kinetic_sq(modes, grid, density):
    return 2.0 * math.pi * float(np.sum(grid.weights * grid.weight_fn * density * np.abs(modes) ** 2))


def norms(field_, grid: MomentumGrid | None = None, nu=None) -> NormReport:
    """L2, d/dx and H1 norms; nu-weighted variants when nu is supplied.

    For a KineticField the L2 norm is the P/(1+P)-weighted norm over
    [0, 2 pi] x R^3, and h1 = ||h|| + ||d_x h||.  For a WaveField the norms are
    on [0, 2 pi].
    """
    if isinstance(field_, WaveField):
        n = wavenumbers(field_.n_modes)
        l2 = math.sqrt(2.0 * math.pi * float(np.sum(np.abs(field_.coeffs) ** 2)))
        dx = math.sqrt(2.0 * math.pi * float(np.sum(n**2 * np.abs(field_.coeffs) ** 2)))
        return NormReport(l2=l2, dx_l2=dx, h1=l2 + dx)
    modes = field_.modes if isinstance(field_, KineticField) else np.asarray(field_)
    if grid is None or modes.shape[-1] != grid.size:
        raise ValueError("kinetic field does not match the grid")
    k = wavenumbers((modes.shape[0] - 1) // 2)[:, None]
    one = np.ones(grid.size)
    l2 = math.sqrt(_kinetic_sq(modes, grid, one))
    dx = math.sqrt(_kinetic_sq(k * modes, grid, one))
    rep = NormReport(l2=l2, dx_l2=dx, h1=l2 + dx,
                     growth=math.sqrt(_kinetic_sq(modes, grid, (1.0 + grid.pabs) ** 3)))
    if nu is not None:
        rep.nu_half = math.sqrt(_kinetic_sq(modes, grid, nu))
        rep.nu_half_dx = math.sqrt(_kinetic_sq(k * modes, grid, nu))
        rep.nu_minus_half = math.sqrt(_kinetic_sq(modes, grid, 1.0 / nu))
    return rep


def h1_sq(coeffs) -> float:
    """2 pi sum (1+n^2)|c_n|^2, the squared H1 norm used in the Duhamel bounds."""
    coeffs = np.asarray(coeffs)
    n = wavenumbers((coeffs.shape[-1] - 1) // 2)
    return 2.0 * math.pi * float(np.sum((1 + n**2) * np.abs(coeffs) ** 2))
