"""INI-style run configuration.

Sections: [physics] g, n0, gamma, c_zeta, Lambda_cut, e0, p_max;
[grid] n_axial, n_radial, n_modes, lattice; [time] dt, T_final, sample_every;
[init] seed, amp_R, amp_Phi, max_mode, or explicit phi_modes / r_modes;
[run] mode, mass_tol, picard_tol, eta, cache_dir.

Explicit amplitudes: ``phi_modes = 1: 0.01+0.002j, -1: 0.01`` gives wave
coefficients by mode number; ``r_modes = 0: 0.1 0 0 0 0; 1: 0.05j 0 0 0 0``
gives, per kinetic mode k >= 0, coefficients on the momentum profiles
(1, p_x, |p|^2, p_x |p|^2, p_x^2) / (1 + |p|^2).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, KineticField, ModelParams, WaveField, mirror_hermitian

_PHYSICS = ("g", "n0", "gamma", "c_zeta", "Lambda_cut", "e0", "p_max")
_GRID_INT = ("n_axial", "n_radial", "n_modes")


@dataclass
class RunConfig:
    params: ModelParams
    dt: float | None = None
    T_final: float = 10.0
    sample_every: int = 1
    seed: int = 0
    amp_R: float = 0.05
    amp_Phi: float = 0.05
    max_mode: int = 1
    phi_modes: dict | None = None
    r_modes: dict | None = None
    mode: str = "direct"
    mass_tol: float = 1e-6
    picard_tol: float = 1e-10
    eta: float = 0.1
    cache_dir: str | None = None
    extra: dict = field(default_factory=dict)


def _parse_phi_modes(text: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        n, v = item.split(":")
        out[int(n)] = complex(v.strip().replace(" ", ""))
    return out


def _parse_r_modes(text: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(";"))):
        k, v = item.split(":")
        out[int(k)] = np.array([complex(x) for x in v.split()])
    return out


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep Lambda_cut
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    known = {"physics", "grid", "time", "init", "run"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise ConfigurationError(f"unknown sections: {sorted(unknown)}")
    kw = {}
    try:
        if cp.has_section("physics"):
            for key, val in cp.items("physics"):
                if key not in _PHYSICS:
                    raise ConfigurationError(f"unknown physics key {key!r}")
                kw[key] = float(val)
        if cp.has_section("grid"):
            for key, val in cp.items("grid"):
                if key in _GRID_INT:
                    kw[key] = int(val)
                elif key == "lattice":
                    kw[key] = cp.getboolean("grid", key)
                else:
                    raise ConfigurationError(f"unknown grid key {key!r}")
        params = ModelParams(**kw)
        rc = RunConfig(params=params)
        if cp.has_section("time"):
            t = cp["time"]
            rc.dt = t.getfloat("dt", fallback=None)
            rc.T_final = t.getfloat("T_final", fallback=rc.T_final)
            rc.sample_every = t.getint("sample_every", fallback=1)
        if cp.has_section("init"):
            s = cp["init"]
            rc.seed = s.getint("seed", fallback=0)
            rc.amp_R = s.getfloat("amp_R", fallback=rc.amp_R)
            rc.amp_Phi = s.getfloat("amp_Phi", fallback=rc.amp_Phi)
            rc.max_mode = s.getint("max_mode", fallback=rc.max_mode)
            if "phi_modes" in s:
                rc.phi_modes = _parse_phi_modes(s["phi_modes"])
            if "r_modes" in s:
                rc.r_modes = _parse_r_modes(s["r_modes"])
        if cp.has_section("run"):
            r = cp["run"]
            rc.mode = r.get("mode", rc.mode)
            rc.mass_tol = r.getfloat("mass_tol", fallback=rc.mass_tol)
            rc.picard_tol = r.getfloat("picard_tol", fallback=rc.picard_tol)
            rc.eta = r.getfloat("eta", fallback=rc.eta)
            rc.cache_dir = r.get("cache_dir", fallback=None)
    except (ValueError, KeyError) as exc:
        raise ConfigurationError(f"invalid configuration value: {exc}") from None
    if rc.mode not in ("direct", "picard-windows"):
        raise ConfigurationError(f"unknown run mode {rc.mode!r}")
    if rc.T_final <= 0 or (rc.dt is not None and rc.dt <= 0) or rc.sample_every < 1:
        raise ConfigurationError("time settings must be positive")
    return rc


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def explicit_initial_data(rc: RunConfig, grid):
    """Raw (R, Phi) from explicit amplitudes, or None when not given."""
    if rc.phi_modes is None and rc.r_modes is None:
        return None
    K = rc.params.n_modes
    c = np.zeros(2 * K + 1, dtype=complex)
    for n, v in (rc.phi_modes or {}).items():
        if abs(n) > K:
            raise ConfigurationError(f"phi mode {n} exceeds the truncation")
        c[n + K] = v
    profiles = np.stack([np.ones(grid.size), grid.a, grid.p2, grid.a * grid.p2, grid.a**2])
    profiles = profiles / (1.0 + grid.p2)
    pos = np.zeros((K + 1, grid.size), dtype=complex)
    for k, coef in (rc.r_modes or {}).items():
        if not 0 <= k <= K:
            raise ConfigurationError(f"kinetic mode {k} must lie in 0..{K}")
        if coef.size > profiles.shape[0]:
            raise ConfigurationError("too many profile coefficients")
        pos[k] = coef @ profiles[: coef.size]
    return KineticField(mirror_hermitian(pos)), WaveField(c)
