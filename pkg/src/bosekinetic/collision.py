"""Condensate-excitation collision operator on the resonance manifold.

Both delta constraints are resolved analytically.  The axial delta fixes
a1 = a2 + a3; the energy delta fixes u1 = u2 + u3 - 2 a2 a3 + g n0 with unit
Jacobian.  The discrete operator is assembled from *triples*: p2 and p3 run
over grid nodes, p1 lands on an exact axial column and is reconstructed by
linear interpolation in u.  The same interpolation weights distribute the
p1 contribution back to the grid, so the weak form is symmetric and the
collision invariants p_x and |p|^2 + g n0 are reproduced exactly.

Off-grid values of a perturbation R are reconstructed as
(1 + P(p1)) * interp(R / (1 + P)), with P always analytic.
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .core import ConfigurationError, MomentumGrid, planckian

CACHE_MAGIC = b"BKCT"
CACHE_VERSION = 1


@dataclass
class Stencil:
    """Partner momenta for one output node in one manifold role.

    ``grid_partner`` is the partner sitting on a grid node, ``a_solved`` and
    ``u_solved`` the momentum fixed by the two deltas, ``weight`` the
    quadrature weight (pi * W_j for the grid partner, the other pi comes
    from the eliminated momentum).
    """

    role: int
    grid_partner: np.ndarray
    a_solved: np.ndarray
    u_solved: np.ndarray
    weight: np.ndarray
    P_solved: np.ndarray

    def __len__(self):
        return self.grid_partner.size


def manifold_reduce(role: int, node: int, grid: MomentumGrid) -> Stencil:
    """Resolve both deltas for ``node`` in manifold role 1, 2 or 3."""
    if role not in (1, 2, 3):
        raise ValueError("role must be 1, 2 or 3")
    shift = grid.params.shift
    a, u = grid.a[node], grid.u[node]
    aj, uj = grid.a, grid.u
    if role == 1:
        # p = p1, grid partner p2, solved p3
        a_s = a - aj
        u_s = u - uj + 2.0 * aj * a_s - shift
    else:
        # p = p2 (or p3), grid partner is the other outgoing momentum, solved p1
        a_s = a + aj
        u_s = u + uj - 2.0 * a * aj + shift
    keep = grid.admissible(a_s, u_s)
    j = np.nonzero(keep)[0]
    a_s, u_s = a_s[keep], u_s[keep]
    return Stencil(
        role=role, grid_partner=j, a_solved=a_s, u_solved=u_s,
        weight=math.pi * grid.weights[j],
        P_solved=planckian(a_s**2 + u_s + grid.params.e0),
    )


def compute_nu(grid: MomentumGrid) -> np.ndarray:
    """Collision frequency from the role stencils, P evaluated analytically."""
    nu = np.empty(grid.size)
    P = grid.P
    for k in range(grid.size):
        s1 = manifold_reduce(1, k, grid)
        s2 = manifold_reduce(2, k, grid)
        loss1 = np.sum(s1.weight * (1.0 + P[s1.grid_partner] + s1.P_solved))
        loss2 = 2.0 * np.sum(s2.weight * (P[s2.grid_partner] - s2.P_solved))
        nu[k] = loss1 + loss2
    return nu


def interpolate_column(grid: MomentumGrid, ia, u):
    """Linear interpolation in u within axial column ``ia``.

    Returns (node_lo, node_hi, w_lo, w_hi, ok); ``ok`` is False where the
    bracketing nodes are not both admissible.  Points sitting on a node (as
    on lattice grids) use that node alone, with w_lo = 1 and w_hi = 0.
    """
    ia = np.atleast_1d(np.asarray(ia))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    na, nr = grid.a_centers.size, grid.u_centers.size
    t = (u - grid.u_centers[0]) / grid.du
    jn = np.rint(t).astype(np.int64)
    on_node = np.abs(t - jn) < 1e-9
    j0 = np.where(on_node, jn, np.floor(t).astype(np.int64))
    frac = np.where(on_node, 0.0, t - j0)
    j1 = np.where(on_node, j0, j0 + 1)
    ok = (ia >= 0) & (ia < na) & (j0 >= 0) & (j1 < nr)
    ia_c = np.clip(ia, 0, na - 1)
    lo = grid.index[ia_c, np.clip(j0, 0, nr - 1)]
    hi = grid.index[ia_c, np.clip(j1, 0, nr - 1)]
    ok &= (lo >= 0) & (hi >= 0)
    return lo, hi, 1.0 - frac, frac, ok


@dataclass(eq=False)
class CollisionTables:
    grid: MomentumGrid
    nu: np.ndarray
    i1a: np.ndarray
    i1b: np.ndarray
    wa: np.ndarray
    wb: np.ndarray
    i2: np.ndarray
    i3: np.ndarray
    w: np.ndarray
    P1: np.ndarray

    def __post_init__(self):
        self._build_sparse()

    @property
    def n_triples(self) -> int:
        return self.w.size

    def _build_sparse(self):
        g = self.grid
        n, nt = g.size, self.n_triples
        P = g.P
        rows = np.arange(nt)
        ca = self.wa * (1.0 + self.P1) / (1.0 + P[self.i1a])
        cb = self.wb * (1.0 + self.P1) / (1.0 + P[self.i1b])
        # reconstruction of R at p1 and gathers at p2, p3
        self.G1 = sp.csr_matrix(
            (np.concatenate([ca, cb]), (np.concatenate([rows, rows]),
                                         np.concatenate([self.i1a, self.i1b]))),
            shape=(nt, n))
        self.G2 = sp.csr_matrix((np.ones(nt), (rows, self.i2)), shape=(nt, n))
        self.G3 = sp.csr_matrix((np.ones(nt), (rows, self.i3)), shape=(nt, n))
        # distribution: +interp at p1, -1 at p2 and p3, divided by cell weight
        scale = self.w
        vals = np.concatenate([self.wa * scale, self.wb * scale, -scale, -scale])
        r = np.concatenate([self.i1a, self.i1b, self.i2, self.i3])
        c = np.concatenate([rows, rows, rows, rows])
        dist = sp.csr_matrix((vals, (r, c)), shape=(n, nt))
        self.dist = sp.diags(1.0 / g.weights) @ dist
        P2, P3 = P[self.i2], P[self.i3]
        self.alpha1 = -(1.0 + P2 + P3) * self.P1
        self.beta2 = (P3 - self.P1) * P2
        self.beta3 = (P2 - self.P1) * P3
        lin = (sp.diags(self.alpha1) @ self.G1 + sp.diags(self.beta2) @ self.G2
               + sp.diags(self.beta3) @ self.G3)
        self.PL = (self.dist @ lin).tocsr()
        self.L = (sp.diags(1.0 / P) @ self.PL).tocsr()
        self._P2, self._P3 = P2, P3

    # -- triple level evaluations, values shaped (n_nodes, ncol) ------------
    def gather(self, R):
        return self.G1 @ R, self.G2 @ R, self.G3 @ R

    def quad_integrand(self, R, S=None):
        """Per-triple integrand of 2 Q(R, S)."""
        R1, R2, R3 = self.gather(R)
        if S is None:
            S1, S2, S3 = R1, R2, R3
        else:
            S1, S2, S3 = self.gather(S)
        P1 = self.P1[:, None]
        P2 = self._P2[:, None]
        P3 = self._P3[:, None]
        return (P2 * P3 * (R2 * S3 + R3 * S2)
                - P1 * R1 * (P2 * S2 + P3 * S3)
                - P1 * S1 * (P2 * R2 + P3 * R3))

    def save(self, path):
        save_tables(self, path)


def _as_columns(h):
    h = np.asarray(h)
    if h.ndim == 1:
        return h[:, None], True
    return h, False


def _check(h, tables):
    if np.asarray(h).shape[0] != tables.grid.size:
        raise ValueError("momentum function does not match the collision grid")


def build_tables(grid: MomentumGrid, nu: np.ndarray | None = None) -> CollisionTables:
    """Enumerate manifold triples with p2 <= p3 (node order) and weights."""
    na = grid.a_centers.size
    if na % 2 == 0:
        raise ConfigurationError("collision tables need an odd axial resolution")
    mid = na // 2
    shift = grid.params.shift
    n = grid.size
    out = {k: [] for k in ("i1a", "i1b", "wa", "wb", "i2", "i3", "w", "P1")}
    idx = np.arange(n)
    for j2 in range(n):
        j3 = idx[j2:]
        a2, u2 = grid.a[j2], grid.u[j2]
        a3, u3 = grid.a[j3], grid.u[j3]
        ia1 = grid.ia[j2] + grid.ia[j3] - mid
        a1 = grid.a_centers[np.clip(ia1, 0, na - 1)]
        u1 = u2 + u3 - 2.0 * a2 * a3 + shift
        lo, hi, wlo, whi, ok = interpolate_column(grid, ia1, u1)
        if not ok.any():
            continue
        sel = np.nonzero(ok)[0]
        mult = np.where(j3[sel] == j2, 1.0, 2.0)
        out["i1a"].append(lo[sel])
        out["i1b"].append(hi[sel])
        out["wa"].append(wlo[sel])
        out["wb"].append(whi[sel])
        out["i2"].append(np.full(sel.size, j2))
        out["i3"].append(j3[sel])
        out["w"].append(math.pi * grid.weights[j2] * grid.weights[j3[sel]] * mult)
        out["P1"].append(planckian(a1[sel] ** 2 + u1[sel] + grid.params.e0))
    arrays = {k: (np.concatenate(v) if v else np.zeros(0)) for k, v in out.items()}
    for k in ("i1a", "i1b", "i2", "i3"):
        arrays[k] = arrays[k].astype(np.int64)
    if nu is None:
        nu = compute_nu(grid)
    object.__setattr__(grid, "nu_values", nu)
    return CollisionTables(grid=grid, nu=nu, **arrays)


def apply_L(h, tables: CollisionTables):
    _check(h, tables)
    return tables.L @ np.asarray(h)


def apply_L_direct(h, tables: CollisionTables):
    """One-pass manifold integral of the linearized integrand."""
    _check(h, tables)
    H, flat = _as_columns(h)
    R1, R2, R3 = tables.gather(H)
    lin = (tables.alpha1[:, None] * R1 + tables.beta2[:, None] * R2
           + tables.beta3[:, None] * R3)
    out = (tables.dist @ lin) / tables.grid.P[:, None]
    return out[:, 0] if flat else out


def apply_K(h, tables: CollisionTables):
    """Gain part K = L + nu."""
    _check(h, tables)
    h = np.asarray(h)
    nu = tables.nu if h.ndim == 1 else tables.nu[:, None]
    return tables.L @ h + nu * h


def apply_K_stencil(h, grid: MomentumGrid):
    """Three-term kernel form of K evaluated through the role stencils."""
    h = np.asarray(h)
    P = grid.P
    out = np.zeros(grid.size, dtype=np.result_type(h, float))
    for k in range(grid.size):
        Pk = P[k]
        s1 = manifold_reduce(1, k, grid)
        j = s1.grid_partner
        term1 = np.sum(s1.weight * (s1.P_solved - Pk) * P[j] * h[j])
        s2 = manifold_reduce(2, k, grid)
        j = s2.grid_partner
        ia1 = np.rint((s2.a_solved - grid.a_centers[0]) / grid.da).astype(np.int64)
        lo, hi, wlo, whi, ok = interpolate_column(grid, ia1, s2.u_solved)
        P1 = s2.P_solved
        h1 = np.where(ok, (1.0 + P1) * (wlo * h[lo] / (1.0 + P[lo]) + whi * h[hi] / (1.0 + P[hi])), 0.0)
        term2 = np.sum(s2.weight * (1.0 + Pk + P[j]) * P1 * h1 * ok)
        term3 = np.sum(s2.weight * (P1 - Pk) * P[j] * h[j] * ok)
        out[k] = 2.0 / Pk * (term1 + term2 + term3)
    return out


def apply_Q(g, h, tables: CollisionTables):
    """Symmetric bilinear Q(g, h) (not divided by P)."""
    _check(g, tables)
    _check(h, tables)
    G, flat = _as_columns(g)
    H, _ = _as_columns(h)
    q = 0.5 * (tables.dist @ tables.quad_integrand(G, H))
    return q[:, 0] if flat else q


def collision_rhs(f, n_c, tables: CollisionTables, gamma: float):
    """Full nonlinear C12: g gamma n_c * integral of chi delta0 delta3 (f2 f3 - f1(1+f2+f3)).

    ``f`` lives on the grid; its value at the solved momentum p1 is
    reconstructed from R = f/P - 1.  ``n_c`` is a scalar or one value per
    column of ``f``.
    """
    _check(f, tables)
    F, flat = _as_columns(f)
    if np.any(np.real(F) <= 0):
        raise ValueError("distribution function must be positive")
    P = tables.grid.P[:, None]
    R = F / P - 1.0
    R1, R2, R3 = tables.gather(R)
    f1 = tables.P1[:, None] * (1.0 + R1)
    f2 = tables._P2[:, None] * (1.0 + R2)
    f3 = tables._P3[:, None] * (1.0 + R3)
    C = f2 * f3 - f1 * (1.0 + f2 + f3)
    g = tables.grid.params.g
    out = g * gamma * np.asarray(n_c) * (tables.dist @ C)
    return out[:, 0] if flat else out


def manifold_integral(f, tables: CollisionTables):
    """Integral of chi delta0 (f2 f3 - f1(1+f2+f3)) over p1, p2, p3 (no delta3)."""
    F, flat = _as_columns(f)
    P = tables.grid.P[:, None]
    R = F / P - 1.0
    R1, R2, R3 = tables.gather(R)
    f1 = tables.P1[:, None] * (1.0 + R1)
    f2 = tables._P2[:, None] * (1.0 + R2)
    f3 = tables._P3[:, None] * (1.0 + R3)
    C = f2 * f3 - f1 * (1.0 + f2 + f3)
    out = tables.w @ C
    return out[0] if flat else out


def dense_L(tables: CollisionTables) -> np.ndarray:
    if tables.grid.size > 5000:
        raise ValueError("dense path limited to 5000 nodes")
    return tables.L.toarray()


def dense_K(tables: CollisionTables) -> np.ndarray:
    return dense_L(tables) + np.diag(tables.nu)


# --- binary cache --------------------------------------------------------------

def tables_key(grid: MomentumGrid) -> str:
    p = grid.params
    payload = json.dumps({
        "g": p.g, "n0": p.n0, "Lambda": p.Lambda_cut, "p_max": p.p_max, "e0": p.e0,
        "n_axial": p.n_axial, "n_radial": p.n_radial, "lattice": p.lattice,
        "version": CACHE_VERSION,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


_INT_FIELDS = ("i1a", "i1b", "i2", "i3")
_FLOAT_FIELDS = ("wa", "wb", "w", "P1")


def save_tables(tables: CollisionTables, path) -> None:
    """Versioned header then flat little-endian records (see README)."""
    key = tables_key(tables.grid).encode()
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<II", CACHE_VERSION, len(key)))
        fh.write(key)
        fh.write(struct.pack("<QQ", tables.grid.size, tables.n_triples))
        fh.write(np.asarray(tables.nu, dtype="<f8").tobytes())
        for name in _INT_FIELDS:
            fh.write(np.asarray(getattr(tables, name), dtype="<i8").tobytes())
        for name in _FLOAT_FIELDS:
            fh.write(np.asarray(getattr(tables, name), dtype="<f8").tobytes())


def load_tables(path, grid: MomentumGrid) -> CollisionTables:
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise ValueError("not a collision table cache")
    version, klen = struct.unpack_from("<II", data, 4)
    if version != CACHE_VERSION:
        raise ValueError(f"cache version {version} unsupported")
    off = 12
    key = data[off:off + klen].decode()
    off += klen
    if key != tables_key(grid):
        raise ValueError("cache was built for different parameters")
    n, nt = struct.unpack_from("<QQ", data, off)
    off += 16
    nu = np.frombuffer(data, "<f8", n, off).copy()
    off += 8 * n
    arrays = {}
    for name in _INT_FIELDS:
        arrays[name] = np.frombuffer(data, "<i8", nt, off).astype(np.int64)
        off += 8 * nt
    for name in _FLOAT_FIELDS:
        arrays[name] = np.frombuffer(data, "<f8", nt, off).copy()
        off += 8 * nt
    object.__setattr__(grid, "nu_values", nu)
    return CollisionTables(grid=grid, nu=nu, **arrays)


def cached_tables(grid: MomentumGrid, cache_dir=None) -> CollisionTables:
    if cache_dir is None:
        return build_tables(grid)
    path = Path(cache_dir) / f"tables-{tables_key(grid)[:16]}.bin"
    if path.exists():
        return load_tables(path, grid)
    tables = build_tables(grid)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_tables(tables, path)
    return tables
