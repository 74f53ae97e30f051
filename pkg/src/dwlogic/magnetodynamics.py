"""Stochastic Landau-Lifshitz-Gilbert dynamics on a 1-D macrospin chain.

Each ferromagnetic wire is a chain of cells with unit moments m_i and a
per-cell damping value (so wire ends can be made lossy).  The Gilbert
equation

    dm/dt = -gamma*mu0 (m x H_eff) + alpha (m x dm/dt) + m x (I_s x m)/(e N_s)

is integrated in its explicit Landau-Lifshitz form with the stochastic
Heun (Stratonovich) predictor-corrector scheme; the same thermal-field
realization is used in both stages and the corrector result is
renormalized to unit length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import GAMMA, HBAR, K_B, MU_0, Q_E

MAX_DT = 1e-12  # explicit scheme is only trusted well below this


def strip_demag_factors(width, thickness):
    """Demagnetizing factors of an infinitely long strip: N = (0, t/(w+t), w/(w+t))."""
    s = width + thickness
    return np.array([0.0, thickness / s, width / s])


def _aharoni_axis(a, b, c):
    # factor along the c axis of an a x b x c prism (Aharoni's closed form;
    # scale invariant, symmetric in a and b)
    a, b, c = float(a), float(b), float(c)
    r_abc = math.sqrt(a * a + b * b + c * c)
    r_ab = math.sqrt(a * a + b * b)
    r_bc = math.sqrt(b * b + c * c)
    r_ac = math.sqrt(a * a + c * c)
    t = 0.0
    t += (b * b - c * c) / (2 * b * c) * math.log((r_abc - a) / (r_abc + a))
    t += (a * a - c * c) / (2 * a * c) * math.log((r_abc - b) / (r_abc + b))
    t += b / (2 * c) * math.log((r_ab + a) / (r_ab - a))
    t += a / (2 * c) * math.log((r_ab + b) / (r_ab - b))
    t += c / (2 * a) * math.log((r_bc - b) / (r_bc + b))
    t += c / (2 * b) * math.log((r_ac - a) / (r_ac + a))
    t += 2 * math.atan2(a * b, c * r_abc)
    t += (a**3 + b**3 - 2 * c**3) / (3 * a * b * c)
    t += (a * a + b * b - 2 * c * c) / (3 * a * b * c) * r_abc
    t += c / (a * b) * (r_ac + r_bc)
    t -= (r_ab**3 + r_bc**3 + r_ac**3) / (3 * a * b * c)
    return t / math.pi


def aharoni_demag_factors(length, width, thickness):
    """Demag factors (Nx, Ny, Nz) of a rectangular prism l x w x t."""
    nx = _aharoni_axis(width, thickness, length)
    ny = _aharoni_axis(length, thickness, width)
    nz = _aharoni_axis(length, width, thickness)
    return np.array([nx, ny, nz])


@dataclass
class MaterialFM:
    """Magnetic material and environment parameters for one wire."""

    M_s: float                     # saturation magnetization [A/m]
    A_ex: float                    # exchange stiffness [J/m]
    alpha: float                   # bulk Gilbert damping
    K_u: float = 0.0               # uniaxial anisotropy along x [J/m^3]
    demag: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gamma: float = GAMMA           # gyromagnetic ratio [1/(s*T)]
    temperature: float = 0.0       # [K]
    h_ext: np.ndarray = field(default_factory=lambda: np.zeros(3))  # applied field [A/m]

    def __post_init__(self):
        self.demag = np.asarray(self.demag, dtype=float)
        self.h_ext = np.asarray(self.h_ext, dtype=float)


@dataclass
class WireState:
    """Magnetization chain of one wire."""

    m: np.ndarray          # (n, 3) unit vectors
    alpha: np.ndarray      # (n,) local damping
    mesh: float            # cell length along the wire [m]
    cell_volume: float     # mesh * width * thickness [m^3]

    @property
    def n_cells(self) -> int:
        return self.m.shape[0]

    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.mesh

    def copy(self) -> "WireState":
        return WireState(self.m.copy(), self.alpha.copy(), self.mesh, self.cell_volume)


def init_wire(n_cells, mesh, width, thickness, mat: MaterialFM, direction=1, tilt=0.0):
    """Uniform wire along +-x, optionally tilted toward +y by `tilt` rad."""
    m = np.zeros((n_cells, 3))
    m[:, 0] = math.copysign(math.cos(tilt), direction)
    m[:, 1] = math.sin(tilt)
    alpha = np.full(n_cells, mat.alpha)
    return WireState(m, alpha, mesh, mesh * width * thickness)


def wall_width(mat: MaterialFM) -> float:
    """Initialization width of a transverse wall, pi*sqrt(2A/(mu0 Ms^2 Nz))."""
    nz = mat.demag[2]
    if nz <= 0:
        raise ValueError("wall width needs a positive hard-axis demag factor")
    return math.pi * math.sqrt(2 * mat.A_ex / (MU_0 * mat.M_s**2 * nz))


def init_domain_wall(n_cells, mesh, width, thickness, mat: MaterialFM,
                     position, chirality=1, rising=True):
    """Tanh-profile transverse wall centered at `position` (m from wire start).

    m_x runs -1 -> +1 along the wire when rising=True (reversed otherwise);
    the in-plane core points along chirality*y.
    """
    state = init_wire(n_cells, mesh, width, thickness, mat, direction=1)
    delta = wall_width(mat) / math.pi
    xi = (state.cell_centers() - position) / delta
    sgn = 1.0 if rising else -1.0
    state.m[:, 0] = sgn * np.tanh(xi)
    state.m[:, 1] = chirality / np.cosh(xi)
    state.m[:, 2] = 0.0
    state.m /= np.linalg.norm(state.m, axis=1)[:, None]
    return state


def set_damping_profile(state: WireState, region, alpha_end) -> WireState:
    """Return a copy with damping alpha_end on cells whose centers fall in
    region = (x_start, x_stop) meters."""
    x0, x1 = region
    out = state.copy()
    centers = out.cell_centers()
    out.alpha[(centers >= x0) & (centers < x1)] = alpha_end
    return out


def ns_per_cell(mat: MaterialFM, volume) -> float:
    """Number of Bohr magnetons in one cell, N_s = 2 M_s V / (gamma hbar)."""
    return 2.0 * mat.M_s * volume / (mat.gamma * HBAR)


def effective_field(state: WireState, mat: MaterialFM) -> np.ndarray:
    """Deterministic effective field (n, 3): anisotropy + demag + exchange
    + applied.  Exchange uses mirror (free) boundary conditions."""
    m = state.m
    h = np.zeros_like(m)
    h[:, 0] += (2.0 * mat.K_u / (MU_0 * mat.M_s)) * m[:, 0]
    h -= mat.M_s * mat.demag[None, :] * m
    if mat.A_ex != 0.0 and state.n_cells > 1:
        lap = np.zeros_like(m)
        lap[1:-1] = m[:-2] - 2 * m[1:-1] + m[2:]
        lap[0] = m[1] - m[0]
        lap[-1] = m[-2] - m[-1]
        h += (2.0 * mat.A_ex / (MU_0 * mat.M_s * state.mesh**2)) * lap
    h += mat.h_ext[None, :]
    return h


def thermal_field(mat: MaterialFM, alpha, cell_volume, dt, rng, n_cells) -> np.ndarray:
    """One Gaussian thermal-field realization (n, 3) with the local-damping
    fluctuation-dissipation variance."""
    if mat.temperature <= 0.0:
        return np.zeros((n_cells, 3))
    sigma = np.sqrt(
        2.0 * np.asarray(alpha) * K_B * mat.temperature
        / (mat.gamma * MU_0**2 * mat.M_s * cell_volume * dt)
    )
    return sigma[:, None] * rng.standard_normal((n_cells, 3))


def _llg_rhs(m, h, alpha, lam):
    # explicit form: (1+a^2) dm/dt = -g(m x H) - a g m x (m x H) + T + a (m x T)
    # with T = m x (lam x m) the perpendicular projection of lam
    g = GAMMA * MU_0
    mxh = np.cross(m, h)
    rhs = -g * mxh - g * alpha[:, None] * np.cross(m, mxh)
    if lam is not None:
        t = lam - (m * lam).sum(axis=1)[:, None] * m
        rhs += t + alpha[:, None] * np.cross(m, t)
    return rhs / (1.0 + alpha[:, None] ** 2)


def llg_step(state: WireState, mat: MaterialFM, torque, dt, rng=None) -> WireState:
    """One Heun step.  `torque` is a per-cell spin-current array (n, 3) in
    amperes (moment convention, zero away from contacts) or None."""
    if dt > MAX_DT:
        raise ValueError(f"dt={dt:g} s exceeds the {MAX_DT:g} s integrator limit")
    if mat.temperature > 0.0 and rng is None:
        raise ValueError("finite temperature requires an rng")
    m = state.m
    alpha = state.alpha
    lam = None
    if torque is not None:
        lam = np.asarray(torque) / (Q_E * ns_per_cell(mat, state.cell_volume))
    h_th = thermal_field(mat, alpha, state.cell_volume, dt, rng, state.n_cells)

    def rhs(m_arr):
        tmp = replace(state, m=m_arr)
        h = effective_field(tmp, mat) + h_th
        return _llg_rhs(m_arr, h, alpha, lam)

    k1 = rhs(m)
    m_pred = m + dt * k1
    k2 = rhs(m_pred)
    m_new = m + 0.5 * dt * (k1 + k2)
    m_new /= np.linalg.norm(m_new, axis=1)[:, None]
    out = state.copy()
    out.m = m_new
    return out


def wire_energy(state: WireState, mat: MaterialFM) -> float:
    """Total energy [J]: exchange + demag + anisotropy + Zeeman."""
    m = state.m
    v = state.cell_volume
    dens = 0.5 * MU_0 * mat.M_s**2 * (mat.demag[None, :] * m**2).sum(axis=1)
    dens += mat.K_u * (1.0 - m[:, 0] ** 2)
    dens -= MU_0 * mat.M_s * m @ mat.h_ext
    e = v * dens.sum()
    if state.n_cells > 1:
        bonds = np.diff(m, axis=0)
        e += mat.A_ex * v * (bonds**2).sum() / state.mesh**2
    return float(e)
