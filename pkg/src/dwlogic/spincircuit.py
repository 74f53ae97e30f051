"""4-component spin-circuit nodal analysis.

Every node carries a 4-vector potential (charge, sx, sy, sz) and every
element is a 4x4 conductance block, so the assembled system is
[I] = [G][V] with G of shape (4N, 4N).  Branch currents follow
[I_ij] = [G_ij]([V_i] - [V_j]) for series elements and [I] = [G][V_i]
for shunts (shunts terminate at the zero-potential reference).

Sign conventions
----------------
Spin potentials are expressed in the two-channel picture as
(V_up - V_down)/2 with "up" the majority (moment along +m) channel, which
gives the ferromagnet and interface blocks their +beta/+P charge-spin
coupling.  In this convention a spin current G_mix*V_s absorbed through a
transverse interface shunt carries magnetic moment opposite to its own
sign; torque extraction (`stt_at_contact`) therefore negates the shunt
current so the returned vector is the moment flow into the magnet, ready
for a damping-like torque term +m x (I_s x m).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

C, SX, SY, SZ = 0, 1, 2, 3  # global basis indices
_SINH_CUTOFF = 350.0        # exp window; beyond this csch underflows to 0


class SingularCircuitError(RuntimeError):
    """Raised when the nodal matrix cannot be solved; names floating nodes."""

    def __init__(self, floating_nodes):
        self.floating_nodes = tuple(sorted(set(int(n) for n in floating_nodes)))
        super().__init__(
            "singular circuit matrix; floating node set: "
            f"{list(self.floating_nodes)}"
        )


def _csch(x: float) -> float:
    if x > _SINH_CUTOFF:
        return 0.0
    return 1.0 / np.sinh(x)


def nm_conductances(length, area, resistivity, lsf):
    """Normal-metal segment as a pi-network of 4x4 blocks.

    Returns (series, shunt_per_side).  Charge conducts ohmically with no
    shunt; each spin component follows the spin-diffusion transmission
    line with characteristic conductance area/(resistivity*lsf):
    series csch(L/lsf), shunt tanh(L/(2*lsf)) per side.
    """
    if length <= 0 or area <= 0 or resistivity <= 0 or lsf <= 0:
        raise ValueError("nm segment requires positive length, area, resistivity, lsf")
    g_c = area / (resistivity * length)
    g_lam = area / (resistivity * lsf)
    x = length / lsf
    g_se = g_lam * _csch(x)
    g_sh = g_lam * np.tanh(0.5 * x)
    series = np.diag([g_c, g_se, g_se, g_se])
    shunt = np.diag([0.0, g_sh, g_sh, g_sh])
    return series, shunt


def fm_conductances(length, area, resistivity, beta, lsf_parallel, lsf_perp):
    """Ferromagnet segment in its local basis (charge, m-parallel, t1, t2).

    Two-channel transport couples charge and the longitudinal spin
    component through beta; longitudinal spin relaxation follows the
    diffusion pi-network built on (1-beta^2)*area/(resistivity*lsf_par),
    which recovers the relaxation-free block (A/rho L)[[1,b],[b,1]] as
    lsf_par -> inf.  Transverse components do not propagate (series
    entries exactly 0) and are absorbed by the per-side shunts.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"unphysical polarization beta={beta}; need 0 <= beta < 1")
    if length <= 0 or area <= 0 or resistivity <= 0:
        raise ValueError("fm segment requires positive length, area, resistivity")
    if lsf_parallel <= 0 or lsf_perp <= 0:
        raise ValueError("fm segment requires positive spin-flip lengths")
    g_c = area / (resistivity * length)
    g_lam = (1.0 - beta**2) * area / (resistivity * lsf_parallel)
    x = length / lsf_parallel
    g_se = g_lam * _csch(x)
    g_sh = g_lam * np.tanh(0.5 * x)
    g_perp = (1.0 - beta**2) * area / (resistivity * lsf_perp)
    xp = length / lsf_perp
    g_perp_sh = g_perp * np.tanh(0.5 * xp)
    series = np.zeros((4, 4))
    series[C, C] = g_c
    series[C, SX] = series[SX, C] = beta * g_c
    series[SX, SX] = beta**2 * g_c + g_se
    shunt = np.diag([0.0, g_sh, g_perp_sh, g_perp_sh])
    return series, shunt


def interface_conductances(area, g_up, g_down, g_mix, mix_scale=1.0, g_mix_im=0.0):
    """FM|NM interface in the local basis of the magnet.

    Returns (series, shunt_nm_side).  The series block carries charge and
    longitudinal spin with polarization P = (g_up-g_down)/(g_up+g_down);
    transverse spin does not cross (series entries 0) and is instead
    absorbed on the NM side by the mixing shunt diag(g_mix*area) acting on
    (t1, t2).  That absorbed transverse current is the spin-transfer
    torque.  `mix_scale` rescales the real mixing conductance (the
    conventional factor-2 convention corresponds to mix_scale=2; default
    is 1).  `g_mix_im` adds the field-like antisymmetric part (default 0).
    """
    if area <= 0 or g_up < 0 or g_down < 0 or g_up + g_down <= 0:
        raise ValueError("interface requires positive area and conductances")
    if g_mix < 0:
        raise ValueError("interface mixing conductance must be non-negative")
    big_g = (g_up + g_down) * area
    pol = (g_up - g_down) / (g_up + g_down)
    series = np.zeros((4, 4))
    series[C, C] = big_g
    series[C, SX] = series[SX, C] = pol * big_g
    series[SX, SX] = big_g
    g_m = mix_scale * g_mix * area
    g_i = g_mix_im * area
    shunt = np.zeros((4, 4))
    shunt[SY, SY] = shunt[SZ, SZ] = g_m
    shunt[SY, SZ] = g_i
    shunt[SZ, SY] = -g_i
    return series, shunt


def tangent_frame(m_hat):
    """Orthonormal frame (m, t1, t2) for unit vector(s) m_hat.

    For m along +x the frame is (x, y, z) so the local->global rotation is
    the identity.  Accepts shape (3,) or (n, 3); returns matching
    (3, 3) or (n, 3, 3) arrays of column vectors [m t1 t2].
    """
    m = np.asarray(m_hat, dtype=float)
    single = m.ndim == 1
    m = np.atleast_2d(m)
    norms = np.linalg.norm(m, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ValueError("m_hat must be unit length")
    z_axis = np.array([0.0, 0.0, 1.0])
    y_axis = np.array([0.0, 1.0, 0.0])
    near_z = np.abs(m[:, 2]) > 0.9
    ref = np.where(near_z[:, None], y_axis, z_axis)
    t1 = np.cross(ref, m)
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(m, t1)
    frame = np.stack([m, t1, t2], axis=2)
    return frame[0] if single else frame


def rotate_to_global(local, m_hat):
    """Rotate local-basis block(s) (charge, m, t1, t2) into the global basis.

    Builds R = blockdiag(1, R3) with R3 the tangent frame of m_hat and
    returns R @ local @ R.T.  The charge-charge entry is invariant.
    Accepts a single (4, 4) block with m_hat (3,), or stacked (n, 4, 4)
    blocks with m_hat (n, 3).
    """
    loc = np.asarray(local, dtype=float)
    single = loc.ndim == 2
    loc = loc.reshape((-1, 4, 4))
    r3 = tangent_frame(m_hat).reshape((-1, 3, 3))
    if r3.shape[0] != loc.shape[0]:
        raise ValueError("block count and m_hat count disagree")
    rot = np.zeros((loc.shape[0], 4, 4))
    rot[:, 0, 0] = 1.0
    rot[:, 1:, 1:] = r3
    out = rot @ loc @ np.transpose(rot, (0, 2, 1))
    return out[0] if single else out


@dataclass
class Branch:
    """One circuit element: series between node_i and node_j, or a shunt
    (node_j None) from node_i to the zero-potential reference."""

    node_i: int
    node_j: int | None
    conductance: np.ndarray                       # (4, 4)
    magnetization_ref: tuple[int, int] | None = None  # (wire, cell) if FM/interface

    @property
    def is_shunt(self) -> bool:
        return self.node_j is None


@dataclass
class CircuitGraph:
    """Node/branch description of one device's electrical network.

    current_sources lists (node, 4-vector injection in A).  Nodes in
    grounded_nodes are clamped to zero in all four components (ideal
    charge and spin sink); when none exist, charge_reference names the
    node whose charge potential fixes the gauge (its spin components
    stay free, pinned instead by relaxation shunts).
    """

    n_nodes: int
    branches: list[Branch] = field(default_factory=list)
    current_sources: list[tuple[int, np.ndarray]] = field(default_factory=list)
    grounded_nodes: tuple[int, ...] = ()
    charge_reference: int | None = None

    def validate(self):
        seen = np.zeros(self.n_nodes, dtype=bool)
        for br in self.branches:
            g = br.conductance
            if g.shape != (4, 4) or not np.all(np.isfinite(g)):
                raise ValueError("branch conductance must be a finite 4x4 block")
            if g[C, C] < 0:
                raise ValueError("charge-charge conductance must be non-negative")
            seen[br.node_i] = True
            if br.node_j is not None:
                seen[br.node_j] = True
        for node, vec in self.current_sources:
            seen[node] = True
            if np.asarray(vec).shape != (4,):
                raise ValueError("source injection must be a 4-vector")
        if not self.grounded_nodes and self.charge_reference is None:
            raise ValueError("graph needs a grounded node or a charge reference")
        if self.grounded_nodes is not None:
            for n in self.grounded_nodes:
                seen[n] = True
        if not seen.all():
            raise ValueError(f"isolated nodes: {np.nonzero(~seen)[0].tolist()}")
        if not self.grounded_nodes:
            total = np.zeros(4)
            for _, vec in self.current_sources:
                total += vec
            if np.abs(total[C]) > 1e-12 * max(
                1e-30, sum(abs(v[C]) for _, v in self.current_sources)
            ):
                raise ValueError("without a ground node, source charge currents must sum to zero")


@dataclass
class SolveResult:
    node_voltages: np.ndarray        # (N, 4)
    branch_currents: list[np.ndarray]  # per branch (4,), series i->j or shunt into reference


def assemble(graph: CircuitGraph):
    """Stamp the graph into (matrix, rhs) of shape (4N, 4N), (4N,).

    Grounded nodes and the charge-reference gauge row are eliminated by
    zeroing their rows/columns and placing 1 on the diagonal.
    """
    n = graph.n_nodes
    mat = np.zeros((4 * n, 4 * n))
    rhs = np.zeros(4 * n)
    for br in graph.branches:
        g = br.conductance
        i = 4 * br.node_i
        if br.is_shunt:
            mat[i:i + 4, i:i + 4] += g
        else:
            j = 4 * br.node_j
            mat[i:i + 4, i:i + 4] += g
            mat[j:j + 4, j:j + 4] += g
            mat[i:i + 4, j:j + 4] -= g
            mat[j:j + 4, i:i + 4] -= g
    for node, vec in graph.current_sources:
        rhs[4 * node:4 * node + 4] += vec
    fixed = []
    for node in graph.grounded_nodes:
        fixed.extend(range(4 * node, 4 * node + 4))
    if not graph.grounded_nodes and graph.charge_reference is not None:
        fixed.append(4 * graph.charge_reference + C)
    for dof in fixed:
        mat[dof, :] = 0.0
        mat[:, dof] = 0.0
        mat[dof, dof] = 1.0
        rhs[dof] = 0.0
    return mat, rhs


def _diagnose_floating(mat):
    # rows of the (near-)null space with significant weight name the
    # nodes that have no path to the reference
    _, s, vt = np.linalg.svd(mat)
    null = vt[s < max(1e-10 * s[0], 1e-300)]
    if null.size == 0:
        null = vt[-1:]
    weight = np.sqrt((null**2).sum(axis=0)).reshape(-1, 4).sum(axis=1)
    return np.nonzero(weight > 0.05 * weight.max())[0]


def solve(graph: CircuitGraph) -> SolveResult:
    """Assemble and solve; returns node voltages and branch currents."""
    graph.validate()
    mat, rhs = assemble(graph)
    try:
        lu, piv = scipy.linalg.lu_factor(mat)
        volt = scipy.linalg.lu_solve((lu, piv), rhs)
    except (scipy.linalg.LinAlgError, ValueError):
        raise SingularCircuitError(_diagnose_floating(mat)) from None
    scale = np.abs(rhs).max()
    residual = np.abs(mat @ volt - rhs).max()
    if not np.all(np.isfinite(volt)) or (scale > 0 and residual > 1e-6 * scale):
        raise SingularCircuitError(_diagnose_floating(mat))
    volt = volt.reshape(-1, 4)
    currents = []
    for br in graph.branches:
        if br.is_shunt:
            currents.append(br.conductance @ volt[br.node_i])
        else:
            currents.append(br.conductance @ (volt[br.node_i] - volt[br.node_j]))
    return SolveResult(node_voltages=volt, branch_currents=currents)


def kcl_residuals(graph: CircuitGraph, result: SolveResult) -> np.ndarray:
    """Net 4-current into each node minus its injection; ~0 everywhere
    except grounded nodes (which absorb) and the gauge charge entry."""
    res = np.zeros((graph.n_nodes, 4))
    for br, cur in zip(graph.branches, result.branch_currents):
        res[br.node_i] -= cur
        if br.node_j is not None:
            res[br.node_j] += cur
    for node, vec in graph.current_sources:
        res[node] += vec
    for node in graph.grounded_nodes:
        res[node] = 0.0
    if not graph.grounded_nodes and graph.charge_reference is not None:
        res[graph.charge_reference, C] = 0.0
    return res


def stt_at_contact(result: SolveResult, graph: CircuitGraph, shunt_indices, m_hats):
    """Spin current absorbed by each contact cell's transverse shunt.

    Returns (k, 3) moment-convention vectors (sign flipped relative to the
    raw two-channel shunt current) projected perpendicular to each cell's
    m_hat; the parallel residue before projection must be numerically
    negligible because the mixing shunt only acts on transverse
    components.
    """
    m = np.atleast_2d(np.asarray(m_hats, dtype=float))
    out = np.zeros((len(shunt_indices), 3))
    for row, (bidx, mh) in enumerate(zip(shunt_indices, m)):
        cur = result.branch_currents[bidx]
        i_s = -cur[1:]
        par = np.dot(i_s, mh)
        mag = np.linalg.norm(i_s)
        if mag > 0 and abs(par) > 1e-9 * mag:
            raise AssertionError(
                f"transverse shunt current has parallel residue {par/mag:.3e}"
            )
        out[row] = i_s - par * mh
    return out


_HEADER = ("charge", "sx", "sy", "sz")


def conductance_to_csv(block) -> str:
    """Row-major CSV dump of a 4x4 block with basis-labelled header."""
    buf = io.StringIO()
    buf.write("," + ",".join(_HEADER) + "\n")
    for name, row in zip(_HEADER, np.asarray(block)):
        buf.write(name + "," + ",".join(f"{v:.12e}" for v in row) + "\n")
    return buf.getvalue()


def solution_to_csv(result: SolveResult) -> str:
    """CSV dump of node voltages, one node per row."""
    buf = io.StringIO()
    buf.write("node,v_charge,v_sx,v_sy,v_sz\n")
    for idx, row in enumerate(result.node_voltages):
        buf.write(f"{idx}," + ",".join(f"{v:.12e}" for v in row) + "\n")
    return buf.getvalue()
