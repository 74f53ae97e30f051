"""Self-consistent transient loop: circuit solve <-> LLG stepping.

Every refresh the magnetization-dependent conductance blocks are rebuilt,
the nodal system is re-solved at the present drive amplitude, and the
absorbed transverse spin currents are handed to the LLG integrator as
per-cell torques.

The loop uses a condensed solver that is algebraically identical to
assembling and factoring the full 4N x 4N system: each contact cell's
two stack nodes are eliminated with closed-form 4x4 block algebra, and
the static channel interior is reduced once by a Schur complement onto
the contact channel nodes, leaving a small dense system per refresh.
`CondensedCircuit.solve` exposes all node voltages so tests can verify
exact agreement with the generic path.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import spincircuit as sc
from .analysis import dw_position
from .devices import Device
from .magnetodynamics import llg_step


def pulse_waveform(t, amplitude, duration):
    """Rectangular drive pulse: amplitude for 0 <= t < duration, else 0."""
    return amplitude if 0.0 <= t < duration else 0.0


@dataclass
class CondensedSolution:
    v_channel: np.ndarray   # (n_channel, 4)
    v_iface: np.ndarray     # (K, 4) stack interface nodes, contact order
    v_top: np.ndarray       # (K, 4) stack top nodes
    i_s: np.ndarray         # (K, 3) absorbed spin current per contact cell

    def full_voltages(self) -> np.ndarray:
        """Node voltages in build_graph numbering (channel, then per-cell
        iface/top pairs)."""
        stacked = np.empty((2 * len(self.v_iface), 4))
        stacked[0::2] = self.v_iface
        stacked[1::2] = self.v_top
        return np.vstack([self.v_channel, stacked])


class CondensedCircuit:
    """Fast re-solver for one device under changing magnetization."""

    def __init__(self, device: Device):
        self.device = device
        n_ch = device.n_channel_nodes
        static = sc.CircuitGraph(
            n_nodes=n_ch,
            branches=device.channel_branches,
            current_sources=[],
            grounded_nodes=device.grounded_channel_nodes,
            charge_reference=device.charge_reference_channel,
        )
        a_static, _ = sc.assemble(static)

        cells_nodes = np.concatenate([c.channel_nodes for c in device.contacts])
        if len(np.unique(cells_nodes)) != len(cells_nodes):
            raise ValueError("contact cells must map to distinct channel nodes")
        self.b_nodes = np.sort(cells_nodes)
        pos = {int(n): i for i, n in enumerate(self.b_nodes)}
        self.cell_b_index = np.array([pos[int(n)] for n in cells_nodes])
        self.cell_share = np.concatenate(
            [np.full(c.n_cells, c.source_share) for c in device.contacts]
        )
        self.contact_slices = []
        start = 0
        for c in device.contacts:
            self.contact_slices.append(slice(start, start + c.n_cells))
            start += c.n_cells

        b_dofs = (4 * self.b_nodes[:, None] + np.arange(4)).ravel()
        i_nodes = np.setdiff1d(np.arange(n_ch), self.b_nodes)
        self.i_nodes = i_nodes
        i_dofs = (4 * i_nodes[:, None] + np.arange(4)).ravel()
        a_ii = a_static[np.ix_(i_dofs, i_dofs)]
        a_ib = a_static[np.ix_(i_dofs, b_dofs)]
        a_bi = a_static[np.ix_(b_dofs, i_dofs)]
        a_bb = a_static[np.ix_(b_dofs, b_dofs)]
        lu = scipy.linalg.lu_factor(a_ii)
        self.k_ib = scipy.linalg.lu_solve(lu, a_ib)   # A_II^-1 A_IB
        self.s0 = a_bb - a_bi @ self.k_ib

        blk = device.blocks_local
        self.loc = {k: np.asarray(blk[k]) for k in ("S1", "Ish", "S2", "F")}

    def _gathered_m(self) -> np.ndarray:
        return np.vstack([
            self.device.wires[c.wire].m[c.wire_cells] for c in self.device.contacts
        ])

    def solve(self, amplitude: float) -> CondensedSolution:
        dev = self.device
        n_ch = dev.n_channel_nodes
        k_tot = len(self.cell_b_index)
        if amplitude == 0.0:
            return CondensedSolution(
                np.zeros((n_ch, 4)), np.zeros((k_tot, 4)),
                np.zeros((k_tot, 4)), np.zeros((k_tot, 3)),
            )
        m_all = self._gathered_m()
        r3 = sc.tangent_frame(m_all)
        rot = np.zeros((k_tot, 4, 4))
        rot[:, 0, 0] = 1.0
        rot[:, 1:, 1:] = r3
        rot_t = np.transpose(rot, (0, 2, 1))
        s1 = rot @ self.loc["S1"] @ rot_t
        ish = rot @ self.loc["Ish"] @ rot_t
        s2 = rot @ self.loc["S2"] @ rot_t
        fsh = rot @ self.loc["F"] @ rot_t

        db_inv = np.linalg.inv(s2 + fsh)
        ma = s1 + s2 + fsh - s2 @ db_inv @ s2
        x = np.linalg.solve(ma, s1)                      # MA^-1 S1
        g_eff = s1 + ish - s1 @ x
        c_amp = self.cell_share * amplitude              # charge injection per top node
        u = db_inv[:, :, 0] * c_amp[:, None]             # DB^-1 c
        v = np.linalg.solve(ma, (s2 @ u[:, :, None])[:, :, 0])
        b_inj = (s1 @ v[:, :, None])[:, :, 0]

        nb = len(self.b_nodes)
        s_mat = self.s0.copy()
        rhs = np.zeros(4 * nb)
        for k in range(k_tot):
            i = 4 * self.cell_b_index[k]
            s_mat[i:i + 4, i:i + 4] += g_eff[k]
            rhs[i:i + 4] += b_inj[k]
        try:
            v_b = scipy.linalg.lu_solve(scipy.linalg.lu_factor(s_mat), rhs)
        except (scipy.linalg.LinAlgError, ValueError) as err:
            raise sc.SingularCircuitError(self.b_nodes) from err
        if not np.all(np.isfinite(v_b)):
            raise sc.SingularCircuitError(self.b_nodes)

        v_channel = np.zeros((n_ch, 4))
        v_channel[self.b_nodes] = v_b.reshape(-1, 4)
        if len(self.i_nodes):
            v_channel[self.i_nodes] = (-self.k_ib @ v_b).reshape(-1, 4)

        v_c = v_channel[np.concatenate([c.channel_nodes for c in self.device.contacts])]
        v_a = (x @ v_c[:, :, None])[:, :, 0] + v
        c_vec = np.zeros((k_tot, 4))
        c_vec[:, 0] = c_amp
        v_top = (db_inv @ ((s2 @ v_a[:, :, None])[:, :, 0] + c_vec)[:, :, None])[:, :, 0]

        i_s = -(ish @ v_c[:, :, None])[:, :, 0][:, 1:]
        i_s -= (i_s * m_all).sum(axis=1)[:, None] * m_all
        return CondensedSolution(v_channel, v_a, v_top, i_s)


@dataclass
class Trace:
    """Sampled transient observables."""

    t: np.ndarray             # (S,)
    wire_mean: np.ndarray     # (S, n_wires, 3) spatially averaged m
    dw_pos: np.ndarray        # (S, n_wires) wall position [m], nan if none
    contact_is: np.ndarray    # (S, n_contacts, 3) summed absorbed spin current [A]
    drive: np.ndarray         # (S,) drive amplitude [A]

    @property
    def n_wires(self):
        return self.wire_mean.shape[1]

    @property
    def n_contacts(self):
        return self.contact_is.shape[1]

    def mean_mx(self, wire: int) -> np.ndarray:
        return self.wire_mean[:, wire, 0]

    def to_csv(self) -> str:
        cols = ["t_s"]
        for i in range(self.n_wires):
            cols += [f"w{i}_mx", f"w{i}_my", f"w{i}_mz", f"w{i}_dw_pos_m"]
        for j in range(self.n_contacts):
            cols += [f"c{j}_isx_A", f"c{j}_isy_A", f"c{j}_isz_A"]
        cols.append("drive_A")
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for s in range(len(self.t)):
            row = [f"{self.t[s]:.10e}"]
            for i in range(self.n_wires):
                row += [f"{v:.10e}" for v in self.wire_mean[s, i]]
                row.append(f"{self.dw_pos[s, i]:.10e}")
            for j in range(self.n_contacts):
                row += [f"{v:.10e}" for v in self.contact_is[s, j]]
            row.append(f"{self.drive[s]:.10e}")
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def write_csv(self, path):
        text = self.to_csv()
        tmp = str(path) + ".tmp"
        with open(tmp, "w") as fh:
            fh.write(text)
        import os

        os.replace(tmp, path)

    @classmethod
    def from_csv_text(cls, text: str) -> "Trace":
        lines = text.strip().split("\n")
        header = lines[0].split(",")
        n_wires = sum(1 for h in header if h.endswith("_mx"))
        n_contacts = sum(1 for h in header if h.endswith("_isx_A"))
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        t = data[:, 0]
        wm = np.empty((len(t), n_wires, 3))
        dw = np.empty((len(t), n_wires))
        for i in range(n_wires):
            base = 1 + 4 * i
            wm[:, i] = data[:, base:base + 3]
            dw[:, i] = data[:, base + 3]
        base = 1 + 4 * n_wires
        ci = data[:, base:base + 3 * n_contacts].reshape(len(t), n_contacts, 3)
        return cls(t, wm, dw, ci, data[:, -1])


def _wire_torques(device: Device, solution: CondensedSolution, slices, mode: str):
    torques = [np.zeros_like(w.m) for w in device.wires]
    for contact, sl in zip(device.contacts, slices):
        i_s = solution.i_s[sl]
        if mode == "contact_avg":
            i_s = np.broadcast_to(i_s.mean(axis=0), i_s.shape)
        torques[contact.wire][contact.wire_cells] = i_s
    return torques


def run_transient(device: Device, duration=None, dt=None, refresh_stride=None,
                  sample_stride=None, seed=None) -> Trace:
    """Integrate the coupled circuit + LLG system.

    Parameters default to the device config's sim section.  The device's
    wire states are advanced in place; the returned Trace holds sampled
    observables on the exact schema written by `Trace.to_csv`.
    """
    cfg = device.config
    duration = cfg.sim.t_total if duration is None else duration
    dt = cfg.sim.dt if dt is None else dt
    refresh_stride = cfg.sim.refresh_stride if refresh_stride is None else refresh_stride
    sample_stride = cfg.sim.sample_stride if sample_stride is None else sample_stride
    seed = cfg.sim.seed if seed is None else seed
    if refresh_stride < 1 or sample_stride < 1:
        raise ValueError("strides must be >= 1")

    circuit = CondensedCircuit(device)
    rngs = [np.random.Generator(np.random.PCG64(ss))
            for ss in np.random.SeedSequence(seed).spawn(len(device.wires))]

    amp0 = cfg.drive.current * cfg.drive.polarity
    out_contact = device.contacts[-1]
    out_wire = device.output_wire
    init_out_sign = np.sign(
        device.wires[out_wire].m[out_contact.wire_cells, 0].mean()
    )
    cutoff_hit = False

    n_steps = int(round(duration / dt))
    samples = []

    def record(t, sol, amp):
        means = np.array([w.m.mean(axis=0) for w in device.wires])
        dws = np.array([
            dw_position(
                device.wires[i].m[:, 0], device.wires[i].mesh,
                prefer_x=0.0 if device.wire_contact_side[i] == "start"
                else cfg.fm.l_FM,
            ) or np.nan
            for i in range(len(device.wires))
        ], dtype=float)
        per_contact = np.array([sol.i_s[sl].sum(axis=0) for sl in circuit.contact_slices])
        samples.append((t, means, dws, per_contact, amp))
        if not np.all([np.all(np.isfinite(w.m)) for w in device.wires]):
            raise FloatingPointError(f"non-finite magnetization at t={t:g} s")

    sol = circuit.solve(0.0)
    torques = None
    last_amp = None
    for step in range(n_steps):
        t = step * dt
        amp = pulse_waveform(t, amp0, cfg.drive.duration)
        if cfg.drive.early_cutoff:
            if not cutoff_hit:
                out_mx = device.wires[out_wire].m[out_contact.wire_cells, 0].mean()
                if np.sign(out_mx) == -init_out_sign:
                    cutoff_hit = True
            if cutoff_hit:
                amp = 0.0
        if torques is None or amp != last_amp or step % refresh_stride == 0:
            try:
                sol = circuit.solve(amp)
            except sc.SingularCircuitError as err:
                raise RuntimeError(f"circuit solve failed at step {step}") from err
            torques = _wire_torques(device, sol, circuit.contact_slices, cfg.sim.torque_mode)
            last_amp = amp
        if step % sample_stride == 0:
            record(t, sol, amp)
        for i, wire in enumerate(device.wires):
            device.wires[i] = llg_step(wire, device.material, torques[i], dt, rngs[i])

    record(n_steps * dt, sol, last_amp if last_amp is not None else 0.0)
    t_arr = np.array([s[0] for s in samples])
    return Trace(
        t=t_arr,
        wire_mean=np.stack([s[1] for s in samples]),
        dw_pos=np.stack([s[2] for s in samples]),
        contact_is=np.stack([s[3] for s in samples]),
        drive=np.array([s[4] for s in samples]),
    )
