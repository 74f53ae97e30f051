"""Device templates: lateral spin valve, 3-input majority gate, and a
non-local spin valve baseline.

A device bundles the FM wires (macrospin chains), the NM channel mesh,
and the per-contact-cell interface sub-circuits that couple them.  Each
contact cell contributes two extra circuit nodes above its channel node:

    channel node --[interface series]-- iface node --[FM stack series]-- top node

with the transverse mixing shunt on the channel (NM) side, FM relaxation
shunts on both FM-side nodes, and the drive injected at the top nodes.
The FM wire's lateral resistance is not modelled (current crosses the
thin film only under the contacts); the channel provides the lateral
path.  Logic convention: m_x > 0 is 1.  Negative drive current favors
the parallel final state (buffer / majority), positive drive the
anti-parallel one (inverter / inverted majority).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import spincircuit as sc
from .magnetodynamics import (
    MaterialFM,
    WireState,
    aharoni_demag_factors,
    init_wire,
    set_damping_profile,
    strip_demag_factors,
)

DEVICE_KINDS = ("sv", "majority3", "nlsv")


@dataclass
class FMSection:
    """FM wire material and geometry (defaults: permalloy-like nanowire)."""

    rho: float = 1.4e-7        # resistivity [Ohm m]
    beta: float = 0.6          # bulk current polarization
    l_sf_par: float = 5e-9     # longitudinal spin-flip length [m]
    l_sf_perp: float = 0.8e-9  # transverse spin coherence length [m]
    M_s: float = 8e5           # saturation magnetization [A/m]
    A: float = 1.3e-11         # exchange stiffness [J/m]
    alpha: float = 0.007       # bulk Gilbert damping
    K_u: float = 0.0           # uniaxial anisotropy [J/m^3]
    l_FM: float = 300e-9       # wire length [m]
    w_FM: float = 20e-9        # wire width [m]
    t_FM: float = 2e-9         # wire thickness [m]


@dataclass
class ChannelSection:
    """NM channel geometry and transport."""

    l_NM: float = 70e-9        # contact-to-contact span [m]
    w_NM: float = 20e-9
    t_NM: float = 20e-9
    rho_N: float = 3e-8        # [Ohm m]
    lambda_N: float = 100e-9   # spin-diffusion length [m]
    pitch_between: float = 2e-9  # mesh pitch outside contact regions [m]


@dataclass
class InterfaceSection:
    """FM|NM interface conductances per area [S/m^2]."""

    G_uu: float = 0.9e15
    G_dd: float = 0.1e15
    G_ud: float = 0.39e15      # real mixing conductance
    mix_scale: float = 1.0     # multiplier on G_ud (factor-2 convention = 2)
    G_ud_im: float = 0.0       # field-like (imaginary) part [S/m^2]


@dataclass
class ContactSection:
    L_input: float = 40e-9
    L_output: float = 20e-9
    alpha_end: float = 0.18    # damping in contact / wire-end regions


@dataclass
class DriveSection:
    current: float = 200e-6    # signed drive amplitude [A] (per input contact)
    duration: float = 1.5e-9   # pulse length [s]
    polarity: int = 1          # extra sign multiplier
    early_cutoff: bool = False  # zero the drive once the output wall is created


@dataclass
class SimSection:
    device: str = "sv"
    temperature: float = 300.0
    seed: int = 0
    dt: float = 1e-13
    t_total: float = 3e-9
    mesh: float = 2e-9
    refresh_stride: int = 1
    sample_stride: int = 10
    torque_mode: str = "per_cell"   # or "contact_avg"
    init_tilt: float = 0.02         # initial tilt [rad] breaking collinear stall
    damp_far_end: bool = True       # lossy region at the output wire's far end
    demag_model: str = "strip"      # or "aharoni"


@dataclass
class InitSection:
    inputs: tuple = (1,)
    output: str | int = "opposite"  # bit, or "opposite" of the expected final


@dataclass
class NlsvSection:
    shunt_length: float = 30e-9     # injector-to-ground arm [m]


@dataclass
class MajoritySection:
    input_arm: float = 36e-9        # input contact edge to junction [m]
    output_arm: float = 34e-9       # junction to output contact edge [m]


@dataclass
class DeviceConfig:
    fm: FMSection = field(default_factory=FMSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    interface: InterfaceSection = field(default_factory=InterfaceSection)
    contacts: ContactSection = field(default_factory=ContactSection)
    drive: DriveSection = field(default_factory=DriveSection)
    sim: SimSection = field(default_factory=SimSection)
    init: InitSection = field(default_factory=InitSection)
    nlsv: NlsvSection = field(default_factory=NlsvSection)
    majority: MajoritySection = field(default_factory=MajoritySection)

    def get(self, path: str):
        sec, key = path.split(".")
        return getattr(getattr(self, sec), key)

    def set(self, path: str, value):
        sec, key = path.split(".")
        section = getattr(self, sec)
        if not any(f.name == key for f in fields(section)):
            raise KeyError(f"unknown config key: {path}")
        setattr(section, key, value)


def _cells(length, pitch, what):
    n = length / pitch
    if abs(n - round(n)) > 1e-6:
        raise ValueError(f"{what}={length:g} m is not a multiple of pitch {pitch:g} m")
    return int(round(n))


def drive_polarity_semantics(kind: str, inputs, drive_sign: float) -> int:
    """Expected final output bit for the given input bits and drive sign.

    Negative drive copies (majority of) the inputs, positive drive
    inverts.
    """
    bits = [int(b) for b in np.atleast_1d(inputs)]
    if kind in ("sv", "nlsv"):
        base = bits[0]
    elif kind == "majority3":
        base = 1 if sum(bits) >= 2 else 0
    else:
        raise ValueError(f"unknown device kind: {kind}")
    return base if drive_sign < 0 else 1 - base


@dataclass
class Contact:
    """One FM|NM contact: a run of wire cells over a run of channel nodes."""

    label: str
    wire: int
    wire_cells: np.ndarray      # indices into the wire's chain
    channel_nodes: np.ndarray   # channel node ids, same length
    source_share: float         # charge injection per cell per unit drive amplitude
    is_input: bool

    @property
    def n_cells(self):
        return len(self.wire_cells)


@dataclass
class Device:
    kind: str
    config: DeviceConfig
    material: MaterialFM
    wires: list                      # WireState, inputs first, output last
    wire_contact_side: list          # "start" or "end" per wire
    contacts: list                   # Contact
    n_channel_nodes: int
    channel_branches: list           # static NM sc.Branch in channel numbering
    grounded_channel_nodes: tuple
    charge_reference_channel: int | None
    blocks_local: dict               # S1, Ish, S2, F local 4x4 blocks

    @property
    def n_inputs(self):
        return len(self.wires) - 1

    @property
    def output_wire(self) -> int:
        return len(self.wires) - 1

    def n_nodes(self) -> int:
        return self.n_channel_nodes + 2 * sum(c.n_cells for c in self.contacts)

    def contact_m_hats(self, contact: Contact) -> np.ndarray:
        return self.wires[contact.wire].m[contact.wire_cells]

    def contact_blocks_global(self, contact: Contact):
        """Rotate the four local stack blocks into the global frame for
        every cell of `contact` (each (k, 4, 4))."""
        m = self.contact_m_hats(contact)
        k = len(m)
        out = {}
        for name in ("S1", "Ish", "S2", "F"):
            stacked = np.broadcast_to(self.blocks_local[name], (k, 4, 4))
            out[name] = sc.rotate_to_global(stacked, m)
        return out

    def build_graph(self, amplitude: float) -> sc.CircuitGraph:
        """Full CircuitGraph at the wires' current magnetizations.

        Node ids: channel nodes first, then per contact cell an interface
        node and an FM top node.  `amplitude` is the signed drive current
        in amperes.
        """
        branches = [sc.Branch(b.node_i, b.node_j, b.conductance) for b in self.channel_branches]
        sources = []
        next_node = self.n_channel_nodes
        for contact in self.contacts:
            blocks = self.contact_blocks_global(contact)
            for j in range(contact.n_cells):
                ref = (contact.wire, int(contact.wire_cells[j]))
                ch = int(contact.channel_nodes[j])
                iface, top = next_node, next_node + 1
                next_node += 2
                branches.append(sc.Branch(ch, iface, blocks["S1"][j], ref))
                branches.append(sc.Branch(iface, top, blocks["S2"][j], ref))
                branches.append(sc.Branch(ch, None, blocks["Ish"][j], ref))
                branches.append(sc.Branch(iface, None, blocks["F"][j], ref))
                branches.append(sc.Branch(top, None, blocks["F"][j], ref))
                inj = np.zeros(4)
                inj[sc.C] = contact.source_share * amplitude
                sources.append((top, inj))
        return sc.CircuitGraph(
            n_nodes=next_node,
            branches=branches,
            current_sources=sources,
            grounded_nodes=self.grounded_channel_nodes,
            charge_reference=self.charge_reference_channel,
        )

    def stack_shunt_indices(self, contact_idx: int):
        """Branch indices of the transverse (NM-side) shunts of one contact
        in the graph returned by build_graph."""
        n_static = len(self.channel_branches)
        idx = []
        offset = 0
        for ci, contact in enumerate(self.contacts):
            for j in range(contact.n_cells):
                if ci == contact_idx:
                    idx.append(n_static + 5 * (offset + j) + 2)
            offset += contact.n_cells
        return idx


def _material(cfg: DeviceConfig) -> MaterialFM:
    fm = cfg.fm
    if cfg.sim.demag_model == "aharoni":
        demag = aharoni_demag_factors(fm.l_FM, fm.w_FM, fm.t_FM)
    elif cfg.sim.demag_model == "strip":
        demag = strip_demag_factors(fm.w_FM, fm.t_FM)
    else:
        raise ValueError(f"unknown demag model: {cfg.sim.demag_model}")
    return MaterialFM(
        M_s=fm.M_s, A_ex=fm.A, alpha=fm.alpha, K_u=fm.K_u,
        demag=demag, temperature=cfg.sim.temperature,
    )


def _local_blocks(cfg: DeviceConfig) -> dict:
    mesh = cfg.sim.mesh
    fm, it = cfg.fm, cfg.interface
    area = mesh * fm.w_FM
    s1, ish = sc.interface_conductances(
        area, it.G_uu, it.G_dd, it.G_ud, mix_scale=it.mix_scale, g_mix_im=it.G_ud_im
    )
    s2, f = sc.fm_conductances(fm.t_FM, area, fm.rho, fm.beta, fm.l_sf_par, fm.l_sf_perp)
    return {"S1": s1, "Ish": ish, "S2": s2, "F": f}


def _channel_chain(centers, cfg: DeviceConfig):
    """NM series + shunt branches for a linear chain of channel cells at
    the given center coordinates."""
    ch = cfg.channel
    area = ch.w_NM * ch.t_NM
    branches = []
    for i in range(len(centers) - 1):
        seg = centers[i + 1] - centers[i]
        se, sh = sc.nm_conductances(seg, area, ch.rho_N, ch.lambda_N)
        branches.append(sc.Branch(i, i + 1, se))
        branches.append(sc.Branch(i, None, sh))
        branches.append(sc.Branch(i + 1, None, sh))
    return branches


def _resolve_output_bit(cfg: DeviceConfig) -> int:
    sign = cfg.drive.current * cfg.drive.polarity
    if cfg.init.output == "opposite":
        return 1 - drive_polarity_semantics(cfg.sim.device, cfg.init.inputs, sign)
    return int(cfg.init.output)


def _make_wire(cfg, mat, bit, contact_side, contact_len, far_end_damped):
    fm = cfg.fm
    n = _cells(fm.l_FM, cfg.sim.mesh, "l_FM")
    state = init_wire(n, cfg.sim.mesh, fm.w_FM, fm.t_FM, mat,
                      direction=1 if bit else -1, tilt=cfg.sim.init_tilt)
    a_end = cfg.contacts.alpha_end
    if contact_side == "end":
        state = set_damping_profile(state, (fm.l_FM - contact_len, fm.l_FM), a_end)
    else:
        state = set_damping_profile(state, (0.0, contact_len), a_end)
        if far_end_damped:
            state = set_damping_profile(state, (fm.l_FM - cfg.contacts.L_input, fm.l_FM), a_end)
    return state


def build_sv(cfg: DeviceConfig) -> Device:
    """Lateral spin valve: input wire -> channel -> output wire.

    The input wire's last L_input of cells and the output wire's first
    L_output of cells are contacted to the two ends of the channel; a
    current source drives charge between the two contact stacks.
    """
    mesh = cfg.sim.mesh
    n_in = _cells(cfg.contacts.L_input, mesh, "L_input")
    n_out = _cells(cfg.contacts.L_output, mesh, "L_output")
    n_mid = _cells(cfg.channel.l_NM, cfg.channel.pitch_between, "l_NM")
    n_wire = _cells(cfg.fm.l_FM, mesh, "l_FM")
    if n_in > n_wire or n_out > n_wire:
        raise ValueError("contact length exceeds wire length")

    centers = _span_centers([(n_in, mesh), (n_mid, cfg.channel.pitch_between), (n_out, mesh)])
    n_ch = len(centers)
    mat = _material(cfg)
    bits = [int(cfg.init.inputs[0]), _resolve_output_bit(cfg)]
    wires = [
        _make_wire(cfg, mat, bits[0], "end", cfg.contacts.L_input, False),
        _make_wire(cfg, mat, bits[1], "start", cfg.contacts.L_output, cfg.sim.damp_far_end),
    ]
    contacts = [
        Contact("in", 0, np.arange(n_wire - n_in, n_wire), np.arange(n_in),
                source_share=1.0 / n_in, is_input=True),
        Contact("out", 1, np.arange(n_out), np.arange(n_ch - n_out, n_ch),
                source_share=-1.0 / n_out, is_input=False),
    ]
    return Device(
        kind="sv", config=cfg, material=mat, wires=wires,
        wire_contact_side=["end", "start"], contacts=contacts,
        n_channel_nodes=n_ch, channel_branches=_channel_chain(centers, cfg),
        grounded_channel_nodes=(), charge_reference_channel=n_in,
        blocks_local=_local_blocks(cfg),
    )


def _span_centers(spans):
    """Cell centers of consecutive spans given as (count, pitch) pairs."""
    edges = [0.0]
    for count, pitch in spans:
        for _ in range(count):
            edges.append(edges[-1] + pitch)
    edges = np.asarray(edges)
    return 0.5 * (edges[:-1] + edges[1:])


def build_nlsv(cfg: DeviceConfig) -> Device:
    """Non-local spin valve: the drive loop runs input contact -> channel
    -> ground arm, while the detector arm (length l_NM) dead-ends at the
    output contact and carries spin diffusion but no net charge."""
    mesh = cfg.sim.mesh
    pitch = cfg.channel.pitch_between
    n_g = _cells(cfg.nlsv.shunt_length, pitch, "shunt_length")
    n_in = _cells(cfg.contacts.L_input, mesh, "L_input")
    n_mid = _cells(cfg.channel.l_NM, pitch, "l_NM")
    n_out = _cells(cfg.contacts.L_output, mesh, "L_output")
    n_wire = _cells(cfg.fm.l_FM, mesh, "l_FM")

    centers = _span_centers([(n_g, pitch), (n_in, mesh), (n_mid, pitch), (n_out, mesh)])
    n_ch = len(centers)
    mat = _material(cfg)
    bits = [int(cfg.init.inputs[0]), _resolve_output_bit(cfg)]
    wires = [
        _make_wire(cfg, mat, bits[0], "end", cfg.contacts.L_input, False),
        _make_wire(cfg, mat, bits[1], "start", cfg.contacts.L_output, cfg.sim.damp_far_end),
    ]
    contacts = [
        Contact("in", 0, np.arange(n_wire - n_in, n_wire), np.arange(n_g, n_g + n_in),
                source_share=1.0 / n_in, is_input=True),
        Contact("out", 1, np.arange(n_out), np.arange(n_ch - n_out, n_ch),
                source_share=0.0, is_input=False),
    ]
    return Device(
        kind="nlsv", config=cfg, material=mat, wires=wires,
        wire_contact_side=["end", "start"], contacts=contacts,
        n_channel_nodes=n_ch, channel_branches=_channel_chain(centers, cfg),
        grounded_channel_nodes=(0,), charge_reference_channel=None,
        blocks_local=_local_blocks(cfg),
    )


def build_majority3(cfg: DeviceConfig) -> Device:
    """Three-input majority gate: star-shaped channel, three input arms
    meeting the output arm at a junction node.  Independent current
    sources drive each input contact against the shared output contact."""
    mesh = cfg.sim.mesh
    pitch = cfg.channel.pitch_between
    n_in = _cells(cfg.contacts.L_input, mesh, "L_input")
    n_out = _cells(cfg.contacts.L_output, mesh, "L_output")
    n_arm_in = _cells(cfg.majority.input_arm, pitch, "input_arm")
    n_arm_out = _cells(cfg.majority.output_arm, pitch, "output_arm")
    n_wire = _cells(cfg.fm.l_FM, mesh, "l_FM")
    if len(cfg.init.inputs) != 3:
        raise ValueError("majority3 needs exactly 3 input bits")

    mat = _material(cfg)
    out_bit = _resolve_output_bit(cfg)
    wires = [
        _make_wire(cfg, mat, int(b), "end", cfg.contacts.L_input, False)
        for b in cfg.init.inputs
    ]
    wires.append(_make_wire(cfg, mat, out_bit, "start", cfg.contacts.L_output,
                            cfg.sim.damp_far_end))

    ch = cfg.channel
    area = ch.w_NM * ch.t_NM
    branches = []
    contacts = []
    node = 0
    arm_len_in = n_in + n_arm_in
    per_arm_centers = _span_centers([(n_in, mesh), (n_arm_in, pitch)])
    junction_offsets = []
    for i in range(3):
        base = node
        for j in range(arm_len_in - 1):
            seg = per_arm_centers[j + 1] - per_arm_centers[j]
            se, sh = sc.nm_conductances(seg, area, ch.rho_N, ch.lambda_N)
            branches.append(sc.Branch(base + j, base + j + 1, se))
            branches.append(sc.Branch(base + j, None, sh))
            branches.append(sc.Branch(base + j + 1, None, sh))
        contacts.append(Contact(f"in{i}", i, np.arange(n_wire - n_in, n_wire),
                                np.arange(base, base + n_in),
                                source_share=1.0 / n_in, is_input=True))
        junction_offsets.append(base + arm_len_in - 1)
        node += arm_len_in
    out_centers = _span_centers([(n_arm_out, pitch), (n_out, mesh)])
    base = node
    for j in range(n_arm_out + n_out - 1):
        seg = out_centers[j + 1] - out_centers[j]
        se, sh = sc.nm_conductances(seg, area, ch.rho_N, ch.lambda_N)
        branches.append(sc.Branch(base + j, base + j + 1, se))
        branches.append(sc.Branch(base + j, None, sh))
        branches.append(sc.Branch(base + j + 1, None, sh))
    contacts.append(Contact("out", 3, np.arange(n_out),
                            np.arange(base + n_arm_out, base + n_arm_out + n_out),
                            source_share=-3.0 / n_out, is_input=False))
    node += n_arm_out + n_out
    junction = node
    node += 1
    # half-pitch stubs join each arm end and the output arm head to the junction
    se, sh = sc.nm_conductances(0.5 * pitch, area, ch.rho_N, ch.lambda_N)
    for arm_end in junction_offsets:
        branches.append(sc.Branch(arm_end, junction, se))
        branches.append(sc.Branch(arm_end, None, sh))
        branches.append(sc.Branch(junction, None, sh))
    branches.append(sc.Branch(junction, base, se))
    branches.append(sc.Branch(junction, None, sh))
    branches.append(sc.Branch(base, None, sh))

    return Device(
        kind="majority3", config=cfg, material=mat, wires=wires,
        wire_contact_side=["end", "end", "end", "start"], contacts=contacts,
        n_channel_nodes=node, channel_branches=branches,
        grounded_channel_nodes=(), charge_reference_channel=junction,
        blocks_local=_local_blocks(cfg),
    )


_BUILDERS = {"sv": build_sv, "majority3": build_majority3, "nlsv": build_nlsv}


def build_device(cfg: DeviceConfig) -> Device:
    if cfg.sim.device not in _BUILDERS:
        raise ValueError(f"unknown device kind: {cfg.sim.device}")
    return _BUILDERS[cfg.sim.device](cfg)
