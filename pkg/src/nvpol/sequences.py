"""Pulse sequences for the three polarization protocols, runs and sweeps.

Protocols
---------
``eslac``
    Long laser pulse at the excited-state anti-crossing (B along the NV axis
    near 510 G), then a wait.
``ms0``
    laser, wait, selective MW on |0,down> <-> |1,down> while the nucleus
    precesses in m_s=0, short laser, wait.
``ms1``
    Same skeleton, MW on |0,up> <-> |1,up>, precession in m_s=1 at
    ``B_z = -A_zz / gamma_n``.

Durations are in microseconds, rates and energies in rad/us.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import hyperfine as hfm
from .dissipation import (
    ControlSettings,
    MwDrive,
    RelaxationParams,
    channels,
    evolve_sampled,
    get_model,
    liouvillian,
    microwave_term,
)
from .model import (
    GAMMA_N,
    HamiltonianMode,
    SystemParams,
    build_hamiltonian,
    conditional_block,
    conditional_eigenbasis,
)
from .observables import Readout

PROTOCOLS = ("eslac", "ms0", "ms1", "custom")
ESLAC_FIELD = 510.0
MS0_FIELD = (10.0, 0.0, 0.5)
MS0_FIELD_CAP = 50.0
T_MW_MAX = 200.0


class ProtocolInapplicableError(ValueError):
    """The protocol has no precession channel for this nucleus/field."""


@dataclass(frozen=True)
class Segment:
    duration: float
    laser: bool = False
    mw: MwDrive | None = None
    label: str = ""

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("segment duration must be non-negative")

    def control(self, k):
        return ControlSettings(k=k if self.laser else 0.0, mw=self.mw)


@dataclass(frozen=True)
class Protocol:
    """A named pulse sequence together with its field and readout convention.

    ``readouts`` maps a readout name to ``(segment_index, quantity)`` where
    quantity is ``"electron"``, ``"nuclear"`` or ``"singlet"``; the value is taken at the
    end of that segment. ``readout_basis`` is ``"z"`` or ``"cond0"`` /
    ``"cond1"`` (nuclear eigenbasis while the electron is in ground m_s=0 /
    m_s=+1).
    """

    name: str
    segments: tuple
    b: tuple
    mode: HamiltonianMode = HamiltonianMode.FULL
    readouts: dict = field(default_factory=dict)
    readout_basis: str = "z"
    soc_manifolds: tuple = ("ground",)
    delta: float | None = None

    @property
    def duration(self):
        return sum(s.duration for s in self.segments)


def initial_state(nuclear_dim):
    """Unpolarized ground triplet times an unpolarized nucleus."""
    el = np.zeros(7)
    el[:3] = 1.0 / 3.0
    return np.kron(np.diag(el), np.eye(nuclear_dim) / nuclear_dim).astype(complex)


def params_for(family, b):
    return SystemParams.for_species(family.species, b=b)


# ---------------------------------------------------------------------------
# microwave timing


def compute_delta(protocol, params, hf_g):
    """Nuclear coupling driving the precession in the relevant manifold.

    ``ms0``: ``|<0,up| H |0,down>|`` of the secular ground Hamiltonian with
    the second-order correction. ``ms1``: ``|<1,up| H |1,down>|`` of the
    plain secular Hamiltonian. Both in the ``I_z`` basis.
    """
    name = getattr(protocol, "name", protocol)
    if params.nuclear_dim != 2:
        raise ProtocolInapplicableError("precession protocols need a spin-1/2 nucleus")
    zero = hfm.HyperfineTensor.zero("excited")
    if name == "ms0":
        h = build_hamiltonian(params, hf_g, zero, HamiltonianMode.SECULAR_SOC,
                              soc_manifolds=("ground",))
        m_s = 0
    elif name == "ms1":
        h = build_hamiltonian(params, hf_g, zero, HamiltonianMode.SECULAR)
        m_s = 1
    else:
        raise ValueError(f"no precession coupling defined for protocol {name!r}")
    delta = abs(conditional_block(h, "ground", m_s, 2)[0, 1])
    if delta < 1e-9:
        what = "anisotropic hyperfine term" if name == "ms1" else "transverse nuclear field"
        raise ProtocolInapplicableError(
            f"{name}: zero {what}, no precession channel to polarize this nucleus")
    return float(delta)


@dataclass(frozen=True)
class MwSchedule:
    coupling: float
    rabi: float
    t_mw: float


def mw_schedule(delta, n=0):
    """Drive matched to the precession coupling and the optimal duration.

    The three-level optimum has drive coupling equal to ``|delta|`` (Rabi
    rate ``2 |delta|``) and duration ``(2n+1) pi / sqrt(delta^2 + coupling^2)``,
    i.e. ``pi / (sqrt(2) |delta|)`` for ``n = 0``.
    """
    d = abs(delta)
    if d == 0:
        raise ProtocolInapplicableError("zero coupling")
    return MwSchedule(coupling=d, rabi=2 * d, t_mw=(2 * n + 1) * math.pi / (math.sqrt(2) * d))


def three_level_populations(delta, omega, t, initial="110"):
    """Populations of the analytic three-level rotating-frame model.

    Level 1 couples to level 2 through ``delta`` and to level 3 through
    ``omega``. ``initial="110"`` starts in ``(|1> + |2>)/sqrt(2)``,
    ``initial="001"`` in ``|3>``. Returns an array of shape ``(len(t), 3)``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lam = math.hypot(delta, omega)
    c, s = np.cos(lam * t), np.sin(lam * t)
    l2 = lam**2
    if initial == "110":
        amp = np.stack([
            c - 1j * delta * s / lam,
            (delta**2 * c + omega**2) / l2 - 1j * delta * s / lam,
            delta * omega * (c - 1) / l2 - 1j * omega * s / lam,
        ], axis=1) / math.sqrt(2)
    elif initial == "001":
        amp = np.stack([
            -1j * omega * s / lam,
            delta * omega * (c - 1) / l2 + 0j,
            (omega**2 * c + delta**2) / l2 + 0j,
        ], axis=1)
    else:
        raise ValueError("initial must be '110' or '001'")
    return np.abs(amp) ** 2


def three_level_comparison(protocol, family, times):
    """Coherent MW segment of ``protocol`` against the analytic three-level model.

    Dissipation is switched off and the drive coupling equals ``|delta|``.
    Returns ``(simulated, analytic)`` populations, each of shape
    ``(len(times), 3)``, for the levels ``(|0,dn>, |0,up>, |1,dn>)`` (ms0) or
    ``(|1,up>, |1,dn>, |0,up>)`` (ms1). Phases of the simulated basis are
    chosen so both couplings are real and positive.
    """
    if protocol.name not in ("ms0", "ms1"):
        raise ValueError("three-level model applies to ms0 and ms1 only")
    params = params_for(family, protocol.b)
    nd = params.nuclear_dim
    h = build_hamiltonian(params, family.ground, family.excited, protocol.mode,
                          soc_manifolds=protocol.soc_manifolds)
    mw = next(s.mw for s in protocol.segments if s.mw is not None)
    hh = h + microwave_term(ControlSettings(k=0.0, mw=mw), h, nd)

    def ket(m_s, vec):
        v = np.zeros(7 * nd, dtype=complex)
        i = (m_s + 1) * nd
        v[i:i + nd] = vec
        return v

    up, dn = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    if protocol.name == "ms0":
        cond = conditional_eigenbasis(conditional_block(h, "ground", 1, nd))
        basis = [ket(0, dn), ket(0, up), ket(1, cond[:, 1])]
        initial = "110"
    else:
        basis = [ket(1, up), ket(1, dn), ket(0, up)]
        initial = "001"
    # gauge: make <1|H|2> and <1|H|3> real and positive
    for j in (1, 2):
        c = basis[0].conj() @ hh @ basis[j]
        if abs(c) > 0:
            basis[j] = basis[j] * (abs(c) / c)
    delta = (basis[0].conj() @ hh @ basis[1]).real
    omega = (basis[0].conj() @ hh @ basis[2]).real
    psi0 = (basis[0] + basis[1]) / math.sqrt(2) if initial == "110" else basis[2]
    vals, vecs = np.linalg.eigh(hh)
    coeff = vecs.conj().T @ psi0
    sim = []
    for t in np.atleast_1d(times):
        psi = vecs @ (np.exp(-1j * vals * t) * coeff)
        sim.append([abs(b.conj() @ psi) ** 2 for b in basis])
    return np.array(sim), three_level_populations(delta, omega, times, initial)


# ---------------------------------------------------------------------------
# presets


def ms0_field(hf_g, gamma_n, cap=MS0_FIELD_CAP):
    """Transverse field with ``Omega_1 . Omega_0 = 0`` (zero azimuth), capped."""
    a_ani = hfm.ladder_components(hf_g).a_ani
    bx = -a_ani / gamma_n
    if abs(bx) > cap or bx == 0.0:
        bx = math.copysign(cap, bx) if bx else cap
    return (bx, 0.0, 0.0)


def ms1_field(hf_g, gamma_n):
    return (0.0, 0.0, -hf_g.matrix[2, 2] / gamma_n)


def eslac_protocol(family, b_field=ESLAC_FIELD, theta_b=0.0, t_laser=1000.0, t_wait=2.0):
    """ESLAC preset; ``theta_b`` tilts the field away from the NV axis (rad)."""
    b = (b_field * math.sin(theta_b), 0.0, b_field * math.cos(theta_b))
    segs = (Segment(t_laser, laser=True, label="laser"), Segment(t_wait, label="wait"))
    return Protocol(
        "eslac", segs, b, HamiltonianMode.FULL,
        readouts={"electron_laser": (0, "electron"), "nuclear_laser": (0, "nuclear"),
                  "electron_end": (1, "electron"), "nuclear_end": (1, "nuclear")},
        readout_basis="z",
    )


def _precession_protocol(name, family, b, t_laser, t_wait, t_laser2, t_wait2, n,
                         detuning, t_mw, strict, sample_dt):
    params = params_for(family, b)
    try:
        delta = compute_delta(name, params, family.ground)
        sched = mw_schedule(delta, n)
        rabi, mw_time = sched.rabi, sched.t_mw
    except ProtocolInapplicableError:
        if strict:
            raise
        delta, rabi, mw_time = 0.0, 0.0, T_MW_MAX
    if not strict:
        mw_time = min(mw_time, T_MW_MAX)
    if t_mw is not None:
        mw_time = t_mw
    if t_wait2 is None:
        # one full precession period in m_s=0
        t_wait2 = math.pi / delta if delta else T_MW_MAX
        if not strict:
            t_wait2 = min(t_wait2, T_MW_MAX)
        if sample_dt:
            t_wait2 = max(sample_dt, round(t_wait2 / sample_dt) * sample_dt)
    nuc = "down" if name == "ms0" else "up"
    mw = MwDrive(rabi=rabi, transition=((0, nuc), (1, nuc)), detuning=detuning)
    segs = (
        Segment(t_laser, laser=True, label="laser1"),
        Segment(t_wait, label="wait1"),
        Segment(mw_time, mw=mw, label="mw"),
        Segment(t_laser2, laser=True, label="laser2"),
        Segment(t_wait2, label="wait2"),
    )
    mode = HamiltonianMode.SECULAR_SOC if name == "ms0" else HamiltonianMode.SECULAR
    return Protocol(
        name, segs, tuple(b), mode,
        readouts={"electron_wait": (1, "electron"), "nuclear_mw": (2, "nuclear"),
                  "electron_end": (4, "electron"), "nuclear_end": (4, "nuclear")},
        readout_basis="cond1" if name == "ms0" else "cond0",
        soc_manifolds=("ground",),
        delta=delta,
    )


def ms0_protocol(family, b=MS0_FIELD, t_laser=2.0, t_wait=2.0, t_laser2=0.3,
                 t_wait2=None, n=0, detuning=0.0, t_mw=None, strict=True, sample_dt=0.01):
    """m_s=0 precession preset.

    ``b="orthogonal"`` picks the transverse field that makes the m_s=0 and
    m_s=+1 nuclear fields orthogonal (see :func:`ms0_field`).
    """
    if isinstance(b, str):
        if b != "orthogonal":
            raise ValueError(f"unknown field rule {b!r}; use 'orthogonal' or a vector")
        b = ms0_field(family.ground, GAMMA_N[family.species])
    return _precession_protocol("ms0", family, b, t_laser, t_wait, t_laser2, t_wait2,
                                n, detuning, t_mw, strict, sample_dt)


def ms1_protocol(family, b=None, t_laser=2.0, t_wait=2.0, t_laser2=0.3,
                 t_wait2=None, n=0, detuning=0.0, t_mw=None, strict=True, sample_dt=0.01):
    """m_s=1 precession preset; by default ``B_z = -A_zz / gamma_n``."""
    if b is None or isinstance(b, str):
        b = ms1_field(family.ground, GAMMA_N[family.species])
    return _precession_protocol("ms1", family, b, t_laser, t_wait, t_laser2, t_wait2,
                                n, detuning, t_mw, strict, sample_dt)


def parse_segments(text):
    """``"laser:2, wait:2"`` -> segments (durations in us)."""
    segs = []
    for item in filter(None, (x.strip() for x in text.split(","))):
        kind, _, dur = item.partition(":")
        kind = kind.strip().lower()
        if kind not in ("laser", "wait") or not dur:
            raise ValueError(f"bad segment {item!r}; expected laser:<us> or wait:<us>")
        segs.append(Segment(float(dur), laser=kind == "laser", label=f"{kind}{len(segs) + 1}"))
    if not segs:
        raise ValueError("custom protocol needs at least one segment")
    return tuple(segs)


def custom_protocol(family, segments="laser:2,wait:2", b=(0.0, 0.0, 0.0), mode="full"):
    """Laser/wait sequence read out at the end of every segment."""
    segs = parse_segments(segments) if isinstance(segments, str) else tuple(segments)
    readouts = {}
    for i, seg in enumerate(segs):
        for what in ("electron", "nuclear", "singlet"):
            readouts[f"{what}_{seg.label}"] = (i, what)
    return Protocol("custom", segs, tuple(b), HamiltonianMode(mode), readouts=readouts,
                    soc_manifolds=("ground", "excited"))


def make_protocol(name, family, **kw):
    builders = {"eslac": eslac_protocol, "ms0": ms0_protocol, "ms1": ms1_protocol,
                "custom": custom_protocol}
    if name not in builders:
        raise ValueError(f"unknown protocol {name!r}; choose from {sorted(builders)}")
    return builders[name](family, **kw)


# ---------------------------------------------------------------------------
# running


@dataclass
class RunResult:
    protocol: Protocol
    times: np.ndarray
    samples: list
    readouts: dict
    repeat_readouts: list
    final_state: np.ndarray
    states: np.ndarray | None = None
    boundaries: list = field(default_factory=list)


def readout_basis(protocol, h):
    nd = h.shape[0] // 7
    if protocol.readout_basis == "z" or nd != 2:
        return None
    m_s = {"cond0": 0, "cond1": 1}[protocol.readout_basis]
    return conditional_eigenbasis(conditional_block(h, "ground", m_s, nd))


def run(protocol, model, family, k, params=None, relax=None, sample_dt=0.01,
        max_samples=2000, repeats=1, keep_states=False, rho0=None, cache=None):
    """Evolve the unpolarized state through ``protocol`` and collect readouts.

    Parameters
    ----------
    protocol : Protocol
    model : RateModel or str
        Rate model or its label ("1" to "4").
    family : FamilyRecord
        Hyperfine tensors (and nuclear species).
    k : float
        Optical excitation rate applied during laser segments.
    repeats : int
        Run the whole segment list this many times in a row.

    Returns
    -------
    RunResult
        ``samples`` holds one :class:`Readout` per sampled time;
        ``readouts`` the named readouts of the last repetition.
    """
    if isinstance(model, str):
        model = get_model(model)
    relax = RelaxationParams() if relax is None else relax
    params = params_for(family, protocol.b) if params is None else params
    nd = params.nuclear_dim
    h = build_hamiltonian(params, family.ground, family.excited, protocol.mode,
                          soc_manifolds=protocol.soc_manifolds)
    basis = readout_basis(protocol, h)
    rho = initial_state(nd) if rho0 is None else np.asarray(rho0, dtype=complex)

    sups = {}

    def sup_for(seg):
        key = (seg.laser, seg.mw)
        if key not in sups:
            ctrl = seg.control(k)
            hh = h + microwave_term(ctrl, h, nd) if seg.mw is not None else h
            jumps = [c.op for c in channels(model, relax, ctrl, nd)]
            sups[key] = liouvillian(hh, jumps)
        return sups[key]

    times, samples, states, boundaries = [0.0], [Readout.of(rho, basis)], [rho], []
    repeat_readouts = []
    t0 = 0.0
    for _ in range(int(repeats)):
        ends = []
        for seg in protocol.segments:
            if seg.duration > 0:
                dt = max(sample_dt, seg.duration / max_samples)
                ts, rhos = evolve_sampled(rho, sup_for(seg), seg.duration, dt,
                                          cache=cache, validate=False)
                for t, r in zip(ts[1:], rhos[1:]):
                    times.append(t0 + t)
                    samples.append(Readout.of(r, basis))
                    if keep_states:
                        states.append(r)
                rho = rhos[-1]
            t0 += seg.duration
            boundaries.append(t0)
            ends.append(Readout.of(rho, basis))
        named = {}
        for name, (idx, what) in protocol.readouts.items():
            r = ends[idx]
            named[name] = {"electron": r.p_electron, "nuclear": r.p_nuclear,
                           "singlet": r.singlet}[what]
            if what == "nuclear":
                named[name + "_signed"] = r.p_nuclear_signed
        repeat_readouts.append(named)

    return RunResult(
        protocol=protocol,
        times=np.array(times),
        samples=samples,
        readouts=repeat_readouts[-1],
        repeat_readouts=repeat_readouts,
        final_state=rho,
        states=np.stack(states) if keep_states else None,
        boundaries=boundaries,
    )


# ---------------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("k", "theta_h", "b_z", "family", "t")


def family_at_theta(family, theta, phi=0.0):
    """Same contact/dipole strengths as ``family``, nucleus moved to ``theta``."""
    g = hfm.from_contact_dipole(*hfm.extract_contact_dipole(family.ground), theta, phi, "ground")
    e = hfm.from_contact_dipole(*hfm.extract_contact_dipole(family.excited), theta, phi, "excited")
    return hfm.FamilyRecord(f"{family.name}@theta={theta:.6g}", g, e, family.species,
                            source=f"contact/dipole of {family.name}")


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to reproduce one protocol run."""

    protocol: str
    model: str
    family: object = "15N"
    k: float = 4.0
    theta_h: float | None = None
    protocol_kw: tuple = ()
    relax: RelaxationParams = RelaxationParams()
    sample_dt: float = 0.01
    max_samples: int = 2000
    repeats: int = 1
    trajectory: bool = False

    def resolve_family(self):
        fam = self.family
        if isinstance(fam, str):
            fam = hfm.get_family(fam)
        if self.theta_h is not None:
            fam = family_at_theta(fam, self.theta_h)
        return fam

    def build_protocol(self):
        kw = dict(self.protocol_kw)
        if self.protocol in ("ms0", "ms1"):
            kw.setdefault("sample_dt", self.sample_dt)
        return make_protocol(self.protocol, self.resolve_family(), **kw)

    def with_kw(self, **kw):
        merged = dict(self.protocol_kw)
        merged.update(kw)
        return replace(self, protocol_kw=tuple(sorted(merged.items())))


@dataclass
class PointResult:
    value: object
    readouts: dict | None
    final: Readout | None = None
    times: np.ndarray | None = None
    samples: list | None = None
    error: str | None = None


def run_spec(spec):
    fam = spec.resolve_family()
    protocol = spec.build_protocol()
    res = run(protocol, spec.model, fam, spec.k, relax=spec.relax,
              sample_dt=spec.sample_dt, max_samples=spec.max_samples, repeats=spec.repeats)
    return res


def apply_axis(spec, axis, value):
    """Copy of ``spec`` with one sweep coordinate set to ``value``."""
    if axis == "k":
        return replace(spec, k=float(value))
    if axis == "theta_h":
        spec = replace(spec, theta_h=float(value))
        if spec.protocol == "ms0":
            spec = spec.with_kw(b="orthogonal")
        if spec.protocol in ("ms0", "ms1"):
            spec = spec.with_kw(strict=False)
        return spec
    if axis == "family":
        spec = replace(spec, family=value)
        if spec.protocol == "ms0" and "b" not in dict(spec.protocol_kw):
            spec = spec.with_kw(b="orthogonal")
        return spec
    if axis == "b_z":
        if spec.protocol == "eslac":
            return spec.with_kw(b_field=float(value))
        kw = dict(spec.protocol_kw)
        b = kw.get("b")
        if spec.protocol in ("ms0", "custom"):
            default = MS0_FIELD if spec.protocol == "ms0" else (0.0, 0.0, 0.0)
            b = default if b is None or isinstance(b, str) else b
            return spec.with_kw(b=(b[0], b[1], float(value)))
        return spec.with_kw(b=(0.0, 0.0, float(value)))
    if axis == "t":
        if spec.protocol == "custom":
            raise ValueError("the t axis is not defined for custom sequences")
        key = "t_laser" if spec.protocol == "eslac" else "t_mw"
        return spec.with_kw(**{key: float(value)})
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def _sweep_point(args):
    spec, axis, value = args
    try:
        res = run_spec(apply_axis(spec, axis, value))
    except Exception as exc:  # recorded per point, the sweep carries on
        return PointResult(value, None, error=f"{type(exc).__name__}: {exc}")
    if spec.trajectory:
        return PointResult(value, res.readouts, res.samples[-1], res.times, res.samples)
    return PointResult(value, res.readouts, res.samples[-1])


def sweep(axis, grid, spec, workers=None):
    """Run ``spec`` at every grid value of ``axis``; results keep grid order.

    ``workers`` defaults to the number of available cores; ``1`` runs
    in-process.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    tasks = [(spec, axis, v) for v in grid]
    workers = workers or os.cpu_count() or 1
    workers = min(workers, len(tasks))
    if workers <= 1:
        return [_sweep_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_point, tasks))
