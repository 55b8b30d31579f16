"""Incoherent channels, the vectorized Liouvillian and its propagation."""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import model as nv
from .linalg import DimensionError, devectorize, expm, kron, vectorize
from .model import N_LEVELS, SINGLET, level_index

TWO_PI = 2.0 * math.pi

# Tabulated rates are population rates in 1/us ("MHz" in the tables) and are
# used as-is; only coherent energies carry the 2*pi.
RATE_UNIT = 1.0


class NumericalFailure(RuntimeError):
    pass


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class RateModel:
    """Seven-level transition rates in 1/us.

    ``k_xs[m]`` is excited ``m_s`` -> singlet, ``k_sx[m]`` singlet -> ground ``m_s``.
    """

    gamma: float
    e: float
    k_xs: dict
    k_sx: dict
    label: str = "custom"

    def __post_init__(self):
        if not 0.0 <= self.e <= 1.0:
            raise ValueError(f"spin-mixing fraction e must lie in [0, 1], got {self.e}")
        rates = [self.gamma, *self.k_xs.values(), *self.k_sx.values()]
        if any(r < 0 for r in rates):
            raise ValueError("transition rates must be non-negative")

    @classmethod
    def from_mhz(cls, gamma, e, k0s, kps, kms, ks0, ksp, ksm, label="custom"):
        u = RATE_UNIT
        return cls(gamma * u, e, {0: k0s * u, 1: kps * u, -1: kms * u},
                   {0: ks0 * u, 1: ksp * u, -1: ksm * u}, str(label))

    def mhz(self):
        """Rates back in the tabulated MHz units, keyed by table row name."""
        u = RATE_UNIT
        return {
            "gamma": self.gamma / u, "e": self.e,
            "k0S": self.k_xs[0] / u, "k+S": self.k_xs[1] / u, "k-S": self.k_xs[-1] / u,
            "kS0": self.k_sx[0] / u, "kS+": self.k_sx[1] / u, "kS-": self.k_sx[-1] / u,
        }


MODELS = {
    "1": RateModel.from_mhz(77.0, 1.5 / 77.0, 0.0, 30.0, 30.0, 3.3, 0.0, 0.0, "1"),
    "2": RateModel.from_mhz(62.7, 0.01, 12.97, 80.0, 80.0, 3.45, 2.16 / 2, 2.16 / 2, "2"),
    "3": RateModel.from_mhz(63.2, 0.0, 10.8, 60.7, 60.7, 0.8, 0.4, 0.4, "3"),
    "4": RateModel.from_mhz(67.4, 0.0, 9.9, 91.6, 91.6, 4.83, 2.11 / 2, 2.11 / 2, "4"),
}


def get_model(label):
    try:
        return MODELS[str(label)]
    except KeyError:
        raise KeyError(f"unknown rate model {label!r}; choose from {sorted(MODELS)}") from None


@dataclass(frozen=True)
class RelaxationParams:
    """Relaxation times in us. ``None`` disables a channel."""

    t2_el_ground: float | None = 3.0
    t2_el_excited: float | None = 6e-3
    t1_el: float | None = 1e3
    t2_n: float | None = 1e3
    t1_n: float | None = 1e5

    def __post_init__(self):
        for name in ("t2_el_ground", "t2_el_excited", "t1_el", "t2_n", "t1_n"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive or None")

    @classmethod
    def none(cls):
        return cls(None, None, None, None, None)


@dataclass(frozen=True)
class MwDrive:
    """Selective ground-state microwave drive in the rotating frame.

    ``rabi`` is the Rabi angular frequency; the matrix element between the
    two driven electronic levels is ``rabi / 2``. ``transition`` names the
    joint levels ``((m_s, nuc), (m_s', nuc))`` the drive is resonant with,
    with ``nuc`` in ``{"up", "down"}``.
    """

    rabi: float
    transition: tuple = ((0, "down"), (1, "down"))
    detuning: float = 0.0

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError("Rabi rate must be non-negative")
        (m_a, _), (m_b, _) = self.transition
        if m_a == m_b:
            raise ValueError("microwave transition must connect two different m_s")


@dataclass(frozen=True)
class ControlSettings:
    k: float = 0.0
    mw: MwDrive | None = None

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("optical rate k must be non-negative")


class Channel(NamedTuple):
    name: str
    op: np.ndarray


def _transition(dst, src, rate, nd):
    op = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    op[dst, src] = math.sqrt(rate)
    return kron(op, np.eye(nd))


def channels(model, relax, control, nuclear_dim):
    """Named jump operators for every active incoherent process.

    Optical pumping and spontaneous decay conserve ``m_s`` with weight
    ``1 - e``; the remaining fraction ``e`` is split evenly between the two
    other projections. Zero-rate channels are omitted.
    """
    nd = nuclear_dim
    out = []

    def add(name, dst, src, rate):
        if rate < 0:
            raise ValueError(f"negative rate for {name}")
        if rate > 0:
            out.append(Channel(name, _transition(dst, src, rate, nd)))

    e = model.e
    for m in (-1, 0, 1):
        g, x = level_index("ground", m), level_index("excited", m)
        add(f"pump g{m:+d}->e{m:+d}", x, g, control.k * (1 - e))
        add(f"decay e{m:+d}->g{m:+d}", g, x, model.gamma * (1 - e))
        for m2 in (-1, 0, 1):
            if m2 == m:
                continue
            add(f"pump-mix g{m:+d}->e{m2:+d}", level_index("excited", m2), g, control.k * e / 2)
            add(f"decay-mix e{m:+d}->g{m2:+d}", level_index("ground", m2), x, model.gamma * e / 2)
        add(f"isc e{m:+d}->S", SINGLET, x, model.k_xs[m])
        add(f"isc S->g{m:+d}", g, SINGLET, model.k_sx[m])

    sz = nv.spin1_operators()["z"]
    for manifold, t2 in (("ground", relax.t2_el_ground), ("excited", relax.t2_el_excited)):
        if t2 is not None:
            out.append(Channel(f"dephasing {manifold}",
                               kron(nv.embed(sz, manifold), np.eye(nd)) / math.sqrt(2 * t2)))
    if relax.t1_el is not None:
        for m in (-1, 0, 1):
            for m2 in (-1, 0, 1):
                if m != m2:
                    add(f"t1 g{m:+d}->g{m2:+d}", level_index("ground", m2),
                        level_index("ground", m), 1.0 / (3 * relax.t1_el))

    nuc = nv.nuclear_operators(nd)
    if relax.t2_n is not None:
        out.append(Channel("nuclear dephasing",
                           kron(np.eye(N_LEVELS), nuc["z"]) / math.sqrt(2 * relax.t2_n)))
    if relax.t1_n is not None:
        for j in range(nd - 1):
            for a, b in ((j, j + 1), (j + 1, j)):
                op = np.zeros((nd, nd), dtype=complex)
                op[a, b] = 1.0 / math.sqrt(2 * relax.t1_n)
                out.append(Channel(f"nuclear t1 {b}->{a}", kron(np.eye(N_LEVELS), op)))
    return out


def jump_operators(model, relax, control, nuclear_dim):
    return [c.op for c in channels(model, relax, control, nuclear_dim)]


def liouvillian(h, jumps):
    """Superoperator acting on column-stacked density matrices.

    ``i (conj(H) (x) 1 - 1 (x) H) + sum_k [conj(L) (x) L
    - 1/2 1 (x) L^dag L - 1/2 (L^dag L)^T (x) 1]``, which reproduces
    ``d rho/dt = -i[H, rho] + sum_k D(L_k) rho``.
    """
    h = np.asarray(h)
    n = h.shape[0]
    if h.shape != (n, n):
        raise DimensionError("Hamiltonian must be square")
    ident = np.eye(n)
    sup = 1j * (kron(h.conj(), ident) - kron(ident, h))
    for op in jumps:
        op = np.asarray(op)
        if op.shape != (n, n):
            raise DimensionError(f"jump operator shape {op.shape} != {(n, n)}")
        ldl = op.conj().T @ op
        sup += kron(op.conj(), op) - 0.5 * kron(ident, ldl) - 0.5 * kron(ldl.T, ident)
    return sup


def microwave_term(control, h, nuclear_dim):
    """Rotating-frame microwave correction to a (secular) Hamiltonian ``h``.

    The drive couples ``|g, m_s>`` and ``|g, m_s'>`` with ``rabi/2`` on every
    nuclear state. The drive frequency is chosen resonant with the named
    joint transition and removed from the diagonal of the ``m_s'`` levels.
    For each side the named nuclear state is resolved to the conditional
    eigenstate it overlaps most with, unless that block mixes it strongly
    (overlap below 3/4), in which case the bare ``I_z`` state is used.
    """
    mw = control.mw
    if mw is None:
        raise ValueError("control has no microwave drive")
    nd = nuclear_dim
    (m_a, nuc_a), (m_b, nuc_b) = mw.transition
    e_a = _resolved_energy(h, m_a, nuc_a, nd)
    e_b = _resolved_energy(h, m_b, nuc_b, nd)
    omega = e_b - e_a - mw.detuning

    ia, ib = level_index("ground", m_a), level_index("ground", m_b)
    el = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    el[ia, ib] = el[ib, ia] = mw.rabi / 2
    el[ib, ib] = -omega
    return kron(el, np.eye(nd))


def _resolved_energy(h, m_s, nuc, nd):
    block = nv.conditional_block(h, "ground", m_s, nd)
    idx = {"up": 0, "down": nd - 1}[nuc]
    vals, vecs = np.linalg.eigh(0.5 * (block + block.conj().T))
    weights = np.abs(vecs[idx, :]) ** 2
    best = int(np.argmax(weights))
    if weights[best] >= 0.75:
        return float(vals[best])
    return float(block[idx, idx].real)


# ---------------------------------------------------------------------------
# propagation


def check_density_matrix(rho, tol=1e-10):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError("density matrix must be square")
    if abs(np.trace(rho) - 1) > tol * 100:
        raise InvalidStateError(f"trace {np.trace(rho).real:.12g} != 1")
    if np.max(np.abs(rho - rho.conj().T)) > tol * 100:
        raise InvalidStateError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -tol * 100:
        raise InvalidStateError("density matrix is not positive semidefinite")


class PropagatorCache:
    """``expm(L t)`` memoized by (Liouvillian bytes, t). Thread-safe."""

    def __init__(self, maxsize=256):
        self._data = {}
        self._lock = threading.Lock()
        self.maxsize = maxsize
        self.hits = 0

    @staticmethod
    def key(sup, t):
        return hashlib.sha1(np.ascontiguousarray(sup).tobytes()).hexdigest(), float(t)

    def get(self, sup, t):
        k = self.key(sup, t)
        with self._lock:
            p = self._data.get(k)
            if p is not None:
                self.hits += 1
                return p
        p = _exact_trace(sup, expm(sup, t))
        with self._lock:
            if len(self._data) >= self.maxsize:
                self._data.pop(next(iter(self._data)))
            self._data[k] = p
        return p


_default_cache = PropagatorCache()


def _exact_trace(sup, p):
    """Restore ``<<1| P = <<1|`` when ``sup`` conserves the trace.

    For large ``|L t|`` the Pade result misses this by ~1e-16 |L t| per
    step, which adds up over long sampled runs. The rank-one fix changes
    ``P`` only along the trace functional; non-conserving generators are
    left alone so their drift is still reported.
    """
    n = math.isqrt(sup.shape[0])
    one = vectorize(np.eye(n)).conj()
    scale = max(float(np.abs(sup).max()), 1.0)
    if np.abs(one @ sup).max() > 1e-12 * scale:
        return p
    return p + np.outer(vectorize(np.eye(n) / n), one - one @ p)


def _propagator(sup, t, cache):
    if cache is False:
        return _exact_trace(sup, expm(sup, t))
    return (cache or _default_cache).get(sup, t)


def _check_trace(vec, n, where):
    tr = np.trace(devectorize(vec, n))
    if not abs(tr - 1.0) <= 1e-8:
        raise NumericalFailure(f"trace drifted to {tr:.12g} {where}")


def evolve(rho0, sup, t, cache=None, validate=True):
    """State after time ``t`` under ``d vec(rho)/dt = L vec(rho)``."""
    if t < 0:
        raise ValueError("duration must be non-negative")
    rho0 = np.asarray(rho0, dtype=complex)
    if validate:
        check_density_matrix(rho0)
    if t == 0:
        return rho0.copy()
    n = rho0.shape[0]
    vec = _propagator(sup, t, cache) @ vectorize(rho0)
    _check_trace(vec, n, f"after t={t}")
    return devectorize(vec, n)


def evolve_sampled(rho0, sup, duration, dt, cache=None, validate=True):
    """Trajectory sampled at ``0, dt, 2 dt, ...`` and at ``duration``.

    One propagator ``expm(L dt)`` is built per call and reused for every
    step; a shorter final step lands exactly on ``duration``.

    Returns
    -------
    times : numpy.ndarray
    states : numpy.ndarray, shape (len(times), n, n)
    """
    if duration < 0 or dt <= 0:
        raise ValueError("need duration >= 0 and dt > 0")
    rho0 = np.asarray(rho0, dtype=complex)
    if validate:
        check_density_matrix(rho0)
    n = rho0.shape[0]
    steps = int(math.floor(duration / dt + 1e-9))
    rest = duration - steps * dt
    if rest <= 1e-9 * max(dt, 1.0):
        rest = 0.0
    times = [0.0]
    vecs = [vectorize(rho0)]
    if steps:
        p = _propagator(sup, dt, cache)
        for i in range(steps):
            vecs.append(p @ vecs[-1])
            times.append((i + 1) * dt)
    if rest:
        vecs.append(_propagator(sup, rest, cache) @ vecs[-1])
        times.append(duration)
    if len(vecs) > 1:
        _check_trace(vecs[-1], n, f"after t={duration}")
    states = np.stack([devectorize(v, n) for v in vecs])
    return np.array(times), states
