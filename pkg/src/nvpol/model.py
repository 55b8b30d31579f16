"""Spin operators and the coherent Hamiltonian of the seven-level NV model.

Electronic basis order (index: level)::

    0: (g,-1)  1: (g,0)  2: (g,+1)
    3: (e,-1)  4: (e,0)  5: (e,+1)
    6: singlet

The joint electron-nucleus space is ``kron(electronic, nuclear)``; nuclear
states are ordered by descending projection (``|up>, |down>`` for spin 1/2,
``|+1>, |0>, |-1>`` for spin 1). Stand-alone spin-1 matrices from
:func:`spin1_operators` use the same descending order ``(+1, 0, -1)``;
:func:`embed` reverses them into the ascending electronic layout above.

Energies are angular frequencies in rad/us (2*pi*MHz); fields are in gauss.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .hyperfine import HyperfineTensor
from .linalg import eigh, kron

TWO_PI = 2.0 * math.pi

N_LEVELS = 7
G_M1, G_0, G_P1, E_M1, E_0, E_P1, SINGLET = range(N_LEVELS)
LEVEL_LABELS = ("g,-1", "g,0", "g,+1", "e,-1", "e,0", "e,+1", "S")
_MANIFOLD_OFFSET = {"ground": 0, "excited": 3}

D_GROUND = TWO_PI * 2870.0
D_EXCITED = TWO_PI * 1420.0
GAMMA_EL = TWO_PI * 2.8  # rad/us/G

# MHz/G and nuclear spin dimension per species
GAMMA_N = {
    "13C": TWO_PI * 1.07e-3,
    "14N": TWO_PI * 0.3077e-3,
    "15N": TWO_PI * -0.4316e-3,
}
NUCLEAR_DIM = {"13C": 2, "14N": 3, "15N": 2}
Q_14N = TWO_PI * -4.96


class UnsupportedModeError(ValueError):
    pass


class SingularDenominatorError(ValueError):
    pass


class UndefinedAxisError(ValueError):
    pass


class HamiltonianMode(enum.Enum):
    FULL = "full"
    SECULAR = "secular"
    SECULAR_SOC = "secular+soc"


def level_index(manifold, m_s=None):
    """Electronic index of ``(manifold, m_s)``; ``manifold='singlet'`` takes no m_s."""
    if manifold in ("singlet", "S"):
        return SINGLET
    return _MANIFOLD_OFFSET[manifold] + int(m_s) + 1


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of one NV plus one nuclear spin (angular units)."""

    gamma_n: float
    b: tuple = (0.0, 0.0, 0.0)
    nuclear_dim: int = 2
    q: float = 0.0
    d_ground: float = D_GROUND
    d_excited: float = D_EXCITED
    gamma_el: float = GAMMA_EL

    def __post_init__(self):
        b = tuple(float(x) for x in self.b)
        if len(b) != 3 or not all(math.isfinite(x) for x in b):
            raise ValueError(f"magnetic field must be a finite 3-vector, got {self.b}")
        object.__setattr__(self, "b", b)
        if self.nuclear_dim not in (2, 3):
            raise ValueError("nuclear_dim must be 2 or 3")
        if self.nuclear_dim == 2 and self.q != 0.0:
            raise ValueError("quadrupole term needs a spin-1 nucleus (nuclear_dim=3)")

    @classmethod
    def for_species(cls, species, b=(0.0, 0.0, 0.0), **kw):
        dim = NUCLEAR_DIM[species]
        kw.setdefault("q", Q_14N if species == "14N" else 0.0)
        return cls(gamma_n=GAMMA_N[species], b=b, nuclear_dim=dim, **kw)

    def with_field(self, b):
        return replace(self, b=tuple(b))

    @property
    def dim(self):
        return N_LEVELS * self.nuclear_dim


# ---------------------------------------------------------------------------
# spin operators


def _spin_matrices(s):
    m = np.arange(s, -s - 1, -1)
    dim = len(m)
    sz = np.diag(m).astype(complex)
    sp = np.zeros((dim, dim), dtype=complex)
    for j in range(1, dim):
        sp[j - 1, j] = math.sqrt(s * (s + 1) - m[j] * (m[j] + 1))
    sm = sp.conj().T
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    return {"z": sz, "+": sp, "-": sm, "x": sx, "y": sy}


def spin1_operators():
    """Spin-1 matrices in the basis ``(+1, 0, -1)``; keys ``x y z + -``."""
    return _spin_matrices(1.0)


def spin_half_operators():
    return _spin_matrices(0.5)


def spin1_nuclear_operators():
    return _spin_matrices(1.0)


def nuclear_operators(nuclear_dim):
    return spin_half_operators() if nuclear_dim == 2 else spin1_nuclear_operators()


def embed(op, manifold):
    """Place a 3x3 triplet operator (basis +1,0,-1) into the 7-level space."""
    op = np.asarray(op)
    if op.shape != (3, 3):
        raise ValueError("embed expects a 3x3 operator")
    out = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    o = _MANIFOLD_OFFSET[manifold]
    out[o:o + 3, o:o + 3] = op[::-1, ::-1]
    return out


def lift(el_op, nuc_op):
    """Joint operator ``el_op (x) nuc_op``."""
    return kron(el_op, nuc_op)


def projector(index, dim=N_LEVELS):
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return p


# ---------------------------------------------------------------------------
# Hamiltonian


def _check_tensor(hf):
    a = hf.matrix if isinstance(hf, HyperfineTensor) else np.asarray(hf, float)
    if not np.array_equal(a, a.T):
        raise ValueError("hyperfine tensor must be symmetric")
    return a


def build_hamiltonian(params, hf_g, hf_e, mode=HamiltonianMode.FULL,
                      soc_manifolds=("ground", "excited"), soc_cross=False):
    """Joint Hamiltonian of the seven-level NV and one nuclear spin.

    Each triplet manifold gets ``D S_z^2 + gamma_el B.S + S.A.I`` with its own
    zero-field splitting and hyperfine tensor. Nuclear Zeeman and quadrupole
    terms act on every electronic level; the singlet has no other coherent
    term. ``SECULAR`` keeps only electron terms proportional to ``S_z`` (and
    ``S_z^2``); ``SECULAR_SOC`` adds the second-order correction of the
    dropped terms to the manifolds listed in ``soc_manifolds``.
    ``soc_cross=True`` also adds the second-order coupling between
    ``m_s=+1`` and ``m_s=-1`` (see :func:`build_hsoc_cross`), which the
    m_s-diagonal correction leaves out and which matters when those two
    levels are close in energy.
    """
    mode = HamiltonianMode(mode)
    nd = params.nuclear_dim
    if mode is HamiltonianMode.SECULAR_SOC and nd != 2:
        raise UnsupportedModeError("second-order correction is only derived for spin-1/2 nuclei")
    s = spin1_operators()
    nuc = nuclear_operators(nd)
    bx, by, bz = params.b
    ident_n = np.eye(nd)
    h = np.zeros((N_LEVELS * nd, N_LEVELS * nd), dtype=complex)

    for manifold, d, hf in (("ground", params.d_ground, hf_g),
                            ("excited", params.d_excited, hf_e)):
        a = _check_tensor(hf)
        el = {k: embed(v, manifold) for k, v in s.items()}
        h += lift(d * el["z"] @ el["z"] + params.gamma_el * bz * el["z"], ident_n)
        axes = "z" if mode is not HamiltonianMode.FULL else "xyz"
        if mode is HamiltonianMode.FULL:
            h += params.gamma_el * lift(bx * el["x"] + by * el["y"], ident_n)
        for i, si in enumerate("xyz"):
            if si not in axes:
                continue
            for j, ij in enumerate("xyz"):
                if a[i, j] != 0.0:
                    h += a[i, j] * lift(el[si], nuc[ij])

    h_nuc = params.gamma_n * (bx * nuc["x"] + by * nuc["y"] + bz * nuc["z"])
    if params.q:
        h_nuc = h_nuc + params.q * nuc["z"] @ nuc["z"]
    h += lift(np.eye(N_LEVELS), h_nuc)

    if mode is HamiltonianMode.SECULAR_SOC:
        for manifold in soc_manifolds:
            hf = hf_g if manifold == "ground" else hf_e
            corr = build_hsoc(params, hf, manifold)
            for m_s, op in corr.items():
                h += lift(projector(level_index(manifold, m_s)), op)
            if soc_cross:
                up, dn = level_index(manifold, 1), level_index(manifold, -1)
                el = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
                el[up, dn] = 1.0
                x = lift(el, build_hsoc_cross(params, hf, manifold))
                h += x + x.conj().T
    return 0.5 * (h + h.conj().T)


def soc_operators(params, hf):
    """The nuclear operators ``(M, N)`` entering the second-order correction.

    ``M = 2 gamma_el sum_j (A_jx B_x + A_jy B_y) I_j
    + (gamma_el^2 B_perp^2 + (A_+ . A_-)/4) 1`` and
    ``N = (i/2) (A_+ x A_-) . I`` with ``A_{j+-} = A_jx +- i A_jy`` and
    ``I`` the spin-1/2 operators.
    """
    a = _check_tensor(hf)
    nuc = spin_half_operators()
    ivec = (nuc["x"], nuc["y"], nuc["z"])
    bx, by, _ = params.b
    g = params.gamma_el
    a_plus = a[:, 0] + 1j * a[:, 1]
    a_minus = a[:, 0] - 1j * a[:, 1]
    m_op = sum(2 * g * (a[j, 0] * bx + a[j, 1] * by) * ivec[j] for j in range(3))
    scalar = g**2 * (bx**2 + by**2) + 0.25 * np.dot(a_plus, a_minus).real
    m_op = m_op + scalar * np.eye(2)
    cross = 0.5j * np.cross(a_plus, a_minus)
    n_op = sum(cross[j].real * ivec[j] for j in range(3))
    return m_op, n_op


def build_hsoc(params, hf, manifold="ground"):
    """Second-order energy operators on the nucleus for each ``m_s``.

    Returns ``{0: E0, +1: E+, -1: E-}`` (2x2 arrays, rad/us) with
    ``E0 = (-2 D M + 2 gamma_el B_z N) / (2 (D^2 - gamma_el^2 B_z^2))`` and
    ``E+- = (M -+ N) / (2 (D +- gamma_el B_z))``.
    """
    if params.nuclear_dim != 2:
        raise UnsupportedModeError("second-order correction needs nuclear_dim=2")
    d = params.d_ground if manifold == "ground" else params.d_excited
    gbz = params.gamma_el * params.b[2]
    if abs(gbz) >= d:
        raise SingularDenominatorError(
            f"|gamma_el B_z| = {abs(gbz):.4g} reaches D = {d:.4g}; perturbation series undefined")
    m_op, n_op = soc_operators(params, hf)
    e0 = (-2 * d * m_op + 2 * gbz * n_op) / (2 * (d**2 - gbz**2))
    ep = (m_op - n_op) / (2 * (d + gbz))
    em = (m_op + n_op) / (2 * (d - gbz))
    return {0: e0, 1: ep, -1: em}


def build_hsoc_cross(params, hf, manifold="ground"):
    """Second-order ``<+1| H_eff |-1>`` nuclear operator.

    ``X^2 D / (2 (D^2 - gamma_el^2 B_z^2))`` with
    ``X = gamma_el B_- + A_- . I``; both paths run through ``m_s = 0``.
    """
    if params.nuclear_dim != 2:
        raise UnsupportedModeError("second-order correction needs nuclear_dim=2")
    a = _check_tensor(hf)
    d = params.d_ground if manifold == "ground" else params.d_excited
    gbz = params.gamma_el * params.b[2]
    if abs(gbz) >= d:
        raise SingularDenominatorError("|gamma_el B_z| reaches D")
    nuc = spin_half_operators()
    bx, by, _ = params.b
    a_minus = a[:, 0] - 1j * a[:, 1]
    x = params.gamma_el * (bx - 1j * by) * np.eye(2) + sum(
        a_minus[j] * nuc[c] for j, c in enumerate("xyz"))
    return (x @ x) * d / (2 * (d**2 - gbz**2))


def conditional_block(h, manifold, m_s, nuclear_dim):
    """Nuclear block of ``h`` with the electron fixed in ``(manifold, m_s)``."""
    i = level_index(manifold, m_s) * nuclear_dim
    return np.array(h[i:i + nuclear_dim, i:i + nuclear_dim])


def bloch_field(block):
    """Field vector ``b`` with ``block = c 1 + b . I`` for a 2x2 Hermitian block."""
    return np.array([2 * block[0, 1].real, -2 * block[0, 1].imag,
                     (block[0, 0] - block[1, 1]).real])


def conditional_eigenbasis(block):
    """Eigenbasis of a 2x2 nuclear block ordered as ``(up-like, down-like)``.

    Columns are the eigenvectors; the first is the one with the larger weight
    on ``|up>``. Ties (exactly equatorial axes) keep ascending-energy order.
    """
    _, vecs = eigh(block)
    if abs(vecs[0, 1]) > abs(vecs[0, 0]) + 1e-12:
        vecs = vecs[:, ::-1]
    return vecs


@dataclass(frozen=True)
class QuantizationAxes:
    n0: np.ndarray
    n1: np.ndarray
    field0: np.ndarray
    field1: np.ndarray
    precession_rate: float


def quantization_axes(params, hf_g, mode=HamiltonianMode.SECULAR_SOC):
    """Nuclear quantization axes while the electron sits in m_s=0 and m_s=+1.

    The precession rate is ``|b0| (1 - |n0 . n1|)`` where ``b0`` is the
    conditional nuclear field in m_s=0 (``gamma_n B`` for a bare nucleus).
    """
    if params.nuclear_dim != 2:
        raise UnsupportedModeError("quantization axes are defined for spin-1/2 nuclei")
    h = build_hamiltonian(params, hf_g, HyperfineTensor.zero("excited"), mode,
                          soc_manifolds=("ground",))
    fields = []
    for m_s in (0, 1):
        b = bloch_field(conditional_block(h, "ground", m_s, 2))
        if np.linalg.norm(b) < 1e-14:
            raise UndefinedAxisError(f"zero conditional field for m_s={m_s}")
        fields.append(b)
    n0 = fields[0] / np.linalg.norm(fields[0])
    n1 = fields[1] / np.linalg.norm(fields[1])
    rate = float(np.linalg.norm(fields[0]) * (1 - abs(np.dot(n0, n1))))
    return QuantizationAxes(n0, n1, fields[0], fields[1], rate)
