"""Hyperfine tensors, their ladder-operator decomposition and family data.

All tensor components are stored in angular units (rad/us, i.e. 2*pi*MHz).
Tabulated values in MHz are converted on ingestion.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi
MANIFOLDS = ("ground", "excited")

__all__ = [
    "HyperfineTensor",
    "FamilyRecord",
    "LadderComponents",
    "ladder_components",
    "from_contact_dipole",
    "extract_contact_dipole",
    "family_registry",
    "get_family",
    "load_family_file",
    "UnknownFamilyError",
    "PhaseMismatchWarning",
]


class UnknownFamilyError(KeyError):
    pass


class PhaseMismatchWarning(UserWarning):
    """The A_ani and A'_perp channels imply different azimuthal phases."""


@dataclass(frozen=True, eq=False)
class HyperfineTensor:
    """Real symmetric 3x3 hyperfine matrix (rad/us) tied to one manifold."""

    matrix: np.ndarray
    manifold: str = "ground"

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.shape != (3, 3):
            raise ValueError(f"hyperfine tensor must be 3x3, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("hyperfine tensor must be exactly symmetric")
        if self.manifold not in MANIFOLDS:
            raise ValueError(f"manifold must be one of {MANIFOLDS}")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @classmethod
    def zero(cls, manifold="ground"):
        return cls(np.zeros((3, 3)), manifold)

    @classmethod
    def from_components(cls, axx, ayy, azz, axy=0.0, axz=0.0, ayz=0.0,
                        manifold="ground", mhz=False):
        """Build from the six independent components (``mhz=True`` converts)."""
        f = TWO_PI if mhz else 1.0
        a = f * np.array([[axx, axy, axz], [axy, ayy, ayz], [axz, ayz, azz]], float)
        return cls(a, manifold)

    @classmethod
    def from_ladder(cls, a_zz, a_ani, a_perp, a_perp_prime, phi=0.0,
                    manifold="ground", mhz=False):
        """Inverse of :func:`ladder_components` for a given azimuth ``phi``."""
        axx = 0.5 * (a_perp + a_perp_prime * math.cos(2 * phi))
        ayy = 0.5 * (a_perp - a_perp_prime * math.cos(2 * phi))
        axy = 0.5 * a_perp_prime * math.sin(2 * phi)
        axz = a_ani * math.cos(phi)
        ayz = a_ani * math.sin(phi)
        return cls.from_components(axx, ayy, a_zz, axy, axz, ayz, manifold, mhz)

    def rotated_y(self, theta):
        """Tensor rotated about the y axis by ``theta`` (R A R^T)."""
        c, s = math.cos(theta), math.sin(theta)
        r = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        a = r @ self.matrix @ r.T
        return HyperfineTensor(0.5 * (a + a.T), self.manifold)

    def with_manifold(self, manifold):
        return HyperfineTensor(self.matrix, manifold)

    def __repr__(self):
        m = self.matrix / TWO_PI
        return f"HyperfineTensor({self.manifold}, MHz={np.round(m, 4).tolist()})"


@dataclass(frozen=True)
class LadderComponents:
    a_zz: float
    a_perp: float
    a_perp_prime: float
    a_ani: float
    phi_h: float
    phi_ani: float | None = None
    phi_perp_prime: float | None = None


def _fold(phi, period):
    """Map ``phi`` into (-period/2, period/2]."""
    x = math.remainder(phi, period)
    return period / 2 if math.isclose(x, -period / 2) else x


def ladder_components(tensor, tol=1e-9):
    """Split a tensor into the coefficients of the ladder-operator form.

    ``A_perp = Axx + Ayy``; ``A'_perp e^{-2i phi} = Axx - Ayy - 2i Axy`` and
    ``A_ani e^{-i phi} = Axz - i Ayz``. The azimuth is folded into
    (-pi/2, pi/2], so ``A_ani`` and ``A'_perp`` keep the signs found in
    tabulated data. If both channels carry a phase and they disagree, a
    :class:`PhaseMismatchWarning` is emitted and both phases are returned.
    """
    a = tensor.matrix if isinstance(tensor, HyperfineTensor) else np.asarray(tensor)
    scale = max(1.0, float(np.max(np.abs(a))))
    ani = complex(a[0, 2], -a[1, 2])
    pp = complex(a[0, 0] - a[1, 1], -2.0 * a[0, 1])

    phi_ani = _fold(-np.angle(ani), math.pi) if abs(ani) > tol * scale else None
    phi_pp = _fold(-np.angle(pp) / 2.0, math.pi / 2) if abs(pp) > tol * scale else None

    phi = phi_ani if phi_ani is not None else (phi_pp if phi_pp is not None else 0.0)
    rot_ani = ani * np.exp(1j * phi)
    rot_pp = pp * np.exp(2j * phi)
    if abs(rot_pp.imag) > 1e-6 * scale + tol * scale:
        warnings.warn(
            f"inconsistent azimuth: A_ani channel gives {phi_ani}, "
            f"A'_perp channel gives {phi_pp}",
            PhaseMismatchWarning,
            stacklevel=2,
        )
    return LadderComponents(
        a_zz=float(a[2, 2]),
        a_perp=float(a[0, 0] + a[1, 1]),
        a_perp_prime=float(rot_pp.real),
        a_ani=float(rot_ani.real),
        phi_h=float(phi),
        phi_ani=phi_ani,
        phi_perp_prime=phi_pp,
    )


def from_contact_dipole(a_c, a_d, theta, phi=0.0, manifold="ground"):
    """Tensor for a contact term ``a_c`` plus an axial dipolar term ``a_d``.

    ``theta``/``phi`` are the polar and azimuthal angles of the nuclear
    position relative to the NV axis.
    """
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    axx = a_c - a_d * (1 - 3 * st**2 * cp**2)
    ayy = a_c - a_d * (1 - 3 * st**2 * sp**2)
    azz = a_c - a_d * (1 - 3 * ct**2)
    axy = 3 * a_d * st**2 * cp * sp
    axz = 3 * a_d * st * ct * cp
    ayz = 3 * a_d * st * ct * sp
    return HyperfineTensor.from_components(axx, ayy, azz, axy, axz, ayz, manifold)


def extract_contact_dipole(tensor):
    """``(A_c, A_d)`` of a tensor written with zero azimuth."""
    a = tensor.matrix if isinstance(tensor, HyperfineTensor) else np.asarray(tensor)
    a_c = float(np.trace(a)) / 3.0
    a_d = float(a[0, 0] + a[2, 2] - 2.0 * a_c)
    return a_c, a_d


def theta_from_ladder(a_d, a_perp_prime):
    """Polar angle in [0, pi/2] with ``3 A_d sin^2(theta) = A'_perp``."""
    s2 = min(1.0, max(0.0, a_perp_prime / (3.0 * a_d)))
    return math.asin(math.sqrt(s2))


# ---------------------------------------------------------------------------
# family data


@dataclass(frozen=True)
class FamilyRecord:
    name: str
    ground: HyperfineTensor
    excited: HyperfineTensor
    species: str = "13C"
    source: str = ""
    aliases: tuple = field(default=())


# Built-in values in MHz: (A_zz, A_ani, A_perp, A'_perp), azimuth 0.
_BUILTIN_LADDER = {
    "15N": ("15N", (3.4, 0.0, 7.8, 0.0), (-58.1, 0.0, -77.0, 0.0)),
    "C": ("13C", (-8.822, -0.789, -20.378, 0.621), (-3.78, 0.749, -14.12, 0.680)),
    "H": ("13C", (1.933, -0.250, 2.067, 0.670), (3.413, -0.349, 4.086, 0.866)),
}
_ALIASES = {"15N": ("N15", "¹⁵N")}

DATA_FILE_ENV = "NVPOL_HYPERFINE_FILE"


def _builtin_records():
    out = []
    for name, (species, gs, es) in _BUILTIN_LADDER.items():
        out.append(FamilyRecord(
            name=name,
            ground=HyperfineTensor.from_ladder(*gs, manifold="ground", mhz=True),
            excited=HyperfineTensor.from_ladder(*es, manifold="excited", mhz=True),
            species=species,
            source="built-in ladder table",
            aliases=_ALIASES.get(name, ()),
        ))
    return out


def load_family_file(path):
    """Parse a hyperfine data file.

    One record per line::

        family  manifold  Axx Ayy Azz Axy Axz Ayz  [theta_deg]  [species]

    Components are in MHz. ``manifold`` is ``ground``/``excited`` (or
    ``GS``/``ES``). When ``theta_deg`` is given the six components are taken
    in the principal-axis frame and rotated about y by that angle. A family
    with only a ground record reuses it for the excited manifold. ``#``
    starts a comment.
    """
    rows = {}
    species = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 8:
            raise ValueError(f"{path}:{lineno}: expected at least 8 fields")
        name, manifold = parts[0], parts[1].lower()
        manifold = {"gs": "ground", "es": "excited"}.get(manifold, manifold)
        try:
            comps = [float(x) for x in parts[2:8]]
            theta = float(parts[8]) if len(parts) > 8 and parts[8] != "-" else None
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        t = HyperfineTensor.from_components(*comps, manifold=manifold, mhz=True)
        if theta is not None:
            t = t.rotated_y(math.radians(theta))
        rows.setdefault(name, {})[manifold] = t
        if len(parts) > 9:
            species[name] = parts[9]
    out = []
    for name, by_manifold in rows.items():
        if "ground" not in by_manifold:
            raise ValueError(f"{path}: family {name} has no ground record")
        g = by_manifold["ground"]
        e = by_manifold.get("excited", g.with_manifold("excited"))
        out.append(FamilyRecord(name, g, e, species.get(name, "13C"), str(path)))
    return out


def _bundled_file():
    return resources.files("nvpol") / "data" / "hyperfine_families.dat"


def family_registry(extra_files=()):
    """All known families: built-ins, the bundled data file, extra files.

    Files named in the ``NVPOL_HYPERFINE_FILE`` environment variable
    (``os.pathsep`` separated) are read after ``extra_files``. Later entries
    override earlier ones with the same name.
    """
    records = {r.name: r for r in _builtin_records()}
    with resources.as_file(_bundled_file()) as p:
        loaded = load_family_file(p)
    files = list(extra_files)
    env = os.environ.get(DATA_FILE_ENV)
    if env:
        files.extend(p for p in env.split(os.pathsep) if p)
    for f in files:
        loaded.extend(load_family_file(f))
    for r in loaded:
        records[r.name] = r
    return list(records.values())


def get_family(name, registry=None):
    registry = family_registry() if registry is None else registry
    for r in registry:
        if name == r.name or name in r.aliases:
            return r
    raise UnknownFamilyError(f"unknown hyperfine family {name!r}")
