"""Experiment configuration: flat ``key = value`` files and CLI overrides.

Example::

    # ESLAC field sweep
    protocol = eslac
    model = 4
    family = 15N
    k = 4
    sweep = b_z
    grid = 400:620:23

Units: fields in G, rates and hyperfine values in MHz, times in us, ``theta_h``
and ``phi_h`` in radians, ``theta_b_deg`` in degrees.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields

import numpy as np

from . import hyperfine as hfm
from .dissipation import MODELS, RelaxationParams
from .model import GAMMA_N
from .sequences import PROTOCOLS, SWEEP_AXES, RunSpec

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""

    def __init__(self, message, line=None, source=None):
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


@dataclass
class ExperimentConfig:
    protocol: str = "eslac"
    model: str = "4"
    family: str | None = "15N"
    species: str | None = None
    a_c: float | None = None
    a_d: float | None = None
    theta_h: float | None = None
    phi_h: float = 0.0
    tensor_ground: str | None = None
    tensor_excited: str | None = None
    b: str | None = None
    bz: float | None = None
    theta_b_deg: float = 0.0
    k: float = 4.0
    t_laser: float | None = None
    t_wait: float | None = None
    t_mw: float | None = None
    t_laser2: float | None = None
    t_wait2: float | None = None
    n: int = 0
    detuning: float = 0.0
    segments: str | None = None
    sweep: str | None = None
    grid: str | None = None
    repeats: int = 1
    output: str | None = None
    sample_dt: float = 0.01
    max_samples: int = 2000
    trajectory: bool = False
    relax: bool = True
    workers: int | None = None

    def validate(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown rate model {self.model!r}; choose from {sorted(MODELS)}")
        if (self.a_c is None) != (self.a_d is None):
            raise ConfigError("a_c and a_d must be given together")
        if self.tensor_excited and not self.tensor_ground:
            raise ConfigError("tensor_excited needs tensor_ground")
        if self.family is None and self.a_c is None and not self.tensor_ground:
            raise ConfigError("no hyperfine input: give family, a_c/a_d or tensor_ground")
        if self.species is not None and self.species not in GAMMA_N:
            raise ConfigError(f"unknown species {self.species!r}; choose from {sorted(GAMMA_N)}")
        if self.sweep is not None:
            if self.sweep not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {self.sweep!r}; choose from {SWEEP_AXES}")
            if not self.grid_values():
                raise ConfigError("sweep grid is empty")
        elif self.grid:
            raise ConfigError("grid given without a sweep axis")
        if self.sample_dt <= 0 or self.max_samples < 1 or self.repeats < 1:
            raise ConfigError("sample_dt, max_samples and repeats must be positive")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be at least 1")
        self.family_record()
        self.protocol_kw()
        return self

    # -- derived inputs ----------------------------------------------------

    def grid_values(self):
        """Sweep grid: ``a,b,c`` or inclusive ``start:stop:num``."""
        text = (self.grid or "").strip()
        if not text:
            return []
        if self.sweep == "family":
            return [x.strip() for x in text.split(",") if x.strip()]
        try:
            if ":" in text:
                start, stop, num = text.split(":")
                return [float(x) for x in np.linspace(float(start), float(stop), int(num))]
            return [float(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}: {exc}") from None

    def family_record(self):
        """Hyperfine input as a family name or an explicit record."""
        if self.tensor_ground:
            g = _tensor(self.tensor_ground, "ground")
            e = _tensor(self.tensor_excited, "excited") if self.tensor_excited else g.with_manifold("excited")
            return hfm.FamilyRecord("explicit", g, e, self.species or "13C", source="config")
        if self.a_c is not None:
            theta = 0.0 if self.theta_h is None else self.theta_h
            args = (TWO_PI * self.a_c, TWO_PI * self.a_d, theta, self.phi_h)
            return hfm.FamilyRecord(
                "contact-dipole",
                hfm.from_contact_dipole(*args, manifold="ground"),
                hfm.from_contact_dipole(*args, manifold="excited"),
                self.species or "13C", source="config")
        try:
            rec = hfm.get_family(self.family)
        except hfm.UnknownFamilyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        return rec.name

    def protocol_kw(self):
        kw = {}
        b = _vector(self.b) if self.b else None
        if self.protocol == "eslac":
            if b is not None:
                raise ConfigError("eslac takes bz (and theta_b_deg), not a field vector")
            if self.bz is not None:
                kw["b_field"] = self.bz
            if self.theta_b_deg:
                kw["theta_b"] = math.radians(self.theta_b_deg)
            for key in ("t_laser", "t_wait"):
                if getattr(self, key) is not None:
                    kw[key] = getattr(self, key)
            return kw
        if self.protocol == "custom":
            if self.segments:
                kw["segments"] = self.segments
        else:
            for key in ("t_laser", "t_wait", "t_mw", "t_laser2", "t_wait2"):
                if getattr(self, key) is not None:
                    kw[key] = getattr(self, key)
            if self.n:
                kw["n"] = self.n
            if self.detuning:
                kw["detuning"] = TWO_PI * self.detuning
        if b is not None or self.bz is not None:
            base = b if b is not None else (0.0, 0.0, 0.0)
            if b is None and self.protocol == "ms0":
                base = (10.0, 0.0, 0.5)
            if self.bz is not None:
                base = (base[0], base[1], self.bz)
            kw["b"] = tuple(base)
        return kw

    def run_spec(self):
        fam = self.family_record()
        theta = self.theta_h if (isinstance(fam, str) and self.a_c is None) else None
        return RunSpec(
            protocol=self.protocol,
            model=self.model,
            family=fam,
            k=self.k,
            theta_h=theta,
            protocol_kw=tuple(sorted(self.protocol_kw().items())),
            relax=RelaxationParams() if self.relax else RelaxationParams.none(),
            sample_dt=self.sample_dt,
            max_samples=self.max_samples,
            repeats=self.repeats,
            trajectory=self.trajectory,
        )

    # -- serialization ------------------------------------------------------

    def to_text(self):
        """Echo as ``key = value`` lines; omits unset keys.

        ``output`` and ``workers`` do not change results and are left out,
        so rerunning the echo reproduces the table byte for byte.
        """
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None or f.name in ("output", "workers"):
                continue
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def updated(self, items, source=None):
        """Copy with ``(key, value, line)`` string items applied."""
        cfg = dataclasses.replace(self)
        types = {f.name: f.type for f in fields(self)}
        for key, value, line in items:
            if key not in types:
                raise ConfigError(f"unknown key {key!r}", line, source)
            try:
                setattr(cfg, key, _coerce(value, types[key]))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", line, source) from None
        return cfg


def _coerce(text, typ):
    text = text.strip()
    optional = "None" in typ
    if optional and text.lower() in ("", "none", "null"):
        return None
    base = typ.split("|")[0].strip()
    if base == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if base == "int":
        return int(text)
    if base == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"expected a finite number, got {text!r}")
        return v
    return text


def _vector(text):
    try:
        v = tuple(float(x) for x in text.replace(";", ",").split(","))
    except ValueError:
        raise ConfigError(f"bad field vector {text!r}") from None
    if len(v) != 3:
        raise ConfigError(f"field vector needs 3 components, got {text!r}")
    return v


def _tensor(text, manifold):
    try:
        v = [float(x) for x in text.replace(";", ",").split(",")]
    except ValueError:
        raise ConfigError(f"bad tensor {text!r}") from None
    if len(v) != 6:
        raise ConfigError("tensor needs Axx,Ayy,Azz,Axy,Axz,Ayz (MHz)")
    return hfm.HyperfineTensor.from_components(*v, manifold=manifold, mhz=True)


def parse_lines(text, source=None):
    """``key = value`` items with their line numbers; ``#`` starts a comment."""
    items = []
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", num, source)
        items.append((key.strip(), value.strip(), num))
    return items


def load_config(path, overrides=()):
    """Read a config file; ``overrides`` are ``key=value`` strings applied last."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = ExperimentConfig().updated(parse_lines(text, path), path)
    return apply_overrides(cfg, overrides).validate()


def apply_overrides(cfg, overrides):
    items = []
    for text in overrides:
        key, sep, value = text.partition("=")
        if not sep:
            raise ConfigError(f"override must be key=value, got {text!r}")
        items.append((key.strip(), value.strip(), None))
    return cfg.updated(items, "override")
