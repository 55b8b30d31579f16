"""Turn runs and sweeps into result tables; figure presets."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from . import __version__
from . import hyperfine as hfm
from .sequences import RunSpec, run_spec, sweep
from .tables import STATE_COLUMNS, UNITS_NOTE, Table, state_values


def metadata(config_text="", extra=()):
    lines = [f"nvpol {__version__}", f"units: {UNITS_NOTE}"]
    if config_text:
        lines.append("config:")
        lines.extend("  " + ln for ln in config_text.strip().splitlines())
    lines.extend(extra)
    return lines


def run_table(spec, meta=()):
    """Trajectory of one run: one row per sample."""
    res = run_spec(spec)
    extra = [f"readout {k} = {v:.12g}" for k, v in res.readouts.items()]
    table = Table(("time",) + STATE_COLUMNS, metadata=list(meta) + extra)
    for t, r in zip(res.times, res.samples):
        table.add(float(t), *state_values(r))
    return table, res


def _readout_names(points):
    names = []
    for p in points:
        for k in p.readouts or ():
            if k not in names:
                names.append(k)
    return tuple(names)


def points_rows(points, trajectory, series=None):
    """Rows for sweep points; summary rows carry the named readouts too."""
    names = _readout_names(points)
    lead = ("series",) if series is not None else ()
    if trajectory:
        columns = lead + ("value", "time") + STATE_COLUMNS + ("status",)
    else:
        columns = lead + ("value",) + STATE_COLUMNS + names + ("status",)
    rows = []
    nan_state = (math.nan,) * len(STATE_COLUMNS)
    for p in points:
        head = (series,) if series is not None else ()
        if p.error is not None:
            if trajectory:
                rows.append(head + (p.value, math.nan) + nan_state + (p.error,))
            else:
                rows.append(head + (p.value,) + nan_state + (math.nan,) * len(names) + (p.error,))
            continue
        if trajectory:
            for t, r in zip(p.times, p.samples):
                rows.append(head + (p.value, float(t)) + state_values(r) + ("ok",))
        else:
            named = tuple(p.readouts.get(n, math.nan) for n in names)
            rows.append(head + (p.value,) + state_values(p.final) + named + ("ok",))
    return columns, rows


def sweep_table(axis, grid, spec, meta=(), workers=None):
    points = sweep(axis, grid, spec, workers=workers)
    columns, rows = points_rows(points, spec.trajectory)
    return Table(columns, rows, list(meta)), points


def series_table(series, axis, grid, meta=(), workers=None, trajectory=False):
    """Several labelled sweeps stacked into one table with a ``series`` column."""
    all_points = []
    for label, spec in series:
        pts = sweep(axis, grid, replace(spec, trajectory=trajectory), workers=workers)
        all_points.append((label, pts))
    # one column set for all series
    merged = [p for _, pts in all_points for p in pts]
    names = _readout_names(merged)
    table = None
    for label, pts in all_points:
        for p in pts:
            if p.readouts is not None:
                p.readouts = {n: p.readouts.get(n, math.nan) for n in names}
        columns, rows = points_rows(pts, trajectory, series=label)
        if table is None:
            table = Table(columns, [], list(meta))
        table.rows.extend(rows)
    return table


def trajectory_table(series, meta=()):
    table = Table(("series", "time") + STATE_COLUMNS, metadata=list(meta))
    for label, spec in series:
        res = run_spec(spec)
        for t, r in zip(res.times, res.samples):
            table.add(label, float(t), *state_values(r))
    return table


# ---------------------------------------------------------------------------
# figure presets

MODEL_LABELS = ("1", "2", "3", "4")
K_GRID = tuple(float(x) for x in np.linspace(4, 70, 12))


def zero_hyperfine_family(species="15N"):
    z = hfm.HyperfineTensor.zero
    return hfm.FamilyRecord("no-hyperfine", z("ground"), z("excited"), species, source="zero")


def _figure2(workers):
    fam = zero_hyperfine_family()
    grid = [float(x) for x in np.arange(4.0, 71.0, 2.0)]
    series = [(m, RunSpec("custom", m, fam, protocol_kw=(("segments", "laser:2,wait:2"),)))
              for m in MODEL_LABELS]
    meta = metadata(extra=["figure 2: 2 us laser + 2 us wait, B = 0, no hyperfine",
                           "singlet_laser1 = singlet after the laser, electron_wait2 = m_s=0 after the wait"])
    return {"fig2_populations_vs_k": series_table(series, "k", grid, meta, workers)}


def _method_figure(number, protocol, family, workers):
    series = [(m, RunSpec(protocol, m, family, k=4.0)) for m in MODEL_LABELS]
    meta = metadata(extra=[f"figure {number}: protocol {protocol}, family {family}"])
    return {
        f"fig{number}_dynamics_k4": trajectory_table(series, meta),
        f"fig{number}_vs_k": series_table(series, "k", K_GRID, meta, workers),
    }


def _figure6(workers):
    grid = [float(x) for x in np.linspace(0.0, math.pi, 37)]
    fams = [r.name for r in hfm.family_registry()]
    out = {}
    for panel, protocol, family in (("a", "eslac", "C"), ("c", "ms0", "C"), ("e", "ms1", "H")):
        spec = RunSpec(protocol, "4", family, k=4.0)
        meta = metadata(extra=[f"figure 6({panel}): {protocol}, contact/dipole of family "
                               f"{family}, phi_H = 0, model 4, k = 4 MHz; value = theta_H (rad)"])
        out[f"fig6{panel}_{protocol}_vs_theta"] = series_table([("4", spec)], "theta_h", grid, meta, workers)
    for panel, protocol in (("b", "eslac"), ("d", "ms0"), ("f", "ms1")):
        spec = RunSpec(protocol, "4", "15N", k=4.0)
        meta = metadata(extra=[f"figure 6({panel}): {protocol} per family, model 4, k = 4 MHz"])
        out[f"fig6{panel}_{protocol}_families"] = series_table([("4", spec)], "family", fams, meta, workers)
    return out


def _figure_s2(workers):
    grid = [float(x) for x in np.linspace(300.0, 700.0, 41)]
    series = [(m, RunSpec("eslac", m, "15N")) for m in MODEL_LABELS]
    meta = metadata(extra=["figure s2(a): eslac 15N, 1 ms laser, value = B (G)"])
    out = {"figs2a_eslac_vs_bz": series_table(series, "b_z", grid, meta, workers)}
    tilted = [(f"{deg:g}deg", RunSpec("eslac", "4", "15N",
                                      protocol_kw=(("theta_b", math.radians(deg)),)))
              for deg in (0.0, 0.1, 0.2, 0.5)]
    meta = metadata(extra=["figure s2(b): eslac 15N, model 4, tilted field, value = |B| (G)"])
    out["figs2b_eslac_misaligned"] = series_table(tilted, "b_z", grid, meta, workers)
    return out


FIGURES = {
    "2": _figure2,
    "3": lambda w: _method_figure(3, "eslac", "15N", w),
    "4": lambda w: _method_figure(4, "ms0", "C", w),
    "5": lambda w: _method_figure(5, "ms1", "H", w),
    "6": _figure6,
    "s2": _figure_s2,
}


def figure_tables(name, workers=None):
    """``{file stem: Table}`` for one figure preset."""
    try:
        builder = FIGURES[str(name).lower()]
    except KeyError:
        raise ValueError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}") from None
    return builder(workers)
