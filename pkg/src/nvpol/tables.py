"""Result tables: CSV with ``#`` metadata lines."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

from .model import LEVEL_LABELS

UNITS_NOTE = "rates in MHz, energies 2pi x MHz, times in us, fields in G"
OUTPUT_DIR_ENV = "NVPOL_OUTPUT_DIR"
POP_COLUMNS = tuple("pop_" + lab.replace(",", "") for lab in LEVEL_LABELS)
STATE_COLUMNS = ("p_electron", "p_nuclear_signed", "p_nuclear_abs", "singlet_pop") + POP_COLUMNS


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)
    metadata: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(values)


def state_values(readout):
    return (readout.p_electron, readout.p_nuclear_signed, readout.p_nuclear,
            readout.singlet, *readout.populations)


def fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.12g}"
    return "" if v is None else str(v)


def render(table):
    buf = io.StringIO()
    for line in table.metadata:
        for part in str(line).splitlines():
            buf.write(f"# {part}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_table(path):
    """``(metadata lines, columns, rows as strings)``."""
    meta, body = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            (meta if line.startswith("#") else body).append(line)
    rows = list(csv.reader(body))
    return [m[2:].rstrip("\n") for m in meta], rows[0], rows[1:]


def resolve_output(path, default_name):
    """Explicit path, else ``$NVPOL_OUTPUT_DIR/default_name``, else ``None`` (stdout)."""
    if path:
        return path
    d = os.environ.get(OUTPUT_DIR_ENV)
    return os.path.join(d, default_name) if d else None


def write_table(table, path):
    """Write ``table`` to ``path`` (``None`` or ``-`` means stdout)."""
    text = render(table)
    if path in (None, "-"):
        import sys
        sys.stdout.write(text)
        return
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
