"""CSV and manifest writers.

Floats are written with ``repr`` (shortest round-trip decimal), so equal
results give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

__all__ = [
    "PROFILE_COLUMNS",
    "SWEEP_COLUMNS",
    "LBIC_COLUMNS",
    "fmt",
    "write_csv",
    "profile_table",
    "sweep_table",
    "lbic_table",
    "Manifest",
    "extract_config",
]

CONFIG_BEGIN = "# ---- config begin ----"
CONFIG_END = "# ---- config end ----"

SWEEP_COLUMNS = (
    "value", "n_n", "n_p", "n_a", "psi", "v_n", "v_p", "v_a",
    "I_contact1", "I_contact2", "hard_ok", "certificate_ok", "error",
)
LBIC_COLUMNS = ("x0", "y0", "I")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def PROFILE_COLUMNS(dim, ions):
    cols = ["x", "y"][:dim] + ["psi", "v_n", "v_p", "n_n", "n_p"]
    return cols + (["n_a"] if ions else [])


def profile_table(sys, state):
    nn, np_, na = sys.densities(state)
    cols = PROFILE_COLUMNS(sys.mesh.dim, sys.ions)
    rows = []
    for k in range(sys.N):
        row = list(sys.mesh.nodes[k])
        row += [state.psi[k], state.v_n[k], state.v_p[k], nn[k], np_[k]]
        if sys.ions:
            row.append(na[k])
        rows.append([float(v) for v in row])
    return cols, rows


def sweep_table(rows):
    out = []
    for r in rows:
        if r.error is not None:
            out.append([r.value] + [math.nan] * 9 + [False, False, r.error])
            continue
        n = r.norms
        out.append([
            r.value, n["n_n"], n["n_p"], n["n_a"], n["psi"], n["v_n"], n["v_p"], n["v_a"],
            r.currents.get("contact1", math.nan), r.currents.get("contact2", math.nan),
            r.verdict.hard_ok, r.verdict.certificate_ok, "",
        ])
    return SWEEP_COLUMNS, out


def lbic_table(signal):
    rows = []
    for pos, cur in zip(signal.positions, signal.currents):
        rows.append([pos[0], pos[1], cur.value if cur is not None else math.nan])
    return LBIC_COLUMNS, rows


class Manifest:
    """Line-oriented run record: config echo, solver history, verdicts."""

    def __init__(self, command):
        self.lines = [f"# ddbounds run manifest", f"command {command}"]

    def config(self, text):
        self.lines += [CONFIG_BEGIN, text.rstrip("\n"), CONFIG_END]

    def section(self, title):
        self.lines.append(f"[{title}]")

    def add(self, *parts):
        self.lines.append(" ".join(fmt(p) for p in parts))

    def solve_chain(self, chain):
        self.section("solver")
        self.add("voltage_ladder", *chain.voltage_ladder)
        self.add("generation_ladder", *chain.generation_ladder)
        for rep in chain.reports:
            self.add("rung", rep.label, "converged", rep.converged,
                     "iterations", rep.iterations)
            self.add("  residuals", *rep.residual_norms)
            self.add("  damping", *rep.damping)

    def write(self, path):
        Path(path).write_text("\n".join(self.lines) + "\n")


def extract_config(manifest_text):
    """The config echo embedded in a manifest."""
    lines = manifest_text.splitlines()
    try:
        a = lines.index(CONFIG_BEGIN)
        b = lines.index(CONFIG_END)
    except ValueError as exc:
        raise ValueError("manifest has no config echo") from exc
    return "\n".join(lines[a + 1:b]) + "\n"
