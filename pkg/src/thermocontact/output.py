"""CSV time series and legacy ASCII VTK snapshots.

``trajectory.csv`` (schema version 1), one row per stored state:
    step, time, fp_iters, theta_min, theta_max, theta_mean, w_mean,
    theta_s_min, theta_s_max, theta_s_mean, chi_min, chi_max, chi_mean,
    u_max, un_max, eta_max, xi_min, xi_max
``reports.csv`` (schema version 1): the fields of
:class:`thermocontact.diagnostics.EnergyReport`, in declaration order.

Floats are written with ``repr`` so files are byte-identical across
repeated runs.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .constitutive import normal_displacement
from .diagnostics import REPORT_COLUMNS, SCHEMA_VERSION

TRAJECTORY_COLUMNS = [
    "step", "time", "fp_iters",
    "theta_min", "theta_max", "theta_mean", "w_mean",
    "theta_s_min", "theta_s_max", "theta_s_mean",
    "chi_min", "chi_max", "chi_mean",
    "u_max", "un_max", "eta_max", "xi_min", "xi_max",
]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def trajectory_row(sim, state) -> list:
    mb, mc_ = sim.mats.M_lump_bulk, sim.mats.M_lump_c

    def mean(m, v):
        return float(np.dot(m, v) / m.sum())

    un = normal_displacement(sim.contact_u(state.u), sim.normals)
    return [
        state.step, state.time, state.fp_iters,
        state.theta.min(), state.theta.max(), mean(mb, state.theta), mean(mb, state.w),
        state.theta_s.min(), state.theta_s.max(), mean(mc_, state.theta_s),
        state.chi.min(), state.chi.max(), mean(mc_, state.chi),
        float(np.sqrt((state.u**2).sum(axis=1)).max()), float(un.max()),
        state.eta_n.max(), state.xi.min(), state.xi.max(),
    ]


class CsvSeries:
    """Append-only CSV writer with a fixed header."""

    def __init__(self, path, columns):
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(columns)

    def write(self, values) -> None:
        self.writer.writerow([_fmt(v) for v in values])

    def close(self) -> None:
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _num(v) -> str:
    return repr(float(v))


def write_vtk(sim, state, path) -> None:
    """Bulk fields on the triangle mesh (legacy ASCII unstructured grid)."""
    mesh = sim.mesh
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"thermocontact step {state.step} t={_num(state.time)}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{_num(x)} {_num(y)} 0.0\n")
        fh.write(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}\n")
        for a, b, c in mesh.cells:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {mesh.n_cells}\n")
        fh.write("5\n" * mesh.n_cells)
        fh.write(f"POINT_DATA {mesh.n_vertices}\n")
        for name, vals in (("theta", state.theta), ("w", state.w)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("".join(f"{_num(v)}\n" for v in vals))
        fh.write("VECTORS u double\n")
        fh.write("".join(f"{_num(a)} {_num(b)} 0.0\n" for a, b in state.u))


def write_contact_vtk(sim, state, path) -> None:
    """Contact-line fields as a polyline (legacy ASCII polydata)."""
    mesh = sim.mesh
    pts = mesh.vertices[mesh.contact_nodes]
    segs = mesh.contact_cells
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"thermocontact contact step {state.step}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {len(pts)} double\n")
        for x, y in pts:
            fh.write(f"{_num(x)} {_num(y)} 0.0\n")
        fh.write(f"LINES {len(segs)} {3 * len(segs)}\n")
        for a, b in segs:
            fh.write(f"2 {a} {b}\n")
        fh.write(f"POINT_DATA {len(pts)}\n")
        for name, vals in (("theta_s", state.theta_s), ("z", state.z), ("chi", state.chi),
                           ("xi", state.xi), ("eta_n", state.eta_n)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("".join(f"{_num(v)}\n" for v in vals))


def write_manifest(out_dir, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, "trajectory_columns": TRAJECTORY_COLUMNS,
               "report_columns": REPORT_COLUMNS, **payload}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
