"""Run configuration and result persistence.

One flat configuration object covers both models and every command; a
JSON config file supplies values, command-line flags override single
fields, and built-in defaults fill the rest.  All tabular results go to
CSV and structured results to JSON, each carrying a provenance header
(schema version, code version, full configuration) sufficient to re-run
the computation.  Files are written atomically.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import __version__, phases
from .phases import CDW, N, MuScan, PhaseDiagram, _atomic_write_text

SCAN_SCHEMA = "scan/1"
DIAGRAM_SCHEMA = "diagram/1"
COLUMN_SCHEMA = "diagram-column/1"
POINT_SCHEMA = "point/1"
FIXQ_SCHEMA = "fixq/1"
SELFCHECK_SCHEMA = "selfcheck/1"

SCAN_COLUMNS = ("mu", "omega_N", "omega_CDW", "nu_N", "nu_CDW", "gap_CDW",
                "conv_N", "conv_CDW", "status_N", "status_CDW")
LUTT_EXTRA_COLUMNS = ("tq_N", "tq_CDW", "q_star", "nu_a_N", "nu_a_CDW")

MODEL_KINDS = {"ttpv": "ttpv", "luttinger": "lutt"}


@dataclass
class RunConfig:
    """Everything a run needs; unused fields are ignored per command."""

    model: str = "ttpv"            # 'ttpv' | 'luttinger'
    # physical parameters
    t: float = 1.0
    t_prime: float = 0.0
    V: float = 1.0
    beta: float = 1e5
    L: int = 100
    kappa: float = 0.8
    Q: float | None = None         # None: pi/2 seed / fixed midpoint
    band: str = "taylor"
    antinodal_count: int = 6400
    q_policy: str = "selfconsistent"
    q_from: str = CDW
    polish: bool = True
    # point / fixq
    mu: float | None = None
    # mu scans
    mu_min: float | None = None    # None: automatic window
    mu_max: float | None = None
    n_mu: int = 201
    cold_every: int = 10
    # sweeps
    axis: str = "V"
    axis_min: float = 0.0
    axis_max: float = 1.0
    axis_n: int = 11
    nu_n: int = 81
    # plumbing
    out_dir: str = "out"
    resume: bool = False
    workers: int = 1

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ValueError(
                f"model must be one of {sorted(MODEL_KINDS)}, "
                f"got {self.model!r}")
        if self.axis not in phases.SWEEP_AXES:
            raise ValueError(f"axis must be one of {phases.SWEEP_AXES}, "
                             f"got {self.axis!r}")
        if self.n_mu < 16:
            raise ValueError("n_mu must be >= 16")
        if self.axis_n < 1:
            raise ValueError("axis_n must be >= 1")
        if self.nu_n < 2:
            raise ValueError("nu_n must be >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if (self.mu_min is None) != (self.mu_max is None):
            raise ValueError("mu_min and mu_max must be given together")
        if self.mu_min is not None and not self.mu_max > self.mu_min:
            raise ValueError("mu_max must exceed mu_min")
        self.make_model()  # each model validates its own physics

    def kind(self) -> str:
        return MODEL_KINDS[self.model]

    def model_kwargs(self) -> dict:
        if self.kind() == "ttpv":
            return {"t": self.t, "t_prime": self.t_prime, "V": self.V,
                    "beta": self.beta, "L": self.L, "polish": self.polish}
        return {"t": self.t, "t_prime": self.t_prime, "V": self.V,
                "kappa": self.kappa, "beta": self.beta, "Q": self.Q,
                "band": self.band, "antinodal_count": self.antinodal_count,
                "q_policy": self.q_policy, "q_from": self.q_from,
                "polish": self.polish}

    def make_model(self):
        return phases.make_model(self.kind(), **self.model_kwargs())

    def make_factory(self):
        base = self.model_kwargs()
        base.pop(self.axis if self.axis != "inv_beta" else "beta", None)
        return phases.make_factory(self.kind(), self.axis, base)

    def mu_window(self, model=None) -> tuple[float, float]:
        if self.mu_min is not None:
            return float(self.mu_min), float(self.mu_max)
        if model is None:
            model = self.make_model()
        return model.auto_mu_window()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(
                f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**data)


def load_config(path: str | Path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


def merge_overrides(config: RunConfig, overrides: dict) -> RunConfig:
    """Apply explicitly-set flag values on top of a config."""
    data = config.to_dict()
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in data:
            raise ValueError(f"unknown config field {key!r}")
        data[key] = value
    return RunConfig.from_dict(data)


def provenance(config: RunConfig, **extra) -> dict:
    """Everything needed to re-run this computation exactly."""
    info = {"code_version": __version__, "config": config.to_dict()}
    info.update(extra)
    return info


def dump_json(payload: dict) -> str:
    """Deterministic JSON rendering (stable across resumed runs)."""
    return json.dumps(payload, indent=1, sort_keys=True,
                      allow_nan=True) + "\n"


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(path, dump_json(payload))
    return path


# ---------------------------------------------------------------------------
# mu-scan tables


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def scan_rows(scan: MuScan) -> tuple[tuple[str, ...], list[list]]:
    """Column names and rows for a scan table.

    The antinodal model appends its ordering-vector and antinodal-filling
    diagnostics after the common columns.
    """
    is_lutt = getattr(scan.model, "label", "") == "lutt"
    names = SCAN_COLUMNS + (LUTT_EXTRA_COLUMNS if is_lutt else ())
    rows = []
    for i, mu in enumerate(scan.mu):
        rn, rc = scan.points[N][i], scan.points[CDW][i]
        row = [float(mu), rn.omega, rc.omega, rn.nu, rc.nu, rc.gap,
               int(rn.converged), int(rc.converged), rn.status, rc.status]
        if is_lutt:
            row += [rn.tq, rc.tq, rc.q_star, rn.nu_a, rc.nu_a]
        rows.append(row)
    return names, rows


def write_csv(path: str | Path, names: tuple[str, ...], rows: list[list],
              header: dict) -> Path:
    """CSV with '#'-prefixed provenance lines before the column row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = _io.StringIO()
    for key, value in header.items():
        rendered = json.dumps(value, sort_keys=True) \
            if isinstance(value, (dict, list)) else value
        buf.write(f"# {key}={rendered}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write_text(path, buf.getvalue())
    return path


def read_csv(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of write_csv; cell values come back as strings."""
    header: dict = {}
    body: list[str] = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# ") and not body:
            key, _, value = line[2:].partition("=")
            header[key] = value
        else:
            body.append(line)
    records = list(csv.reader(body))
    return header, records[0], records[1:]


def write_scan(out_dir: str | Path, config: RunConfig, scan: MuScan,
               boundaries=None) -> Path:
    names, rows = scan_rows(scan)
    header = {"schema": SCAN_SCHEMA,
              "provenance": provenance(config, n_mu=len(rows))}
    if boundaries is not None:
        header["boundaries"] = phases.boundary_set_to_dict(boundaries)
    return write_csv(Path(out_dir) / "scan.csv", names, rows, header)


# ---------------------------------------------------------------------------
# phase diagrams


def diagram_to_dict(diagram: PhaseDiagram, config: RunConfig) -> dict:
    return {
        "schema": DIAGRAM_SCHEMA,
        "provenance": provenance(config),
        "axis": diagram.axis,
        "axis_values": [float(v) for v in diagram.axis_values],
        "nu_grid": [float(v) for v in diagram.nu_grid],
        "labels": [list(col) for col in diagram.labels],
        "lam": [[float(x) for x in col] for col in diagram.lam],
        "columns": [
            {"value": c.value, "status": c.status,
             "boundaries": (None if c.boundaries is None
                            else phases.boundary_set_to_dict(c.boundaries))}
            for c in diagram.columns],
        "boundary_paths": {k: [[float(a), float(b)] for a, b in v]
                           for k, v in diagram.boundary_paths.items()},
        "metadata": diagram.metadata,
    }


def write_diagram(out_dir: str | Path, config: RunConfig,
                  diagram: PhaseDiagram) -> Path:
    out = Path(out_dir)
    for j, col in enumerate(diagram.columns):
        names = ("nu", "label", "lambda")
        rows = [[float(nu), lab, lam]
                for nu, lab, lam in zip(diagram.nu_grid, col.labels, col.lam)]
        header = {"schema": COLUMN_SCHEMA,
                  "provenance": provenance(config),
                  "axis": diagram.axis, "value": col.value,
                  "status": col.status}
        if col.boundaries is not None:
            header["boundaries"] = phases.boundary_set_to_dict(col.boundaries)
        write_csv(out / f"column_{j:04d}.csv", names, rows, header)
    return write_json(out / "diagram.json", diagram_to_dict(diagram, config))
