"""Persistence of run records: CSV observables plus a JSON sidecar.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly; reading back a written record reproduces every numeric
field bit for bit.  Boundary flags live in the sidecar (the CSV schema
is exactly ``t,sup,mass,interface``).
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ParseError
from .solver import RunRecord, Sample

__all__ = [
    "fmt",
    "write_record",
    "read_record",
    "write_field_csv",
    "read_field_csv",
    "RUN_CSV",
    "RUN_JSON",
    "FIELD_CSV",
]

RUN_CSV = "run.csv"
RUN_JSON = "run.json"
FIELD_CSV = "field_final.csv"

_HEADER = "t,sup,mass,interface"


def fmt(x: float) -> str:
    """17-significant-digit decimal; lossless for float64."""
    return format(float(x), ".17g")


def write_record(record: RunRecord, out_dir: str, config_echo: dict | None = None):
    """Write run.csv, run.json and field_final.csv under out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, RUN_CSV)
    with open(csv_path, "w") as fh:
        fh.write(_HEADER + "\n")
        for s in record.samples:
            fh.write(",".join(fmt(v) for v in (s.t, s.sup, s.mass, s.interface)))
            fh.write("\n")
    sidecar = {
        "config_digest": record.config_digest,
        "first_flagged_index": record.first_flagged_index,
        "n_samples": len(record.samples),
        "meta": {k: v for k, v in record.meta.items()},
    }
    if config_echo is not None:
        sidecar["config"] = config_echo
    with open(os.path.join(out_dir, RUN_JSON), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if record.final_u is not None and record.grid is not None:
        write_field_csv(record.grid.centers, record.final_u,
                        os.path.join(out_dir, FIELD_CSV))
    record.final_state_path = os.path.join(out_dir, FIELD_CSV)
    return csv_path


def read_record(out_dir: str) -> RunRecord:
    """Reconstruct a RunRecord from run.csv plus run.json."""
    csv_path = os.path.join(out_dir, RUN_CSV)
    with open(csv_path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _HEADER:
        raise ParseError(f"expected header '{_HEADER}'", lineno=1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", lineno=lineno)
        try:
            rows.append(tuple(float(p) for p in parts))
        except ValueError as exc:
            raise ParseError(str(exc), lineno=lineno) from None
    sidecar_path = os.path.join(out_dir, RUN_JSON)
    digest, flagged_at, meta = "", None, {}
    if os.path.exists(sidecar_path):
        with open(sidecar_path) as fh:
            sc = json.load(fh)
        digest = sc.get("config_digest", "")
        flagged_at = sc.get("first_flagged_index")
        meta = sc.get("meta", {})
    samples = [
        Sample(t=t, sup=s, mass=m, interface=i,
               flagged=flagged_at is not None and k >= flagged_at)
        for k, (t, s, m, i) in enumerate(rows)
    ]
    field_path = os.path.join(out_dir, FIELD_CSV)
    final_u = None
    if os.path.exists(field_path):
        _, final_u = read_field_csv(field_path)
    return RunRecord(config_digest=digest, samples=samples, final_u=final_u,
                     grid=None, final_state_path=field_path, meta=meta)


def write_field_csv(radii, values, path: str):
    with open(path, "w") as fh:
        fh.write("r,u\n")
        for r, u in zip(radii, values):
            fh.write(f"{fmt(r)},{fmt(u)}\n")


def read_field_csv(path: str):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "r,u":
        raise ParseError("expected header 'r,u'", lineno=1)
    r, u = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            a, b = line.split(",")
            r.append(float(a))
            u.append(float(b))
        except ValueError as exc:
            raise ParseError(str(exc), lineno=lineno) from None
    return np.array(r), np.array(u)
