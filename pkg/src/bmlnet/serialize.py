"""Text formats: shapes, configurations, reports, per-step records.

Reports and configurations are JSON documents written with sorted keys and
a fixed indent so equal content gives byte-identical files.  Exact
velocities travel as ``"p/q"`` strings.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

import numpy as np

from .lattice import Configuration, LatticeShape

STEP_SCHEMA = "bml-steps/1"
SWEEP_SCHEMA = "bml-sweep/1"
REPORT_SCHEMA = "bml-report/1"

STEP_FIELDS = ["schema", "t", "moved", "velocity", "type_changes"]
SWEEP_FIELDS = ["schema", "shape", "m", "density", "q", "trajectories", "mean_velocity", "free_fraction", "mean_onset"]


def config_to_dict(config: Configuration) -> dict:
    return {
        "shape": str(config.shape),
        "particles": [
            {"id": p.id, "coords": list(p.cell), "type": p.ptype} for p in config.particles
        ],
    }


def config_from_dict(data: dict) -> Configuration:
    shape = LatticeShape.parse(data["shape"])
    recs = sorted(data["particles"], key=lambda r: r["id"])
    if [r["id"] for r in recs] != list(range(1, len(recs) + 1)):
        raise ValueError("particle ids must be exactly 1..m")
    return Configuration.from_particles(shape, [(tuple(r["coords"]), int(r["type"])) for r in recs])


def _plain(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, LatticeShape):
        return str(obj)
    if isinstance(obj, Configuration):
        return config_to_dict(obj)
    if is_dataclass(obj):
        return asdict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc: dict) -> str:
    return json.dumps(doc, default=_plain, sort_keys=True, indent=2) + "\n"


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(dumps(doc))


def parse_fraction(text: str) -> Fraction:
    return Fraction(text)


def _fmt(v: float) -> str:
    return repr(float(v))


def step_rows(stats) -> Iterable[dict]:
    for s in stats:
        yield {
            "schema": STEP_SCHEMA,
            "t": s.t,
            "moved": s.moved_count,
            "velocity": _fmt(s.velocity_instant),
            "type_changes": s.type_changes,
        }


def steps_csv(stats) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=STEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(step_rows(stats))
    return buf.getvalue()


def steps_jsonl(stats) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in step_rows(stats))


def sweep_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({"schema": SWEEP_SCHEMA, **r})
    return buf.getvalue()
