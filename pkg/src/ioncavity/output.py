"""File emission: run manifest, CSV tables with unit headers, JSON mirrors."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .params import SystemParams


def _plain(obj):
    """JSON-safe copy: numpy scalars and arrays become Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def params_dict(params: SystemParams) -> dict:
    d = asdict(params)
    d["heating_rates"] = list(params.heating_rates) if isinstance(params.heating_rates, tuple) \
        else params.heating_rates
    return d


@dataclass
class RunManifest:
    config_path: str
    command: str
    parameters: dict  # resolved SystemParams (SI) and run settings
    output_dir: str
    code_version: str = __version__
    wall_time: float = 0.0  # s
    started: float = field(default_factory=time.time)

    @property
    def hash(self) -> str:
        """sha256 of what determines the numbers: command, resolved inputs, code version."""
        payload = json.dumps(_plain({"command": self.command, "parameters": self.parameters,
                                     "version": self.code_version}), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def finish(self):
        self.wall_time = time.time() - self.started

    def write(self, out_dir):
        path = Path(out_dir) / "manifest.json"
        data = {"config_path": self.config_path, "command": self.command, "parameters": self.parameters,
                "output_dir": self.output_dir, "code_version": self.code_version,
                "wall_time_s": self.wall_time, "hash": self.hash}
        path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
        return path


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, columns, rows, manifest: RunManifest, notes=()):
    """CSV with '#' header lines; ``columns`` is a list of (name, unit) pairs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# ioncavity {manifest.code_version}\n")
        fh.write(f"# command: {manifest.command}\n")
        fh.write(f"# manifest: {manifest.hash}\n")
        for line in notes:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{name} [{unit}]" for name, unit in columns])
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def write_json(path, payload: dict, manifest: RunManifest):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = {"manifest": manifest.hash, "command": manifest.command, **payload}
    path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True) + "\n")
    return path


def write_table(out_dir, stem, columns, rows, manifest, fmt="csv", notes=(), extra=None):
    """Write one table as CSV or as a JSON object of column arrays."""
    rows = list(rows)
    if fmt == "csv":
        return write_csv(Path(out_dir) / f"{stem}.csv", columns, rows, manifest, notes)
    cols = {f"{name} [{unit}]": [r[i] for r in rows] for i, (name, unit) in enumerate(columns)}
    payload = {"columns": cols, "notes": list(notes)}
    if extra:
        payload.update(extra)
    return write_json(Path(out_dir) / f"{stem}.json", payload, manifest)
